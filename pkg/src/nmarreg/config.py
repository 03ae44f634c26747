"""Plain-text configuration documents with dotted keys.

Format: one ``dotted.key = value`` per line, ``#`` comments, and comma lists
(e.g. ``experiment.n_grid = 500, 2000, 8000``).  Keys mirror the module
interfaces: ``kernel.*``, ``bandwidth.*``, ``aux_kernel.*``,
``aux_bandwidth.*``, ``cover.*``, ``ht.*``, ``split.alpha``, ``model.kind``,
``data.*``, ``plugin.gamma_hat``, ``estimator``, and ``experiment.*``.
"""

from __future__ import annotations

from typing import Optional

from .data import MODEL_PRESETS, SyntheticModel
from .harness import ESTIMATOR_NAMES, CoverSettings, ExperimentConfig
from .kernels import BandwidthPolicy, KernelSpec


class ConfigError(ValueError):
    """Configuration document is malformed or inconsistent."""


KNOWN_KEYS = {
    "model.kind",
    "data.n", "data.seed", "data.L", "data.z_coords",
    "split.alpha",
    "kernel.family", "kernel.param",
    "bandwidth.mode", "bandwidth.h0", "bandwidth.beta",
    "aux_kernel.family", "aux_kernel.param",
    "aux_bandwidth.mode", "aux_bandwidth.h0", "aux_bandwidth.beta",
    "cover.kind", "cover.M", "cover.B", "cover.epsilon", "cover.epsilon_mode",
    "cover.power", "cover.count",
    "ht.variant", "ht.pi0",
    "plugin.gamma_hat",
    "estimator",
    "experiment.estimators", "experiment.n_grid", "experiment.replications",
    "experiment.p", "experiment.n_eval", "experiment.seed",
    "classify.n_eval", "classify.seed",
}


def parse_config_text(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in KNOWN_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def load_config(path) -> dict[str, str]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return parse_config_text(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc


def _get_float(raw, key, default=None) -> Optional[float]:
    if key not in raw:
        return default
    try:
        return float(raw[key])
    except ValueError:
        raise ConfigError(f"{key} must be a number, got {raw[key]!r}") from None


def _get_int(raw, key, default=None) -> Optional[int]:
    if key not in raw:
        return default
    try:
        return int(raw[key])
    except ValueError:
        raise ConfigError(f"{key} must be an integer, got {raw[key]!r}") from None


def _get_list(raw, key, default=None):
    if key not in raw:
        return default
    return [part.strip() for part in raw[key].split(",") if part.strip()]


def model_from_config(raw) -> SyntheticModel:
    kind = raw.get("model.kind", "nmar_smooth")
    if kind not in MODEL_PRESETS:
        raise ConfigError(
            f"model.kind must be one of {sorted(MODEL_PRESETS)}, got {kind!r}"
        )
    return MODEL_PRESETS[kind]()


def _kernel_from(raw, prefix: str, default: Optional[KernelSpec]) -> Optional[KernelSpec]:
    family = raw.get(f"{prefix}.family")
    if family is None:
        return default
    param = _get_float(raw, f"{prefix}.param", 1.0)
    try:
        return KernelSpec(family, sigma=param)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _bandwidth_from(raw, prefix: str, default: Optional[BandwidthPolicy]) -> Optional[BandwidthPolicy]:
    mode = raw.get(f"{prefix}.mode")
    if mode is None:
        return default
    try:
        return BandwidthPolicy(
            mode=mode,
            h0=_get_float(raw, f"{prefix}.h0", 1.0),
            beta=_get_float(raw, f"{prefix}.beta", None),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def cover_from_config(raw) -> CoverSettings:
    kind = raw.get("cover.kind", "exp")
    if kind not in ("exp", "tabulated"):
        raise ConfigError(f"cover.kind must be 'exp' or 'tabulated', got {kind!r}")
    mode = raw.get("cover.epsilon_mode", "n_power")
    if mode not in ("fixed", "n_power"):
        raise ConfigError("cover.epsilon_mode must be 'fixed' or 'n_power'")
    settings = CoverSettings(
        kind=kind,
        M=_get_float(raw, "cover.M", 1.0),
        epsilon_mode=mode,
        epsilon=_get_float(raw, "cover.epsilon", None),
        power=_get_float(raw, "cover.power", 0.5),
        count=_get_int(raw, "cover.count", 25),
    )
    if mode == "fixed" and settings.epsilon is None:
        raise ConfigError("cover.epsilon is required when cover.epsilon_mode = fixed")
    return settings


def estimators_from_config(raw) -> tuple[str, ...]:
    names = _get_list(raw, "experiment.estimators") or _get_list(raw, "estimator")
    if not names:
        raise ConfigError("set 'estimator' or 'experiment.estimators'")
    unknown = set(names) - set(ESTIMATOR_NAMES)
    if unknown:
        raise ConfigError(f"unknown estimators {sorted(unknown)}; choose from {ESTIMATOR_NAMES}")
    return tuple(names)


def experiment_from_config(raw) -> ExperimentConfig:
    n_grid = _get_list(raw, "experiment.n_grid", ["500", "2000", "8000"])
    try:
        ns = tuple(int(v) for v in n_grid)
    except ValueError:
        raise ConfigError("experiment.n_grid must be a comma list of integers") from None
    try:
        return ExperimentConfig(
            model=model_from_config(raw),
            estimators=estimators_from_config(raw),
            n_grid=ns,
            replications=_get_int(raw, "experiment.replications", 10),
            split_alpha=_get_float(raw, "split.alpha", 0.5),
            cover=cover_from_config(raw),
            kernel=_kernel_from(raw, "kernel", KernelSpec("box")),
            bandwidth=_bandwidth_from(raw, "bandwidth", BandwidthPolicy("power_rule")),
            aux_kernel=_kernel_from(raw, "aux_kernel", None),
            aux_bandwidth=_bandwidth_from(raw, "aux_bandwidth", None),
            p=_get_float(raw, "experiment.p", 2.0),
            n_eval=_get_int(raw, "experiment.n_eval", 20_000),
            seed=_get_int(raw, "experiment.seed", 0),
            pi0=_get_float(raw, "ht.pi0", 1e-3),
            gamma_hat=_get_float(raw, "plugin.gamma_hat", None),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
