"""Monte Carlo experiment orchestration.

One experiment runs a grid of sample sizes times a list of estimators times R
replications: generate, split, fit, and score the integrated p-th power
error against the model truth on a fresh covariate sample.  Every
replication owns a counter-derived seed (base seed, estimator id, n, rep,
stage), so any single cell is reproducible in isolation and results do not
depend on execution order.  Medians (over replications) are the headline
aggregate; a log-log least-squares fit of median error against n summarizes
the convergence rate.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .cover import PhiCover, build_exp_cover, epsilon_schedule
from .data import Dataset, SyntheticModel, generate, split
from .ht import HTConfig, fit_ht
from .kernels import BandwidthPolicy, KernelSpec, box_kernel
from .plugin import RegressionEstimate, _as_queries, _maybe_scalar, m_hat_gamma
from .selection import fit as fit_select
from .smoothing import KernelSums, Smoothing, ratio0

ESTIMATOR_NAMES = (
    "nw_full",
    "complete_case",
    "plugin_gamma",
    "select_phi",
    "ht_tilde",
    "ht_breve",
)


@dataclass(frozen=True)
class CoverSettings:
    """How the candidate cover is built at each sample size."""

    kind: str = "exp"
    M: float = 1.0
    epsilon_mode: str = "n_power"
    epsilon: Optional[float] = None
    power: float = 0.5
    count: int = 25  # tabulated kind: uniform gamma grid size

    def build(self, n: int, L: float) -> PhiCover:
        eps = epsilon_schedule(self.epsilon_mode, n, fixed=self.epsilon, power=self.power)
        if self.kind == "exp":
            return build_exp_cover(self.M, L, eps)
        if self.kind == "tabulated":
            from .cover import build_tabulated_cover, exp_phi, uniform_grid
            import math
            B = math.exp(self.M * L)
            return build_tabulated_cover(
                lambda g: exp_phi(g, L, B=B),
                [uniform_grid(-self.M, self.M, self.count)],
                epsilon=eps,
                class_spec=f"uniform gamma grid, |gamma| <= {self.M:g}",
            )
        raise ValueError(f"unknown cover kind {self.kind!r}")


@dataclass(frozen=True)
class ExperimentConfig:
    model: SyntheticModel
    estimators: tuple[str, ...]
    n_grid: tuple[int, ...]
    replications: int
    split_alpha: float = 0.5
    cover: CoverSettings = field(default_factory=CoverSettings)
    kernel: KernelSpec = field(default_factory=box_kernel)
    bandwidth: BandwidthPolicy = field(default_factory=lambda: BandwidthPolicy("power_rule"))
    aux_kernel: Optional[KernelSpec] = None
    aux_bandwidth: Optional[BandwidthPolicy] = None
    p: float = 2.0
    n_eval: int = 20_000
    seed: int = 0
    pi0: float = 1e-3
    gamma_hat: Optional[float] = None

    def __post_init__(self):
        ns = tuple(int(n) for n in self.n_grid)
        if any(b >= a for a, b in zip(ns[1:], ns)):
            raise ValueError("n_grid must be strictly increasing")
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if not self.p >= 1:
            raise ValueError("p must be >= 1")
        unknown = set(self.estimators) - set(ESTIMATOR_NAMES)
        if unknown:
            raise ValueError(f"unknown estimators: {sorted(unknown)}")
        object.__setattr__(self, "n_grid", ns)
        object.__setattr__(self, "estimators", tuple(self.estimators))


@dataclass(frozen=True)
class ResultRow:
    estimator: str
    n: int
    rep: int
    lp_error: float  # NaN marks a failed replication
    phi_index: Optional[int]
    runtime_ms: float


@dataclass(frozen=True)
class AggregateRow:
    estimator: str
    n: int
    median: float
    iqr: float
    n_ok: int


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    r_squared: float


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    rows: list[ResultRow]
    aggregates: list[AggregateRow]
    rate_fits: dict[str, RateFit]

    def errors(self, estimator: str, n: int) -> np.ndarray:
        vals = [r.lp_error for r in self.rows if r.estimator == estimator and r.n == n]
        return np.array(vals)

    def median(self, estimator: str, n: int) -> float:
        for agg in self.aggregates:
            if agg.estimator == estimator and agg.n == n:
                return agg.median
        raise KeyError((estimator, n))

    def write_csv(self, path) -> None:
        """Schema ``estimator,n,rep,lp_error,phi_index,runtime_ms``; aggregate
        rows carry ``rep=-1`` with the median error."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            fh.write("estimator,n,rep,lp_error,phi_index,runtime_ms\n")
            for r in self.rows:
                phi = "" if r.phi_index is None else str(r.phi_index)
                fh.write(
                    f"{r.estimator},{r.n},{r.rep},%.17g,{phi},%.3f\n"
                    % (r.lp_error, r.runtime_ms)
                )
            for a in self.aggregates:
                fh.write(f"{a.estimator},{a.n},-1,%.17g,,\n" % a.median)


def lp_error(estimate: RegressionEstimate, model: SyntheticModel, p: float, n_eval: int, seed) -> float:
    """Monte Carlo integrated error ``mean |m_hat(X) - m(X)|^p`` over a fresh
    covariate sample from the model's law."""
    if n_eval < 1000:
        raise ValueError("n_eval must be at least 1000")
    rng = np.random.default_rng(seed)
    x = model.sample_x(rng, n_eval)
    diff = np.abs(np.asarray(estimate.predictor(x)) - model.m(x))
    return float(np.mean(diff ** p))


def rate_fit(points: Sequence[tuple[float, float]]) -> RateFit:
    """Ordinary least squares of log(error) on log(n)."""
    pts = [(float(n), float(e)) for n, e in points]
    if len(pts) < 3:
        raise ValueError("rate_fit needs at least 3 points")
    if any(e <= 0 for _, e in pts):
        raise ValueError("errors must be positive for a log-log fit")
    log_n = np.log([n for n, _ in pts])
    log_e = np.log([e for _, e in pts])
    slope, intercept = np.polyfit(log_n, log_e, 1)
    fitted = slope * log_n + intercept
    ss_res = float(np.sum((log_e - fitted) ** 2))
    ss_tot = float(np.sum((log_e - log_e.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    return RateFit(slope=float(slope), intercept=float(intercept), r_squared=r2)


def _nw_closure(dataset: Dataset, kernel: KernelSpec, h: float, label: str) -> RegressionEstimate:
    def predictor(x):
        q, single = _as_queries(x, dataset.d)
        sums = KernelSums(kernel, h, dataset.x, q)
        value = np.clip(ratio0(sums.sums(dataset.y_safe), sums.counts), -dataset.L, dataset.L)
        return _maybe_scalar(value, single)

    return RegressionEstimate(predictor=predictor, meta={"estimator": label, "h": h})


def fit_estimator(name: str, dataset: Dataset, config: ExperimentConfig, split_seed) -> RegressionEstimate:
    """Fit one named estimator on one dataset (harness entry point)."""
    d = dataset.d
    if name == "nw_full":
        if not np.all(dataset.delta == 1):
            raise ValueError("nw_full needs a fully observed dataset")
        h = config.bandwidth.bandwidth(dataset.n, d)
        return _nw_closure(dataset, config.kernel, h, "nw_full")
    if name == "complete_case":
        cc = dataset.complete_cases()
        if cc.n == 0:
            raise ValueError("complete_case needs at least one observed row")
        h = config.bandwidth.bandwidth(cc.n, d)
        return _nw_closure(cc, config.kernel, h, "complete_case")
    if name == "plugin_gamma":
        if config.gamma_hat is None:
            raise ValueError("plugin_gamma needs gamma_hat in the configuration")
        h = config.bandwidth.bandwidth(dataset.n, d)
        gamma = float(config.gamma_hat)
        return RegressionEstimate(
            predictor=lambda x: m_hat_gamma(dataset, config.kernel, h, x, gamma),
            meta={"estimator": "plugin_gamma", "gamma_hat": gamma, "h": h},
        )
    if name in ("select_phi", "ht_tilde", "ht_breve"):
        parts = split(dataset, config.split_alpha, split_seed)
        m_train = len(parts.train)
        h = config.bandwidth.bandwidth(m_train, d)
        aux_kernel = config.aux_kernel
        aux_h = None
        if config.aux_bandwidth is not None:
            aux_h = config.aux_bandwidth.bandwidth(m_train, len(dataset.z_coords))
        smoothing = Smoothing(kernel=config.kernel, h=h, aux_kernel=aux_kernel, aux_h=aux_h)
        cover = config.cover.build(dataset.n, dataset.L)
        if name == "select_phi":
            return fit_select(dataset, parts, cover, smoothing)
        variant = "tilde" if name == "ht_tilde" else "breve"
        ht_config = HTConfig(smoothing=smoothing, variant=variant, pi0=config.pi0)
        return fit_ht(dataset, parts, cover, ht_config)
    raise ValueError(f"unknown estimator {name!r}")


def _stream(config: ExperimentConfig, name: str, n: int, rep: int, stage: int):
    return [abs(int(config.seed)), ESTIMATOR_NAMES.index(name), int(n), int(rep), stage]


def run_experiment(config: ExperimentConfig, csv_path=None, plot_path=None) -> ExperimentResult:
    """Run the full grid; failed replications become NaN rows and the run
    continues.  Optionally writes the results CSV and a static rate plot."""
    rows: list[ResultRow] = []
    for name in config.estimators:
        for n in config.n_grid:
            for rep in range(config.replications):
                start = time.perf_counter()
                phi_index: Optional[int] = None
                try:
                    dataset, _truth = generate(config.model, n, _stream(config, name, n, rep, 0))
                    estimate = fit_estimator(name, dataset, config, _stream(config, name, n, rep, 1))
                    if "chosen_index" in estimate.meta:
                        phi_index = int(estimate.meta["chosen_index"])
                    err = lp_error(estimate, config.model, config.p, config.n_eval,
                                   _stream(config, name, n, rep, 2))
                except Exception:
                    err = float("nan")
                elapsed = (time.perf_counter() - start) * 1000.0
                rows.append(ResultRow(name, n, rep, err, phi_index, elapsed))

    aggregates: list[AggregateRow] = []
    rate_fits: dict[str, RateFit] = {}
    for name in config.estimators:
        medians = []
        for n in config.n_grid:
            errs = np.array([r.lp_error for r in rows if r.estimator == name and r.n == n])
            ok = errs[~np.isnan(errs)]
            med = float(np.median(ok)) if len(ok) else float("nan")
            iqr = float(np.percentile(ok, 75) - np.percentile(ok, 25)) if len(ok) else float("nan")
            aggregates.append(AggregateRow(name, n, med, iqr, int(len(ok))))
            medians.append((n, med))
        usable = [(n, e) for n, e in medians if np.isfinite(e) and e > 0]
        if len(usable) >= 3:
            rate_fits[name] = rate_fit(usable)

    result = ExperimentResult(config=config, rows=rows, aggregates=aggregates, rate_fits=rate_fits)
    if csv_path is not None:
        result.write_csv(csv_path)
    if plot_path is not None:
        from .plots import rate_plot
        rate_plot(result, plot_path)
    return result
