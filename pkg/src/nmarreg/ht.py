"""Horvitz-Thompson inverse-weighted kernel regression.

Observed responses are scaled by the inverse of an estimated selection
probability before smoothing:

    m_HT(x) = sum_i [Delta_i Y_i / pi(Z_i, Y_i)] K((x-X_i)/h) / sum_i K((x-X_i)/h).

At training rows the probability comes from leave-one-out kernel ratios
psi~ (with phi(Y_j) weights) and eta~ (without), combined as

    pi~ = [1 + ((1 - eta~)/psi~) phi(Y_i)]^{-1},

either with the raw denominator floored at RHO_FLOOR ('tilde') or winsorized
from below at a fixed pi0 ('breve'); pi0 at or below the model's true minimum
selection probability keeps the weights honest while bounding them.  The
response factor phi is picked from a cover by the same inverse-weighted
validation risk as the plug-in route, with the probability at validation
rows computed from full training sums (leave-one-out exists only to avoid
self-weighting inside the training half).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .cover import PhiCover
from .data import Dataset, DataSplit
from .kernels import KernelSpec
from .plugin import RegressionEstimate, _as_queries, _maybe_scalar
from .selection import MEMBER_CHUNK, RHO_FLOOR, SelectionProbabilityModel, SelectionResult, _TrainingArrays
from .smoothing import KernelSums, Smoothing, ratio0

DEFAULT_PI0 = 1e-3


@dataclass(frozen=True)
class HTConfig:
    """Variant ('tilde' or 'breve'), winsorization constant, and smoothing.

    The auxiliary kernel runs at the primary bandwidth unless ``smoothing``
    overrides it.
    """

    smoothing: Smoothing
    variant: str = "breve"
    pi0: float = DEFAULT_PI0

    def __post_init__(self):
        if self.variant not in ("tilde", "breve"):
            raise ValueError("variant must be 'tilde' or 'breve'")
        if not self.pi0 > 0:
            raise ValueError("pi0 must be positive")

    @property
    def denominator_floor(self) -> float:
        return self.pi0 if self.variant == "breve" else RHO_FLOOR


def loo_functionals(dataset: Dataset, train_idx, kernel: KernelSpec, h: float, i: int, phi):
    """Leave-one-out kernel ratios ``(psi~, eta~)`` at training row ``i``.

    ``i`` is a row index of the dataset and must belong to ``train_idx``;
    sums run over the other training rows, with 0/0 -> 0.
    """
    train_idx = np.asarray(train_idx, dtype=int)
    if train_idx.size < 2:
        raise ValueError("leave-one-out needs at least two training rows")
    if i not in train_idx:
        raise ValueError("i must be a training row")
    others = train_idx[train_idx != i]
    z_i = dataset.z[i]
    w = kernel((z_i[None, :] - dataset.z[others]) / h)
    den = float(w.sum())
    delta = dataset.delta[others] == 1
    phi_y = np.where(delta, phi(dataset.y_safe[others]), 0.0)
    psi = float((phi_y * w).sum()) / den if den != 0 else 0.0
    eta = float((delta * w).sum()) / den if den != 0 else 0.0
    return psi, eta


def _pi_from_functionals(psi, eta, phi_y, floor):
    return 1.0 / (1.0 + ((1.0 - eta) / np.maximum(psi, floor)) * phi_y)


def pi_tilde(dataset: Dataset, train_idx, kernel: KernelSpec, h: float, i: int, phi):
    """Leave-one-out selection probability at observed training row ``i``."""
    if dataset.delta[i] != 1:
        raise ValueError("selection probabilities are needed at observed rows only")
    psi, eta = loo_functionals(dataset, train_idx, kernel, h, i, phi)
    return float(_pi_from_functionals(psi, eta, float(phi(dataset.y[i])), RHO_FLOOR))


def pi_breve(dataset: Dataset, train_idx, kernel: KernelSpec, h: float, i: int, phi, pi0: float):
    """One-sided winsorized variant: the ratio denominator is ``pi0 v psi~``."""
    if not pi0 > 0:
        raise ValueError("pi0 must be positive")
    if dataset.delta[i] != 1:
        raise ValueError("selection probabilities are needed at observed rows only")
    psi, eta = loo_functionals(dataset, train_idx, kernel, h, i, phi)
    return float(_pi_from_functionals(psi, eta, float(phi(dataset.y[i])), pi0))


def ht_m_hat_weighted(dataset: Dataset, train_idx, kernel: KernelSpec, h: float, x,
                      pi_values, clip_bound: Optional[float] = None):
    """Inverse-weighted kernel ratio with supplied per-row probabilities.

    ``pi_values`` aligns with ``train_idx``; entries at missing rows are
    ignored.  ``clip_bound`` caps the magnitude of the output (the final
    predictor applies the [-L, L] clamp separately).
    """
    train_idx = np.asarray(train_idx, dtype=int)
    q, single = _as_queries(x, dataset.d)
    sums = KernelSums(kernel, h, dataset.x[train_idx], q)
    delta = dataset.delta[train_idx] == 1
    pi_values = np.asarray(pi_values, dtype=float)
    w = np.where(delta, dataset.y_safe[train_idx] / np.where(delta, pi_values, 1.0), 0.0)
    value = ratio0(sums.sums(w), sums.counts)
    if clip_bound is not None:
        value = np.clip(value, -clip_bound, clip_bound)
    return _maybe_scalar(value, single)


def _loo_pi_training(dataset: Dataset, train_idx, pi_model: SelectionProbabilityModel):
    """Leave-one-out probabilities at every training row (vectorized)."""
    train_idx = np.asarray(train_idx, dtype=int)
    if train_idx.size < 2:
        raise ValueError("leave-one-out needs at least two training rows")
    z_tr = dataset.z[train_idx]
    delta = dataset.delta[train_idx] == 1
    y_tr = dataset.y_safe[train_idx]
    loo = KernelSums(pi_model.kernel, pi_model.lam, z_tr, z_tr, exclude_self=True)
    den = loo.counts
    eta = ratio0(loo.sums(delta.astype(float)), den)
    phi_y = np.where(delta, pi_model.phi(y_tr), 0.0)
    psi = ratio0(loo.sums(phi_y), den)
    floor = pi_model.pi0 if pi_model.kind == "loo_breve" else RHO_FLOOR
    return _pi_from_functionals(psi, eta, pi_model.phi(y_tr), floor)


def ht_m_hat(dataset: Dataset, train_idx, kernel: KernelSpec, h: float, x,
             pi_model: SelectionProbabilityModel):
    """Inverse-weighted kernel estimate with probabilities built per
    ``pi_model`` (leave-one-out at training rows for the 'loo_*' kinds)."""
    train_idx = np.asarray(train_idx, dtype=int)
    if pi_model.kind in ("loo_tilde", "loo_breve"):
        pi_values = _loo_pi_training(dataset, train_idx, pi_model)
        floor = pi_model.pi0 if pi_model.kind == "loo_breve" else RHO_FLOOR
    else:
        from .selection import pi_hat  # full training sums at arbitrary rows
        pi_values = np.array([
            pi_hat(dataset, train_idx, pi_model.kernel, pi_model.lam,
                   dataset.z[i], dataset.y_safe[i], pi_model.phi)
            if dataset.delta[i] == 1 else 1.0
            for i in train_idx
        ])
        floor = pi_model.pi0 if pi_model.pi0 is not None else RHO_FLOOR
    return ht_m_hat_weighted(dataset, train_idx, kernel, h, x, pi_values,
                             clip_bound=dataset.L / floor)


def validation_pi(dataset: Dataset, split: DataSplit, smoothing: Smoothing,
                  phi, variant: str, pi0: float = DEFAULT_PI0) -> np.ndarray:
    """Selection probabilities at the validation rows, one entry per row of
    ``split.val``.

    Validation rows are outside the training half, so full training sums
    replace the leave-one-out sums (the exclusion exists only to avoid
    self-weighting inside the training half); the 'tilde'/'breve' floor rule
    matches the corresponding variant.
    """
    if variant not in ("tilde", "breve"):
        raise ValueError("variant must be 'tilde' or 'breve'")
    floor = pi0 if variant == "breve" else RHO_FLOOR
    z_tr = dataset.z[split.train]
    delta = dataset.delta[split.train] == 1
    phi_tr = np.where(delta, phi(dataset.y_safe[split.train]), 0.0)
    sums = KernelSums(smoothing.kernel_aux, smoothing.h_aux, z_tr, dataset.z[split.val])
    den = sums.counts
    eta = ratio0(sums.sums(delta.astype(float)), den)
    psi = ratio0(sums.sums(phi_tr), den)
    return _pi_from_functionals(psi, eta, phi(dataset.y_safe[split.val]), floor)


def _ht_member_risks(arrays: _TrainingArrays, members, config: HTConfig) -> np.ndarray:
    """Validation risks of the inverse-weighted fit for a member batch."""
    L = arrays.L
    sm = config.smoothing
    floor = config.denominator_floor
    clip_bound = L / floor

    loo = KernelSums(sm.kernel_aux, sm.h_aux, arrays.z_tr, arrays.z_tr, exclude_self=True)
    resp = KernelSums(sm.kernel, sm.h, arrays.x_tr, arrays.x_val)
    aux_val = KernelSums(sm.kernel_aux, sm.h_aux, arrays.z_tr, arrays.z_val)

    den_loo = loo.counts
    eta_tr = ratio0(loo.sums(arrays.obs_tr.astype(float)), den_loo)
    phi_tr = arrays.phi_matrix(members, arrays.y_tr, arrays.obs_tr)
    phi_tr_open = np.column_stack([phi(arrays.y_tr) for phi in members])
    psi_tr = ratio0(loo.sums(phi_tr), den_loo[:, None])
    pi_tr = _pi_from_functionals(psi_tr, eta_tr[:, None], phi_tr_open, floor)

    w = np.where(arrays.obs_tr[:, None], arrays.y_tr[:, None] / pi_tr, 0.0)
    m_val = np.clip(ratio0(resp.sums(w), resp.counts[:, None]), -clip_bound, clip_bound)

    den_val = aux_val.counts
    eta_val = ratio0(aux_val.sums(arrays.obs_tr.astype(float)), den_val)
    psi_val = ratio0(aux_val.sums(phi_tr), den_val[:, None])
    phi_val = np.column_stack([phi(arrays.y_val) for phi in members])
    pi_val = _pi_from_functionals(psi_val, eta_val[:, None], phi_val, floor)

    sq = (m_val - arrays.y_val[:, None]) ** 2
    terms = np.where(arrays.obs_val[:, None], sq / pi_val, 0.0)
    return terms.sum(axis=0) / arrays.n_val


def select_phi_ht(dataset: Dataset, split: DataSplit, cover: PhiCover, config: HTConfig) -> SelectionResult:
    """Pick the cover member minimizing the inverse-weighted validation risk
    of the Horvitz-Thompson fit (first index on ties)."""
    arrays = _TrainingArrays(dataset, split)
    risks = np.empty(len(cover))
    members = cover.members
    for start in range(0, len(members), MEMBER_CHUNK):
        batch = members[start:start + MEMBER_CHUNK]
        risks[start:start + len(batch)] = _ht_member_risks(arrays, batch, config)
    chosen = int(np.argmin(risks))
    return SelectionResult(chosen_index=chosen, chosen_phi=members[chosen], risks=risks)


def fit_ht(dataset: Dataset, split: DataSplit, cover: PhiCover, config: HTConfig) -> RegressionEstimate:
    """Select the response factor, then expose the inverse-weighted curve.

    The reported predictor is clamped to [-L, L]; the pre-clamp curve stays
    available as ``meta['raw_predictor']`` for diagnostics.
    """
    result = select_phi_ht(dataset, split, cover, config)
    phi = result.chosen_phi
    sm = config.smoothing
    pi_model = SelectionProbabilityModel(
        kind="loo_breve" if config.variant == "breve" else "loo_tilde",
        kernel=sm.kernel_aux, lam=sm.h_aux, phi=phi,
        pi0=config.pi0 if config.variant == "breve" else None,
    )
    pi_values = _loo_pi_training(dataset, split.train, pi_model)
    x_tr = dataset.x[split.train]
    delta = dataset.delta[split.train] == 1
    weights = np.where(delta, dataset.y_safe[split.train] / np.where(delta, pi_values, 1.0), 0.0)
    L = dataset.L
    clip_bound = L / config.denominator_floor
    kernel, h, d = sm.kernel, sm.h, dataset.d

    def raw_predictor(x):
        q, single = _as_queries(x, d)
        sums = KernelSums(kernel, h, x_tr, q)
        value = np.clip(ratio0(sums.sums(weights), sums.counts), -clip_bound, clip_bound)
        return _maybe_scalar(value, single)

    def predictor(x):
        return np.clip(raw_predictor(x), -L, L)

    meta = {
        "estimator": f"ht_{config.variant}",
        "variant": config.variant,
        "pi0": config.pi0,
        "chosen_index": result.chosen_index,
        "chosen_tag": phi.tag,
        "risks": result.risks,
        "h": sm.h,
        "lam": sm.h_aux,
        "kernel": sm.kernel.family,
        "aux_kernel": sm.kernel_aux.family,
        "alpha": split.alpha,
        "raw_predictor": raw_predictor,
        "conventions": "empty windows give 0; output clamped to [-L, L] (raw curve in meta)",
    }
    return RegressionEstimate(predictor=predictor, meta=meta)
