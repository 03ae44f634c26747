"""Data-splitting selection of the missingness response factor.

The first stage estimates the selection probability for each candidate
``phi`` from the training half: the odds factor ``exp{g(z)}`` is the kernel
ratio of nonresponse mass to ``Delta*phi(Y)`` mass at ``z``, and

    pi_phi(z, y) = 1 / (1 + exp{g(z)}_hat * phi(y)).

The second stage scores every cover member on the validation half with the
inverse-weighted squared prediction error of the training-set plug-in
estimator, and keeps the first minimizer.  The final regression estimate is
the training-set plug-in curve at the selected member.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .cover import PhiCover, PhiFunction
from .data import Dataset, DataSplit
from .kernels import KernelSpec
from .plugin import RegressionEstimate, _as_queries, _maybe_scalar
from .smoothing import KernelSums, Smoothing, ratio0

# Finite-sample guard for kernel denominators that the positivity assumption
# only protects asymptotically.
RHO_FLOOR = 1e-8

# Cover members are scored in batches to bound the (m x batch) work arrays.
MEMBER_CHUNK = 256


@dataclass(frozen=True)
class SelectionProbabilityModel:
    """How to turn training rows into selection probabilities.

    ``kind`` is 'plug_in_step1' (full training sums at arbitrary (z, y)),
    'loo_tilde' (leave-one-out at training rows), or 'loo_breve' (the
    winsorized variant, flooring the denominator at ``pi0``).
    """

    kind: str
    kernel: KernelSpec
    lam: float
    phi: PhiFunction
    pi0: Optional[float] = None

    def __post_init__(self):
        if self.kind not in ("plug_in_step1", "loo_tilde", "loo_breve"):
            raise ValueError(f"unknown selection-probability kind {self.kind!r}")
        if self.kind == "loo_breve" and (self.pi0 is None or not self.pi0 > 0):
            raise ValueError("loo_breve requires a positive pi0")


@dataclass(frozen=True)
class SelectionResult:
    """Outcome of the cover search: the first risk minimizer and the full
    per-member risk profile (in cover order)."""

    chosen_index: int
    chosen_phi: PhiFunction
    risks: np.ndarray

    def __post_init__(self):
        risks = np.asarray(self.risks, dtype=float)
        object.__setattr__(self, "risks", risks)
        if self.chosen_index != int(np.argmin(risks)):
            raise ValueError("chosen_index must be the first argmin of risks")


def estimate_exp_g(dataset: Dataset, train_idx, kernel: KernelSpec, lam: float, z, phi):
    """Kernel estimate of the odds factor ``exp{g(z)}`` from training rows.

    Ratio of ``sum (1-Delta_j) H((z-Z_j)/lam)`` to
    ``sum Delta_j phi(Y_j) H((z-Z_j)/lam)``; denominators at or below
    ``RHO_FLOOR`` are replaced by the floor.
    """
    train_idx = np.asarray(train_idx, dtype=int)
    if train_idx.size == 0:
        raise ValueError("training index set must be nonempty")
    dz = len(dataset.z_coords)
    q, single = _as_queries(z, dz)
    sums = KernelSums(kernel, lam, dataset.z[train_idx], q)
    delta = dataset.delta[train_idx] == 1
    phi_y = np.where(delta, phi(dataset.y_safe[train_idx]), 0.0)
    num = sums.sums((~delta).astype(float))
    den = np.maximum(sums.sums(phi_y), RHO_FLOOR)
    return _maybe_scalar(num / den, single)


def pi_hat(dataset: Dataset, train_idx, kernel: KernelSpec, lam: float, z, y, phi):
    """First-stage selection probability ``1/(1 + exp{g(z)}_hat * phi(y))``."""
    y = np.asarray(y, dtype=float)
    if np.any(np.abs(y) > dataset.L):
        raise ValueError("|y| must not exceed L")
    exp_g = estimate_exp_g(dataset, train_idx, kernel, lam, z, phi)
    return 1.0 / (1.0 + np.asarray(exp_g) * phi(y)) if np.ndim(exp_g) else float(
        1.0 / (1.0 + exp_g * float(phi(y)))
    )


class _TrainingArrays:
    """Training/validation views shared by the member-scoring loops."""

    def __init__(self, dataset: Dataset, split: DataSplit):
        self.L = dataset.L
        self.x_tr = dataset.x[split.train]
        self.z_tr = dataset.z[split.train]
        self.y_tr = dataset.y_safe[split.train]
        self.obs_tr = dataset.delta[split.train] == 1
        self.x_val = dataset.x[split.val]
        self.z_val = dataset.z[split.val]
        self.y_val = dataset.y_safe[split.val]
        self.obs_val = dataset.delta[split.val] == 1
        self.n_val = len(split.val)

    def phi_matrix(self, members, y, obs):
        """phi_c(y_i) masked to observed rows, shape (len(y), len(members))."""
        cols = [np.where(obs, phi(y), 0.0) for phi in members]
        return np.column_stack(cols)


def _member_risks(arrays: _TrainingArrays, members, smoothing: Smoothing) -> np.ndarray:
    """Validation risks for a batch of cover members (vectorized)."""
    L = arrays.L
    resp = KernelSums(smoothing.kernel, smoothing.h, arrays.x_tr, arrays.x_val)
    aux = KernelSums(smoothing.kernel_aux, smoothing.h_aux, arrays.z_tr, arrays.z_val)

    den_resp = resp.counts
    eta1 = ratio0(resp.sums(np.where(arrays.obs_tr, arrays.y_tr, 0.0)), den_resp)
    eta2 = ratio0(resp.sums(arrays.obs_tr.astype(float)), den_resp)
    num_g = aux.sums((~arrays.obs_tr).astype(float))

    phi_tr = arrays.phi_matrix(members, arrays.y_tr, arrays.obs_tr)
    phi_val = np.column_stack([phi(arrays.y_val) for phi in members])

    psi1 = ratio0(resp.sums(arrays.y_tr[:, None] * phi_tr), den_resp[:, None])
    psi2 = ratio0(resp.sums(phi_tr), den_resp[:, None])
    ratio = np.clip(ratio0(psi1, psi2), -L, L)
    m_val = np.clip(eta1[:, None] + ratio * (1.0 - eta2[:, None]), -L, L)

    exp_g = num_g[:, None] / np.maximum(aux.sums(phi_tr), RHO_FLOOR)
    pi_val = 1.0 / (1.0 + exp_g * phi_val)

    sq = (m_val - arrays.y_val[:, None]) ** 2
    terms = np.where(arrays.obs_val[:, None], sq / pi_val, 0.0)
    return terms.sum(axis=0) / arrays.n_val


def empirical_risk(dataset: Dataset, split: DataSplit, smoothing: Smoothing, phi: PhiFunction) -> float:
    """Inverse-weighted validation risk of the training-set plug-in curve at
    one candidate ``phi``; rows with a missing response contribute 0."""
    arrays = _TrainingArrays(dataset, split)
    return float(_member_risks(arrays, [phi], smoothing)[0])


def select_phi(dataset: Dataset, split: DataSplit, cover: PhiCover, smoothing: Smoothing) -> SelectionResult:
    """Score every cover member and keep the first empirical-risk minimizer."""
    arrays = _TrainingArrays(dataset, split)
    risks = np.empty(len(cover))
    members = cover.members
    for start in range(0, len(members), MEMBER_CHUNK):
        batch = members[start:start + MEMBER_CHUNK]
        risks[start:start + len(batch)] = _member_risks(arrays, batch, smoothing)
    chosen = int(np.argmin(risks))
    return SelectionResult(chosen_index=chosen, chosen_phi=members[chosen], risks=risks)


def fit(dataset: Dataset, split: DataSplit, cover: PhiCover, smoothing: Smoothing) -> RegressionEstimate:
    """Full two-step fit: select the response factor, then expose the
    training-set plug-in curve at the selected member."""
    result = select_phi(dataset, split, cover, smoothing)
    phi = result.chosen_phi
    L = dataset.L
    x_tr = dataset.x[split.train]
    y_tr = dataset.y_safe[split.train]
    obs_tr = dataset.delta[split.train] == 1
    w_eta1 = np.where(obs_tr, y_tr, 0.0)
    w_eta2 = obs_tr.astype(float)
    w_psi2 = np.where(obs_tr, phi(y_tr), 0.0)
    w_psi1 = y_tr * w_psi2
    kernel, h, d = smoothing.kernel, smoothing.h, dataset.d

    def predictor(x):
        q, single = _as_queries(x, d)
        sums = KernelSums(kernel, h, x_tr, q)
        den = sums.counts
        eta1 = ratio0(sums.sums(w_eta1), den)
        eta2 = ratio0(sums.sums(w_eta2), den)
        ratio = np.clip(ratio0(sums.sums(w_psi1), sums.sums(w_psi2)), -L, L)
        value = np.clip(eta1 + ratio * (1.0 - eta2), -L, L)
        return _maybe_scalar(value, single)

    meta = {
        "estimator": "select_phi",
        "chosen_index": result.chosen_index,
        "chosen_tag": phi.tag,
        "risks": result.risks,
        "h": smoothing.h,
        "lam": smoothing.h_aux,
        "kernel": smoothing.kernel.family,
        "aux_kernel": smoothing.kernel_aux.family,
        "alpha": split.alpha,
        "conventions": "empty windows give 0; correction ratio and output clamped to [-L, L]",
    }
    return RegressionEstimate(predictor=predictor, meta=meta)


def write_risk_table(path, cover: PhiCover, result: SelectionResult, variant: Optional[str] = None) -> None:
    """Per-member risk table CSV: ``phi_index,gamma_or_tag,risk`` plus a
    ``variant`` column for the inverse-weighted fits."""
    header = ["phi_index", "gamma_or_tag", "risk"]
    if variant is not None:
        header.append("variant")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for i, (member, risk) in enumerate(zip(cover.members, result.risks)):
            label = "%.17g" % member.gamma if member.gamma is not None else member.tag
            row = [str(i), label, "%.17g" % risk]
            if variant is not None:
                row.append(variant)
            fh.write(",".join(row) + "\n")
