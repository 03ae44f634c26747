"""Plug-in kernel regression under response missingness.

All estimators here are built from kernel ratios of the form

    eta_k(x, t)   = sum_i Delta_i Y_i^{2-k} e^{t Y_i} K((x-X_i)/h) / sum_i K((x-X_i)/h)
    psi_k(x; phi) = sum_i Delta_i Y_i^{2-k} phi(Y_i) K((x-X_i)/h) / sum_i K((x-X_i)/h)

with the conventions: empty kernel windows give 0 (0/0 -> 0), the correction
ratio eta_1/eta_2 (resp. psi_1/psi_2) is clamped to [-L, L], and the final
estimate is clamped to [-L, L].  The regression curve then decomposes as

    m(x) = eta_1(x, 0) + [psi_1(x; phi*) / psi_2(x; phi*)] * (1 - eta_2(x, 0)),

an identity that holds exactly for the true response factor phi* and is
checked numerically on finite discrete joints by `representation_oracle`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .data import Dataset
from .kernels import KernelSpec
from .smoothing import KernelSums, ratio0


def _as_queries(x, d: int):
    """Normalize a query to shape (q, d); returns (queries, was_single)."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        if d != 1:
            raise ValueError(f"scalar query invalid for d={d}")
        return x.reshape(1, 1), True
    if x.ndim == 1:
        if x.shape[0] == d:
            return x.reshape(1, d), True
        if d == 1:
            return x.reshape(-1, 1), False
        raise ValueError(f"query of length {x.shape[0]} invalid for d={d}")
    if x.ndim == 2 and x.shape[1] == d:
        return x, False
    raise ValueError(f"query shape {x.shape} invalid for d={d}")


def _maybe_scalar(values: np.ndarray, single: bool):
    return float(values[0]) if single else values


@dataclass(frozen=True)
class RegressionEstimate:
    """A fitted regression function plus its provenance.

    ``predictor`` maps covariate queries to estimates clamped to [-L, L];
    ``meta`` records the estimator kind, smoothing choices, and (when a
    candidate search ran) the selected member and all member risks.
    """

    predictor: Callable[[np.ndarray], np.ndarray]
    meta: dict = field(default_factory=dict)

    def predict(self, x):
        return self.predictor(x)


def nw_estimate(dataset: Dataset, kernel: KernelSpec, h: float, x):
    """Nadaraya-Watson estimate on fully observed rows.

    The dataset must contain no missing responses (restrict with
    ``dataset.complete_cases()`` first); empty windows return 0.
    """
    if not np.all(dataset.delta == 1):
        raise ValueError("nw_estimate needs fully observed rows; use complete_cases()")
    q, single = _as_queries(x, dataset.d)
    sums = KernelSums(kernel, h, dataset.x, q)
    return _maybe_scalar(ratio0(sums.sums(dataset.y), sums.counts), single)


def eta_hat(dataset: Dataset, kernel: KernelSpec, h: float, x, t: float, k: int):
    """Kernel ratio ``eta_k(x, t)`` over all rows (missing rows weigh 0 in the
    numerator but still count in the denominator)."""
    if k not in (1, 2):
        raise ValueError("k must be 1 or 2")
    q, single = _as_queries(x, dataset.d)
    sums = KernelSums(kernel, h, dataset.x, q)
    ys = dataset.y_safe
    w = np.where(dataset.delta == 1, ys ** (2 - k) * np.exp(t * ys), 0.0)
    return _maybe_scalar(ratio0(sums.sums(w), sums.counts), single)


def _exp_shifted(t: float, y: np.ndarray, L: float) -> np.ndarray:
    # e^{t(y - y0)} with y0 at the argmax of t*y: overflow-free, and exactly
    # e^{t*y} / e^{t*y0}; ratios of such sums equal the unshifted ratios.
    y0 = L if t >= 0 else -L
    return np.exp(t * (y - y0))


def m_hat_gamma(dataset: Dataset, kernel: KernelSpec, h: float, x, gamma_hat: float):
    """Plug-in estimator with a supplied exponent estimate ``gamma_hat``:

        eta_1(x,0) + [eta_1(x,gamma)/eta_2(x,gamma)] * (1 - eta_2(x,0)),

    ratio and final value clamped to [-L, L].  ``gamma_hat`` is an input;
    this module never estimates it.
    """
    if not np.isfinite(gamma_hat):
        raise ValueError("gamma_hat must be finite")
    L = dataset.L
    q, single = _as_queries(x, dataset.d)
    sums = KernelSums(kernel, h, dataset.x, q)
    den = sums.counts
    delta = dataset.delta == 1
    ys = dataset.y_safe
    eta1_0 = ratio0(sums.sums(np.where(delta, ys, 0.0)), den)
    eta2_0 = ratio0(sums.sums(delta.astype(float)), den)
    # The correction ratio shares the e^{gamma*y} scale between numerator and
    # denominator, so a common shift keeps it overflow-free for any gamma.
    s = np.where(delta, _exp_shifted(gamma_hat, ys, L), 0.0)
    ratio = np.clip(ratio0(sums.sums(ys * s), sums.sums(s)), -L, L)
    value = np.clip(eta1_0 + ratio * (1.0 - eta2_0), -L, L)
    return _maybe_scalar(value, single)


def eta_hat_m(dataset: Dataset, train_idx, kernel: KernelSpec, h: float, x, k: int):
    """Training-set kernel ratio ``eta_{m,k}(x)`` (no exponential factor)."""
    if k not in (1, 2):
        raise ValueError("k must be 1 or 2")
    train_idx = np.asarray(train_idx, dtype=int)
    if train_idx.size == 0:
        raise ValueError("training index set must be nonempty")
    q, single = _as_queries(x, dataset.d)
    sums = KernelSums(kernel, h, dataset.x[train_idx], q)
    delta = dataset.delta[train_idx] == 1
    ys = dataset.y_safe[train_idx]
    w = np.where(delta, ys ** (2 - k), 0.0)
    return _maybe_scalar(ratio0(sums.sums(w), sums.counts), single)


def psi_hat_m(dataset: Dataset, train_idx, kernel: KernelSpec, h: float, x, phi, k: int):
    """Training-set kernel ratio ``psi_{m,k}(x; phi)`` with weights phi(Y_i)."""
    if k not in (1, 2):
        raise ValueError("k must be 1 or 2")
    train_idx = np.asarray(train_idx, dtype=int)
    if train_idx.size == 0:
        raise ValueError("training index set must be nonempty")
    q, single = _as_queries(x, dataset.d)
    sums = KernelSums(kernel, h, dataset.x[train_idx], q)
    delta = dataset.delta[train_idx] == 1
    ys = dataset.y_safe[train_idx]
    w = np.where(delta, ys ** (2 - k) * phi(ys), 0.0)
    return _maybe_scalar(ratio0(sums.sums(w), sums.counts), single)


def m_hat_m_phi(dataset: Dataset, train_idx, kernel: KernelSpec, h: float, x, phi):
    """Training-set plug-in estimator for a fixed response factor ``phi``:

        eta_{m,1}(x) + [psi_{m,1}(x;phi)/psi_{m,2}(x;phi)] * (1 - eta_{m,2}(x)),

    with the usual ratio/final clamps to [-L, L].
    """
    train_idx = np.asarray(train_idx, dtype=int)
    if train_idx.size == 0:
        raise ValueError("training index set must be nonempty")
    L = dataset.L
    q, single = _as_queries(x, dataset.d)
    sums = KernelSums(kernel, h, dataset.x[train_idx], q)
    den = sums.counts
    delta = dataset.delta[train_idx] == 1
    ys = dataset.y_safe[train_idx]
    phi_y = np.where(delta, phi(ys), 0.0)
    eta1 = ratio0(sums.sums(np.where(delta, ys, 0.0)), den)
    eta2 = ratio0(sums.sums(delta.astype(float)), den)
    ratio = np.clip(ratio0(sums.sums(ys * phi_y), sums.sums(phi_y)), -L, L)
    value = np.clip(eta1 + ratio * (1.0 - eta2), -L, L)
    return _maybe_scalar(value, single)


# ---------------------------------------------------------------------------
# Exact finite joints: the population-level identity as a numerical oracle.
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DiscreteJoint:
    """A finite joint law of (X, Y) with an explicit missingness mechanism.

    Atoms are rows of (``xs[i]``, ``ys[i]``) with probability ``probs[i]``;
    the selection probability at an atom is ``1/(1 + exp{g(z)} phi_star(y))``
    with ``z`` the ``z_coords`` part of ``x``.  All population functionals are
    computed by exact enumeration.
    """

    xs: np.ndarray
    ys: np.ndarray
    probs: np.ndarray
    g: Callable[[np.ndarray], np.ndarray]
    phi_star: Callable[[np.ndarray], np.ndarray]
    z_coords: tuple[int, ...]
    L: float

    def __post_init__(self):
        xs = np.asarray(self.xs, dtype=float)
        ys = np.asarray(self.ys, dtype=float)
        probs = np.asarray(self.probs, dtype=float)
        if xs.ndim != 2 or ys.ndim != 1 or probs.ndim != 1:
            raise ValueError("xs must be (A, d); ys and probs must be (A,)")
        if not (len(xs) == len(ys) == len(probs)) or len(xs) == 0:
            raise ValueError("atom arrays must share a positive length")
        if np.any(probs <= 0):
            raise ValueError("atom probabilities must be positive")
        if abs(probs.sum() - 1.0) > 1e-12:
            raise ValueError("atom probabilities must sum to 1")
        if np.abs(ys).max() > self.L:
            raise ValueError("|y| must not exceed L")
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)
        object.__setattr__(self, "probs", probs)

    @property
    def d(self) -> int:
        return self.xs.shape[1]

    def pi_values(self) -> np.ndarray:
        """Selection probability at every atom."""
        idx = np.array(self.z_coords, dtype=int) - 1
        g = np.asarray(self.g(self.xs[:, idx]), dtype=float)
        return 1.0 / (1.0 + np.exp(g) * np.asarray(self.phi_star(self.ys), dtype=float))

    def _at(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.shape[0] != self.d:
            raise ValueError("x must be a point of the joint's dimension")
        return np.all(self.xs == x[None, :], axis=1)

    def marginal(self, x) -> float:
        return float(self.probs[self._at(x)].sum())

    def cond_mean(self, x) -> float:
        """E[Y | X = x] by enumeration."""
        mask = self._at(x)
        p = self.probs[mask]
        if p.sum() == 0:
            raise ValueError("x carries no probability mass")
        return float(np.sum(self.ys[mask] * p) / p.sum())

    def psi(self, x, k: int, phi=None) -> float:
        """Population ``psi_k(x; phi)`` (or ``eta_k(x)`` when phi is None)."""
        mask = self._at(x)
        p = self.probs[mask]
        if p.sum() == 0:
            raise ValueError("x carries no probability mass")
        y = self.ys[mask]
        pi = self.pi_values()[mask]
        w = np.ones_like(y) if phi is None else np.asarray(phi(y), dtype=float)
        return float(np.sum(pi * y ** (2 - k) * w * p) / p.sum())

    def eta(self, x, k: int) -> float:
        return self.psi(x, k, phi=None)


def representation_oracle(joint: DiscreteJoint, x) -> tuple[float, float]:
    """Both sides of the regression decomposition at ``x``, by enumeration.

    Returns ``(lhs, rhs)`` where ``lhs = E[Y|X=x]`` and ``rhs`` is
    ``eta_1 + (psi_1/psi_2) * (1 - eta_2)`` at the joint's true response
    factor; the two agree to machine accuracy for any finite joint.
    """
    if joint.marginal(x) <= 0:
        raise ValueError("x carries no probability mass")
    lhs = joint.cond_mean(x)
    eta1 = joint.eta(x, 1)
    eta2 = joint.eta(x, 2)
    psi1 = joint.psi(x, 1, joint.phi_star)
    psi2 = joint.psi(x, 2, joint.phi_star)
    rhs = eta1 + (psi1 / psi2) * (1.0 - eta2)
    return lhs, rhs
