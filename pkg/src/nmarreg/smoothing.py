"""Kernel-weighted sum machinery shared by all estimators.

Every estimator in this package reduces to ratios of sums of the form
``S(w)_i = sum_j w_j K((q_i - p_j)/h)`` over a fixed point cloud ``p`` and a
fixed query batch ``q``.  :class:`KernelSums` precomputes whatever the kernel
family allows (sorted windows for box kernels on the line, dense weight
matrices otherwise) and then evaluates many weight vectors cheaply, including
weight *matrices* with one column per candidate weighting function.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernels import KernelSpec

# Cap on cached dense kernel-weight entries (about 64 MB of float64).
DENSE_CACHE_ENTRIES = 8_000_000


def ratio0(num, den):
    """Elementwise ``num/den`` with the empty-window convention ``0/0 -> 0``.

    Any entry with a zero denominator maps to 0; broadcasting follows numpy
    rules (e.g. ``num`` of shape ``(q, N)`` against ``den`` of shape ``(q,)``
    via ``den[:, None]``).
    """
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    num_b, den_b = np.broadcast_arrays(num, den)
    out = np.zeros(num_b.shape)
    np.divide(num_b, den_b, out=out, where=den_b != 0)
    if out.ndim == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class Smoothing:
    """Kernel/bandwidth bundle for the two smoothing stages.

    ``kernel``/``h`` drive the response-side sums; ``aux_kernel``/``aux_h``
    drive the selection-probability sums over the designated coordinates and
    default to the primary pair when unset.
    """

    kernel: KernelSpec
    h: float
    aux_kernel: KernelSpec | None = None
    aux_h: float | None = None

    def __post_init__(self):
        if not self.h > 0:
            raise ValueError("h must be positive")
        if self.aux_h is not None and not self.aux_h > 0:
            raise ValueError("aux_h must be positive")

    @property
    def kernel_aux(self) -> KernelSpec:
        return self.kernel if self.aux_kernel is None else self.aux_kernel

    @property
    def h_aux(self) -> float:
        return self.h if self.aux_h is None else self.aux_h


class KernelSums:
    """Batched kernel-weighted sums for fixed points and queries.

    Parameters
    ----------
    kernel, h : kernel family and bandwidth.
    points : ndarray of shape (m, d)
        Anchor points indexing the weights.
    queries : ndarray of shape (q, d)
        Evaluation points.
    exclude_self : bool
        Leave-one-out mode; requires ``queries`` to be row-aligned with
        ``points`` and drops each row's own contribution.
    method : {'auto', 'sorted', 'dense'}
        'sorted' (prefix sums over the sorted line) is valid only for box
        kernels with d=1 and is the automatic choice there; 'dense' builds
        the weight matrix, chunking queries to bound memory.
    """

    def __init__(self, kernel, h, points, queries, *, exclude_self=False, method="auto"):
        if not h > 0:
            raise ValueError("h must be positive")
        points = np.asarray(points, dtype=float)
        queries = np.asarray(queries, dtype=float)
        if points.ndim != 2 or queries.ndim != 2 or points.shape[1] != queries.shape[1]:
            raise ValueError("points and queries must be 2-d with matching width")
        if exclude_self and points.shape != queries.shape:
            raise ValueError("exclude_self requires queries row-aligned with points")
        self.kernel = kernel
        self.h = float(h)
        self.points = points
        self.queries = queries
        self.m, self.d = points.shape
        self.q = queries.shape[0]
        self.exclude_self = exclude_self

        if method == "auto":
            method = "sorted" if (kernel.family == "box" and self.d == 1) else "dense"
        if method == "sorted" and (kernel.family != "box" or self.d != 1):
            raise ValueError("sorted method requires a box kernel in one dimension")
        self.method = method

        if method == "sorted":
            order = np.argsort(points[:, 0], kind="stable")
            sorted_pts = points[order, 0]
            radius = self.h * kernel.support_radius
            self._order = order
            self._lo = np.searchsorted(sorted_pts, queries[:, 0] - radius, side="left")
            self._hi = np.searchsorted(sorted_pts, queries[:, 0] + radius, side="right")
            counts = (self._hi - self._lo).astype(float)
            if exclude_self:
                counts = counts - 1.0  # own point always lies in its own window
            self._counts = counts
            self._dense = None
        else:
            cache = self.q * self.m <= DENSE_CACHE_ENTRIES
            self._dense = self._dense_matrix() if cache else None
            self._counts = self.sums(np.ones(self.m))

    def _dense_chunks(self):
        chunk = max(1, DENSE_CACHE_ENTRIES // max(self.m, 1))
        for start in range(0, self.q, chunk):
            stop = min(start + chunk, self.q)
            diff = (self.queries[start:stop, None, :] - self.points[None, :, :]) / self.h
            w = self.kernel(diff)
            if self.exclude_self:
                w[np.arange(stop - start), np.arange(start, stop)] = 0.0
            yield slice(start, stop), w

    def _dense_matrix(self):
        out = np.empty((self.q, self.m))
        for sl, w in self._dense_chunks():
            out[sl] = w
        return out

    @property
    def counts(self):
        """Unweighted sums ``sum_j K((q_i - p_j)/h)`` (self excluded in LOO mode)."""
        return self._counts

    def sums(self, weights):
        """Weighted sums for a weight vector ``(m,)`` or matrix ``(m, N)``."""
        w = np.asarray(weights, dtype=float)
        if w.shape[0] != self.m:
            raise ValueError("weights must align with points")
        if self.method == "sorted":
            ws = w[self._order]
            acc = np.zeros((self.m + 1,) + ws.shape[1:])
            np.cumsum(ws, axis=0, out=acc[1:])
            out = acc[self._hi] - acc[self._lo]
            if self.exclude_self:
                out = out - w  # box kernel value at the origin is 1
            return out
        if self._dense is not None:
            return self._dense @ w
        out = np.zeros((self.q,) + w.shape[1:])
        for sl, wk in self._dense_chunks():
            out[sl] = wk @ w
        return out
