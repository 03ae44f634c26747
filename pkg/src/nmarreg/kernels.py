"""Regular kernel families and bandwidth policies.

A kernel here is nonnegative, radial, and bounded below by ``b`` on the ball
of radius ``r`` centered at the origin.  Only compactly supported (or
truncated) families ship, so the integrability of the supremum envelope is
automatic and the regularity pair ``(b, r)`` is analytic per family.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

FAMILIES = ("box", "triangle", "truncated_gaussian")

# Truncation radius of the Gaussian family, in units of sigma.
GAUSSIAN_TRUNCATION = 3.0


@dataclass(frozen=True)
class KernelSpec:
    """A regular kernel family with its regularity parameters.

    Families (all radial, peak value 1 at the origin):

    - ``box``: 1 on the unit ball, 0 outside; (b, r) = (1, 1).
    - ``triangle``: max(0, 1 - ||u||); (b, r) = (1/2, 1/2).
    - ``truncated_gaussian``: exp(-||u||^2 / (2 sigma^2)) truncated at
      radius 3*sigma; (b, r) = (exp(-1/2), sigma).
    """

    family: str
    sigma: float = 1.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}")
        if self.family == "truncated_gaussian" and not self.sigma > 0:
            raise ValueError("sigma must be positive")

    @property
    def support_radius(self) -> float:
        """Radius beyond which the kernel vanishes identically."""
        if self.family == "truncated_gaussian":
            return GAUSSIAN_TRUNCATION * self.sigma
        return 1.0

    @property
    def r(self) -> float:
        """Radius of the ball on which ``K >= b`` holds."""
        if self.family == "box":
            return 1.0
        if self.family == "triangle":
            return 0.5
        return self.sigma

    @property
    def b(self) -> float:
        """Analytic lower bound of the kernel on the ball of radius ``r``."""
        if self.family == "box":
            return 1.0
        if self.family == "triangle":
            return 0.5
        return float(np.exp(-0.5))

    def __call__(self, u):
        """Evaluate the kernel.

        ``u`` is a single point (scalar or shape ``(d,)``) or a batch whose
        last axis is the coordinate axis (shape ``(..., d)``).  Returns a
        float for a single point, an array otherwise.
        """
        u = np.asarray(u, dtype=float)
        single = u.ndim <= 1
        if u.ndim == 0:
            nrm = np.abs(u)
        elif u.ndim == 1:
            nrm = np.sqrt(np.dot(u, u))
        else:
            nrm = np.sqrt(np.sum(u * u, axis=-1))
        if self.family == "box":
            val = (nrm <= 1.0).astype(float)
        elif self.family == "triangle":
            val = np.maximum(0.0, 1.0 - nrm)
        else:
            s = self.sigma
            val = np.exp(-(nrm * nrm) / (2.0 * s * s)) * (nrm <= GAUSSIAN_TRUNCATION * s)
        return float(val) if single else val


def box_kernel() -> KernelSpec:
    return KernelSpec("box")


def triangle_kernel() -> KernelSpec:
    return KernelSpec("triangle")


def truncated_gaussian_kernel(sigma: float = 1.0) -> KernelSpec:
    return KernelSpec("truncated_gaussian", sigma=sigma)


@dataclass(frozen=True)
class BandwidthPolicy:
    """Bandwidth rule ``h(n)``.

    ``fixed`` returns ``h0`` for every sample size.  ``power_rule`` returns
    ``h0 * n**(-beta)`` and requires ``0 < beta < 1/d`` so that ``h -> 0``
    while ``n * h^d -> infinity``.  ``beta=None`` resolves to the classical
    ``1/(d+4)`` at evaluation time.
    """

    mode: str
    h0: float = 1.0
    beta: float | None = None

    def __post_init__(self):
        if self.mode not in ("fixed", "power_rule"):
            raise ValueError(f"unknown bandwidth mode {self.mode!r}")
        if not self.h0 > 0:
            raise ValueError("h0 must be positive")

    def bandwidth(self, n: int, d: int) -> float:
        if n < 1:
            raise ValueError("n must be >= 1")
        if d < 1:
            raise ValueError("d must be >= 1")
        if self.mode == "fixed":
            return self.h0
        beta = 1.0 / (d + 4) if self.beta is None else self.beta
        if not 0.0 < beta * d < 1.0:
            raise ValueError(
                f"power_rule requires 0 < beta*d < 1, got beta={beta}, d={d}"
            )
        return float(self.h0 * n ** (-beta))


def bandwidth(policy: BandwidthPolicy, n: int, d: int) -> float:
    """Evaluate a bandwidth policy at sample size ``n`` in dimension ``d``."""
    return policy.bandwidth(n, d)
