"""Finite sup-norm covers of totally bounded classes of positive functions.

The workhorse is the exponential family ``phi(y) = exp(gamma * y)`` with
``|gamma| <= M`` on ``|y| <= L``: a gamma grid of spacing
``2*eps / (L * exp(M*L))`` extended by the endpoints ``{-M, M}`` is an
eps-cover, and the covering number is bounded by
``2 * floor(M*L*exp(M*L)/eps) + 3``.  Grid values falling outside
``[-M, M]`` are clamped back in and deduplicated: projection onto the
interval never increases the distance to a target inside it, so the covering
property survives while every member stays inside the class.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

# Dense construction-time grid for positivity/boundedness checks.
CHECK_GRID_POINTS = 10_000
_BOUND_SLACK = 1.0 + 1e-12


@dataclass(frozen=True)
class PhiFunction:
    """A member function ``[-L, L] -> (0, B]``.

    Positivity and the upper bound are verified on a dense grid at
    construction time.  ``gamma`` is set for exponential-family members and
    drives deterministic ordering and reporting.
    """

    fn: Callable[[np.ndarray], np.ndarray]
    tag: str
    L: float
    B: float
    gamma: Optional[float] = None

    def __post_init__(self):
        if not (self.L > 0 and self.B > 0):
            raise ValueError("L and B must be positive")
        grid = np.linspace(-self.L, self.L, CHECK_GRID_POINTS)
        vals = np.asarray(self.fn(grid), dtype=float)
        if vals.shape != grid.shape:
            raise ValueError(f"{self.tag}: function must evaluate elementwise")
        if not np.all(vals > 0):
            raise ValueError(f"{self.tag}: function must be strictly positive on [-L, L]")
        if vals.max() > self.B * _BOUND_SLACK:
            raise ValueError(f"{self.tag}: function exceeds the class bound B={self.B}")

    def __call__(self, y):
        return np.asarray(self.fn(np.asarray(y, dtype=float)), dtype=float)


def exp_phi(gamma: float, L: float, B: Optional[float] = None) -> PhiFunction:
    """Exponential-family member ``y -> exp(gamma * y)``."""
    g = float(gamma)
    if B is None:
        B = math.exp(abs(g) * L)
    return PhiFunction(
        fn=lambda y, _g=g: np.exp(_g * y),
        tag=f"exp({g:.12g}*y)",
        L=L, B=B, gamma=g,
    )


def constant_phi(c: float, L: float, B: Optional[float] = None) -> PhiFunction:
    """Constant member ``y -> c`` with ``c > 0``."""
    c = float(c)
    return PhiFunction(
        fn=lambda y, _c=c: np.full(np.shape(y), _c),
        tag=f"const({c:.12g})",
        L=L, B=c if B is None else B,
    )


@dataclass(frozen=True)
class PhiCover:
    """A finite eps-cover: ordered members, the covering radius, and a
    description of the covered class."""

    members: tuple[PhiFunction, ...]
    epsilon: float
    class_spec: str

    def __post_init__(self):
        if not self.members:
            raise ValueError("a cover needs at least one member")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        object.__setattr__(self, "members", tuple(self.members))

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self):
        return iter(self.members)

    @property
    def gammas(self) -> np.ndarray:
        """Exponent grid for exponential covers (NaN for non-exp members)."""
        return np.array(
            [np.nan if m.gamma is None else m.gamma for m in self.members], dtype=float
        )


def covering_number_bound(M: float, L: float, epsilon: float) -> int:
    """Upper bound ``2*floor(M*L*exp(M*L)/eps) + 3`` on the covering number of
    the exponential class."""
    if not (M > 0 and L > 0 and epsilon > 0):
        raise ValueError("M, L, epsilon must be positive")
    return 2 * math.floor(M * L * math.exp(M * L) / epsilon) + 3


def build_exp_cover(M: float, L: float, epsilon: float) -> PhiCover:
    """Eps-cover of ``{exp(gamma*y) : |gamma| <= M}`` on ``|y| <= L``.

    The raw grid ``{2*i*eps/(L*e^{ML}) : |i| <= floor(M*L*e^{ML}/eps)}``
    plus the endpoints is clamped into ``[-M, M]``, deduplicated, and sorted
    ascending (the deterministic order downstream tie-breaks rely on).
    """
    if not (M > 0 and L > 0 and epsilon > 0):
        raise ValueError("M, L, epsilon must be positive")
    scale = L * math.exp(M * L)
    i_max = math.floor(M * scale / epsilon)
    spacing = 2.0 * epsilon / scale
    raw = spacing * np.arange(-i_max, i_max + 1, dtype=float)
    raw = np.concatenate([raw, [-M, M]])
    gammas = np.unique(np.clip(raw, -M, M))
    B = math.exp(M * L)
    members = tuple(exp_phi(g, L, B=B) for g in gammas)
    return PhiCover(
        members=members,
        epsilon=epsilon,
        class_spec=f"exp(gamma*y), |gamma| <= {M:g}, |y| <= {L:g}",
    )


def build_tabulated_cover(
    factory: Callable[..., PhiFunction],
    param_grids: Sequence[np.ndarray],
    epsilon: float,
    class_spec: str = "tabulated",
) -> PhiCover:
    """Generic cover over a uniform grid in parameter space.

    ``factory(*params)`` must return a :class:`PhiFunction`; members are laid
    out in lexicographic grid order (declaration order for tie-breaks).  The
    claimed radius ``epsilon`` should be vetted with :func:`validate_cover`.
    """
    grids = [np.asarray(g, dtype=float) for g in param_grids]
    members = []
    for idx in np.ndindex(*(len(g) for g in grids)):
        params = tuple(grids[k][i] for k, i in enumerate(idx))
        members.append(factory(*params))
    return PhiCover(members=tuple(members), epsilon=epsilon, class_spec=class_spec)


def uniform_grid(low: float, high: float, count: int) -> np.ndarray:
    """Uniform parameter grid including both endpoints."""
    if count < 1:
        raise ValueError("count must be >= 1")
    if count == 1:
        return np.array([(low + high) / 2.0])
    return np.linspace(low, high, count)


@dataclass(frozen=True)
class CoverValidation:
    """Outcome of a cover check: worst sup-norm gap over the sampled class
    members, and where it occurred."""

    ok: bool
    epsilon: float
    max_distance: float
    worst_sample_tag: str
    worst_y: float


def validate_cover(
    cover: PhiCover,
    class_sample: Sequence[PhiFunction],
    y_grid_size: int = 1000,
) -> CoverValidation:
    """Check that every sampled class member sits within ``cover.epsilon`` of
    some cover member in sup-norm (approximated on a uniform y-grid)."""
    if y_grid_size < 100:
        raise ValueError("y_grid_size must be >= 100")
    if not class_sample:
        raise ValueError("class_sample must be nonempty")
    L = cover.members[0].L
    y = np.linspace(-L, L, y_grid_size)
    member_vals = np.stack([m(y) for m in cover.members])  # (N, G)
    worst = -1.0
    worst_tag = ""
    worst_y = 0.0
    for sample in class_sample:
        sv = sample(y)
        gaps = np.abs(member_vals - sv[None, :])  # (N, G)
        sup_per_member = gaps.max(axis=1)
        j = int(np.argmin(sup_per_member))
        dist = float(sup_per_member[j])
        if dist > worst:
            worst = dist
            worst_tag = sample.tag
            worst_y = float(y[int(np.argmax(gaps[j]))])
    return CoverValidation(
        ok=worst <= cover.epsilon,
        epsilon=cover.epsilon,
        max_distance=worst,
        worst_sample_tag=worst_tag,
        worst_y=worst_y,
    )


def epsilon_schedule(mode: str, n: int, fixed: Optional[float] = None, power: float = 0.5) -> float:
    """Covering radius for sample size ``n``: a constant, or ``n**(-power)``."""
    if mode == "fixed":
        if fixed is None or not fixed > 0:
            raise ValueError("fixed epsilon must be a positive number")
        return float(fixed)
    if mode == "n_power":
        if not power > 0:
            raise ValueError("power must be positive")
        return float(n) ** (-power)
    raise ValueError(f"unknown epsilon mode {mode!r}")
