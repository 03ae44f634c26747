"""Data model, synthetic generation, splitting, and CSV round-trip.

A dataset row is ``(x, y, delta)`` where ``delta = 0`` means the response is
missing; estimators only ever see ``(x, y*delta, delta)``.  Synthetic models
generate missingness through the odds mechanism

    pi(z, y) = 1 / (1 + exp{g(z)} * phi(y)),

with ``z`` the designated identifiability coordinates of ``x``.  Generation
returns the visible dataset together with a separate truth record (full
responses and realized selection probabilities) that is intended for
evaluation code only and is never reachable through the dataset itself.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

CSV_FLOAT_FORMAT = "%.17g"  # full round-trip precision


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Observation:
    """One sample: covariates, optional response, and the missingness flag."""

    x: np.ndarray
    y: Optional[float]
    delta: int

    def __post_init__(self):
        if self.delta not in (0, 1):
            raise ValueError("delta must be 0 or 1")
        if (self.y is None) != (self.delta == 0):
            raise ValueError("y must be present exactly when delta == 1")


@dataclass(frozen=True)
class Dataset:
    """Immutable sample of n observations in d covariate dimensions.

    ``y`` holds NaN wherever ``delta == 0``; ``z_coords`` are the 1-based
    covariate indices forming the designated part Z of X; ``L`` bounds every
    observed response: ``|y| <= L``.
    """

    x: np.ndarray
    y: np.ndarray
    delta: np.ndarray
    z_coords: tuple[int, ...]
    L: float

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        delta = np.asarray(self.delta)
        if x.ndim != 2:
            raise ValueError("x must have shape (n, d)")
        n, d = x.shape
        if y.shape != (n,) or delta.shape != (n,):
            raise ValueError("y and delta must have shape (n,)")
        if not np.isin(delta, (0, 1)).all():
            raise ValueError("delta entries must be 0 or 1")
        delta = delta.astype(np.int8)
        obs = delta == 1
        if np.isnan(y[obs]).any():
            raise ValueError("observed rows must carry a response")
        if not np.isnan(y[~obs]).all():
            raise ValueError("missing rows must not carry a response")
        if not self.L > 0:
            raise ValueError("L must be positive")
        if obs.any() and np.abs(y[obs]).max() > self.L:
            raise ValueError(f"observed |y| must not exceed L={self.L}")
        zc = tuple(int(j) for j in self.z_coords)
        if not zc or len(set(zc)) != len(zc) or any(j < 1 or j > d for j in zc):
            raise ValueError("z_coords must be a nonempty subset of 1..d")
        object.__setattr__(self, "x", _readonly(x))
        object.__setattr__(self, "y", _readonly(y))
        object.__setattr__(self, "delta", _readonly(delta))
        object.__setattr__(self, "z_coords", zc)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]

    @property
    def z(self) -> np.ndarray:
        """Covariate columns designated as Z (1-based ``z_coords``)."""
        idx = np.array(self.z_coords, dtype=int) - 1
        return self.x[:, idx]

    @property
    def y_safe(self) -> np.ndarray:
        """Responses with missing entries replaced by 0 (always masked by delta)."""
        return np.where(self.delta == 1, self.y, 0.0)

    @property
    def observations(self) -> tuple[Observation, ...]:
        return tuple(
            Observation(
                x=self.x[i],
                y=(float(self.y[i]) if self.delta[i] == 1 else None),
                delta=int(self.delta[i]),
            )
            for i in range(self.n)
        )

    @classmethod
    def from_observations(cls, observations: Sequence[Observation], z_coords, L) -> "Dataset":
        x = np.array([o.x for o in observations], dtype=float)
        y = np.array([np.nan if o.y is None else o.y for o in observations], dtype=float)
        delta = np.array([o.delta for o in observations])
        return cls(x=x, y=y, delta=delta, z_coords=tuple(z_coords), L=L)

    def complete_cases(self) -> "Dataset":
        """Sub-dataset of the fully observed rows."""
        keep = self.delta == 1
        return Dataset(
            x=self.x[keep], y=self.y[keep], delta=self.delta[keep],
            z_coords=self.z_coords, L=self.L,
        )

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx, dtype=int)
        return Dataset(
            x=self.x[idx], y=self.y[idx], delta=self.delta[idx],
            z_coords=self.z_coords, L=self.L,
        )


@dataclass(frozen=True)
class DataSplit:
    """Disjoint train/validation index sets covering ``0..n-1``.

    ``len(train) == floor(alpha * n)`` with both parts nonempty.  Indices are
    stored sorted so downstream sums run in a canonical row order.
    """

    n: int
    train: np.ndarray
    val: np.ndarray
    alpha: float

    def __post_init__(self):
        train = np.sort(np.asarray(self.train, dtype=np.int64))
        val = np.sort(np.asarray(self.val, dtype=np.int64))
        if len(train) == 0 or len(val) == 0:
            raise ValueError("both parts of the split must be nonempty")
        merged = np.concatenate([train, val])
        if len(merged) != self.n or not np.array_equal(np.sort(merged), np.arange(self.n)):
            raise ValueError("train and val must partition 0..n-1")
        if len(train) != math.floor(self.alpha * self.n):
            raise ValueError("train size must equal floor(alpha * n)")
        object.__setattr__(self, "train", _readonly(train))
        object.__setattr__(self, "val", _readonly(val))

    @classmethod
    def from_indices(cls, train, val) -> "DataSplit":
        train = np.asarray(train, dtype=np.int64)
        val = np.asarray(val, dtype=np.int64)
        n = len(train) + len(val)
        return cls(n=n, train=train, val=val, alpha=len(train) / n)


def split(dataset: Dataset, alpha: float, seed) -> DataSplit:
    """Uniformly random train/validation partition, deterministic in ``seed``."""
    n = dataset.n
    m = math.floor(alpha * n)
    if not 1 <= m <= n - 1:
        raise ValueError(f"alpha={alpha} leaves no usable split for n={n}")
    perm = np.random.default_rng(seed).permutation(n)
    return DataSplit(n=n, train=perm[:m], val=perm[m:], alpha=alpha)


@dataclass(frozen=True)
class TruthRecord:
    """Hidden generation record: full responses, regression values, and
    realized selection probabilities.  For evaluation only; estimators must
    never receive it."""

    y: np.ndarray
    m: np.ndarray
    pi: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "y", _readonly(self.y))
        object.__setattr__(self, "m", _readonly(self.m))
        object.__setattr__(self, "pi", _readonly(self.pi))


@dataclass(frozen=True)
class UniformBox:
    """Uniform covariate law on ``[low, high]^d`` (compact support, density
    bounded away from 0 and infinity)."""

    d: int
    low: float = 0.0
    high: float = 1.0

    def __post_init__(self):
        if not self.high > self.low:
            raise ValueError("high must exceed low")

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.uniform(self.low, self.high, size=(n, self.d))

    def grid(self, points_per_axis: int) -> np.ndarray:
        """Midpoint quadrature grid of shape (points_per_axis**d, d); d <= 2."""
        if self.d > 2:
            raise ValueError("deterministic grids are provided for d <= 2 only")
        edges = np.linspace(self.low, self.high, points_per_axis + 1)
        mids = 0.5 * (edges[:-1] + edges[1:])
        if self.d == 1:
            return mids[:, None]
        a, b = np.meshgrid(mids, mids, indexing="ij")
        return np.column_stack([a.ravel(), b.ravel()])


@dataclass(frozen=True)
class SyntheticModel:
    """Fully specified joint law used for generation and as evaluation oracle.

    ``m_true`` maps an ``(n, d)`` covariate array to regression values with
    analytic range ``[m_lo, m_hi]``; regression responses add uniform noise
    on ``[-noise_halfwidth, +noise_halfwidth]`` while classification draws
    labels ``Y ~ Bernoulli(m_true(X))``.  ``g_true`` acts on the Z columns
    only (``g_true=None`` means every response is observed) and ``phi_star``
    is the positive response factor of the missingness odds.  ``pi_min`` is
    the model's analytic infimum of the selection probability.
    """

    d: int
    z_coords: tuple[int, ...]
    L: float
    task: str
    m_true: Callable[[np.ndarray], np.ndarray]
    g_true: Optional[Callable[[np.ndarray], np.ndarray]]
    phi_star: Optional[Callable[[np.ndarray], np.ndarray]]
    noise_halfwidth: float
    m_lo: float
    m_hi: float
    pi_min: float
    covariate_law: UniformBox = field(default=None)  # type: ignore[assignment]
    bayes_risk: Optional[float] = None
    name: str = "custom"

    def __post_init__(self):
        if self.task not in ("regression", "classification"):
            raise ValueError("task must be 'regression' or 'classification'")
        zc = tuple(int(j) for j in self.z_coords)
        if not zc or any(j < 1 or j > self.d for j in zc):
            raise ValueError("z_coords must be a nonempty subset of 1..d")
        object.__setattr__(self, "z_coords", zc)
        if self.covariate_law is None:
            object.__setattr__(self, "covariate_law", UniformBox(self.d))
        if self.g_true is not None and self.phi_star is None:
            raise ValueError("phi_star is required when g_true is given")

    def z_of(self, x: np.ndarray) -> np.ndarray:
        idx = np.array(self.z_coords, dtype=int) - 1
        return np.asarray(x, dtype=float)[:, idx]

    def m(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(self.m_true(np.asarray(x, dtype=float)), dtype=float)

    def pi(self, z: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Selection probability ``1/(1 + exp{g(z)} phi(y))``; 1 when ``g_true`` is None."""
        y = np.asarray(y, dtype=float)
        if self.g_true is None:
            return np.ones(y.shape)
        g = np.asarray(self.g_true(np.asarray(z, dtype=float)), dtype=float)
        return 1.0 / (1.0 + np.exp(g) * np.asarray(self.phi_star(y), dtype=float))

    def sample_x(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return self.covariate_law.sample(rng, n)


def generate(model: SyntheticModel, n: int, seed) -> tuple[Dataset, TruthRecord]:
    """Draw ``n`` iid observations; returns the visible dataset and the truth.

    Rejects models whose analytic ``pi_min`` is nonpositive or whose noise
    can push the response outside ``[-L, L]``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not model.pi_min > 0:
        raise ValueError("model violates the positive-selection assumption (pi_min <= 0)")
    if model.task == "regression":
        a = model.noise_halfwidth
        if not a >= 0:
            raise ValueError("noise_halfwidth must be nonnegative")
        if model.m_lo - a < -model.L or model.m_hi + a > model.L:
            raise ValueError("regression response range exceeds [-L, L]")
    else:
        if model.m_lo < 0 or model.m_hi > 1:
            raise ValueError("classification requires m_true in [0, 1]")
        if model.L < 1:
            raise ValueError("classification labels need L >= 1")

    rng = np.random.default_rng(seed)
    x = model.sample_x(rng, n)
    m_vals = model.m(x)
    if model.task == "regression":
        y = m_vals + rng.uniform(-model.noise_halfwidth, model.noise_halfwidth, size=n)
    else:
        y = (rng.random(n) < m_vals).astype(float)
    pi = model.pi(model.z_of(x), y)
    delta = (rng.random(n) < pi).astype(np.int8)
    visible_y = np.where(delta == 1, y, np.nan)
    dataset = Dataset(x=x, y=visible_y, delta=delta, z_coords=model.z_coords, L=model.L)
    truth = TruthRecord(y=y, m=m_vals, pi=pi)
    return dataset, truth


# ---------------------------------------------------------------------------
# CSV round-trip.  Header: x1,...,xd,y,delta; y is empty when delta = 0.
# ---------------------------------------------------------------------------

def write_csv(dataset: Dataset, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([f"x{j + 1}" for j in range(dataset.d)] + ["y", "delta"])
        for i in range(dataset.n):
            row = [CSV_FLOAT_FORMAT % v for v in dataset.x[i]]
            row.append("" if dataset.delta[i] == 0 else CSV_FLOAT_FORMAT % dataset.y[i])
            row.append(str(int(dataset.delta[i])))
            writer.writerow(row)


class CsvFormatError(ValueError):
    """Raised when a dataset file violates the CSV schema."""


def read_csv(path, L: float, z_coords=None) -> Dataset:
    """Read a dataset written by :func:`write_csv`.

    ``L`` is the response bound to enforce; ``z_coords`` defaults to all
    covariate columns.  Malformed rows raise :class:`CsvFormatError` naming
    the offending line.
    """
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CsvFormatError(f"{path}: empty file") from None
        d = len(header) - 2
        expected = [f"x{j + 1}" for j in range(d)] + ["y", "delta"]
        if d < 1 or header != expected:
            raise CsvFormatError(f"{path}: bad header {header!r}")
        xs, ys, deltas = [], [], []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != d + 2:
                raise CsvFormatError(f"{path}:{lineno}: expected {d + 2} fields")
            try:
                xs.append([float(v) for v in row[:d]])
            except ValueError:
                raise CsvFormatError(f"{path}:{lineno}: bad covariate value") from None
            if row[d + 1] not in ("0", "1"):
                raise CsvFormatError(f"{path}:{lineno}: delta must be 0 or 1")
            delta = int(row[d + 1])
            y_field = row[d]
            if delta == 0:
                if y_field != "":
                    raise CsvFormatError(f"{path}:{lineno}: missing row carries a response")
                ys.append(np.nan)
            else:
                if y_field == "":
                    raise CsvFormatError(f"{path}:{lineno}: observed row lacks a response")
                try:
                    y = float(y_field)
                except ValueError:
                    raise CsvFormatError(f"{path}:{lineno}: bad response value") from None
                if abs(y) > L:
                    raise CsvFormatError(f"{path}:{lineno}: |y| exceeds L={L}")
                ys.append(y)
            deltas.append(delta)
    if z_coords is None:
        z_coords = tuple(range(1, d + 1))
    return Dataset(
        x=np.array(xs, dtype=float).reshape(len(xs), d),
        y=np.array(ys, dtype=float),
        delta=np.array(deltas),
        z_coords=tuple(z_coords),
        L=L,
    )


# ---------------------------------------------------------------------------
# Model presets used by the experiment harness and the test-bench.
# ---------------------------------------------------------------------------

def nmar_smooth_model() -> SyntheticModel:
    """d=1 regression benchmark: m(x) = 1.5x - 0.75 on U[0,1], uniform noise
    of halfwidth 0.22, missingness odds exp(z - 1/2) * e^y."""
    a = 0.22
    return SyntheticModel(
        d=1, z_coords=(1,), L=1.0, task="regression",
        m_true=lambda x: 1.5 * x[:, 0] - 0.75,
        g_true=lambda z: z[:, 0] - 0.5,
        phi_star=np.exp,
        noise_halfwidth=a, m_lo=-0.75, m_hi=0.75,
        pi_min=1.0 / (1.0 + math.exp(0.5) * math.exp(0.75 + a)),
        name="nmar_smooth",
    )


def mar_model() -> SyntheticModel:
    """Same regression law but with phi == 1: missingness depends on z only."""
    a = 0.22
    return SyntheticModel(
        d=1, z_coords=(1,), L=1.0, task="regression",
        m_true=lambda x: 1.5 * x[:, 0] - 0.75,
        g_true=lambda z: z[:, 0] - 0.5,
        phi_star=lambda y: np.ones(np.asarray(y, dtype=float).shape),
        noise_halfwidth=a, m_lo=-0.75, m_hi=0.75,
        pi_min=1.0 / (1.0 + math.exp(0.5)),
        name="mar",
    )


def fully_observed_model() -> SyntheticModel:
    """Every response observed (pi == 1); baseline for reduction checks."""
    a = 0.22
    return SyntheticModel(
        d=1, z_coords=(1,), L=1.0, task="regression",
        m_true=lambda x: 1.5 * x[:, 0] - 0.75,
        g_true=None, phi_star=None,
        noise_halfwidth=a, m_lo=-0.75, m_hi=0.75,
        pi_min=1.0,
        name="fully_observed",
    )


def linear_classification_model() -> SyntheticModel:
    """Classification with P(Y=1|X=x) = x on U[0,1]: Bayes risk 1/4, margin
    exponent 1; labels go missing with odds exp(z - 2) * e^y (roughly 29%
    of labels unobserved)."""
    return SyntheticModel(
        d=1, z_coords=(1,), L=1.0, task="classification",
        m_true=lambda x: x[:, 0],
        g_true=lambda z: z[:, 0] - 2.0,
        phi_star=np.exp,
        noise_halfwidth=0.0, m_lo=0.0, m_hi=1.0,
        pi_min=1.0 / (1.0 + math.exp(-1.0) * math.e),
        bayes_risk=0.25,
        name="linear_class",
    )


def cubic_classification_model() -> SyntheticModel:
    """Classification with P(Y=1|X=x) = 1/2 + 4(x-1/2)^3: Bayes risk 3/8,
    margin exponent 1/3."""
    return SyntheticModel(
        d=1, z_coords=(1,), L=1.0, task="classification",
        m_true=lambda x: 0.5 + 4.0 * (x[:, 0] - 0.5) ** 3,
        g_true=lambda z: z[:, 0] - 2.0,
        phi_star=np.exp,
        noise_halfwidth=0.0, m_lo=0.0, m_hi=1.0,
        pi_min=1.0 / (1.0 + math.exp(-1.0) * math.e),
        bayes_risk=0.375,
        name="cubic_class",
    )


def majority_classification_model() -> SyntheticModel:
    """Classification with P(Y=1|X=x) = 0.7 + 0.25x (positive labels dominate
    everywhere); a regime where the response-factor search separates sharply."""
    return SyntheticModel(
        d=1, z_coords=(1,), L=1.0, task="classification",
        m_true=lambda x: 0.7 + 0.25 * x[:, 0],
        g_true=lambda z: z[:, 0] - 0.5,
        phi_star=np.exp,
        noise_halfwidth=0.0, m_lo=0.7, m_hi=0.95,
        pi_min=1.0 / (1.0 + math.exp(0.5) * math.e),
        bayes_risk=None,
        name="majority_class",
    )


MODEL_PRESETS = {
    "nmar_smooth": nmar_smooth_model,
    "mar": mar_model,
    "fully_observed": fully_observed_model,
    "linear_class": linear_classification_model,
    "cubic_class": cubic_classification_model,
    "majority_class": majority_classification_model,
}
