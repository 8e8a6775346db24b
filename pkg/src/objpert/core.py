"""Datasets, 0/1 losses, discrete/continuous parameter spaces and the sphere lift.

Losses follow the sign-disagreement convention ``l(w) = 1[y != sgn(<x, w>)]``
with ``sgn(0) = -1``: a zero margin counts as an error for positive labels and
as correct for negative ones. An example may carry a threshold ``offset`` ``b``,
in which case the margin is ``<x, w> - b``; data examples use ``b = 0`` and
thresholds exist for separator probes.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence

import numpy as np

ENUMERATION_CAP = 2_000_000

# relative slack for ball membership and for the sphere lift at the boundary
_BALL_RTOL = 1e-12
_LIFT_CLAMP = 1e-9


class SpaceTooLargeError(ValueError):
    """Raised when a discrete space exceeds the enumeration cap."""


@dataclass(frozen=True)
class LabeledExample:
    x: tuple[float, ...]
    y: int
    offset: float = 0.0

    def __post_init__(self):
        x = tuple(float(v) for v in self.x)
        if not all(math.isfinite(v) for v in x) or not math.isfinite(self.offset):
            raise ValueError("features must be finite")
        if self.y not in (-1, 1):
            raise ValueError(f"label must be -1 or +1, got {self.y!r}")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", int(self.y))
        object.__setattr__(self, "offset", float(self.offset))

    @property
    def dim(self) -> int:
        return len(self.x)


@dataclass(frozen=True)
class LossClassSpec:
    """Lipschitz constant and value range of a loss family."""

    lipschitz: float
    value_lo: float = 0.0
    value_hi: float = 1.0

    def __post_init__(self):
        if not self.lipschitz > 0:
            raise ValueError("lipschitz constant must be positive")
        if self.value_lo > self.value_hi:
            raise ValueError("value_lo must not exceed value_hi")

    @classmethod
    def zero_one(cls, tau: float) -> "LossClassSpec":
        # distinct grid points are >= tau apart, so a {0,1}-valued loss is 1/tau-Lipschitz
        return cls(lipschitz=1.0 / tau)


@dataclass(frozen=True)
class PrivacyBudget:
    epsilon: float
    delta: float

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be > 0, got {self.epsilon}")
        if not 0 < self.delta < 1:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")


def _sq_norm_ok(sq_norm, radius: float):
    r2 = radius * radius
    return sq_norm <= r2 * (1 + _BALL_RTOL) + _BALL_RTOL


@dataclass(frozen=True)
class DiscreteSpace:
    """The grid ``{w : w_j in tau*Z, |w_j| <= B, ||w||_2 <= D}``."""

    dim: int
    tau: float
    bound: float
    radius: float

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dimension must be positive")
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        if self.bound < 0:
            raise ValueError("coordinate bound must be nonnegative")
        if not self.radius > 0:
            raise ValueError("radius must be positive")

    @classmethod
    def integer_grid(cls, d: int) -> "DiscreteSpace":
        """tau = 1, B = floor(sqrt(d)), D = sqrt(d)."""
        return cls(dim=d, tau=1.0, bound=float(math.isqrt(d)), radius=math.sqrt(d))

    @classmethod
    def sign_cube(cls, d: int) -> "DiscreteSpace":
        """``{-1, 0, 1}^d`` with an inactive ball constraint."""
        return cls(dim=d, tau=1.0, bound=1.0, radius=math.sqrt(d))

    @property
    def steps(self) -> int:
        """Largest integer k with k*tau <= B."""
        return int(math.floor(self.bound / self.tau + 1e-9))

    def coordinate_values(self) -> np.ndarray:
        k = self.steps
        return self.tau * np.arange(-k, k + 1, dtype=float)

    @property
    def box_size(self) -> int:
        return (2 * self.steps + 1) ** self.dim

    @property
    def ball_active(self) -> bool:
        return not _sq_norm_ok(self.dim * (self.steps * self.tau) ** 2, self.radius)

    def contains(self, w) -> bool:
        w = np.asarray(w, dtype=float)
        if w.shape != (self.dim,):
            return False
        k = w / self.tau
        if not np.all(np.abs(k - np.round(k)) <= 1e-9):
            return False
        if np.any(np.abs(np.round(k)) > self.steps):
            return False
        return bool(_sq_norm_ok(float(w @ w), self.radius))

    def points(self, cap: int = ENUMERATION_CAP) -> np.ndarray:
        """All members as an ``(N, d)`` array in lexicographic order."""
        if self.box_size > cap:
            raise SpaceTooLargeError(
                f"grid has {self.box_size} candidate points (cap {cap}); "
                "use the branch-and-bound oracle instead"
            )
        vals = self.coordinate_values()
        mesh = np.meshgrid(*([vals] * self.dim), indexing="ij")
        grid = np.stack([m.ravel() for m in mesh], axis=1)
        keep = _sq_norm_ok(np.einsum("ij,ij->i", grid, grid), self.radius)
        return grid[keep]


def enumerate_space(space: DiscreteSpace, cap: int = ENUMERATION_CAP) -> Iterator[np.ndarray]:
    """Yield every member of ``space`` once, lexicographically."""
    yield from space.points(cap)


@dataclass(frozen=True)
class ContinuousSpace:
    """Axis-aligned box with its l2 and l-infinity diameters."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lower)
        hi = tuple(float(v) for v in self.upper)
        if len(lo) != len(hi) or not lo:
            raise ValueError("lower/upper must be nonempty and of equal length")
        if any(h <= l for l, h in zip(lo, hi)):
            raise ValueError("box must have positive width in every coordinate")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def cube(cls, d: int, half_width: float) -> "ContinuousSpace":
        return cls((-half_width,) * d, (half_width,) * d)

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def widths(self) -> np.ndarray:
        return np.asarray(self.upper) - np.asarray(self.lower)

    @property
    def diameter_linf(self) -> float:
        return float(self.widths.max())

    @property
    def diameter_l2(self) -> float:
        return float(np.linalg.norm(self.widths))

    def clamp(self, w) -> np.ndarray:
        return np.clip(np.asarray(w, dtype=float), self.lower, self.upper)


def ordered_dot(A, B, start=None) -> np.ndarray:
    """``start + A @ B.T`` summed left to right over the shared axis.

    The fixed order makes each entry independent of how many rows are
    evaluated together, so batched and one-at-a-time evaluations tie-break
    identically.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.atleast_2d(np.asarray(B, dtype=float))
    out = np.zeros((A.shape[0], B.shape[0])) if start is None else np.array(start, dtype=float)
    for k in range(A.shape[1]):
        out += A[:, k, None] * B[None, :, k]
    return out


def ordered_weighted_sum(weights, M) -> np.ndarray:
    """``weights @ M`` accumulated row by row (see :func:`ordered_dot`)."""
    weights = np.asarray(weights, dtype=float)
    out = np.zeros(M.shape[1])
    for i, p in enumerate(weights):
        out += p * M[i]
    return out


def zero_one_margin_loss(margins, labels) -> np.ndarray:
    """Elementwise 0/1 loss from margins ``<x, w>`` and labels (broadcasting)."""
    margins = np.asarray(margins)
    labels = np.asarray(labels)
    return np.where(labels > 0, margins <= 0, margins > 0).astype(np.int64)


class Dataset:
    """An ordered multiset of labeled examples backed by arrays."""

    def __init__(self, X, y, offsets=None):
        X = np.array(X, dtype=float)
        y = np.array(y)
        b = np.zeros(X.shape[0] if X.ndim == 2 else 0) if offsets is None else np.array(offsets, dtype=float)
        if X.ndim != 2:
            raise ValueError("features must be a 2-D array")
        if y.shape != (X.shape[0],):
            raise ValueError("label vector length must match the number of rows")
        if not np.all(np.isfinite(X)):
            raise ValueError("features must be finite")
        if not np.all(np.isin(y, (-1, 1))):
            raise ValueError("labels must be -1 or +1")
        if b.shape != y.shape or not np.all(np.isfinite(b)):
            raise ValueError("offsets must be finite, one per example")
        self.X = X
        self.y = y.astype(np.int64)
        self.offsets = b
        for arr in (self.X, self.y, self.offsets):
            arr.setflags(write=False)

    @classmethod
    def from_examples(cls, examples: Sequence[LabeledExample], dim: int | None = None) -> "Dataset":
        if not examples:
            if dim is None:
                raise ValueError("dimension is required for an empty dataset")
            return cls(np.zeros((0, dim)), np.zeros(0, dtype=np.int64))
        dims = {e.dim for e in examples}
        if len(dims) != 1:
            raise ValueError("examples have inconsistent dimensions")
        return cls([e.x for e in examples], [e.y for e in examples], [e.offset for e in examples])

    def __len__(self) -> int:
        return self.X.shape[0]

    @property
    def n(self) -> int:
        return len(self)

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    def __iter__(self) -> Iterator[LabeledExample]:
        for i in range(self.n):
            yield self[i]

    def __getitem__(self, i: int) -> LabeledExample:
        return LabeledExample(tuple(self.X[i]), int(self.y[i]), float(self.offsets[i]))

    @property
    def homogeneous(self) -> bool:
        """True when no example carries a threshold."""
        return not np.any(self.offsets)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.X.shape == other.X.shape
            and np.array_equal(self.X, other.X)
            and np.array_equal(self.y, other.y)
            and np.array_equal(self.offsets, other.offsets)
        )

    def __repr__(self) -> str:
        return f"Dataset(n={self.n}, d={self.dim})"

    @property
    def max_feature_norm(self) -> float:
        if self.n == 0:
            return 0.0
        return float(np.linalg.norm(self.X, axis=1).max())

    @property
    def max_abs_offset(self) -> float:
        return float(np.abs(self.offsets).max()) if self.n else 0.0

    def neighbor(self, i: int, example: LabeledExample) -> "Dataset":
        """Copy of the dataset with row ``i`` replaced."""
        if example.dim != self.dim:
            raise ValueError("replacement example has the wrong dimension")
        X = self.X.copy()
        y = self.y.copy()
        b = self.offsets.copy()
        X[i] = example.x
        y[i] = example.y
        b[i] = example.offset
        return Dataset(X, y, b)

    def differing_indices(self, other: "Dataset") -> list[int]:
        if self.X.shape != other.X.shape:
            raise ValueError("datasets have different shapes")
        rows = np.any(self.X != other.X, axis=1) | (self.y != other.y) | (self.offsets != other.offsets)
        return [int(i) for i in np.flatnonzero(rows)]

    def concat(self, other: "Dataset") -> "Dataset":
        return Dataset(
            np.vstack([self.X, other.X]),
            np.concatenate([self.y, other.y]),
            np.concatenate([self.offsets, other.offsets]),
        )

    def loss_matrix(self, W) -> np.ndarray:
        """``(n, N)`` matrix of per-example losses at each row of ``W``."""
        W = np.atleast_2d(np.asarray(W, dtype=float))
        if W.shape[1] != self.dim:
            raise ValueError(f"parameter dimension {W.shape[1]} != feature dimension {self.dim}")
        margins = ordered_dot(self.X, W, start=np.broadcast_to(-self.offsets[:, None], (self.n, W.shape[0])))
        return zero_one_margin_loss(margins, self.y[:, None])

    def total_loss(self, W, weights=None, chunk: int = 4096) -> np.ndarray:
        """``L(D, w)`` (optionally weighted) for every row of ``W``."""
        W = np.atleast_2d(np.asarray(W, dtype=float))
        out = np.empty(W.shape[0], dtype=float if weights is not None else np.int64)
        for start in range(0, W.shape[0], chunk):
            block = self.loss_matrix(W[start:start + chunk])
            if weights is None:
                out[start:start + chunk] = block.sum(axis=0)
            else:
                out[start:start + chunk] = ordered_weighted_sum(weights, block)
        return out


@dataclass
class FunctionalDataset:
    """A dataset of arbitrary loss callables sharing one :class:`LossClassSpec`."""

    losses: list[Callable[[np.ndarray], float]]
    spec: LossClassSpec = field(default_factory=lambda: LossClassSpec(1.0))

    def __len__(self) -> int:
        return len(self.losses)

    def loss_matrix(self, W) -> np.ndarray:
        W = np.atleast_2d(np.asarray(W, dtype=float))
        return np.array([[float(l(w)) for w in W] for l in self.losses]).reshape(len(self.losses), len(W))

    def total_loss(self, W, weights=None) -> np.ndarray:
        M = self.loss_matrix(W)
        if weights is None:
            return M.sum(axis=0)
        return ordered_weighted_sum(weights, M)

    def neighbor(self, i: int, loss) -> "FunctionalDataset":
        losses = list(self.losses)
        losses[i] = loss
        return FunctionalDataset(losses, self.spec)


def _check_dim(x, w):
    x = np.asarray(x, dtype=float)
    w = np.asarray(w, dtype=float)
    if x.shape != w.shape:
        raise ValueError(f"dimension mismatch: x has shape {x.shape}, w has shape {w.shape}")
    return x, w


def zero_one_loss(example: LabeledExample, w) -> int:
    x, w = _check_dim(example.x, w)
    return int(zero_one_margin_loss(float(x @ w) - example.offset, example.y))


def dataset_loss(dataset, w) -> float:
    w = np.asarray(w, dtype=float)
    if isinstance(dataset, Dataset) and w.shape != (dataset.dim,):
        raise ValueError(f"dimension mismatch: w has shape {w.shape}, data has d={dataset.dim}")
    value = dataset.total_loss(w[None, :])[0]
    return int(value) if isinstance(dataset, Dataset) else float(value)


def project(w, radius: float) -> np.ndarray:
    """Lift ``w`` from the radius-``D`` ball onto the unit sphere in one more dimension.

    Returns ``(w_1, ..., w_d, D*sqrt(1 - ||w||^2/D^2)) / D``. Works row-wise on
    2-D input.
    """
    if not radius > 0:
        raise ValueError("radius must be positive")
    w = np.asarray(w, dtype=float)
    sq = np.zeros(w.shape[:-1])
    for k in range(w.shape[-1]):
        sq = sq + w[..., k] * w[..., k]
    slack = 1.0 - sq / (radius * radius)
    if np.any(slack < -_LIFT_CLAMP):
        raise ValueError(f"point lies outside the ball of radius {radius}")
    last = np.sqrt(np.maximum(slack, 0.0))
    return np.concatenate([w / radius, last[..., None]], axis=-1)


def perturbed_loss(dataset, w, eta) -> float:
    w = np.asarray(w, dtype=float)
    eta = np.asarray(eta, dtype=float)
    if eta.shape != w.shape:
        raise ValueError("perturbation must have the same dimension as w")
    return (dataset_loss(dataset, w) - float(ordered_dot(w, eta)[0, 0])) / len(dataset)


def perturbed_normalized_loss(dataset, w, eta, space: DiscreteSpace) -> float:
    w = np.asarray(w, dtype=float)
    eta = np.asarray(eta, dtype=float)
    if not space.contains(w):
        raise ValueError(f"{w.tolist()} is not a member of the parameter space")
    if eta.shape != (space.dim + 1,):
        raise ValueError("perturbation must have dimension d + 1")
    lifted = project(w, space.radius)
    return (dataset_loss(dataset, w) - float(ordered_dot(lifted, eta)[0, 0])) / len(dataset)


def is_lex_sorted(points: np.ndarray) -> bool:
    rows = [tuple(p) for p in points]
    return all(a < b for a, b in itertools.pairwise(rows))
