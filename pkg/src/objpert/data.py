"""CSV ingestion with one-hot encoding and class balancing, plus synthetic halfspace data."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from .core import Dataset, DiscreteSpace, dataset_loss


class IngestError(ValueError):
    """The CSV does not match the requested schema."""


@dataclass
class IngestSpec:
    path: str | Path
    label_column: str
    positive_label: str
    categorical: list[str] = field(default_factory=list)
    numeric: list[str] = field(default_factory=list)
    balance: bool = False
    features: list[str] | None = None
    seed: int = 0


@dataclass
class IngestResult:
    dataset: Dataset
    feature_names: list[str]
    source_rows: list[int]

    @property
    def dim(self) -> int:
        return len(self.feature_names)


def _parse_float(column: str, values: pd.Series) -> np.ndarray:
    out = np.empty(len(values))
    for i, v in enumerate(values):
        try:
            out[i] = float(v)
        except ValueError:
            raise IngestError(f"row {i}: column {column!r} has non-numeric value {v!r}") from None
        if not math.isfinite(out[i]):
            raise IngestError(f"row {i}: column {column!r} is not finite")
    return out


def ingest_csv(spec: IngestSpec) -> IngestResult:
    """Load, one-hot encode and optionally balance a labeled CSV.

    Categorical levels are one-hot encoded in sorted order and named
    ``column=level``. Feature columns keep their order in the file. With
    ``balance`` the minority class is kept whole and the majority class is
    subsampled (seeded) to the same size, preserving file order. Row numbers
    in errors count data rows from 0.
    """
    try:
        df = pd.read_csv(spec.path, dtype=str, keep_default_na=False, skipinitialspace=True)
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as exc:
        raise IngestError(f"cannot read {spec.path}: {exc}") from exc
    df.columns = [c.strip() for c in df.columns]
    categorical, numeric = list(spec.categorical), list(spec.numeric)
    if not categorical and not numeric:
        numeric = [c for c in df.columns if c != spec.label_column]
    if spec.features is not None:
        wanted = set(spec.features)
        unknown = wanted - set(categorical) - set(numeric)
        if unknown:
            raise IngestError(f"feature subset names undeclared columns: {sorted(unknown)}")
        categorical = [c for c in categorical if c in wanted]
        numeric = [c for c in numeric if c in wanted]
    missing = [c for c in [spec.label_column, *categorical, *numeric] if c not in df.columns]
    if missing:
        raise IngestError(f"missing columns: {missing}")

    labels = df[spec.label_column].str.strip()
    y = np.where(labels == str(spec.positive_label).strip(), 1, -1)
    if not (y > 0).any() or not (y < 0).any():
        raise IngestError("both classes must be present")

    blocks, names = [], []
    for col in df.columns:
        if col in numeric:
            blocks.append(_parse_float(col, df[col])[:, None])
            names.append(col)
        elif col in categorical:
            values = df[col].str.strip()
            levels = sorted(values.unique())
            blocks.append(np.column_stack([(values == lv).to_numpy(float) for lv in levels]))
            names += [f"{col}={lv}" for lv in levels]
    X = np.hstack(blocks) if blocks else np.zeros((len(df), 0))

    rows = np.arange(len(df))
    if spec.balance:
        pos, neg = rows[y > 0], rows[y < 0]
        small, big = (pos, neg) if len(pos) <= len(neg) else (neg, pos)
        gen = np.random.default_rng(spec.seed)
        keep = np.sort(np.concatenate([small, gen.choice(big, size=len(small), replace=False)]))
        rows = keep
    return IngestResult(Dataset(X[rows], y[rows]), names, [int(r) for r in rows])


def write_csv(dataset: Dataset, path: str | Path, feature_names: list[str] | None = None) -> Path:
    """Write features (default names ``x0..x{d-1}``, round-trip float repr) and the label as ``y``."""
    path = Path(path)
    names = feature_names or [f"x{j}" for j in range(dataset.dim)]
    with path.open("w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(list(names) + ["y"])
        for xi, yi in zip(dataset.X, dataset.y):
            out.writerow([repr(float(v)) for v in xi] + [int(yi)])
    return path


def read_written_csv(path: str | Path) -> Dataset:
    """Re-ingest a file produced by :func:`write_csv`."""
    return ingest_csv(IngestSpec(path, "y", "1")).dataset


@dataclass
class SynthResult:
    dataset: Dataset
    w_star: np.ndarray
    planted_loss: int


def synth_halfspace(
    n: int,
    d: int,
    margin: float = 0.0,
    label_noise_rate: float = 0.0,
    seed: int = 0,
    space: DiscreteSpace | None = None,
    max_attempts: int | None = None,
) -> SynthResult:
    """Points uniform on the unit sphere, labeled by a planted nonzero grid vector.

    ``w*`` is drawn uniformly from the nonzero members of ``space`` (the
    ``tau = 1``, ``B = floor(sqrt(d))`` grid by default). Points whose
    normalized margin ``|<x, w*>| / ||w*||`` is below ``margin`` are rejected.
    Each label is then flipped independently with probability ``label_noise_rate``.
    """
    if n < 1 or d < 1:
        raise ValueError("n and d must be positive")
    if margin < 0:
        raise ValueError("margin must be nonnegative")
    if not 0 <= label_noise_rate < 0.5:
        raise ValueError("label noise rate must lie in [0, 0.5)")
    space = space or DiscreteSpace.integer_grid(d)
    gen = np.random.default_rng(seed)
    candidates = space.points()
    candidates = candidates[np.any(candidates != 0, axis=1)]
    w_star = candidates[gen.integers(len(candidates))]
    direction = w_star / np.linalg.norm(w_star)

    budget = max_attempts if max_attempts is not None else max(1000 * n, 10_000)
    kept: list[np.ndarray] = []
    have = 0
    attempts = 0
    while have < n:
        if attempts >= budget:
            raise ValueError(
                f"margin {margin} too large: {have} of {n} points after {attempts} attempts"
            )
        batch = min(max(2 * (n - have), 64), budget - attempts)
        Z = gen.normal(size=(batch, d))
        Z /= np.linalg.norm(Z, axis=1, keepdims=True)
        attempts += batch
        ok = Z[np.abs(Z @ direction) >= margin]
        kept.append(ok)
        have += len(ok)
    X = np.vstack(kept)[:n]
    y = np.where(X @ w_star > 0, 1, -1)
    flips = gen.random(n) < label_noise_rate
    y = np.where(flips, -y, y)
    ds = Dataset(X, y)
    return SynthResult(ds, w_star, int(dataset_loss(ds, w_star)))
