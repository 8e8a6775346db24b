"""Monte-Carlo checks of the properties the privacy analysis relies on.

* :func:`check_shift_mapping`  a minimizer stays the minimizer on a neighbor
  after its noise vector is shifted toward it on the sphere
* :func:`tie_rate`             how often the perturbed objective has tied minimizers
* :func:`estimate_stability`   coupled estimate of ``E ||O(D, eta) - O(D', eta)||_1``
* :func:`check_concentration`  deviation of an m-sample oracle average from its mean
* :func:`audit_dp`             pointwise (eps, delta) ratio test on a finite output space
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Protocol

import numpy as np
from scipy import stats

from .core import ContinuousSpace, Dataset, DiscreteSpace, PrivacyBudget, project
from .mechanisms import ObjSampParams, objsamp_params, sigma_objdisc
from .noise import RngStream, as_generator
from .oracles import ObjectiveTable

# two-sided coverage of +-3 standard deviations
THREE_SIGMA_ALPHA = 2 * stats.norm.sf(3.0)
MAX_AUDIT_CELLS = 1000


def clopper_pearson(k, n, alpha: float = THREE_SIGMA_ALPHA):
    """Exact binomial interval(s) for ``k`` successes out of ``n``."""
    k = np.asarray(k, dtype=float)
    lo = np.where(k > 0, stats.beta.ppf(alpha / 2, k, n - k + 1), 0.0)
    hi = np.where(k < n, stats.beta.ppf(1 - alpha / 2, k + 1, n - k), 1.0)
    return lo, hi


# ---------------------------------------------------------------- shift mapping

def shift_map(w_hat, eta, c_shift: float, radius: float) -> np.ndarray:
    """``eta + c_shift * pi(w_hat)``."""
    return np.asarray(eta, dtype=float) + c_shift * project(w_hat, radius)


@dataclass
class MappingCheck:
    status: str  # pass | violation | skipped
    w_hat: list[float]
    w_shifted: list[float] | None = None
    margin: float | None = None


def _unique_argmin(values: np.ndarray) -> int | None:
    i = int(np.argmin(values))
    return i if np.count_nonzero(values == values[i]) == 1 else None


def check_shift_mapping(
    dataset: Dataset,
    neighbor: Dataset,
    eta,
    space: DiscreteSpace,
    c_shift: float,
    tables: tuple[ObjectiveTable, ObjectiveTable] | None = None,
) -> MappingCheck:
    """Check that ``w_hat = argmin(D, eta)`` is also ``argmin(D', shift_map(w_hat, eta))``.

    Trials where the first minimization is tied are ``skipped``. ``margin`` is
    the gap between the best competitor and ``w_hat`` on the neighbor (positive
    when ``w_hat`` wins strictly). ``tables`` lets callers reuse enumerations.
    """
    if len(dataset.differing_indices(neighbor)) > 1:
        raise ValueError("datasets must differ in at most one example")
    t, t2 = tables or (ObjectiveTable.build(dataset, space), ObjectiveTable.build(neighbor, space))
    values = t.normalized_values(eta)[0]
    i = _unique_argmin(values)
    if i is None:
        return MappingCheck("skipped", t.points[int(np.argmin(values))].tolist())
    w_hat = t.points[i]
    shifted = shift_map(w_hat, eta, c_shift, space.radius)
    v2 = t2.normalized_values(shifted)[0]
    j = int(np.argmin(v2))
    others = np.delete(v2, i)
    margin = float(others.min() - v2[i]) if others.size else math.inf
    status = "pass" if j == i else "violation"
    return MappingCheck(status, w_hat.tolist(), t2.points[j].tolist(), margin)


@dataclass
class MappingSweep:
    c_shift: float
    trials: int
    passes: int
    violations: int
    skipped: int


def mapping_sweep(
    trials: int,
    c_shifts: dict[str, float] | None,
    rng,
    max_dim: int = 3,
    max_n: int = 8,
    sigma_range: tuple[float, float] = (0.1, 3.0),
) -> dict[str, MappingSweep]:
    """Random (dataset, neighbor, eta) trials on unit grids, shared across shifts.

    Each trial builds an integer grid of dimension ``d <= max_dim`` and up to
    ``max_n`` examples with Gaussian features and random labels. The neighbor
    replaces one example. ``eta ~ N(0, s^2)`` with ``s`` log-uniform in
    ``sigma_range``. ``c_shifts``
    maps labels to shift sizes; ``None`` uses ``{"2GD^2/tau", "4GD^2/tau"}`` with
    ``G = 1/tau``, evaluated per trial.
    """
    gen = as_generator(rng)
    counts: dict[str, list[int]] = {}
    shifts_seen: dict[str, float] = {}
    for _ in range(trials):
        d = int(gen.integers(1, max_dim + 1))
        space = DiscreteSpace.integer_grid(d)
        n = int(gen.integers(1, max_n + 1))
        X = gen.normal(size=(n, d))
        y = gen.choice(np.array([-1, 1]), size=n)
        ds = Dataset(X, y)
        k = int(gen.integers(n))
        Xn, yn = X.copy(), y.copy()
        Xn[k] = gen.normal(size=d)
        yn[k] = gen.choice(np.array([-1, 1]))
        nb = Dataset(Xn, yn)
        s = math.exp(gen.uniform(math.log(sigma_range[0]), math.log(sigma_range[1])))
        eta = gen.normal(scale=s, size=d + 1)
        tables = (ObjectiveTable.build(ds, space), ObjectiveTable.build(nb, space))
        G = 1.0 / space.tau
        base = G * space.radius**2 / space.tau
        shifts = c_shifts or {"2GD^2/tau": 2 * base, "4GD^2/tau": 4 * base}
        for label, c in shifts.items():
            shifts_seen[label] = c
            res = check_shift_mapping(ds, nb, eta, space, c, tables)
            tally = counts.setdefault(label, [0, 0, 0])
            tally[("pass", "violation", "skipped").index(res.status)] += 1
    return {
        label: MappingSweep(shifts_seen[label], trials, *tally) for label, tally in counts.items()
    }


# ---------------------------------------------------------------- ties

def tie_rate(dataset, space: DiscreteSpace, sigma: float, trials: int, rng, chunk: int = 100_000) -> float:
    """Fraction of ``eta ~ N(0, sigma^2)^{d+1}`` giving a tied argmin (exact float equality)."""
    table = ObjectiveTable.build(dataset, space)
    if len(table.points) < 2:
        return 0.0
    gen = as_generator(rng)
    ties = 0
    for start in range(0, trials, chunk):
        size = min(chunk, trials - start)
        etas = gen.normal(scale=sigma, size=(size, space.dim + 1)) if sigma > 0 else np.zeros((size, space.dim + 1))
        vals = table.normalized_values(etas)
        best = vals.min(axis=1, keepdims=True)
        ties += int(np.count_nonzero((vals == best).sum(axis=1) > 1))
    return ties / trials


# ---------------------------------------------------------------- stability

@dataclass
class StabilityEstimate:
    mean: float
    half_width: float
    trials: int
    rate: float

    @property
    def upper(self) -> float:
        return self.mean + self.half_width


def stability_bound(rate: float, G: float, d: int, Dinf: float, alpha: float = 0.0) -> float:
    """``250 sigma G d^2 Dinf^2 + alpha / (10 G)``."""
    return 250 * rate * G * d * d * Dinf * Dinf + alpha / (10 * G)


def _call_batched(oracle, dataset, etas, vectorized: bool) -> np.ndarray:
    if vectorized:
        return np.asarray(oracle(dataset, etas), dtype=float)
    return np.array([np.asarray(oracle(dataset, e), dtype=float) for e in etas])


def estimate_stability(
    dataset,
    neighbor,
    oracle: Callable,
    rate: float,
    trials: int,
    rng,
    dim: int,
    vectorized: bool = False,
    chunk: int = 100_000,
) -> StabilityEstimate:
    """Coupled Monte-Carlo estimate of ``E ||O(D, eta) - O(D', eta)||_1`` with ``eta ~ Exp(rate)^d``.

    The same ``eta`` feeds both datasets. ``half_width`` is three standard errors.
    ``vectorized`` means ``oracle(dataset, etas)`` accepts a batch of rows.
    """
    if rate <= 0:
        raise ValueError("rate must be positive")
    gen = as_generator(rng)
    total = 0.0
    total_sq = 0.0
    for start in range(0, trials, chunk):
        size = min(chunk, trials - start)
        # standard draws scaled by 1/rate: common random numbers across rates
        etas = gen.standard_exponential(size=(size, dim)) / rate
        a = _call_batched(oracle, dataset, etas, vectorized)
        b = _call_batched(oracle, neighbor, etas, vectorized)
        dist = np.abs(a - b).sum(axis=1)
        total += float(dist.sum())
        total_sq += float((dist * dist).sum())
    mean = total / trials
    var = max(total_sq / trials - mean * mean, 0.0) * trials / max(trials - 1, 1)
    return StabilityEstimate(mean, 3.0 * math.sqrt(var / trials), trials, rate)


# ---------------------------------------------------------------- concentration

@dataclass
class ConcentrationReport:
    verdict: str  # pass | fail | inconclusive
    m: int
    repeats: int
    failures: int
    threshold: float
    failure_upper: float | None = None
    failure_lower: float | None = None
    max_deviation: float | None = None


def check_concentration(
    dataset,
    oracle: Callable,
    rate: float,
    gamma: float,
    delta: float,
    Dinf: float,
    rng,
    dim: int,
    repeats: int = 200,
    m_cap: int = 100_000,
    expectation=None,
    vectorized: bool = False,
) -> ConcentrationReport:
    """Test ``||mean of m oracle calls - E O||_1 <= 2 Dinf gamma`` w.p. ``1 - delta/2``.

    ``m = ceil(ln(2d/delta) / (2 gamma^2))``. The expectation is estimated from
    ``10 m`` fresh calls unless given. The verdict fails only when the
    Clopper-Pearson lower bound on the failure probability exceeds ``delta/2``;
    an ``m`` above ``m_cap`` is reported as inconclusive without running.
    """
    if not 0 < gamma <= 1:
        raise ValueError("gamma must lie in (0, 1]")
    m = math.ceil(round(math.log(2 * dim / delta) / (2 * gamma * gamma), 9))
    threshold = 2 * Dinf * gamma
    if m > m_cap:
        return ConcentrationReport("inconclusive", m, 0, 0, threshold)
    gen = as_generator(rng)
    if expectation is None:
        etas = gen.standard_exponential(size=(10 * m, dim)) / rate
        expectation = _call_batched(oracle, dataset, etas, vectorized).mean(axis=0)
    expectation = np.asarray(expectation, dtype=float)
    failures = 0
    worst = 0.0
    for _ in range(repeats):
        etas = gen.standard_exponential(size=(m, dim)) / rate
        avg = _call_batched(oracle, dataset, etas, vectorized).mean(axis=0)
        dev = float(np.abs(avg - expectation).sum())
        worst = max(worst, dev)
        failures += dev > threshold
    lo, hi = clopper_pearson(failures, repeats)
    verdict = "fail" if float(lo) > delta / 2 else "pass"
    return ConcentrationReport(verdict, m, repeats, failures, threshold, float(hi), float(lo), worst)


# ---------------------------------------------------------------- DP audit

def toy_neighbor_pairs() -> dict[str, tuple[Dataset, Dataset]]:
    """Built-in neighboring pairs on d = 1, n = 6 (x in {-1, +1})."""
    def ds(rows):
        return Dataset([[x] for x, _ in rows], [y for _, y in rows])

    balanced = [(1, 1), (1, 1), (1, 1), (1, -1), (1, -1), (1, -1)]
    return {
        "flip-label": (ds(balanced), ds(balanced[:3] + [(1, 1)] + balanced[4:])),
        "flip-feature": (ds(balanced), ds(balanced[:3] + [(-1, -1)] + balanced[4:])),
        "unanimous": (ds([(1, 1)] * 6), ds([(1, 1)] * 5 + [(1, -1)])),
        "near-tie": (ds([(1, 1)] * 3 + [(-1, 1)] * 2 + [(1, -1)]),
                     ds([(1, 1)] * 3 + [(-1, 1)] * 3)),
        "zero-feature": (ds(balanced), ds(balanced[:5] + [(0, 1)])),
    }



class OutputSampler(Protocol):
    def __call__(self, dataset, trials: int, gen: np.random.Generator) -> np.ndarray:
        """Return ``trials`` mechanism outputs as rows (already discretized)."""


def objdisc_sampler(
    space: DiscreteSpace,
    budget: PrivacyBudget,
    G: float | None = None,
    sigma: float | None = None,
    chunk: int = 200_000,
) -> OutputSampler:
    """Batched ObjDisc with the exhaustive oracle; ``sigma`` overrides the calibrated scale."""
    G = 1.0 / space.tau if G is None else G
    scale = sigma_objdisc(G, space.radius, space.tau, budget.epsilon, budget.delta) if sigma is None else sigma

    def sample(dataset, trials, gen):
        table = ObjectiveTable.build(dataset, space)
        out = np.empty((trials, space.dim))
        for start in range(0, trials, chunk):
            size = min(chunk, trials - start)
            etas = gen.normal(scale=scale, size=(size, space.dim + 1)) if scale > 0 else np.zeros((size, space.dim + 1))
            out[start:start + size] = table.points[table.argmin_normalized(etas)]
        return out

    sample.sigma = scale
    return sample


def bin_outputs(W, edges: list[np.ndarray]) -> np.ndarray:
    """Map each row of ``W`` to per-coordinate bin indices (``len(edges[j]) + 1`` bins each)."""
    W = np.atleast_2d(W)
    return np.column_stack([np.digitize(W[:, j], edges[j]) for j in range(W.shape[1])]).astype(float)


def objsamp_sampler(
    space: ContinuousSpace,
    batch_oracle: Callable,
    budget: PrivacyBudget,
    G: float,
    edges: list[np.ndarray],
    params: ObjSampParams | None = None,
    n: int | None = None,
    beta: float = 0.05,
) -> OutputSampler:
    """Batched ObjSamp followed by coordinate-wise binning.

    ``batch_oracle(dataset, etas)`` must accept a batch of perturbation rows.
    """
    d = space.dim

    def sample(dataset, trials, gen):
        p = params or objsamp_params(d, n or len(dataset), space.diameter_l2, space.diameter_linf,
                                     G, budget.epsilon, budget.delta, beta)
        out = np.empty((trials, d))
        per = max(1, 200_000 // p.m)
        for start in range(0, trials, per):
            size = min(per, trials - start)
            etas = gen.standard_exponential(size=(size * p.m, d)) / p.sigma
            avg = np.asarray(batch_oracle(dataset, etas)).reshape(size, p.m, d).mean(axis=1)
            out[start:start + size] = avg + gen.laplace(scale=p.laplace_scale / budget.epsilon, size=(size, d))
        return bin_outputs(out, edges)

    return sample


@dataclass
class CellEstimate:
    cell: list[float]
    count: int
    count_neighbor: int


@dataclass
class AuditReport:
    trials: int
    epsilon: float
    delta: float
    violations: int
    worst_ratio: float
    worst_excess: float
    half_width: float
    verdict: str
    test: str = "pointwise singleton cells with delta slack"
    cells: list[CellEstimate] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def audit_counts(cells, counts_a, counts_b, trials: int, budget: PrivacyBudget,
                 alpha: float = THREE_SIGMA_ALPHA) -> AuditReport:
    """Pointwise ratio test on per-cell counts from two samples of size ``trials``."""
    eps, delta = budget.epsilon, budget.delta
    ca = np.asarray(counts_a)
    cb = np.asarray(counts_b)
    pa, pb = ca / trials, cb / trials
    lo_a, hi_a = clopper_pearson(ca, trials, alpha)
    lo_b, hi_b = clopper_pearson(cb, trials, alpha)
    bound = math.exp(eps)
    fail = (lo_a - delta > bound * hi_b) | (lo_b - delta > bound * hi_a)
    point = (pa - delta > bound * pb) | (pb - delta > bound * pa)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.concatenate([np.where(pb > 0, pa / pb, np.where(pa > 0, np.inf, 1.0)),
                                 np.where(pa > 0, pb / pa, np.where(pb > 0, np.inf, 1.0))])
    excess = np.concatenate([pa - delta - bound * pb, pb - delta - bound * pa])
    half = float(max((hi_a - lo_a).max(), (hi_b - lo_b).max()) / 2) if len(ca) else 0.0
    if fail.any():
        verdict = "fail"
    elif point.any():
        verdict = "inconclusive"
    else:
        verdict = "pass"
    return AuditReport(
        trials=trials,
        epsilon=eps,
        delta=delta,
        violations=int(point.sum()),
        worst_ratio=float(ratios.max()) if len(ratios) else 1.0,
        worst_excess=float(excess.max()) if len(excess) else -delta,
        half_width=half,
        verdict=verdict,
        cells=[CellEstimate([float(v) for v in c], int(a), int(b)) for c, a, b in zip(cells, ca, cb)],
    )


def audit_dp(
    sampler: OutputSampler,
    dataset,
    neighbor,
    budget: PrivacyBudget,
    trials: int,
    rng,
    max_cells: int = MAX_AUDIT_CELLS,
) -> AuditReport:
    """Estimate output probabilities on both datasets and test ``p <= e^eps p' + delta`` per cell.

    Both directions are tested. A cell fails only when the gap survives
    3-sigma Clopper-Pearson bounds on both estimates; a violation visible only
    in the point estimates makes the verdict ``inconclusive``.
    """
    if isinstance(rng, RngStream):
        gen_a, gen_b = rng.substream(0).generator(), rng.substream(1).generator()
    else:
        gen_a = gen_b = as_generator(rng)
    out_a = np.atleast_2d(sampler(dataset, trials, gen_a))
    out_b = np.atleast_2d(sampler(neighbor, trials, gen_b))
    cells, inverse = np.unique(np.vstack([out_a, out_b]), axis=0, return_inverse=True)
    if len(cells) > max_cells:
        raise ValueError(f"output space has {len(cells)} cells, more than the {max_cells} allowed")
    inverse = np.asarray(inverse).reshape(-1)
    ca = np.bincount(inverse[:trials], minlength=len(cells))
    cb = np.bincount(inverse[trials:], minlength=len(cells))
    return audit_counts(cells, ca, cb, trials, budget)
