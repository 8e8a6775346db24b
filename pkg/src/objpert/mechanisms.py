"""Private mechanisms built on optimization oracles.

``obj_disc``  Gaussian objective perturbation over a tau-separated grid, lifted
              onto the unit sphere so every candidate has the same norm.
``obj_samp``  averages ``m`` exponentially perturbed oracle solutions and
              releases the mean with Laplace noise.
``rspm``      Gaussian-weighted separator probes appended to the data
              (report separator-perturbed minimum).

All logarithms are natural.
"""
from __future__ import annotations

import logging
import math
import time
import warnings
from dataclasses import asdict, dataclass, field
from typing import Any, Callable

import numpy as np

from .core import (
    ContinuousSpace,
    Dataset,
    DiscreteSpace,
    LabeledExample,
    PrivacyBudget,
    dataset_loss,
)
from .noise import RngStream, as_generator, exponential_vector, gaussian_vector, laplace_vector
from .oracles import (
    OracleOutcome,
    bnb_normalized,
    bnb_weighted,
    exhaustive_normalized,
    exhaustive_weighted,
)

log = logging.getLogger(__name__)


class InexactOracleError(RuntimeError):
    """The oracle could not certify an exact minimizer."""


class AnalysisRangeError(ValueError):
    """Parameters fall outside the range where the analysis applies (gamma > 1)."""


@dataclass
class RunRecord:
    mechanism: str
    seed: int | None
    stream_index: int | None
    params: dict[str, Any]
    w: list[float]
    loss: float | None
    wall_ms: float
    exact: bool = True
    warnings: list[str] = field(default_factory=list)
    intermediates: dict[str, Any] = field(default_factory=dict, repr=False)

    def to_dict(self, include_intermediates: bool = False) -> dict[str, Any]:
        out = asdict(self)
        if not include_intermediates:
            out.pop("intermediates")
        return out


def _stream_fields(rng):
    if isinstance(rng, RngStream):
        return rng.seed, rng.index
    return None, None


def _positive(**kw):
    for k, v in kw.items():
        if not v > 0:
            raise ValueError(f"{k} must be positive, got {v}")


# ---------------------------------------------------------------- ObjDisc

def sigma_objdisc(G: float, D: float, tau: float, epsilon: float, delta: float) -> float:
    """Gaussian scale ``7 G D^2 sqrt(ln(1/delta)) / (tau * epsilon)``."""
    _positive(G=G, D=D, tau=tau, epsilon=epsilon, delta=delta)
    if not delta < 1:
        raise ValueError("delta must be < 1")
    return 7.0 * G * D * D * math.sqrt(math.log(1.0 / delta)) / (tau * epsilon)


NormalizedOracle = Callable[[Any, np.ndarray, DiscreteSpace], OracleOutcome]

NORMALIZED_ORACLES: dict[str, NormalizedOracle] = {
    "exhaustive": exhaustive_normalized,
    "bnb": bnb_normalized,
}


def _resolve(oracle, table):
    if callable(oracle):
        return oracle
    try:
        return table[oracle]
    except KeyError:
        raise ValueError(f"unknown oracle {oracle!r}; choose from {sorted(table)}") from None


def _handle_inexact(outcome: OracleOutcome, on_inexact: str, notes: list[str]) -> None:
    if outcome.exact:
        return
    msg = "oracle returned a non-certified solution; the privacy guarantee does not hold"
    if on_inexact == "error":
        raise InexactOracleError(msg)
    warnings.warn(msg, RuntimeWarning, stacklevel=3)
    notes.append(msg)


def obj_disc(
    dataset,
    space: DiscreteSpace,
    budget: PrivacyBudget,
    rng,
    G: float | None = None,
    oracle: str | NormalizedOracle = "exhaustive",
    on_inexact: str = "error",
    eta=None,
) -> RunRecord:
    """Sample ``eta ~ N(0, sigma^2)^{d+1}`` and return the normalized-oracle argmin.

    ``G`` defaults to ``1/tau`` (the 0/1 loss over a tau-separated grid).
    ``eta`` overrides the sampled noise (testing hook).
    """
    G = 1.0 / space.tau if G is None else G
    sigma = sigma_objdisc(G, space.radius, space.tau, budget.epsilon, budget.delta)
    if eta is None:
        eta = gaussian_vector(space.dim + 1, sigma, rng)
    eta = np.asarray(eta, dtype=float)
    solve = _resolve(oracle, NORMALIZED_ORACLES)
    t0 = time.perf_counter()
    outcome = solve(dataset, eta, space)
    wall = (time.perf_counter() - t0) * 1e3
    notes: list[str] = []
    _handle_inexact(outcome, on_inexact, notes)
    seed, index = _stream_fields(rng)
    return RunRecord(
        mechanism="objdisc",
        seed=seed,
        stream_index=index,
        params={"epsilon": budget.epsilon, "delta": budget.delta, "sigma": sigma, "G": G,
                "tau": space.tau, "B": space.bound, "D": space.radius},
        w=[float(v) for v in outcome.w],
        loss=float(dataset_loss(dataset, outcome.w)),
        wall_ms=wall,
        exact=outcome.exact,
        warnings=notes,
        intermediates={"eta": eta.tolist(), "objective": outcome.value,
                       "nodes": outcome.nodes_explored},
    )


# ---------------------------------------------------------------- ObjSamp

@dataclass(frozen=True)
class ObjSampParams:
    gamma: float
    m: int
    sigma: float
    laplace_scale: float
    beta: float
    alpha: float


def objsamp_params(
    d: int, n: int, D2: float, Dinf: float, G: float,
    epsilon: float, delta: float, beta: float = 0.05, alpha: float = 0.0,
) -> ObjSampParams:
    """Derived quantities of the sampling mechanism.

    ``laplace_scale`` is the l1-sensitivity bound ``lambda``; the released
    noise is Laplace with scale ``lambda / epsilon``.
    """
    _positive(d=d, n=n, D2=D2, Dinf=Dinf, G=G, epsilon=epsilon, delta=delta, beta=beta)
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    gamma = math.sqrt(epsilon) / math.sqrt(n) * d**1.25 * math.sqrt(D2)
    if gamma > 1:
        raise AnalysisRangeError(
            f"gamma = {gamma:.4g} > 1: dataset too small or epsilon too large for the analysis"
        )
    # round before ceil so 5000.000000001 does not become 5001
    m = max(1, math.ceil(round(math.log(2 * d / delta) / (2 * gamma * gamma), 9)))
    log_term = 1.0 + math.log(2.0 / beta)
    sigma = math.sqrt(
        D2 * math.sqrt(2 * d) * epsilon / (250 * G * G * d * d * Dinf * Dinf * log_term * n)
    )
    lam = 4 * Dinf * gamma + 250 * sigma * G * d * d * Dinf * Dinf + alpha / (10 * G)
    return ObjSampParams(gamma, m, sigma, lam, beta, alpha)


def obj_samp(
    dataset,
    space: ContinuousSpace,
    oracle: Callable[[Any, np.ndarray], np.ndarray],
    budget: PrivacyBudget,
    rng,
    G: float,
    beta: float = 0.05,
    alpha: float = 0.0,
    params: ObjSampParams | None = None,
    etas=None,
    mu=None,
    loss_fn: Callable[[Any, np.ndarray], float] | None = None,
) -> RunRecord:
    """Average ``m`` exponentially perturbed oracle outputs, then add Laplace noise.

    ``oracle(dataset, eta)`` must minimize ``L(D, w) - <eta, w>`` over ``space``
    (to within ``alpha`` after the 1/n scaling). ``G`` is the l1-Lipschitz
    constant of each loss, which must take values in [0, 1]. The release is not
    projected back into the box. ``params``, ``etas`` and ``mu`` override the
    derived parameters and the sampled noise.
    """
    d = space.dim
    if params is None:
        params = objsamp_params(d, len(dataset), space.diameter_l2, space.diameter_linf, G,
                                budget.epsilon, budget.delta, beta, alpha)
    gen = as_generator(rng)
    if etas is None:
        etas = exponential_vector(d, params.sigma, gen, size=params.m)
    etas = np.atleast_2d(np.asarray(etas, dtype=float))
    t0 = time.perf_counter()
    outputs = np.array([np.asarray(oracle(dataset, eta), dtype=float) for eta in etas])
    average = outputs.mean(axis=0)
    wall = (time.perf_counter() - t0) * 1e3
    if mu is None:
        mu = laplace_vector(d, params.laplace_scale / budget.epsilon, gen)
    mu = np.asarray(mu, dtype=float)
    release = average + mu
    seed, index = _stream_fields(rng)
    loss = float(loss_fn(dataset, release)) if loss_fn is not None else None
    return RunRecord(
        mechanism="objsamp",
        seed=seed,
        stream_index=index,
        params={"epsilon": budget.epsilon, "delta": budget.delta, **asdict(params)},
        w=release.tolist(),
        loss=loss,
        wall_ms=wall,
        intermediates={"average": average.tolist(), "mu": mu.tolist(), "outputs": outputs.tolist()},
    )


# ---------------------------------------------------------------- RSPM

def sigma_rspm(m_sep: int, epsilon: float, delta: float) -> float:
    """Gaussian scale ``7 sqrt(m ln(1/delta)) / epsilon``."""
    _positive(m_sep=m_sep, epsilon=epsilon, delta=delta)
    return 7.0 * math.sqrt(m_sep * math.log(1.0 / delta)) / epsilon


WEIGHTED_ORACLES = {"exhaustive": exhaustive_weighted, "bnb": bnb_weighted}


@dataclass
class SeparatorSet:
    """Probe losses ``l(w) = 1[y != sgn(<x, w>)]`` stored as a dataset."""

    probes: Dataset

    def __len__(self) -> int:
        return self.probes.n

    def truth_table(self, points) -> np.ndarray:
        """``(|points|, m)`` matrix of probe losses."""
        return self.probes.loss_matrix(points).T


def separator_candidate(d: int, tau: float = 1.0, bound: float = 1.0) -> SeparatorSet:
    """Per-coordinate threshold probes ``l(w) = 1[w_j >= t]`` for every grid level ``t > -bound``.

    Each probe is the example ``x = e_j``, ``y = -1`` with threshold
    ``t - tau/2``. Two grid points that differ in some coordinate are split by
    the threshold between their values, so the set separates every grid with
    coordinates in ``tau * Z`` and ``|w_j| <= bound``. The size is
    ``2 d floor(bound / tau)``, i.e. ``2d/tau`` on the unit box. Sign-only
    probes (zero threshold) cannot split ``w`` from ``2w``, which is why
    thresholds are used.
    """
    if d < 1:
        raise ValueError("d must be positive")
    if not 0 < tau <= 1:
        raise ValueError("tau must lie in (0, 1]")
    K = int(math.floor(bound / tau + 1e-9))
    X, b = [], []
    for j in range(d):
        for k in range(-K + 1, K + 1):
            x = np.zeros(d)
            x[j] = 1.0
            X.append(x)
            b.append((k - 0.5) * tau)
    X = np.array(X).reshape(len(X), d)
    return SeparatorSet(Dataset(X, -np.ones(len(X), dtype=np.int64), b))


def verify_separator(sep: SeparatorSet, space: DiscreteSpace):
    """Return ``None`` if ``sep`` separates ``space``, else the first colliding pair.

    Pairs are scanned in lexicographic order of ``(w, w')`` with ``w < w'``.
    """
    W = space.points()
    if len(W) < 2:
        return None
    if len(sep) == 0:
        return W[0], W[1]
    table = sep.truth_table(W)
    seen: dict[bytes, int] = {}
    first: tuple[int, int] | None = None
    for i, row in enumerate(table.astype(np.uint8)):
        key = row.tobytes()
        if key in seen:
            pair = (seen[key], i)
            if first is None or pair < first:
                first = pair
        else:
            seen[key] = i
    if first is None:
        return None
    return W[first[0]], W[first[1]]


def rspm(
    dataset: Dataset,
    sep: SeparatorSet,
    space: DiscreteSpace,
    budget: PrivacyBudget,
    rng,
    oracle="exhaustive",
    on_inexact: str = "error",
    eta=None,
) -> RunRecord:
    """Append probes with ``N(0, sigma^2)`` weights and return the weighted argmin."""
    m_sep = len(sep)
    sigma = sigma_rspm(m_sep, budget.epsilon, budget.delta)
    if eta is None:
        eta = gaussian_vector(m_sep, sigma, rng)
    eta = np.asarray(eta, dtype=float)
    weighted = dataset.concat(sep.probes)
    weights = np.concatenate([np.ones(dataset.n), eta])
    solve = _resolve(oracle, WEIGHTED_ORACLES)
    t0 = time.perf_counter()
    outcome = solve(weighted, weights, space)
    wall = (time.perf_counter() - t0) * 1e3
    notes: list[str] = []
    _handle_inexact(outcome, on_inexact, notes)
    seed, index = _stream_fields(rng)
    return RunRecord(
        mechanism="rspm",
        seed=seed,
        stream_index=index,
        params={"epsilon": budget.epsilon, "delta": budget.delta, "sigma": sigma, "m_sep": m_sep,
                "tau": space.tau, "B": space.bound, "D": space.radius},
        w=[float(v) for v in outcome.w],
        loss=float(dataset_loss(dataset, outcome.w)),
        wall_ms=wall,
        exact=outcome.exact,
        warnings=notes,
        intermediates={"eta": eta.tolist(), "objective": outcome.value},
    )


# ---------------------------------------------------------------- utility bounds

def bound_objdisc(G, D, d, tau, epsilon, delta, beta, n) -> float:
    """Excess normalized loss ``14 G D^2 sqrt(2(d+1) ln(4/beta) ln(1/delta)) / (n tau eps)``."""
    _positive(G=G, D=D, d=d, tau=tau, epsilon=epsilon, delta=delta, beta=beta, n=n)
    logs = max(math.log(4.0 / beta), 0.0) * math.log(1.0 / delta)
    return 14.0 * G * D * D * math.sqrt(2 * (d + 1) * logs) / (n * tau * epsilon)


def objsamp_bound_terms(d, n, D2, Dinf, G, epsilon, delta, beta, alpha=0.0) -> dict[str, float]:
    """The placeholders ``A..E`` and ``gamma`` of the sampling-mechanism utility proof."""
    p = objsamp_params(d, n, D2, Dinf, G, epsilon, delta, beta, alpha)
    log_term = 1.0 + math.log(2.0 / beta)
    return {
        "gamma": p.gamma,
        "sigma": p.sigma,
        "A": 4 * G * Dinf * log_term / epsilon,
        "B": 250 * G * G * d * d * Dinf * Dinf * log_term / epsilon,
        "C": log_term / (10 * epsilon),
        "D": math.sqrt(math.log(4.0 / beta) / 2),
        "E": D2 * math.sqrt(2 * d) / n,
    }


def bound_objsamp(d, n, D2, Dinf, G, epsilon, delta, beta, alpha=0.0, double_sqrt_term=False) -> float:
    """``gamma (A + D) + sqrt(B E) + alpha (C + 1)``.

    At ``sigma = sqrt(E/B)`` the pair ``sigma B + E/sigma`` equals ``2 sqrt(B E)``;
    ``double_sqrt_term=True`` uses that value instead of the single ``sqrt(B E)``.
    """
    t = objsamp_bound_terms(d, n, D2, Dinf, G, epsilon, delta, beta, alpha)
    mid = math.sqrt(t["B"] * t["E"]) * (2.0 if double_sqrt_term else 1.0)
    return t["gamma"] * (t["A"] + t["D"]) + mid + alpha * (t["C"] + 1)


def bound_rspm(m_sep, epsilon, delta, beta, n) -> float:
    """``m sqrt(m ln(2m/beta) ln(1/delta)) / (eps n)`` with the hidden constant set to 1."""
    _positive(m_sep=m_sep, epsilon=epsilon, delta=delta, beta=beta, n=n)
    logs = max(math.log(2 * m_sep / beta), 0.0) * math.log(1.0 / delta)
    return m_sep * math.sqrt(m_sep * logs) / (epsilon * n)


# ---------------------------------------------------------------- helpers

@dataclass
class LinearLosses:
    """Losses ``l_i(w) = <a_i, w> + b_i`` (rows of ``A``, entries of ``b``)."""

    A: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        self.A = np.asarray(self.A, dtype=float)
        self.b = np.asarray(self.b, dtype=float)

    def __len__(self) -> int:
        return self.A.shape[0]

    @property
    def lipschitz_l1(self) -> float:
        """Lipschitz constant w.r.t. the l1 norm (max |a_ij|)."""
        return float(np.abs(self.A).max()) if self.A.size else 0.0

    def total_loss(self, W) -> np.ndarray:
        W = np.atleast_2d(W)
        return W @ self.A.sum(axis=0) + self.b.sum()

    def neighbor(self, i: int, a, b: float) -> "LinearLosses":
        A = self.A.copy()
        bb = self.b.copy()
        A[i] = a
        bb[i] = b
        return LinearLosses(A, bb)

    @classmethod
    def random(cls, n: int, space: ContinuousSpace, gen: np.random.Generator) -> "LinearLosses":
        """Random losses with values inside [0, 1] over ``space``."""
        lo, hi = np.asarray(space.lower), np.asarray(space.upper)
        center, half = (lo + hi) / 2, (hi - lo) / 2
        A = gen.uniform(-1, 1, size=(n, space.dim))
        # scale so |<a, w - center>| <= 1/2 on the box
        A *= 0.5 / np.maximum((np.abs(A) * half).sum(axis=1, keepdims=True), 1e-12)
        b = 0.5 - A @ center
        return cls(A, b)


class BoxLinearOracle:
    """Exact minimizer of ``sum_i <a_i, w> - <eta, w>`` over a box.

    Each coordinate goes to the lower face when its coefficient is >= 0 and
    to the upper face otherwise. ``eta`` may be a batch of rows.
    """

    def __init__(self, space: ContinuousSpace):
        self.lower = np.asarray(space.lower)
        self.upper = np.asarray(space.upper)

    def __call__(self, dataset: LinearLosses, eta) -> np.ndarray:
        coef = dataset.A.sum(axis=0) - np.asarray(eta, dtype=float)
        return np.where(coef >= 0, self.lower, self.upper)


def planted_neighbor_example(dataset: Dataset, i: int) -> LabeledExample:
    """The row ``i`` with its label flipped; a convenient neighbor."""
    ex = dataset[i]
    return LabeledExample(ex.x, -ex.y)
