from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..core import Dataset, DiscreteSpace, ordered_dot, project

MODES = ("normalized", "linear", "weighted")


@dataclass
class OracleOutcome:
    """Result of one oracle call.

    ``value`` is the unnormalized objective (no 1/n factor). ``exact`` certifies
    global optimality; ``nodes_explored`` is 0 for enumeration oracles.
    """

    w: np.ndarray
    value: float
    exact: bool = True
    nodes_explored: int = 0
    incumbent_trace: list[float] = field(default_factory=list, repr=False)


def default_big_m(dataset: Dataset, space: DiscreteSpace) -> float:
    return 1.0 + space.radius * dataset.max_feature_norm + dataset.max_abs_offset


def default_margin_gap(dataset: Dataset) -> float:
    # strict "> 0" rows become ">= kappa" for positive labels
    return 1e-9 * (1.0 + dataset.max_feature_norm)


@dataclass
class MipInstance:
    """One 0/1-loss discrete-halfspace MIP.

    Modes:
      * ``normalized``: minimize ``sum_i e_i - <eta, pi(w)>`` with ``eta`` in R^{d+1}
      * ``linear``:     minimize ``sum_i e_i - <eta, w>`` with ``eta`` in R^d
      * ``weighted``:   minimize ``sum_i p_i e_i`` (``eta`` unused)
    """

    examples: Dataset
    space: DiscreteSpace
    mode: str = "normalized"
    eta: np.ndarray | None = None
    weights: np.ndarray | None = None
    big_m: float | None = None
    kappa: float | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.examples.n and self.examples.dim != self.space.dim:
            raise ValueError("example dimension does not match the space")
        d = self.space.dim
        if self.mode == "weighted":
            if self.weights is None:
                raise ValueError("weighted mode requires weights")
            self.weights = np.asarray(self.weights, dtype=float)
            if self.weights.shape != (self.examples.n,):
                raise ValueError("need one weight per example")
            self.eta = None
        else:
            want = d + 1 if self.mode == "normalized" else d
            self.eta = np.zeros(want) if self.eta is None else np.asarray(self.eta, dtype=float)
            if self.eta.shape != (want,):
                raise ValueError(f"{self.mode} mode needs a perturbation of length {want}")
            self.weights = None
        if self.big_m is None:
            self.big_m = default_big_m(self.examples, self.space)
        if self.kappa is None:
            self.kappa = default_margin_gap(self.examples)
        needed = self.space.radius * self.examples.max_feature_norm + self.examples.max_abs_offset
        if not self.big_m > needed:
            raise ValueError(f"big-M {self.big_m} must exceed max ||x|| * D + max |b| = {needed}")

    @property
    def example_weights(self) -> np.ndarray:
        return np.ones(self.examples.n) if self.weights is None else self.weights

    def objective(self, W) -> np.ndarray:
        """Exact objective at each row of ``W`` (reference evaluation)."""
        W = np.atleast_2d(np.asarray(W, dtype=float))
        if self.examples.n:
            loss = self.examples.total_loss(W, weights=self.weights).astype(float)
        else:
            loss = np.zeros(W.shape[0])
        if self.mode == "normalized":
            return loss - ordered_dot(project(W, self.space.radius), self.eta)[:, 0]
        if self.mode == "linear":
            return loss - ordered_dot(W, self.eta)[:, 0]
        return loss
