"""Brute-force oracles over an enumerable discrete space.

Ties are broken toward the lexicographically smallest point, which falls out
of ``np.argmin`` over the lexicographically ordered enumeration.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import ENUMERATION_CAP, DiscreteSpace, ordered_dot, project
from .base import OracleOutcome


@dataclass
class ObjectiveTable:
    """Precomputed losses and sphere lifts for every member of a space.

    Lets callers minimize ``L(D, w) - <eta, pi(w)>`` for many ``eta`` at once.
    """

    points: np.ndarray
    losses: np.ndarray
    lifted: np.ndarray

    @classmethod
    def build(cls, dataset, space: DiscreteSpace, cap: int = ENUMERATION_CAP) -> "ObjectiveTable":
        W = space.points(cap)
        losses = dataset.total_loss(W).astype(float) if len(dataset) else np.zeros(len(W))
        return cls(W, losses, project(W, space.radius))

    def normalized_values(self, etas) -> np.ndarray:
        return self.losses[None, :] - ordered_dot(etas, self.lifted)

    def argmin_normalized(self, etas) -> np.ndarray:
        """Index of the minimizer for each row of ``etas``."""
        return np.argmin(self.normalized_values(etas), axis=1)


def _outcome(W, values) -> OracleOutcome:
    i = int(np.argmin(values))
    return OracleOutcome(w=W[i].copy(), value=float(values[i]), exact=True)


def exhaustive_normalized(dataset, eta, space: DiscreteSpace, cap: int = ENUMERATION_CAP) -> OracleOutcome:
    """Exact minimizer of ``L(D, w) - <eta, pi(w)>`` by enumeration."""
    eta = np.asarray(eta, dtype=float)
    if eta.shape != (space.dim + 1,):
        raise ValueError("perturbation must have dimension d + 1")
    table = ObjectiveTable.build(dataset, space, cap)
    return _outcome(table.points, table.normalized_values(eta)[0])


def exhaustive_linear(dataset, eta, space: DiscreteSpace, cap: int = ENUMERATION_CAP) -> OracleOutcome:
    """Exact minimizer of ``L(D, w) - <eta, w>``; the value omits the 1/n factor."""
    eta = np.asarray(eta, dtype=float)
    if eta.shape != (space.dim,):
        raise ValueError("perturbation must have dimension d")
    W = space.points(cap)
    losses = dataset.total_loss(W).astype(float) if len(dataset) else np.zeros(len(W))
    return _outcome(W, losses - ordered_dot(W, eta)[:, 0])


def exhaustive_weighted(dataset, weights, space: DiscreteSpace, cap: int = ENUMERATION_CAP) -> OracleOutcome:
    """Exact minimizer of ``sum_i p_i l_i(w)``; weights may be negative."""
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (len(dataset),):
        raise ValueError("need one weight per example")
    W = space.points(cap)
    values = dataset.total_loss(W, weights=weights) if len(dataset) else np.zeros(len(W))
    return _outcome(W, values)
