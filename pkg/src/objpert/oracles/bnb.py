"""Exact branch-and-bound for the 0/1-loss discrete-halfspace MIPs.

The search assigns coordinates ``w_1, w_2, ...`` in order, visiting grid values
in increasing order, so leaves are reached lexicographically. A subtree is cut
when its lower bound cannot strictly beat the incumbent; together with strict
incumbent updates this returns the lexicographically smallest optimum, the
same point the enumeration oracles report.

Lower bound at a node with a fixed prefix:

* loss part: an example's loss is *forced* when the sign of its margin is
  decided for every completion (the free coordinates can move the margin by at
  most ``r * sum_free |x_ij|``); positive weights count forced errors, negative
  weights count every example not forced correct;
* reward part: the fixed prefix contributes exactly, each free coordinate at
  most ``|a_j| * r``, and the sphere coordinate at most its value at the
  current prefix norm.

The ball constraint is enforced by only branching on values that keep the
prefix inside the ball.
"""
from __future__ import annotations

import logging
import math

import numpy as np

from ..core import _BALL_RTOL, DiscreteSpace, zero_one_margin_loss
from .base import MipInstance, OracleOutcome

log = logging.getLogger(__name__)

DEFAULT_NODE_BUDGET = 10_000_000


class _Search:
    def __init__(self, inst: MipInstance, node_budget: int):
        space = inst.space
        self.inst = inst
        self.d = space.dim
        self.tau = space.tau
        self.K = space.steps
        self.r2max = space.radius**2 * (1 + _BALL_RTOL) + _BALL_RTOL
        self.D = space.radius
        X = inst.examples.X
        self.X = X
        self.y = inst.examples.y
        self.pos = self.y > 0
        p = inst.example_weights
        self.p_pos = np.where(p > 0, p, 0.0)
        self.p_neg = np.where(p < 0, p, 0.0)
        # suffix sums of |x_ij| over the free coordinates j >= k
        absx = np.abs(X)
        self.free_abs = np.zeros((self.d + 1, X.shape[0]))
        for k in range(self.d - 1, -1, -1):
            self.free_abs[k] = self.free_abs[k + 1] + absx[:, k]
        self.tol = 1e-9 * (1.0 + space.radius * inst.examples.max_feature_norm
                           + inst.examples.max_abs_offset)
        self.offsets = inst.examples.offsets

        if inst.mode == "normalized":
            self.lin = inst.eta[: self.d] / self.D
            self.pole = float(inst.eta[self.d]) / self.D
        elif inst.mode == "linear":
            self.lin = inst.eta.copy()
            self.pole = 0.0
        else:
            self.lin = np.zeros(self.d)
            self.pole = 0.0
        self.free_lin = np.concatenate([np.cumsum(np.abs(self.lin)[::-1])[::-1], [0.0]])

        self.node_budget = node_budget
        self.nodes = 0
        self.best_w: np.ndarray | None = None
        self.best_val = math.inf
        self.trace: list[float] = []
        self.truncated = False
        self.prefix = np.zeros(self.d)

    def _free_radius(self, q: float) -> float:
        room = self.r2max - q
        if room < 0:
            return 0.0
        k = min(self.K, int(math.floor(math.sqrt(room) / self.tau + 1e-9)))
        return k * self.tau

    def _lower_bound(self, k: int, s: np.ndarray, q: float, lin_fixed: float) -> float:
        r = self._free_radius(q)
        spread = r * self.free_abs[k]
        lo = s - spread
        hi = s + spread
        tol = self.tol
        forced_err = np.where(self.pos, hi < -tol, lo > tol)
        forced_ok = np.where(self.pos, lo > tol, hi < -tol)
        loss_lb = float(self.p_pos @ forced_err) + float(self.p_neg @ ~forced_ok)
        reward = lin_fixed + r * self.free_lin[k]
        if self.pole > 0:
            reward += self.pole * math.sqrt(max(self.D**2 - q, 0.0))
        elif self.pole < 0:
            floor_sq = self.D**2 - q - (self.d - k) * r * r
            reward += self.pole * math.sqrt(max(floor_sq, 0.0))
        return loss_lb - reward

    def _leaf(self) -> None:
        value = float(self.inst.objective(self.prefix)[0])
        if value < self.best_val:
            self.best_val = value
            self.best_w = self.prefix.copy()
            self.trace.append(value)

    def run(self) -> None:
        self._visit(0, -self.offsets, 0.0, 0.0)

    def _visit(self, k: int, s: np.ndarray, q: float, lin_fixed: float) -> None:
        if self.truncated:
            return
        self.nodes += 1
        if self.nodes > self.node_budget:
            self.truncated = True
            return
        if k == self.d:
            self._leaf()
            return
        # the slack keeps rounding in the bound from cutting a strictly better leaf
        if self._lower_bound(k, s, q, lin_fixed) - 1e-10 * (1.0 + abs(self.best_val)) >= self.best_val:
            return
        kmax = min(self.K, int(math.floor(math.sqrt(max(self.r2max - q, 0.0)) / self.tau + 1e-9)))
        col = self.X[:, k]
        for step in range(-kmax, kmax + 1):
            v = step * self.tau
            q2 = q + v * v
            if q2 > self.r2max:
                continue
            self.prefix[k] = v
            self._visit(k + 1, s + v * col, q2, lin_fixed + self.lin[k] * v)
            if self.truncated:
                break
        self.prefix[k] = 0.0


def bnb_solve(instance: MipInstance, node_budget: int = DEFAULT_NODE_BUDGET) -> OracleOutcome:
    """Solve ``instance`` exactly; ``exact`` is False only if the node budget ran out."""
    search = _Search(instance, node_budget)
    search.run()
    if search.best_w is None:
        # budget exhausted before any leaf; w = 0 is always feasible
        w0 = np.zeros(instance.space.dim)
        return OracleOutcome(w0, float(instance.objective(w0)[0]), exact=False,
                             nodes_explored=min(search.nodes, node_budget))
    if search.truncated:
        log.warning("branch-and-bound node budget %d exhausted; returning incumbent", node_budget)
    return OracleOutcome(
        w=search.best_w,
        value=search.best_val,
        exact=not search.truncated,
        nodes_explored=min(search.nodes, node_budget),
        incumbent_trace=search.trace,
    )


def bnb_normalized(dataset, eta, space: DiscreteSpace, **kw) -> OracleOutcome:
    return bnb_solve(MipInstance(dataset, space, "normalized", eta=eta), **kw)


def bnb_linear(dataset, eta, space: DiscreteSpace, **kw) -> OracleOutcome:
    return bnb_solve(MipInstance(dataset, space, "linear", eta=eta), **kw)


def bnb_weighted(dataset, weights, space: DiscreteSpace, **kw) -> OracleOutcome:
    return bnb_solve(MipInstance(dataset, space, "weighted", weights=weights), **kw)


def margin_losses(inst: MipInstance, w) -> np.ndarray:
    """Per-example indicator ``e_i`` at ``w`` (what an optimal MIP assigns)."""
    return zero_one_margin_loss(inst.examples.X @ np.asarray(w, dtype=float), inst.examples.y)
