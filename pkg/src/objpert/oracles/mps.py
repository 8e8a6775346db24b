"""MPS export/import of :class:`MipInstance` for external MIP solvers.

Layout (names are at most 8 characters and start in the fixed-format name
columns; numeric fields carry full ``repr`` precision and may run past the
classic 12-character width, so read the file in free-format mode):

Columns
    ``E0000001..``  binary error indicator per example
    ``Z0000001..``  integer grid index per coordinate, bounds ``[-K, K]``
    ``W0000001..``  continuous weight, linked by ``W_j - tau*Z_j = 0``
    ``LAM``         sphere slack (normalized mode only), bounds ``[0, D]``
Rows
    ``OBJ``         objective
    ``M0000001..``  big-M row per example with threshold ``b`` (usually 0):
                    ``y=+1``: ``<x,w> + c*e >= kappa + b``;  ``y=-1``: ``-<x,w> + c*e >= -b``
    ``R0000001..``  reverse row for negative weights (weighted mode), forcing
                    ``e = 1`` only when the example really is misclassified
    ``T0000001..``  grid link rows
    ``X0000001..``  box rows ``-B <= w_j <= B`` (weighted mode)
    ``QBALL``       ``LAM^2 + ||w||^2 <= D^2`` (normalized mode; an equality when
                    the sphere coefficient of eta is negative) or ``||w||^2 <= D^2``
                    (other modes, emitted only when the ball cuts the box)

Exact instance parameters that the matrix cannot carry losslessly are written
as ``* objpert <key> <values>`` comment lines. Thresholded examples add
``offsets`` and ``labels`` lines, since labels can then no longer be read off
the sign of the right-hand side.
"""
from __future__ import annotations

import math
from collections import defaultdict
from pathlib import Path

import numpy as np

from ..core import Dataset, DiscreteSpace
from .base import MipInstance


def _f(v) -> str:
    return repr(float(v))


def _name(prefix: str, i: int) -> str:
    return f"{prefix}{i + 1:07d}"


def _ball_row_needed(inst: MipInstance) -> bool:
    return inst.mode == "normalized" or inst.space.ball_active


def write_mps(inst: MipInstance, destination) -> Path:
    """Write ``inst`` to ``destination`` and return the path."""
    if not inst.kappa > 0:
        raise ValueError("kappa must be positive to encode labels unambiguously")
    X, y = inst.examples.X, inst.examples.y
    n, d = inst.examples.n, inst.space.dim
    space = inst.space
    p = inst.example_weights
    D = space.radius

    lines = [
        "* objpert 0/1-loss halfspace MIP",
        f"* objpert mode {inst.mode}",
        f"* objpert tau {_f(space.tau)}",
        f"* objpert bound {_f(space.bound)}",
        f"* objpert radius {_f(D)}",
        f"* objpert kappa {_f(inst.kappa)}",
    ]
    if inst.eta is not None:
        lines.append("* objpert eta " + " ".join(_f(v) for v in inst.eta))
    b = inst.examples.offsets
    if not inst.examples.homogeneous:
        lines.append("* objpert offsets " + " ".join(_f(v) for v in b))
        lines.append("* objpert labels " + " ".join(str(int(v)) for v in y))
    lines.append("NAME          OBJPERT")

    rows = [" N  OBJ"]
    for i in range(n):
        rows.append(f" G  {_name('M', i)}")
    reverse = [i for i in range(n) if inst.mode == "weighted" and p[i] < 0]
    for i in reverse:
        rows.append(f" {'L' if y[i] > 0 else 'G'}  {_name('R', i)}")
    for j in range(d):
        rows.append(f" E  {_name('T', j)}")
    if inst.mode == "weighted":
        for j in range(d):
            rows.append(f" L  {_name('X', j)}")
    ball = _ball_row_needed(inst)
    equality_ball = inst.mode == "normalized" and inst.eta[d] < 0
    if ball:
        rows.append(f" {'E' if equality_ball else 'L'}  QBALL")
    lines += ["ROWS"] + rows

    cols = ["    MARKER                 'MARKER'                 'INTORG'"]
    c = inst.big_m
    for i in range(n):
        e = _name("E", i)
        if p[i] != 0:
            cols.append(f"    {e:<8}  OBJ       {_f(p[i])}")
        cols.append(f"    {e:<8}  {_name('M', i):<8}  {_f(c)}")
        if i in reverse:
            coef = c if y[i] > 0 else -(c + inst.kappa)
            cols.append(f"    {e:<8}  {_name('R', i):<8}  {_f(coef)}")
    for j in range(d):
        cols.append(f"    {_name('Z', j):<8}  {_name('T', j):<8}  {_f(-space.tau)}")
    cols.append("    MARKER                 'MARKER'                 'INTEND'")

    reverse_set = set(reverse)
    for j in range(d):
        w = _name("W", j)
        if inst.mode == "normalized":
            obj = -inst.eta[j] / D
        elif inst.mode == "linear":
            obj = -inst.eta[j]
        else:
            obj = 0.0
        if obj != 0:
            cols.append(f"    {w:<8}  OBJ       {_f(obj)}")
        for i in range(n):
            coef = X[i, j] if y[i] > 0 else -X[i, j]
            if coef != 0:
                cols.append(f"    {w:<8}  {_name('M', i):<8}  {_f(coef)}")
            if i in reverse_set and X[i, j] != 0:
                cols.append(f"    {w:<8}  {_name('R', i):<8}  {_f(X[i, j])}")
        cols.append(f"    {w:<8}  {_name('T', j):<8}  1.0")
        if inst.mode == "weighted":
            cols.append(f"    {w:<8}  {_name('X', j):<8}  1.0")
    if inst.mode == "normalized":
        cols.append(f"    LAM       OBJ       {_f(-inst.eta[d] / D)}")
    lines += ["COLUMNS"] + cols

    rhs = []
    for i in range(n):
        value = inst.kappa + b[i] if y[i] > 0 else -b[i]
        if value != 0:
            rhs.append(f"    RHS       {_name('M', i):<8}  {_f(value)}")
    for i in reverse:
        rhs.append(f"    RHS       {_name('R', i):<8}  {_f(c + b[i] if y[i] > 0 else b[i] - c)}")
    if inst.mode == "weighted":
        for j in range(d):
            rhs.append(f"    RHS       {_name('X', j):<8}  {_f(space.bound)}")
    if ball:
        rhs.append(f"    RHS       QBALL     {_f(D * D)}")
    lines += ["RHS"] + rhs

    if inst.mode == "weighted":
        lines.append("RANGES")
        for j in range(d):
            lines.append(f"    RNG       {_name('X', j):<8}  {_f(2 * space.bound)}")

    bounds = []
    for i in range(n):
        bounds.append(f" BV BND       {_name('E', i)}")
    K = space.steps
    for j in range(d):
        bounds.append(f" LO BND       {_name('Z', j):<8}  {-K}")
        bounds.append(f" UP BND       {_name('Z', j):<8}  {K}")
    for j in range(d):
        bounds.append(f" LO BND       {_name('W', j):<8}  {_f(-space.bound)}")
        bounds.append(f" UP BND       {_name('W', j):<8}  {_f(space.bound)}")
    if inst.mode == "normalized":
        bounds.append(" LO BND       LAM       0.0")
        bounds.append(f" UP BND       LAM       {_f(D)}")
    lines += ["BOUNDS"] + bounds

    if ball:
        lines.append("QCMATRIX   QBALL")
        if inst.mode == "normalized":
            lines.append("    LAM       LAM       1.0")
        for j in range(d):
            w = _name("W", j)
            lines.append(f"    {w:<8}  {w:<8}  1.0")
    lines.append("ENDATA")

    path = Path(destination)
    path.write_text("\n".join(lines) + "\n")
    return path


export_mps = write_mps


class MpsModel:
    """Raw contents of an MPS file (section-level parse)."""

    def __init__(self):
        self.meta: dict[str, list[str]] = {}
        self.row_types: dict[str, str] = {}
        self.objective_row: str | None = None
        self.coef: dict[tuple[str, str], float] = {}
        self.columns: list[str] = []
        self.integer: set[str] = set()
        self.rhs: dict[str, float] = defaultdict(float)
        self.ranges: dict[str, float] = {}
        self.bounds: dict[str, dict[str, float]] = defaultdict(dict)
        self.binary: set[str] = set()
        self.qc: dict[str, dict[tuple[str, str], float]] = defaultdict(dict)

    def column_kinds(self) -> dict[str, int]:
        out = {"binary": 0, "integer": 0, "continuous": 0}
        for col in self.columns:
            if col in self.binary:
                out["binary"] += 1
            elif col in self.integer:
                out["integer"] += 1
            else:
                out["continuous"] += 1
        return out

    def rows_with_prefix(self, prefix: str) -> list[str]:
        return [r for r in self.row_types if r.startswith(prefix)]


def read_mps_model(source) -> MpsModel:
    m = MpsModel()
    section = None
    in_int = False
    qc_row = None
    for raw in Path(source).read_text().splitlines():
        if raw.startswith("*"):
            parts = raw[1:].split()
            if len(parts) >= 2 and parts[0] == "objpert":
                m.meta[parts[1]] = parts[2:]
            continue
        if not raw.strip():
            continue
        if not raw[0].isspace():
            head = raw.split()
            section = head[0]
            if section == "QCMATRIX":
                qc_row = head[1]
            continue
        tok = raw.split()
        if section == "ROWS":
            kind, name = tok
            m.row_types[name] = kind
            if kind == "N" and m.objective_row is None:
                m.objective_row = name
        elif section == "COLUMNS":
            if len(tok) >= 3 and tok[1] == "'MARKER'":
                in_int = tok[2] == "'INTORG'"
                continue
            col = tok[0]
            if col not in m.columns:
                m.columns.append(col)
                if in_int:
                    m.integer.add(col)
            for row, val in zip(tok[1::2], tok[2::2]):
                m.coef[(col, row)] = float(val)
        elif section == "RHS":
            for row, val in zip(tok[1::2], tok[2::2]):
                m.rhs[row] = float(val)
        elif section == "RANGES":
            for row, val in zip(tok[1::2], tok[2::2]):
                m.ranges[row] = float(val)
        elif section == "BOUNDS":
            kind, col = tok[0], tok[2]
            if kind == "BV":
                m.binary.add(col)
            else:
                m.bounds[col][kind] = float(tok[3])
        elif section == "QCMATRIX":
            m.qc[qc_row][(tok[0], tok[1])] = float(tok[2])
    return m


def _meta_float(m: MpsModel, key: str) -> float:
    try:
        return float(m.meta[key][0])
    except (KeyError, IndexError):
        raise ValueError(f"MPS file lacks the '* objpert {key}' header") from None


def read_mps(source) -> MipInstance:
    """Parse a file written by :func:`write_mps` back into a :class:`MipInstance`."""
    m = read_mps_model(source)
    mode = m.meta.get("mode", [None])[0]
    tau = _meta_float(m, "tau")
    bound = _meta_float(m, "bound")
    radius = _meta_float(m, "radius")
    kappa = _meta_float(m, "kappa")

    w_cols = sorted(c for c in m.columns if c.startswith("W"))
    e_cols = sorted(c for c in m.columns if c.startswith("E"))
    d, n = len(w_cols), len(e_cols)
    space = DiscreteSpace(d, tau, bound, radius)
    for j, w in enumerate(w_cols):
        if m.coef.get((_name("Z", j), _name("T", j))) != -tau:
            raise ValueError(f"grid link row for coordinate {j} disagrees with tau")
        if m.bounds[w].get("UP") != bound:
            raise ValueError(f"bound on {w} disagrees with the header")

    X = np.zeros((n, d))
    offsets = np.array([float(v) for v in m.meta["offsets"]]) if "offsets" in m.meta else np.zeros(n)
    labels = [int(v) for v in m.meta["labels"]] if "labels" in m.meta else None
    y = np.zeros(n, dtype=np.int64)
    big_m = None
    for i in range(n):
        row = _name("M", i)
        if labels is not None:
            y[i] = labels[i]
        else:
            y[i] = 1 if m.rhs.get(row, 0.0) > 0 else -1
        for j, w in enumerate(w_cols):
            coef = m.coef.get((w, row), 0.0)
            X[i, j] = coef if y[i] > 0 else -coef
        c = m.coef[(_name("E", i), row)]
        if big_m is not None and c != big_m:
            raise ValueError("big-M constant differs between rows")
        big_m = c
    examples = Dataset(X, y, offsets)

    obj = m.objective_row
    weights = np.array([m.coef.get((e, obj), 0.0) for e in e_cols])
    eta = None
    if mode == "weighted":
        pass
    elif mode == "linear":
        eta = np.array([-m.coef.get((w, obj), 0.0) for w in w_cols])
    elif mode == "normalized":
        eta = np.array([float(v) for v in m.meta["eta"]])
        from_matrix = np.array(
            [-m.coef.get((w, obj), 0.0) * radius for w in w_cols]
            + [-m.coef.get(("LAM", obj), 0.0) * radius]
        )
        if not np.allclose(eta, from_matrix, rtol=1e-12, atol=1e-12):
            raise ValueError("objective coefficients disagree with the eta header")
        if "QBALL" in m.rhs and not math.isclose(m.rhs["QBALL"], radius * radius, rel_tol=1e-12):
            raise ValueError("ball row disagrees with the radius header")
    else:
        raise ValueError(f"unknown mode {mode!r}")
    if mode != "weighted" and not np.all(weights == 1.0):
        raise ValueError("unweighted modes must have unit error costs")

    return MipInstance(
        examples,
        space,
        mode,
        eta=eta,
        weights=weights if mode == "weighted" else None,
        big_m=big_m if big_m is not None else None,
        kappa=kappa,
    )


def instances_equal(a: MipInstance, b: MipInstance) -> bool:
    def same(u, v):
        if u is None or v is None:
            return u is None and v is None
        return np.array_equal(u, v)

    return (
        a.mode == b.mode
        and a.space == b.space
        and a.examples == b.examples
        and same(a.eta, b.eta)
        and same(a.weights, b.weights)
        and (a.examples.n == 0 or a.big_m == b.big_m)
        and a.kappa == b.kappa
    )
