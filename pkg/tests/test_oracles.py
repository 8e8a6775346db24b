import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from objpert.core import Dataset, DiscreteSpace, LabeledExample, project, zero_one_loss
from objpert.oracles import (
    MipInstance,
    ObjectiveTable,
    bnb_linear,
    bnb_normalized,
    bnb_solve,
    bnb_weighted,
    exhaustive_linear,
    exhaustive_normalized,
    exhaustive_weighted,
    instances_equal,
    read_mps,
    read_mps_model,
    write_mps,
)


def brute_force(dataset, space, eta=None, weights=None, mode="normalized"):
    """Plain-Python reference: loop over every grid point, keep the first strict minimum."""
    k = int(math.floor(space.bound / space.tau + 1e-9))
    best = None
    for idx in itertools.product(range(-k, k + 1), repeat=space.dim):
        w = np.array(idx, dtype=float) * space.tau
        if float(np.sum(w * w)) > space.radius**2 * (1 + 1e-12):
            continue
        p = np.ones(dataset.n) if weights is None else weights
        val = sum(p[i] * zero_one_loss(ex, w) for i, ex in enumerate(dataset))
        if mode == "normalized":
            val -= float(np.dot(eta, project(w, space.radius)))
        elif mode == "linear":
            val -= float(np.dot(eta, w))
        if best is None or val < best[1]:
            best = (w, val)
    return best


def random_instance(gen, max_dim=3, max_n=10):
    d = int(gen.integers(1, max_dim + 1))
    n = int(gen.integers(1, max_n + 1))
    space = DiscreteSpace.integer_grid(d)
    X = np.round(gen.normal(size=(n, d)), 2)
    y = gen.choice([-1, 1], size=n)
    return Dataset(X, y), space


def test_exhaustive_matches_brute_force():
    gen = np.random.default_rng(11)
    for _ in range(60):
        data, space = random_instance(gen)
        eta = gen.normal(scale=2.0, size=space.dim + 1)
        got = exhaustive_normalized(data, eta, space)
        ref_w, ref_val = brute_force(data, space, eta)
        assert got.value == pytest.approx(ref_val, abs=1e-9)
        np.testing.assert_array_equal(got.w, ref_w)


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([0.3, 3.0, 30.0]))
def test_bnb_agrees_with_enumeration(seed, scale):
    gen = np.random.default_rng(seed)
    data, space = random_instance(gen)
    eta = gen.normal(scale=scale, size=space.dim + 1)
    a = exhaustive_normalized(data, eta, space)
    b = bnb_normalized(data, eta, space)
    assert b.exact
    assert abs(a.value - b.value) <= 1e-9
    np.testing.assert_array_equal(a.w, b.w)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000))
def test_linear_and_weighted_modes_agree(seed):
    gen = np.random.default_rng(seed)
    data, space = random_instance(gen)
    eta = gen.normal(scale=2.0, size=space.dim)
    a, b = exhaustive_linear(data, eta, space), bnb_linear(data, eta, space)
    assert abs(a.value - b.value) <= 1e-9
    weights = gen.normal(size=data.n)
    a, b = exhaustive_weighted(data, weights, space), bnb_weighted(data, weights, space)
    assert abs(a.value - b.value) <= 1e-9
    ref_w, ref_val = brute_force(data, space, weights=weights, mode="weighted")
    assert a.value == pytest.approx(ref_val, abs=1e-9)


def test_threshold_examples_agree():
    gen = np.random.default_rng(5)
    space = DiscreteSpace.integer_grid(4)
    for _ in range(30):
        n = 6
        X = np.round(gen.normal(size=(n, 4)), 1)
        data = Dataset(X, gen.choice([-1, 1], size=n), np.round(gen.normal(size=n), 1))
        eta = gen.normal(size=5)
        a, b = exhaustive_normalized(data, eta, space), bnb_normalized(data, eta, space)
        assert abs(a.value - b.value) <= 1e-9


def test_zero_perturbation_finds_erm():
    data = Dataset([[1.0], [2.0], [-1.0]], [1, 1, -1])
    out = bnb_normalized(data, np.zeros(2), DiscreteSpace(1, 1, 1, 1))
    assert out.value == 0 and out.w.tolist() == [1.0]


def test_node_budget_exhaustion_reports_inexact():
    gen = np.random.default_rng(0)
    data = Dataset(gen.normal(size=(20, 4)), gen.choice([-1, 1], size=20))
    out = bnb_normalized(data, gen.normal(size=5), DiscreteSpace.integer_grid(4), node_budget=3)
    assert not out.exact
    assert DiscreteSpace.integer_grid(4).contains(out.w)


def test_objective_table_batches_match_single_calls():
    gen = np.random.default_rng(2)
    data, space = random_instance(gen)
    table = ObjectiveTable.build(data, space)
    etas = gen.normal(size=(50, space.dim + 1))
    idx = table.argmin_normalized(etas)
    for e, i in zip(etas, idx):
        np.testing.assert_array_equal(table.points[i], exhaustive_normalized(data, e, space).w)


def test_mip_instance_validation():
    data = Dataset([[1.0]], [1])
    space = DiscreteSpace(1, 1, 1, 1)
    with pytest.raises(ValueError):
        MipInstance(data, space, "other")
    with pytest.raises(ValueError):
        MipInstance(data, space, "normalized", eta=np.zeros(1))
    with pytest.raises(ValueError):
        MipInstance(data, space, "weighted")
    with pytest.raises(ValueError):
        MipInstance(data, space, "normalized", big_m=0.5)


# ---------------------------------------------------------------- MPS

def test_mps_single_example_layout(tmp_path):
    data = Dataset([[1.0]], [1])
    inst = MipInstance(data, DiscreteSpace(1, 1, 1, 1), "linear", eta=np.array([0.5]))
    path = write_mps(inst, tmp_path / "one.mps")
    model = read_mps_model(path)
    kinds = model.column_kinds()
    assert kinds["binary"] == 1 and kinds["integer"] == 1
    assert len(model.rows_with_prefix("M")) == 1


@pytest.mark.parametrize("mode", ["normalized", "linear", "weighted"])
def test_mps_roundtrip(tmp_path, mode):
    gen = np.random.default_rng(4)
    space = DiscreteSpace(3, 0.5, 1.0, 1.3)
    data = Dataset(gen.normal(size=(7, 3)), gen.choice([-1, 1], size=7))
    kw = {"weights": gen.normal(size=7)} if mode == "weighted" else {
        "eta": gen.normal(size=4 if mode == "normalized" else 3)
    }
    inst = MipInstance(data, space, mode, **kw)
    back = read_mps(write_mps(inst, tmp_path / f"{mode}.mps"))
    assert instances_equal(inst, back)
    assert bnb_solve(back).value == bnb_solve(inst).value


def test_mps_roundtrip_with_thresholds(tmp_path):
    data = Dataset([[1.0, 0.0], [0.0, 1.0]], [-1, 1], [0.5, -1.5])
    inst = MipInstance(data, DiscreteSpace.integer_grid(2), "normalized", eta=np.array([1.0, -2.0, -0.5]))
    path = write_mps(inst, tmp_path / "thr.mps")
    text = path.read_text()
    assert "* objpert offsets" in text and "* objpert labels" in text
    assert "QBALL" in text
    assert instances_equal(inst, read_mps(path))


def test_mps_names_fit_fixed_columns(tmp_path):
    data = Dataset(np.ones((12, 2)), [1] * 12)
    path = write_mps(MipInstance(data, DiscreteSpace.integer_grid(2)), tmp_path / "n.mps")
    model = read_mps_model(path)
    assert all(len(c) <= 8 for c in model.columns)
    assert all(len(r) <= 8 for r in model.row_types)


def test_mps_rejects_tampered_header(tmp_path):
    data = Dataset([[1.0]], [1])
    path = write_mps(MipInstance(data, DiscreteSpace(1, 1, 1, 1), eta=np.array([1.0, 2.0])), tmp_path / "t.mps")
    path.write_text(path.read_text().replace("* objpert tau 1.0", "* objpert tau 0.5"))
    with pytest.raises(ValueError):
        read_mps(path)


def test_homogeneous_example_has_no_offset_header(tmp_path):
    inst = MipInstance(Dataset.from_examples([LabeledExample((1.0,), -1)]), DiscreteSpace(1, 1, 1, 1))
    assert "offsets" not in write_mps(inst, tmp_path / "h.mps").read_text()
