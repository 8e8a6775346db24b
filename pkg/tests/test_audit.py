import json
import math

import numpy as np
import pytest
from scipy import stats

from objpert.audit import (
    THREE_SIGMA_ALPHA,
    audit_counts,
    audit_dp,
    bin_outputs,
    check_concentration,
    check_shift_mapping,
    clopper_pearson,
    estimate_stability,
    mapping_sweep,
    objdisc_sampler,
    objsamp_sampler,
    shift_map,
    stability_bound,
    tie_rate,
    toy_neighbor_pairs,
)
from objpert.core import ContinuousSpace, Dataset, DiscreteSpace, PrivacyBudget
from objpert.mechanisms import BoxLinearOracle, LinearLosses, objsamp_params
from objpert.noise import RngStream

UNIT = DiscreteSpace(1, 1, 1, 1)


def test_clopper_pearson_matches_scipy_exact_interval():
    for k, n in [(0, 50), (3, 50), (50, 50), (480, 1000)]:
        lo, hi = clopper_pearson(k, n)
        ref = stats.binomtest(k, n).proportion_ci(confidence_level=1 - THREE_SIGMA_ALPHA, method="exact")
        assert float(lo) == pytest.approx(ref.low, abs=1e-12)
        assert float(hi) == pytest.approx(ref.high, abs=1e-12)


# ---------------------------------------------------------------- mapping

def test_shift_map_examples():
    eta = np.array([0.3, -0.2, 1.0])
    np.testing.assert_array_equal(shift_map((1.0, 0.0), eta, 0.0, 2.0), eta)
    np.testing.assert_allclose(shift_map((0.0,), np.zeros(2), 3.0, 1.0), (0.0, 3.0))
    moved = shift_map((1.0, 1.0), eta, 2.5, 2.0)
    assert np.linalg.norm(moved - eta) == pytest.approx(2.5)


def test_mapping_self_neighbor_passes_for_any_nonnegative_shift():
    data = Dataset([[1.0], [-0.5], [2.0]], [1, -1, 1])
    gen = np.random.default_rng(0)
    for c in (0.0, 0.5, 4.0):
        for _ in range(20):
            res = check_shift_mapping(data, data, gen.normal(size=2), UNIT, c)
            assert res.status in ("pass", "skipped")


def test_mapping_violation_without_shift():
    data = Dataset([[1.0]], [1])
    nb = Dataset([[1.0]], [-1])
    res = check_shift_mapping(data, nb, np.array([0.0, 0.1]), UNIT, 0.0)
    assert res.status == "violation"
    assert res.w_hat == [1.0] and res.w_shifted == [0.0]
    assert check_shift_mapping(data, nb, np.array([0.0, 0.1]), UNIT, 4.0).status == "pass"


def test_mapping_tie_is_skipped():
    data = Dataset([[1.0], [-1.0]], [1, 1])
    assert check_shift_mapping(data, data, np.zeros(2), UNIT, 4.0).status == "skipped"


def test_mapping_rejects_non_neighbors():
    a = Dataset([[1.0], [1.0]], [1, 1])
    b = Dataset([[2.0], [2.0]], [1, 1])
    with pytest.raises(ValueError):
        check_shift_mapping(a, b, np.zeros(2), UNIT, 1.0)


def test_mapping_sweep_small_run_is_deterministic():
    a = mapping_sweep(40, None, RngStream(1))
    b = mapping_sweep(40, None, RngStream(1))
    assert a == b
    big = a["4GD^2/tau"]
    assert big.passes + big.violations + big.skipped == 40
    assert big.violations == 0


# ---------------------------------------------------------------- ties

def test_tie_rate_examples():
    data = Dataset([[1.0], [-1.0]], [1, 1])
    assert tie_rate(data, UNIT, 0.0, 100, RngStream(0)) == 1.0
    assert tie_rate(data, UNIT, 1.0, 100_000, RngStream(0)) == 0.0
    assert tie_rate(data, DiscreteSpace(1, 1, 0, 1), 1.0, 10, RngStream(0)) == 0.0


# ---------------------------------------------------------------- stability

def _box_instance(seed, d=2, n=20):
    box = ContinuousSpace.cube(d, 1.0)
    gen = np.random.default_rng(seed)
    data = LinearLosses.random(n, box, gen)
    fresh = LinearLosses.random(1, box, gen)
    return box, data, data.neighbor(0, fresh.A[0], fresh.b[0])


def test_stability_identical_datasets_is_zero():
    box, data, _ = _box_instance(0)
    est = estimate_stability(data, data, BoxLinearOracle(box), 0.5, 1000, RngStream(0), dim=2, vectorized=True)
    assert est.mean == 0.0 and est.half_width == 0.0


def test_stability_is_monotone_in_rate_and_below_bound():
    box, data, nb = _box_instance(3)
    oracle = BoxLinearOracle(box)
    rates = [2.0, 0.5, 0.1, 0.02]
    means = [estimate_stability(data, nb, oracle, r, 20_000, RngStream(4), dim=2, vectorized=True).mean
             for r in rates]
    assert all(a >= b for a, b in zip(means, means[1:]))
    G = data.lipschitz_l1
    for r, m in zip(rates, means):
        assert m <= stability_bound(r, G, 2, box.diameter_linf)


def test_stability_loop_and_batch_paths_agree():
    box, data, nb = _box_instance(5)
    oracle = BoxLinearOracle(box)
    a = estimate_stability(data, nb, oracle, 0.3, 500, RngStream(1), dim=2, vectorized=True)
    b = estimate_stability(data, nb, oracle, 0.3, 500, RngStream(1), dim=2, vectorized=False)
    assert a == b


# ---------------------------------------------------------------- concentration

def test_concentration_degenerate_oracle_passes():
    rep = check_concentration(None, lambda ds, eta: np.ones(2), 1.0, 0.2, 0.1, 1.0, RngStream(0), dim=2, repeats=20)
    assert rep.verdict == "pass" and rep.max_deviation == 0.0


def test_concentration_box_instance_passes():
    box, data, _ = _box_instance(7)
    rep = check_concentration(data, BoxLinearOracle(box), 0.5, 0.1, 0.1, box.diameter_linf,
                              RngStream(1), dim=2, repeats=200, vectorized=True)
    assert rep.m == math.ceil(math.log(40) / 0.02)
    assert rep.verdict == "pass"


def test_concentration_budget_is_inconclusive():
    rep = check_concentration(None, lambda ds, eta: np.ones(2), 1.0, 1e-3, 0.1, 1.0, RngStream(0), dim=2)
    assert rep.verdict == "inconclusive" and rep.repeats == 0


# ---------------------------------------------------------------- DP audit

def test_toy_pairs_are_neighbors():
    for a, b in toy_neighbor_pairs().values():
        assert a.n == b.n == 6 and a.dim == 1
        assert len(a.differing_indices(b)) == 1


def test_audit_identical_datasets_pass():
    data, _ = toy_neighbor_pairs()["flip-label"]
    budget = PrivacyBudget(1.0, 1 / 36)
    rep = audit_dp(objdisc_sampler(UNIT, budget), data, data, budget, 50_000, RngStream(0))
    assert rep.verdict == "pass" and rep.worst_ratio < 1.1


def test_audit_calibrated_mechanism_passes():
    data, nb = toy_neighbor_pairs()["flip-label"]
    budget = PrivacyBudget(1.0, 1 / 36)
    rep = audit_dp(objdisc_sampler(UNIT, budget), data, nb, budget, 50_000, RngStream(1))
    assert rep.verdict == "pass"
    assert sum(c.count for c in rep.cells) == 50_000


def test_audit_sabotaged_mechanism_fails():
    # the balanced side is fully tied (lex-smallest -1); the neighbor prefers +1
    data, nb = toy_neighbor_pairs()["flip-label"]
    budget = PrivacyBudget(1.0, 1 / 36)
    rep = audit_dp(objdisc_sampler(UNIT, budget, sigma=0.0), data, nb, budget, 5_000, RngStream(1))
    assert rep.verdict == "fail" and rep.violations >= 1


def test_audit_counts_inconclusive_when_only_point_estimates_violate():
    rep = audit_counts([[0.0], [1.0]], [60, 40], [20, 80], 100, PrivacyBudget(0.5, 0.01))
    assert rep.verdict == "inconclusive"


def test_audit_report_json_roundtrip():
    rep = audit_counts([[0.0]], [10], [10], 10, PrivacyBudget(1.0, 0.1))
    back = json.loads(rep.to_json(sort_keys=True))
    assert set(back) == {"trials", "epsilon", "delta", "violations", "worst_ratio", "worst_excess",
                         "half_width", "verdict", "test", "cells"}
    assert back["cells"] == [{"cell": [0.0], "count": 10, "count_neighbor": 10}]


def test_audit_is_deterministic():
    data, nb = toy_neighbor_pairs()["near-tie"]
    budget = PrivacyBudget(0.5, 1 / 36)
    reps = [audit_dp(objdisc_sampler(UNIT, budget), data, nb, budget, 10_000, RngStream(3)) for _ in range(2)]
    assert reps[0] == reps[1]


def test_audit_refuses_oversized_output_space():
    def scatter(dataset, trials, gen):
        return gen.normal(size=(trials, 1))

    data, nb = toy_neighbor_pairs()["flip-label"]
    with pytest.raises(ValueError):
        audit_dp(scatter, data, nb, PrivacyBudget(1, 0.1), 2000, RngStream(0))


def test_objsamp_binned_sampler_runs():
    box = ContinuousSpace.cube(1, 1.0)
    gen = np.random.default_rng(0)
    data = LinearLosses.random(10, box, gen)
    nb = data.neighbor(0, np.array([0.0]), 0.5)
    budget = PrivacyBudget(1.0, 0.1)
    params = objsamp_params(1, 25, box.diameter_l2, box.diameter_linf, 1.0, 1.0, 0.1)
    edges = [np.linspace(-1, 1, 9)]
    sampler = objsamp_sampler(box, BoxLinearOracle(box), budget, 1.0, edges, params=params)
    rep = audit_dp(sampler, data, nb, budget, 2000, RngStream(0))
    assert rep.verdict in ("pass", "inconclusive")
    assert bin_outputs(np.array([[-2.0], [0.05], [2.0]]), edges).ravel().tolist() == [0, 5, 9]
