import math
import random

import numpy as np
import pytest

from veriscope.datasets import A1, A2, E2, EXAMPLE_WORLD, R1, synthetic_join_database
from veriscope.experiments import gen_scenario
from veriscope.mes import mes
from veriscope.model import labeling_probability
from veriscope.provenance import ProvExpr, eval_k3, vars_of
from veriscope.query import evaluate_with_provenance, parse_query
from veriscope.reduce import (
    BUDGET,
    FORMULA_COUNT,
    NO_PROGRESS,
    OCCURRENCES_COUNT,
    PROB_GREEDY,
    RANDOM,
    THRESHOLD,
    ReduceConfig,
    baseline_order,
    find_improvement_set,
    mes_reduce,
    next_probability,
    re_verify,
    run_baseline,
)
from veriscope.risky import RiskLimits
from veriscope.verifier import FIXED_ORACLE, Budget, VerifierModel

from .conftest import flat_des, output, random_annotation, random_monotone

PERFECT = VerifierModel.perfect()


def test_improvement_set_for_correct_output(des, founders):
    # every labeled tuple of o1 is risky, so the cheapest satisfied term is chosen
    assert find_improvement_set(des, founders[0]) == {A1, R1, E2}


def test_improvement_set_skips_zero_error_tuples(des, founders):
    # o3's only term is already blocked by a4 (label 0, error 0)
    assert find_improvement_set(des, founders[2]) == set()


def test_improvement_set_hits_every_term():
    d = flat_des(2, {1: 0, 2: 0}, {1: 0.2, 2: 0.2})
    assert find_improvement_set(d, output(ProvExpr.dnf([[1], [2]]), 0)) == {1, 2}


def test_improvement_set_prefers_shared_tuples():
    # tuple 1 sits in both terms and hits them at once
    d = flat_des(3, {1: 0, 2: 0, 3: 0}, {1: 0.3, 2: 0.3, 3: 0.3})
    o = output(ProvExpr.dnf([[1, 2], [1, 3]]), 0)
    assert find_improvement_set(d, o, RiskLimits(max_candidates=0)) == {1}


def test_improvement_set_takes_a_safe_tuple():
    # the only falsifying world sets both tuples to 0, so both are safe; ties go to the lower id
    d = flat_des(2, {1: 1, 2: 1}, {1: 0.2, 2: 0.3})
    o = output(ProvExpr.dnf([[1], [2]]), 1)
    assert find_improvement_set(d, o) == {1}


def test_improvement_set_needs_known_label(des, founders):
    with pytest.raises(ValueError):
        find_improvement_set(des, founders[1])


@pytest.mark.parametrize(
    "err,theta,expected",
    [
        (0.3, 0.001, 0.2),
        (0.028, 0.001, 1 / 37),
        (0.05, 0.05, 0.05),
    ],
)
def test_next_probability(err, theta, expected):
    d = flat_des(2, {1: 1, 2: 1}, {1: err, 2: 0.4})
    o = output(ProvExpr.dnf([[1, 2]]), 1)
    assert next_probability(d, o, {1}, Budget(100), theta, PERFECT) == pytest.approx(expected)


def test_next_probability_without_positive_errors():
    d = flat_des(1, {1: 1}, {1: 0.0})
    o = output(ProvExpr.dnf([[1]]), 1)
    assert next_probability(d, o, {1}, Budget(100), 0.01, PERFECT) == 0.01


def test_next_probability_respects_the_budget_floor():
    d = flat_des(1, {1: 1}, {1: 0.3})
    o = output(ProvExpr.dnf([[1]]), 1)
    model = VerifierModel(error=0.3)
    # one vote per tuple cannot beat the worker error
    assert next_probability(d, o, {1}, Budget(1), 0.0, model) == pytest.approx(0.3)


def test_re_verify_resolves_unknown_output(des, founders):
    budget = Budget(10)
    out = re_verify(des, founders, budget, EXAMPLE_WORLD, PERFECT, np.random.default_rng(0))
    assert out.verified == (6, 9)  # r2 and e1
    assert founders[1].relabel(out.des).derived is not None
    assert budget.spent == 2


def test_re_verify_noop_when_all_known(des, founders):
    out = re_verify(des, [founders[0], founders[2]], Budget(10), EXAMPLE_WORLD, PERFECT, np.random.default_rng(0))
    assert out.cost == 0 and out.verified == ()


def test_re_verify_with_single_vote(des, founders):
    out = re_verify(des, founders, Budget(1), EXAMPLE_WORLD, PERFECT, np.random.default_rng(0))
    assert out.cost == 1 and out.verified == (6,) and out.skipped == (9,)


def test_perfect_verifier_drives_running_example_to_zero(des, founders):
    res = mes_reduce(des, founders, 100, EXAMPLE_WORLD, PERFECT)
    t = res.trace
    assert t.termination == THRESHOLD
    assert t.steps[-1].max_mes == 0.0
    assert all(d is not None for d in t.steps[-1].derived)
    assert t.steps[0].action == "init" and t.steps[0].max_mes == pytest.approx(0.224)


def test_theta_one_costs_nothing(des, founders):
    res = mes_reduce(des, founders, 100, EXAMPLE_WORLD, PERFECT, ReduceConfig(theta=1.0))
    assert res.trace.termination == THRESHOLD and res.trace.cost == 0 and len(res.trace.steps) == 1


def test_no_progress_when_verification_cannot_improve():
    # the oracle is no better than the current label, so a correct answer changes nothing
    d = flat_des(1, {1: 1}, {1: 0.3})
    o = output(ProvExpr.dnf([[1]]), 1)
    res = mes_reduce(d, [o], 10, {1: 1}, VerifierModel(FIXED_ORACLE, 0.3), rng=np.random.default_rng(0))
    assert res.trace.termination == NO_PROGRESS
    assert res.trace.cost == 1


def avg_workload(seed, n=14):
    des, query = synthetic_join_database(n, n, n, 3, 5, 3, seed=seed)
    outputs = evaluate_with_provenance(des, parse_query(query, des))
    scen = gen_scenario("AVG", des, seed=seed)
    return scen, outputs


@pytest.mark.parametrize("seed", range(6))
def test_budget_safety_and_step_costs(seed):
    scen, outputs = avg_workload(seed)
    res = mes_reduce(scen.des, outputs, 150, scen.truth, VerifierModel(), rng=np.random.default_rng(seed))
    costs = [s.cost for s in res.trace.steps]
    assert costs == sorted(costs) and costs[-1] <= 150
    assert res.trace.termination in (BUDGET, THRESHOLD, NO_PROGRESS)
    for kind in (RANDOM, PROB_GREEDY):
        b = run_baseline(kind, 0.01, scen.des, outputs, 150, scen.truth, VerifierModel(), np.random.default_rng(seed))
        assert b.trace.cost <= 150


@pytest.mark.parametrize("seed", range(3))
def test_runs_are_deterministic(seed):
    scen, outputs = avg_workload(seed)
    runs = [mes_reduce(scen.des, outputs, 120, scen.truth, VerifierModel(), rng=np.random.default_rng(7)) for _ in range(2)]
    assert runs[0].trace == runs[1].trace
    for kind in (RANDOM, FORMULA_COUNT, OCCURRENCES_COUNT, PROB_GREEDY):
        a, b = (
            run_baseline(kind, 0.01, scen.des, outputs, 120, scen.truth, VerifierModel(), np.random.default_rng(7))
            for _ in range(2)
        )
        assert a.trace == b.trace


@pytest.mark.parametrize("seed", range(4))
def test_affected_recompute_matches_full_recompute(seed):
    scen, outputs = avg_workload(seed)
    calls = []

    def check(state):
        calls.append(1)
        if len(calls) % 10 == 1:
            for o, s in zip(state.outputs, state.scores):
                fresh = o.relabel(state.des)
                assert o.derived == fresh.derived
                if fresh.derived is not None:
                    assert s.log_value == mes(state.des, fresh).log_value

    fast = mes_reduce(scen.des, outputs, 200, scen.truth, VerifierModel(), rng=np.random.default_rng(1), on_step=check)
    full = mes_reduce(
        scen.des, outputs, 200, scen.truth, VerifierModel(), ReduceConfig(full_recompute=True), np.random.default_rng(1)
    )
    assert calls
    assert fast.trace.steps == full.trace.steps


@pytest.mark.parametrize("seed", range(200))
def test_perfect_refinement_lowers_mes(seed):
    """Confirming the improvement set at error 0 lowers a positive MES."""
    rng = random.Random(seed)
    n = rng.randint(1, 8)
    prov = random_monotone(rng, n)
    labels, errs = random_annotation(rng, vars_of(prov), p_unknown=0.2)
    d = flat_des(n, labels, errs)
    derived = eval_k3(prov, d.labels, default_unknown=True)
    if derived is None:
        return
    o = output(prov, derived)
    before = mes(d, o)
    for limits in (RiskLimits(max_candidates=0), RiskLimits()):
        s = find_improvement_set(d, o, limits)
        if before.value > 0:
            assert s
        if not s:
            continue
        confirm = {x: (d.label(x) if d.label(x) is not None else derived) for x in s}
        after = mes(d.with_updates(labels=confirm, errs={x: 0.0 for x in s}), o)
        if limits.max_candidates == 0:
            assert after.log_value < before.log_value or before.value == 0
        else:
            assert after.log_value <= before.log_value + 1e-12


def test_formula_count_ties_fall_back_to_ids(founders):
    assert baseline_order(FORMULA_COUNT, founders) == list(range(1, 13))


def test_occurrences_count_starts_with_a1(founders):
    order = baseline_order(OCCURRENCES_COUNT, founders)
    assert order[0] == A1
    assert order[:3] == [A1, 6, 9]  # r2 and e1 also occur twice


def test_random_order_is_reproducible(founders):
    a = baseline_order(RANDOM, founders, np.random.default_rng(5))
    b = baseline_order(RANDOM, founders, np.random.default_rng(5))
    assert a == b and sorted(a) == list(range(1, 13))


def test_baseline_visits_order_and_repeats(des, founders):
    res = run_baseline(FORMULA_COUNT, 0.01, des, founders, 14, EXAMPLE_WORLD, PERFECT)
    assert [s.verified for s in res.trace.steps[1:]] == [(t,) for t in list(range(1, 13)) + [1, 2]]
    assert res.trace.termination == BUDGET and res.trace.cost == 14


def test_prob_greedy_takes_largest_error_first(des, founders):
    res = run_baseline(PROB_GREEDY, 0.01, des, founders, 3, EXAMPLE_WORLD, PERFECT)
    # unlabeled tuples count as 0.5, above e2's 0.4
    assert [s.verified[0] for s in res.trace.steps[1:]] == [6, 7, 8]


def test_baseline_validation(des, founders):
    with pytest.raises(ValueError):
        run_baseline("nope", 0.01, des, founders, 5, EXAMPLE_WORLD, PERFECT)
    with pytest.raises(ValueError):
        run_baseline(RANDOM, 0.5, des, founders, 5, EXAMPLE_WORLD, PERFECT)


def four_tuple_probability(scale):
    p = [0.2 * scale, 0.2 * scale, 0.3 * scale, 0.3 * scale]
    d = flat_des(4, {i: 0 for i in range(1, 5)}, dict(zip(range(1, 5), p)))
    return math.exp(labeling_probability(d, {1: 1, 2: 0, 3: 1, 4: 0}))


def test_scaled_error_arithmetic():
    assert four_tuple_probability(1) == pytest.approx(0.0336, abs=1e-12)
    # about 0.0008 after rounding
    assert four_tuple_probability(0.125) == pytest.approx(0.00087978515625, abs=1e-15)
    assert round(four_tuple_probability(0.125), 4) == 0.0009
    assert four_tuple_probability(0.5) == pytest.approx(0.011475, abs=1e-12)


def test_config_validation():
    for bad in (dict(theta=1.5), dict(top_k=0), dict(mu=0), dict(reverify_target=0.6)):
        with pytest.raises(ValueError):
            ReduceConfig(**bad)


def test_top_k_widens_selection(des, founders):
    narrow = mes_reduce(des, founders, 100, EXAMPLE_WORLD, PERFECT)
    wide = mes_reduce(des, founders, 100, EXAMPLE_WORLD, PERFECT, ReduceConfig(top_k=3))
    improve = lambda r: [s.verified for s in r.trace.steps if s.action == "improve"]
    assert improve(narrow) == [(A1, R1, E2)]
    # the second-ranked output o2 contributes a2
    assert improve(wide) == [(A1, A2, R1, E2)]
    assert wide.trace.steps[-1].max_mes == 0.0
