"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line."""

import math
import random
import time

import pytest

from veriscope.datasets import A1, A4, E2, E4, EXAMPLE_WORLD, R1, R3, synthetic_join_database
from veriscope.experiments import AVG, MESREDUCE, Strategy, run_comparison
from veriscope.ilp import solve_binary_max
from veriscope.mes import CNF_DUAL, ILP, TERM_SCAN, brute_force_of, mes, mes_brute_force, mes_of
from veriscope.model import labeling_probability
from veriscope.provenance import CNF, DNF, ProvExpr, vars_of
from veriscope.query import evaluate_with_provenance, parse_query
from veriscope.reduce import THRESHOLD, mes_reduce
from veriscope.risky import RISKY, classify_tuples, is_risky, is_risky_at
from veriscope.verifier import VerifierModel

from .conftest import flat_des, output, random_annotation, random_monotone
from .test_ilp import enumerate_best, random_program


class RoundedGoldenMismatch(AssertionError):
    """Exact values hold, but a golden value is a rounded figure that misses its stated tolerance."""


@pytest.fixture
def report(capsys):
    def emit(number, title, ok, detail="", literal_ok=True):
        passed = ok and literal_ok
        with capsys.disabled():
            print(f"\n[{'PASS' if passed else 'FAIL'}] criterion {number}: {title}" + (f" ({detail})" if detail else ""))
        assert ok, f"criterion {number} failed: {detail}"
        if not literal_ok:
            raise RoundedGoldenMismatch(f"criterion {number}: {detail}")

    return emit


rounded_golden = pytest.mark.xfail(
    raises=RoundedGoldenMismatch, strict=True, reason="a golden value is rounded below the stated tolerance"
)


def close(a, b, tol):
    return abs(a - b) <= tol


def test_criterion_01_running_example(report, des):
    from veriscope.datasets import FOUNDERS_QUERY

    start = time.perf_counter()
    outs = evaluate_with_provenance(des, parse_query(FOUNDERS_QUERY, des))
    p = math.exp(labeling_probability(des, EXAMPLE_WORLD))
    elapsed = time.perf_counter() - start
    ok = (
        close(p, 0.01176, 1e-9)
        and [o.derived for o in outs] == [1, None, 0]
        and [o.prov for o in outs]
        == [
            ProvExpr.dnf([[1, 5, 10], [1, 8, 11]]),
            ProvExpr.dnf([[2, 6, 9], [3, 6, 9]]),
            ProvExpr.dnf([[A4, R3, E4]]),
        ]
        and elapsed < 1.0
    )
    report(1, "running-example golden suite", ok, f"P={p:.6g}, {elapsed:.3f}s")


@rounded_golden
def test_criterion_02_mes_goldens(report, des, founders):
    o1, _, o3 = founders
    s1, b1, s3 = mes(des, o1), mes_brute_force(des, o1), mes(des, o3)
    ok = s1.method == ILP and close(s1.value, 0.224, 1e-9) and close(b1.value, 0.224, 1e-9)
    ok = ok and s3.method == TERM_SCAN and s3.value == 0.0
    values, literal_ok = [], True
    # err(e2)=0.01 gives 0.99 * 0.8 * 0.3 = 0.2376 exactly; the golden value is 0.237
    for tid, err, exact, golden in [
        (A1, 0.1, 0.288, 0.288), (R1, 0.1, 0.252, 0.252), (E2, 0.01, 0.2376, 0.237), (E2, 0.1, 0.216, 0.216)
    ]:
        d = des.with_err(tid, err)
        v = mes(d, o1).value
        values.append(round(v, 6))
        ok = ok and close(v, exact, 1e-9) and close(mes_brute_force(d, o1).value, exact, 1e-9)
        literal_ok = literal_ok and close(v, golden, 1e-9)
    detail = f"o1={s1.value:.6g}, o3={s3.value}, perturbed={values}"
    if not literal_ok:
        detail += "; golden 0.237 is 0.2376 truncated, outside 1e-9"
    report(2, "MES golden values", ok, detail, literal_ok)


def test_criterion_03_risky_goldens(report, des, founders):
    o1 = founders[0]
    reports = classify_tuples(des, o1)
    all_risky = [(r.tuple_id, r.classification) for r in reports] == [(A1, RISKY), (R1, RISKY), (E2, RISKY)]
    e2 = is_risky(des, o1, E2).classification == RISKY
    ok = all_risky and e2 and is_risky_at(des, o1, E2, 0.01) and not is_risky_at(des, o1, E2, 0.1)
    report(3, "risky-tuple goldens", ok, "a1, r1, e2 risky; e2 unsafe at 0.01, safe at 0.1")


def test_criterion_04_all_tuples_risky(report, des, alumni):
    ok, seen = True, []
    for labels in ({5: 1, 11: 1, 8: 0, 10: 0}, {5: 0, 11: 0, 8: 1, 10: 1}):
        d = des.with_updates(labels={t: None for t in des.labels})
        d = d.with_updates(labels=labels, errs={t: 0.3 for t in labels})
        o = alumni[0].relabel(d)
        v = mes(d, o).value
        seen.append(round(v, 6))
        ok = ok and close(v, 0.1029, 1e-9) and all(is_risky_at(d, o, t, 0.2) for t in labels)
    report(4, "every tuple risky under both labelings", ok, f"MES={seen}")


@rounded_golden
def test_criterion_05_scaled_error_arithmetic(report):
    def product(scale):
        p = [0.2 * scale, 0.2 * scale, 0.3 * scale, 0.3 * scale]
        d = flat_des(4, {i: 0 for i in range(1, 5)}, dict(zip(range(1, 5), p)))
        return math.exp(labeling_probability(d, {1: 1, 2: 0, 3: 1, 4: 0}))

    a, b, c = product(1), product(0.125), product(0.5)
    # 0.025 * 0.975 * 0.0375 * 0.9625 = 0.00087978515625; the golden value is 0.0008
    ok = close(a, 0.0336, 1e-12) and close(b, 0.00087978515625, 1e-12) and close(c, 0.011475, 1e-12)
    literal_ok = close(b, 0.0008, 1e-12)
    detail = f"{a:.6g}, {b:.8g}, {c:.6g}"
    if not literal_ok:
        detail += "; golden 0.0008 is a rounding of 0.00087978, outside 1e-12"
    report(5, "scaled-error arithmetic", ok, detail, literal_ok)


def test_criterion_06_zero_mes_law(report, des, founders):
    res = mes_reduce(des, founders, 100, EXAMPLE_WORLD, VerifierModel.perfect())
    final = res.trace.steps[-1].max_mes
    ok = res.trace.termination == THRESHOLD and final == 0.0
    report(6, "perfect verifier drives max MES to 0", ok, f"final={final}, cost={res.trace.cost}")


def test_criterion_07_oracle_equivalence(report):
    start = time.perf_counter()
    counts = {TERM_SCAN: 0, ILP: 0, CNF_DUAL: 0, "cnf-flip": 0}
    bad = 0
    for seed in range(520):
        rng = random.Random(700_000 + seed)
        n = rng.randint(1, 12)
        for form, derived, key in ((DNF, 0, TERM_SCAN), (DNF, 1, ILP), (CNF, 1, CNF_DUAL), (CNF, 0, "cnf-flip")):
            prov = random_monotone(rng, n, form)
            labels, errs = random_annotation(rng, vars_of(prov))
            fast = mes_of(prov, derived, labels, errs)
            slow = brute_force_of(prov, derived, labels, errs)
            counts[key] += 1
            bad += not math.isclose(fast.value, slow.value, abs_tol=1e-9)
    elapsed = time.perf_counter() - start
    ok = bad == 0 and min(counts.values()) >= 500 and elapsed < 60
    report(7, "MES routes match brute force", ok, f"{sum(counts.values())} instances, {bad} mismatches, {elapsed:.1f}s")


def test_criterion_08_ilp_exactness(report):
    bad = infeasible_mismatch = 0
    for seed in range(220):
        rng = random.Random(800_000 + seed)
        n = rng.randint(1, 16)
        p = random_program(rng, n, n_fixed=rng.randint(0, min(4, n)))
        expected = enumerate_best(p)
        sol = solve_binary_max(p)
        blocked = any(all(p.fixed.get(x) == 1 for x in g) for g in p.groups)
        infeasible_mismatch += (sol.status == "infeasible") != blocked
        if expected is None:
            bad += sol.status != "infeasible"
        else:
            bad += not math.isclose(sol.value, expected, abs_tol=1e-9)
    # a group becomes fully fixed to 1 only through the fixed assignment; propagation never sets 1
    ok = bad == 0 and infeasible_mismatch == 0
    report(8, "branch and bound matches enumeration", ok, f"220 programs, {bad} value / {infeasible_mismatch} feasibility mismatches")


def test_criterion_09_risky_classification(report):
    instances = checks = bad = closure_bad = 0
    seed = 0
    while instances < 220:
        rng = random.Random(900_000 + seed)
        seed += 1
        n = rng.randint(1, 8)
        prov = random_monotone(rng, n, rng.choice([DNF, CNF]))
        labels, errs = random_annotation(rng, vars_of(prov), p_unknown=0.2, p_zero_err=0.2)
        d = flat_des(n, labels, errs)
        o = output(prov, rng.randint(0, 1))
        cands = [x for x in vars_of(prov) if x in labels and errs[x] > 0]
        if not cands:
            continue
        instances += 1
        base = brute_force_of(prov, o.derived, labels, errs)
        for t in cands:
            checks += 1
            zero = brute_force_of(prov, o.derived, labels, {**errs, t: 0.0})
            oracle = zero.log_value > base.log_value + 1e-12
            bad += (is_risky(d, o, t).classification == RISKY) != oracle
            qs = sorted(rng.uniform(0, errs[t]) for _ in range(4))
            unsafe = [is_risky_at(d, o, t, q) for q in qs]
            closure_bad += any(hi and not lo for lo, hi in zip(unsafe, unsafe[1:]))
    ok = bad == 0 and closure_bad == 0
    report(9, "risky classification and downward closure", ok, f"{instances} instances, {checks} tuples, {bad}+{closure_bad} violations")


def test_criterion_10_directional_effectiveness(report):
    start = time.perf_counter()
    des, query = synthetic_join_database(seed=0)
    outputs = evaluate_with_provenance(des, parse_query(query, des))
    assert len(des.tuple_ids) >= 100 and len(outputs) >= 20
    reports = run_comparison(des, outputs, [AVG], Strategy.parse("all"), budget=1000, repeats=30, seed=0)
    elapsed = time.perf_counter() - start
    by = {r.strategy: r for r in reports}
    ours = by.pop(MESREDUCE)
    best_ratio = max(by.values(), key=lambda r: r.mean_log_ratio)
    best_auc = max(by.values(), key=lambda r: r.worst_f1_auc)
    ok = (
        ours.mean_log_ratio > 1
        and all(ours.mean_log_ratio >= r.mean_log_ratio for r in by.values())
        and all(ours.worst_f1_auc >= r.worst_f1_auc for r in by.values())
        and elapsed < 600
    )
    detail = (
        f"{len(des.tuple_ids)} tuples, {len(outputs)} outputs; log-ratio {ours.mean_log_ratio:.3f} vs "
        f"{best_ratio.strategy} {best_ratio.mean_log_ratio:.3f}; worst F1 AUC {ours.worst_f1_auc:.1f} vs "
        f"{best_auc.strategy} {best_auc.worst_f1_auc:.1f}; {elapsed:.0f}s"
    )
    report(10, "MESReduce beats the baselines on AVG", ok, detail)
