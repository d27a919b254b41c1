"""Scenarios, quality metrics and paired comparisons of reduction strategies.

Scenarios initialize the verifier labels of a database:

* ``WCS``: every tuple is truly correct but labeled incorrect with error 0.499;
* ``AVG``: truths are fair coin flips, errors are uniform on [0.2, 0.499] and
  each label is the truth flipped with its error probability;
* ``RLBL``: labels, errors and truths are supplied as-is.

Output quality is F1 of derived output labels (unknown read as 0) against
the outputs' true labels, integrated over verification cost.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .model import AnnotatedDES
from .provenance import eval_bool
from .query import AnnotatedOutput
from .reduce import BASELINES, ReduceConfig, ReductionTrace, mes_reduce, run_baseline
from .verifier import VerifierModel

WCS = "WCS"
AVG = "AVG"
RLBL = "RLBL"
SCENARIOS = (WCS, AVG, RLBL)
BASELINE_PROBS = (0.01, 0.0001)
MESREDUCE = "mesreduce"

WCS_ERR = 0.499
AVG_ERR_RANGE = (0.2, 0.499)


@dataclass(frozen=True)
class Scenario:
    kind: str
    truth: Mapping[int, int]
    des: AnnotatedDES
    seed: Optional[int] = None


def gen_scenario(
    kind: str,
    des: AnnotatedDES,
    seed: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
    labels: Optional[Mapping[int, int]] = None,
    errs: Optional[Mapping[int, float]] = None,
    truth: Optional[Mapping[int, int]] = None,
) -> Scenario:
    """Initialize ``des``'s labels for a scenario; deterministic per seed."""
    kind = kind.upper()
    ids = des.tuple_ids
    if kind == WCS:
        return Scenario(
            WCS, {t: 1 for t in ids}, des.with_updates(labels={t: 0 for t in ids}, errs={t: WCS_ERR for t in ids}), seed
        )
    if kind == AVG:
        rng = np.random.default_rng(seed) if rng is None else rng
        n = len(ids)
        true = rng.random(n) < 0.5
        err = rng.uniform(*AVG_ERR_RANGE, size=n)
        flip = rng.random(n) < err
        truth_map = {t: int(b) for t, b in zip(ids, true)}
        lab = {t: int(b ^ f) for t, b, f in zip(ids, true, flip)}
        return Scenario(AVG, truth_map, des.with_updates(labels=lab, errs=dict(zip(ids, err.tolist()))), seed)
    if kind == RLBL:
        if labels is None or errs is None or truth is None:
            raise ValueError("RLBL needs labels, error probabilities and ground truth")
        missing = [t for t in ids if t not in truth]
        if missing:
            raise ValueError(f"ground truth missing for tuples {missing[:5]}")
        cleared = {t: None for t in des.labels}
        base = des.with_updates(labels=cleared) if cleared else des
        return Scenario(RLBL, dict(truth), base.with_updates(labels=labels, errs=errs), seed)
    raise ValueError(f"unknown scenario {kind!r}")


def output_truths(outputs: Sequence[AnnotatedOutput], truth: Mapping[int, int]) -> list[int]:
    return [eval_bool(o.prov, truth) for o in outputs]


def f1_from_labels(predicted: Sequence[Optional[int]], actual: Sequence[int]) -> tuple[float, float, float]:
    tp = fp = fn = 0
    for p, a in zip(predicted, actual):
        p = 1 if p == 1 else 0
        if p and a:
            tp += 1
        elif p:
            fp += 1
        elif a:
            fn += 1
    precision = tp / (tp + fp) if tp + fp else 1.0
    recall = tp / (tp + fn) if tp + fn else 1.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return precision, recall, f1


def f1_of_outputs(des: AnnotatedDES, outputs: Sequence[AnnotatedOutput], truth: Mapping[int, int]) -> tuple[float, float, float]:
    """(precision, recall, F1) of the outputs' derived labels against the truth."""
    return f1_from_labels([o.relabel(des).derived for o in outputs], output_truths(outputs, truth))


def f1_curve(trace: ReductionTrace, actual: Sequence[int]) -> list[tuple[int, float]]:
    """(cumulative cost, F1) after every trace step."""
    return [(s.cost, f1_from_labels(s.derived, actual)[2]) for s in trace.steps]


def f1_auc(trace: ReductionTrace, actual: Sequence[int], budget: Optional[int] = None) -> float:
    """Area under F1 as a step function of cost, up to the budget."""
    if not trace.steps:
        raise ValueError("empty trace")
    total = trace.budget if budget is None else budget
    curve = f1_curve(trace, actual)
    area = 0.0
    for (c0, f), (c1, _) in zip(curve, curve[1:]):
        area += f * (c1 - c0)
    c_last, f_last = curve[-1]
    return area + f_last * max(0, total - c_last)


def mes_log_ratio(trace: ReductionTrace) -> Optional[float]:
    """ln(final max MES) / ln(initial max MES); inf when MES reaches 0."""
    first, last = trace.steps[0].max_mes, trace.steps[-1].max_mes
    if first is None or not 0 < first < 1 or last is None:
        return None
    if last == 0:
        return math.inf
    return math.log(last) / math.log(first)


@dataclass(frozen=True)
class Strategy:
    kind: str  # mesreduce or a baseline kind
    p: Optional[float] = None

    @property
    def name(self) -> str:
        return self.kind if self.p is None else f"{self.kind}:{self.p:g}"

    @classmethod
    def parse(cls, text: str) -> list["Strategy"]:
        """``all``, ``mesreduce``, ``random`` (both probabilities) or ``random:0.01``."""
        out = []
        for part in (s.strip() for s in text.split(",")):
            if not part:
                continue
            if part == "all":
                out.append(cls(MESREDUCE))
                out += [cls(k, p) for k in BASELINES for p in BASELINE_PROBS]
            elif part == MESREDUCE:
                out.append(cls(MESREDUCE))
            else:
                kind, _, p = part.partition(":")
                if kind not in BASELINES:
                    raise ValueError(f"unknown strategy {part!r}")
                out += [cls(kind, float(p))] if p else [cls(kind, q) for q in BASELINE_PROBS]
        return out


@dataclass
class RunRecord:
    strategy: str
    scenario: str
    repeat: int
    trace: ReductionTrace
    log_ratio: Optional[float]
    f1_auc: float
    curve: list[tuple[int, float]]


@dataclass
class QualityReport:
    strategy: str
    scenario: str
    mean_log_ratio: Optional[float]
    worst_f1_auc: float
    runs: list[RunRecord] = field(default_factory=list)


def repeat_seeds(seed: int, repeat: int) -> tuple[np.random.SeedSequence, np.random.SeedSequence]:
    """(scenario stream, verifier stream) for one repeat, shared by all strategies."""
    return (
        np.random.SeedSequence(seed, spawn_key=(repeat, 0)),
        np.random.SeedSequence(seed, spawn_key=(repeat, 1)),
    )


def run_strategy(
    strategy: Strategy,
    scenario: Scenario,
    outputs: Sequence[AnnotatedOutput],
    budget: int,
    model: VerifierModel,
    rng: np.random.Generator,
    config: ReduceConfig = ReduceConfig(),
):
    if strategy.kind == MESREDUCE:
        return mes_reduce(scenario.des, outputs, budget, scenario.truth, model, config, rng)
    return run_baseline(strategy.kind, strategy.p, scenario.des, outputs, budget, scenario.truth, model, rng)


def _one_repeat(args) -> list[RunRecord]:
    des, outputs, kinds, strategies, budget, seed, r, model, config, rlbl = args
    scen_seq, vote_seq = repeat_seeds(seed, r)
    records = []
    for kind in kinds:
        extra = rlbl if kind.upper() == RLBL else {}
        scenario = gen_scenario(kind, des, rng=np.random.default_rng(scen_seq), **extra)
        actual = output_truths(outputs, scenario.truth)
        for strat in strategies:
            res = run_strategy(strat, scenario, outputs, budget, model, np.random.default_rng(vote_seq), config)
            t = res.trace
            records.append(
                RunRecord(strat.name, scenario.kind, r, t, mes_log_ratio(t), f1_auc(t, actual), f1_curve(t, actual))
            )
    return records


def run_comparison(
    des: AnnotatedDES,
    outputs: Sequence[AnnotatedOutput],
    scenarios: Sequence[str],
    strategies: Sequence[Strategy],
    budget: int,
    repeats: int,
    seed: int = 0,
    model: VerifierModel = VerifierModel(),
    config: ReduceConfig = ReduceConfig(),
    jobs: int = 1,
    rlbl: Optional[Mapping] = None,
) -> list[QualityReport]:
    """Run every strategy on every scenario ``repeats`` times with paired seeds.

    Within a repeat, all strategies see the same scenario draw and the same
    verifier random stream.  Reports hold the mean log-ratio and the worst
    F1 AUC per (strategy, scenario).
    """
    tasks = [(des, outputs, scenarios, strategies, budget, seed, r, model, config, rlbl or {}) for r in range(repeats)]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as pool:
            chunks = list(pool.map(_one_repeat, tasks))
    else:
        chunks = [_one_repeat(t) for t in tasks]
    reports = []
    for kind in scenarios:
        for strat in strategies:
            runs = [rec for chunk in chunks for rec in chunk if rec.strategy == strat.name and rec.scenario == kind.upper()]
            ratios = [rec.log_ratio for rec in runs if rec.log_ratio is not None]
            mean = float(np.mean(ratios)) if ratios else None
            reports.append(QualityReport(strat.name, kind.upper(), mean, min(rec.f1_auc for rec in runs), runs))
    return reports
