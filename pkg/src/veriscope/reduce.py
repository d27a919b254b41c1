"""Budgeted uncertainty reduction (MESReduce) and the baseline strategies.

Each iteration picks the output(s) with the highest MES, chooses a batch of
input tuples whose re-verification should lower it, picks a target error
probability just below the smallest current one, and spends verifier votes.
Only outputs whose provenance touches a re-verified tuple have their MES
recomputed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from .mes import TOL, MesScore, mes
from .model import ZERO, AnnotatedDES
from .provenance import vars_of
from .query import AnnotatedOutput
from .risky import SAFE, RiskLimits, classify_tuples
from .verifier import Budget, VerificationOutcome, VerifierModel, improve_verification

BUDGET = "budget"
THRESHOLD = "threshold"
NO_PROGRESS = "no-progress"

RANDOM = "random"
FORMULA_COUNT = "formula-count"
OCCURRENCES_COUNT = "occurrences-count"
PROB_GREEDY = "prob-greedy"
BASELINES = (RANDOM, FORMULA_COUNT, OCCURRENCES_COUNT, PROB_GREEDY)


@dataclass(frozen=True)
class ReduceConfig:
    theta: float = 0.0
    top_k: int = 1
    mu: int = 50
    risky_limits: RiskLimits = RiskLimits()
    reverify_target: float = 0.3
    full_recompute: bool = False  # recompute every output's MES each step (for cross-checks)

    def __post_init__(self):
        if not 0 <= self.theta <= 1:
            raise ValueError("theta must lie in [0, 1]")
        if self.top_k < 1 or self.mu < 1:
            raise ValueError("top_k and mu must be at least 1")
        if not 0 < self.reverify_target < 0.5:
            raise ValueError("reverify_target must lie in (0, 0.5)")


@dataclass(frozen=True)
class TraceStep:
    index: int
    cost: int  # cumulative votes after this step
    action: str  # init / reverify / improve / baseline
    verified: tuple[int, ...]
    changed: tuple[int, ...]  # tuples whose label flipped
    target_p: Optional[float]
    max_log_mes: Optional[float]  # over outputs with a known label; None if there are none
    derived: tuple[Optional[int], ...]

    @property
    def max_mes(self) -> Optional[float]:
        if self.max_log_mes is None:
            return None
        return 0.0 if self.max_log_mes == ZERO else math.exp(self.max_log_mes)


@dataclass
class ReductionTrace:
    budget: int
    steps: list[TraceStep] = field(default_factory=list)
    termination: Optional[str] = None
    strategy: str = "mesreduce"

    @property
    def cost(self) -> int:
        return self.steps[-1].cost if self.steps else 0


@dataclass
class ReductionResult:
    trace: ReductionTrace
    des: AnnotatedDES
    outputs: list[AnnotatedOutput]
    scores: list[Optional[MesScore]]


class _State:
    """Current labels, outputs and MES scores of one reduction run."""

    def __init__(self, des: AnnotatedDES, outputs: Sequence[AnnotatedOutput], full_recompute: bool = False):
        self.des = des
        self.outputs = [o.relabel(des) for o in outputs]
        self.vars = [set(vars_of(o.prov)) for o in self.outputs]
        self.scores: list[Optional[MesScore]] = [None] * len(self.outputs)
        self.full = full_recompute
        self._refresh(range(len(self.outputs)))

    def _refresh(self, indices) -> None:
        for i in indices:
            o = self.outputs[i].relabel(self.des)
            self.outputs[i] = o
            self.scores[i] = None if o.derived is None else mes(self.des, o)

    def apply(self, outcome: VerificationOutcome) -> None:
        self.des = outcome.des
        if self.full:
            self._refresh(range(len(self.outputs)))
        else:
            touched = set(outcome.verified)
            self._refresh(i for i, xs in enumerate(self.vars) if xs & touched)

    def max_log(self) -> Optional[float]:
        known = [s.log_value for s in self.scores if s is not None]
        return max(known) if known else None

    def derived(self) -> tuple:
        return tuple(o.derived for o in self.outputs)

    def unknown(self) -> list[int]:
        return [i for i, o in enumerate(self.outputs) if o.derived is None]


def _record(trace: ReductionTrace, state: _State, action: str, outcome=None, target=None) -> None:
    trace.steps.append(
        TraceStep(
            len(trace.steps),
            trace.cost + (outcome.cost if outcome else 0),
            action,
            tuple(outcome.verified) if outcome else (),
            tuple(sorted(outcome.label_changes)) if outcome else (),
            target,
            state.max_log(),
            state.derived(),
        )
    )


def re_verify(
    des: AnnotatedDES,
    outputs: Sequence[AnnotatedOutput],
    budget: Budget,
    truth: Mapping[int, int],
    model: VerifierModel,
    rng: np.random.Generator,
    target: float = 0.3,
) -> VerificationOutcome:
    """Label every unlabeled provenance tuple of outputs whose label is unknown."""
    todo = set()
    for o in outputs:
        if o.relabel(des).derived is None:
            todo.update(x for x in vars_of(o.prov) if des.label(x) is None)
    return improve_verification(des, todo, target, budget, truth, model, rng)


def find_improvement_set(
    des: AnnotatedDES,
    output: AnnotatedOutput,
    limits: RiskLimits = RiskLimits(),
    cost: Callable[[int], float] = lambda t: 1,
) -> set[int]:
    """Input tuples to re-verify for ``output``; empty when nothing can help."""
    if output.derived is None:
        raise ValueError("output label is unknown; re-verify first")
    safe = [r.tuple_id for r in classify_tuples(des, output, limits) if r.classification == SAFE]
    if safe:
        return {min(safe, key=lambda t: (cost(t), t))}
    groups = output.prov.groups
    if output.derived == 1:
        satisfied = [g for g in groups if all(des.label(x) == 1 for x in g)]
        options = []
        for g in satisfied:
            pick = tuple(x for x in g if des.err(x) > 0)
            if pick:
                options.append((sum(cost(x) for x in pick), pick))
        if not options:
            return set()
        return set(min(options)[1])
    # a false DNF: every term needs one of its non-correct variables re-checked
    todo = []
    for g in groups:
        if any(des.label(x) == 0 and des.err(x) == 0 for x in g):
            continue  # already definitively false
        eligible = {x for x in g if des.label(x) != 1 and (des.label(x) is None or des.err(x) > 0)}
        if eligible:
            todo.append(eligible)
    chosen: set[int] = set()
    while todo:
        counts: dict[int, int] = {}
        for s in todo:
            for x in s:
                counts[x] = counts.get(x, 0) + 1
        best = min(counts, key=lambda x: (-counts[x], cost(x), x))
        chosen.add(best)
        todo = [s for s in todo if best not in s]
    return chosen


def next_probability(
    des: AnnotatedDES,
    output: AnnotatedOutput,
    tuples: set[int],
    budget: Budget,
    theta: float,
    model: VerifierModel,
) -> float:
    """Target error probability slightly below the smallest positive one."""
    positive = [des.err(x) for x in vars_of(output.prov) if des.label(x) is not None and des.err(x) > 0]
    if positive:
        n = math.ceil(1 / min(positive))
        p = max(1 / (n + 1), theta)
    else:
        p = theta
    per_tuple = budget.remaining // max(1, len(tuples))
    return max(p, model.floor(per_tuple))


def _select(state: _State, top_k: int, mu: int) -> list[int]:
    known = [(s.log_value, i) for i, s in enumerate(state.scores) if s is not None]
    known.sort(key=lambda t: (-t[0], t[1]))
    top = known[0][0]
    chosen = [i for _, i in known[:top_k]]
    ties = [i for lv, i in known if lv == top or (top != ZERO and lv >= top - TOL)]
    for i in ties[:mu]:
        if i not in chosen:
            chosen.append(i)
    return chosen


def mes_reduce(
    des: AnnotatedDES,
    outputs: Sequence[AnnotatedOutput],
    budget: int,
    truth: Mapping[int, int],
    model: VerifierModel,
    config: ReduceConfig = ReduceConfig(),
    rng: Optional[np.random.Generator] = None,
    on_step: Optional[Callable[[_State], None]] = None,
) -> ReductionResult:
    """Spend up to ``budget`` votes lowering the largest MES among ``outputs``."""
    rng = np.random.default_rng(0) if rng is None else rng
    wallet = Budget(budget)
    state = _State(des, outputs, config.full_recompute)
    trace = ReductionTrace(budget)
    _record(trace, state, "init")
    while True:
        if wallet.remaining <= 0:
            trace.termination = BUDGET
            break
        # an output with an unknown label counts as maximally uncertain
        top = 1.0 if state.unknown() else state.max_log()
        top = top if top == 1.0 else (0.0 if top is None or top == ZERO else math.exp(top))
        if top <= config.theta:
            trace.termination = THRESHOLD
            break
        if state.unknown():
            outcome = re_verify(state.des, state.outputs, wallet, truth, model, rng, config.reverify_target)
            if outcome.cost == 0:
                trace.termination = BUDGET if wallet.remaining <= 0 else NO_PROGRESS
                break
            state.apply(outcome)
            _record(trace, state, "reverify", outcome, config.reverify_target)
            if on_step:
                on_step(state)
            continue
        targets, chosen = [], set()
        for i in _select(state, config.top_k, config.mu):
            o = state.outputs[i]
            s = find_improvement_set(state.des, o, config.risky_limits)
            if s:
                chosen |= s
                targets.append(next_probability(state.des, o, s, wallet, config.theta, model))
        if not chosen:
            trace.termination = NO_PROGRESS
            break
        target = min(targets)
        before = {x: (state.des.label(x), state.des.err(x)) for x in chosen}
        outcome = improve_verification(state.des, chosen, target, wallet, truth, model, rng)
        if outcome.cost == 0:
            trace.termination = BUDGET
            break
        state.apply(outcome)
        _record(trace, state, "improve", outcome, target)
        if on_step:
            on_step(state)
        if all((state.des.label(x), state.des.err(x)) == before[x] for x in chosen):
            trace.termination = NO_PROGRESS
            break
    return ReductionResult(trace, state.des, state.outputs, state.scores)


def _tuple_counts(outputs: Sequence[AnnotatedOutput]) -> tuple[dict, dict]:
    formulas: dict[int, int] = {}
    occurrences: dict[int, int] = {}
    for o in outputs:
        for x in vars_of(o.prov):
            formulas[x] = formulas.get(x, 0) + 1
        for g in o.prov.groups:
            for x in g:
                occurrences[x] = occurrences.get(x, 0) + 1
    return formulas, occurrences


def baseline_order(kind: str, outputs: Sequence[AnnotatedOutput], rng: Optional[np.random.Generator] = None) -> list[int]:
    """One pass of a static baseline over the tuples in the outputs' provenance."""
    formulas, occurrences = _tuple_counts(outputs)
    ids = sorted(formulas)
    if kind == RANDOM:
        return [ids[j] for j in rng.permutation(len(ids))]
    if kind == FORMULA_COUNT:
        return sorted(ids, key=lambda x: (-formulas[x], x))
    if kind == OCCURRENCES_COUNT:
        return sorted(ids, key=lambda x: (-occurrences[x], x))
    raise ValueError(f"no static order for baseline {kind!r}")


def run_baseline(
    kind: str,
    p: float,
    des: AnnotatedDES,
    outputs: Sequence[AnnotatedOutput],
    budget: int,
    truth: Mapping[int, int],
    model: VerifierModel,
    rng: Optional[np.random.Generator] = None,
    full_recompute: bool = False,
) -> ReductionResult:
    """Verify one tuple at a time to error ``p`` in the strategy's order.

    Every provenance tuple is visited once per pass; passes repeat until the
    budget runs out.  Prob-greedy takes the unvisited tuple with the largest
    current error (unlabeled counts as 0.5), ties by ascending id.
    """
    if kind not in BASELINES:
        raise ValueError(f"unknown baseline {kind!r}")
    if not 0 < p < 0.5:
        raise ValueError("target probability must lie in (0, 0.5)")
    rng = np.random.default_rng(0) if rng is None else rng
    wallet = Budget(budget)
    state = _State(des, outputs, full_recompute)
    trace = ReductionTrace(budget, strategy=kind)
    _record(trace, state, "init")
    universe = sorted(_tuple_counts(outputs)[0])
    queue: list[int] = []
    visited: set[int] = set()
    while universe:
        if wallet.remaining <= 0:
            break
        if kind == PROB_GREEDY:
            if len(visited) == len(universe):
                visited = set()
            err = lambda x: 0.5 if state.des.label(x) is None else state.des.err(x)
            tid = min((x for x in universe if x not in visited), key=lambda x: (-err(x), x))
            visited.add(tid)
        else:
            if not queue:
                queue = baseline_order(kind, outputs, rng)
            tid = queue.pop(0)
        outcome = improve_verification(state.des, [tid], p, wallet, truth, model, rng)
        if outcome.cost == 0:
            break
        state.apply(outcome)
        _record(trace, state, "baseline", outcome, p)
    trace.termination = BUDGET
    return ReductionResult(trace, state.des, state.outputs, state.scores)
