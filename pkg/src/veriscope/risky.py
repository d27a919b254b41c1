"""Risky input tuples: tuples whose lower error probability would raise MES.

A labeled tuple is risky for an output when some reduction of its error
probability strictly increases the output's MES.  It is enough to test the
reduction to 0: MES is a maximum of products that are linear in each
factor, so if any reduction raises MES then setting the error to 0 does.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace
from typing import Callable, Optional

from .mes import TOL, MesScore, mes
from .model import ZERO, AnnotatedDES
from .provenance import DNF
from .query import AnnotatedOutput

RISKY = "risky"
SAFE = "safe"
UNDETERMINED = "undetermined"
NOT_RISKY = "not-risky"
UNKNOWN = "unknown"

IMPAIRING_EPS = 1e-6
DEFAULT_MAX_CANDIDATES = 64
DEFAULT_DEADLINE = 10.0
DEFAULT_GRID_DEPTH = 40


class RiskPreconditionError(ValueError):
    pass


@dataclass(frozen=True)
class RiskReport:
    tuple_id: int
    classification: str  # risky / safe / undetermined
    baseline_mes: Optional[float] = None
    zero_err_mes: Optional[float] = None
    probed_q: Optional[float] = None
    method: str = "zero-probe"  # zero-probe / fast-path / limit
    impairing: Optional[bool] = None  # heuristic probe just below the current error


@dataclass(frozen=True)
class RiskLimits:
    max_candidates: int = DEFAULT_MAX_CANDIDATES
    deadline: float = DEFAULT_DEADLINE  # seconds of wall clock


def _exceeds(a: MesScore, b: MesScore) -> bool:
    if a.log_value == ZERO:
        return False
    return b.log_value == ZERO or a.log_value > b.log_value + TOL


def _check(des: AnnotatedDES, output: AnnotatedOutput, tid: int) -> float:
    if output.derived is None:
        raise RiskPreconditionError("output label is unknown; re-verify first")
    if not any(tid in g for g in output.prov.groups):
        raise RiskPreconditionError(f"tuple {tid} does not occur in the output's provenance")
    if des.label(tid) is None:
        raise RiskPreconditionError(f"tuple {tid} is unlabeled")
    err = des.err(tid)
    if err <= 0:
        raise RiskPreconditionError(f"tuple {tid} already has error probability 0")
    return err


def is_risky(des: AnnotatedDES, output: AnnotatedOutput, tid: int, baseline: Optional[MesScore] = None) -> RiskReport:
    """Compare MES at the current error of ``tid`` with MES at error 0."""
    _check(des, output, tid)
    base = mes(des, output) if baseline is None else baseline
    zero = mes(des.with_err(tid, 0.0), output)
    cls = RISKY if _exceeds(zero, base) else SAFE
    return RiskReport(tid, cls, base.value, zero.value, 0.0)


def is_risky_at(des: AnnotatedDES, output: AnnotatedOutput, tid: int, q: float, baseline: Optional[MesScore] = None) -> bool:
    """True iff lowering the error of ``tid`` to ``q`` strictly raises MES."""
    err = _check(des, output, tid)
    if not 0 <= q < err:
        raise RiskPreconditionError(f"probe {q} must lie in [0, {err})")
    base = mes(des, output) if baseline is None else baseline
    return _exceeds(mes(des.with_err(tid, q), output), base)


def is_impairing(des: AnnotatedDES, output: AnnotatedOutput, tid: int, baseline: Optional[MesScore] = None) -> bool:
    """Heuristic: every reduction is unsafe if one just below the current error is."""
    err = _check(des, output, tid)
    return is_risky_at(des, output, tid, max(0.0, err - IMPAIRING_EPS), baseline)


def smallest_unsafe_probe(
    des: AnnotatedDES, output: AnnotatedOutput, tid: int, depth: int = DEFAULT_GRID_DEPTH
) -> Optional[float]:
    """Largest ``err / 2**i`` (1 <= i <= depth) that is unsafe, or None."""
    err = _check(des, output, tid)
    base = mes(des, output)
    for i in range(1, depth + 1):
        q = err / 2**i
        if is_risky_at(des, output, tid, q, base):
            return q
    return None


def _positive_mes(des: AnnotatedDES, output: AnnotatedOutput) -> bool:
    """Structural test for MES > 0 on DNF provenance."""
    if output.derived == 1:
        return not any(all(des.label(x) == 1 and des.err(x) == 0 for x in g) for g in output.prov.groups)
    return any(all(not (des.label(x) == 0 and des.err(x) == 0) for x in g) for g in output.prov.groups)


def fast_path_risky(des: AnnotatedDES, output: AnnotatedOutput, tid: int) -> str:
    """Decide riskiness from which pins of ``tid`` flipping worlds allow.

    Returns ``not-risky`` when no flipping world agrees with the tuple's
    label, ``risky`` when flipping worlds agree with it and none disagree
    (and MES is positive), and ``unknown`` otherwise or for CNF provenance.
    """
    _check(des, output, tid)
    prov = output.prov
    if prov.form != DNF:
        return UNKNOWN
    if output.derived == 1:
        # falsifying worlds: x=0 always works; x=1 unless (x) is a term
        allowed = {0, 1} if (tid,) not in prov.groups else {0}
    else:
        # satisfying worlds: x=1 always works; x=0 if some term avoids x
        allowed = {1, 0} if any(tid not in g for g in prov.groups) else {1}
    v = des.label(tid)
    if v not in allowed:
        return NOT_RISKY
    if 1 - v not in allowed:
        return RISKY if _positive_mes(des, output) else NOT_RISKY
    return UNKNOWN


def candidate_tuples(des: AnnotatedDES, output: AnnotatedOutput) -> list[int]:
    """Labeled related tuples with positive error, ascending id."""
    xs = sorted({x for g in output.prov.groups for x in g})
    return [x for x in xs if des.label(x) is not None and des.err(x) > 0]


def classify_tuples(
    des: AnnotatedDES,
    output: AnnotatedOutput,
    limits: RiskLimits = RiskLimits(),
    clock: Callable[[], float] = time.monotonic,
    impairing: bool = False,
) -> list[RiskReport]:
    """Classify every candidate tuple, fast paths first.

    Candidates past ``limits.max_candidates`` or checked after the deadline
    are reported as undetermined.
    """
    if output.derived is None:
        raise RiskPreconditionError("output label is unknown; re-verify first")
    start = clock()
    base: Optional[MesScore] = None
    reports = []
    for i, tid in enumerate(candidate_tuples(des, output)):
        if i >= limits.max_candidates or clock() - start > limits.deadline:
            reports.append(RiskReport(tid, UNDETERMINED, method="limit"))
            continue
        if base is None:
            base = mes(des, output)
        fast = fast_path_risky(des, output, tid)
        if fast == UNKNOWN:
            rep = is_risky(des, output, tid, base)
        else:
            cls = RISKY if fast == RISKY else SAFE
            rep = RiskReport(tid, cls, base.value, method="fast-path")
        if impairing:
            risky = rep.classification == RISKY
            rep = replace(rep, impairing=risky and is_impairing(des, output, tid, base))
        reports.append(rep)
    return reports
