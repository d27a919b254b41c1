"""Maximal Error Score (MES) of query outputs.

MES is the largest labeling probability, restricted to the tuples in an
output's provenance, over the possible worlds in which the output's derived
label is wrong.  Four routes compute it:

* term scan, for outputs derived incorrect with DNF provenance: some term
  must hold, so try each term with its variables set to 1;
* a 0-1 program, for outputs derived correct with DNF provenance: every
  term must contain a false variable;
* clause scan, for outputs derived correct with CNF provenance (the dual
  of the term scan);
* brute force over all worlds, used as an oracle.

Ties between equally likely worst-case worlds go to the lexicographically
smallest world over sorted variable ids, except on the 0-1 program route,
which keeps the solver's first optimum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from .ilp import BinaryProgram, solve_binary_max
from .model import ZERO, AnnotatedDES, LogProb, log_match, log_mismatch, to_linear
from .provenance import CNF, DNF, ProvExpr, eval_bool, vars_of
from .query import AnnotatedOutput

TOL = 1e-12
BRUTE_FORCE_CAP = 20

TERM_SCAN = "term-scan"
ILP = "ilp"
CNF_DUAL = "cnf-dual"
BRUTE_FORCE = "brute-force"


class MesPreconditionError(ValueError):
    """MES requested for an output whose derived label is unknown, or similar."""


@dataclass(frozen=True)
class MesScore:
    log_value: LogProb
    witness: Optional[dict]  # world over the provenance variables; None when MES is 0
    method: str
    n_factors: int = 0  # labeled tuples among the related tuples

    @property
    def value(self) -> float:
        return to_linear(self.log_value)

    @property
    def is_zero(self) -> bool:
        return self.log_value == ZERO


@dataclass(frozen=True)
class MesSetScore:
    score: MesScore
    index: int  # position of the maximizing output

    @property
    def value(self) -> float:
        return self.score.value


def rel_tuples(des: AnnotatedDES, output: AnnotatedOutput) -> set[int]:
    """Ids of the tuples whose variables occur in the output's provenance."""
    return set(vars_of(output.prov))


def _world_log_prob(world: Mapping[int, int], labels, errs) -> LogProb:
    total = 0.0
    for x, b in world.items():
        lab = labels.get(x)
        if lab is None:
            continue
        if b == lab:
            total += log_match(errs[x])
        else:
            e = errs[x]
            if e == 0:
                return ZERO
            total += math.log(e)
    return total


def _n_factors(prov: ProvExpr, labels) -> int:
    return sum(1 for x in vars_of(prov) if labels.get(x) is not None)


def _better(cand_lp, cand_key, best_lp, best_key) -> bool:
    if best_key is None:
        return True
    if cand_lp == ZERO and best_lp == ZERO:
        return cand_key < best_key
    if cand_lp > best_lp + TOL:
        return True
    if cand_lp >= best_lp - TOL:
        return cand_key < best_key
    return False


def _group_scan(prov: ProvExpr, labels, errs, pin: int, method: str) -> MesScore:
    xs = vars_of(prov)
    best_lp, best_key, best_world = ZERO, None, None
    for g in prov.groups:
        members = set(g)
        world = {}
        for x in xs:
            if x in members:
                world[x] = pin
            else:
                # off-group variables take their most likely value, 0 on ties
                lab = labels.get(x)
                world[x] = 0 if lab is None or abs(errs[x] - 0.5) <= TOL else lab
        lp = _world_log_prob(world, labels, errs)
        key = tuple(world[x] for x in xs)
        if _better(lp, key, best_lp, best_key):
            best_lp, best_key, best_world = lp, key, world
    n = _n_factors(prov, labels)
    if best_lp == ZERO:
        return MesScore(ZERO, None, method, n)
    return MesScore(best_lp, best_world, method, n)


def _mes_incorrect(prov, labels, errs) -> MesScore:
    if prov.form != DNF:
        raise MesPreconditionError("term scan needs DNF provenance")
    return _group_scan(prov, labels, errs, 1, TERM_SCAN)


def _mes_cnf_dual(prov, labels, errs) -> MesScore:
    if prov.form != CNF:
        raise MesPreconditionError("clause scan needs CNF provenance")
    return _group_scan(prov, labels, errs, 0, CNF_DUAL)


def _has_certificate(prov, labels, errs) -> bool:
    return any(all(labels.get(x) == 1 and errs[x] == 0 for x in g) for g in prov.groups)


def _mes_correct_ilp(prov, labels, errs) -> MesScore:
    if prov.form != DNF:
        raise MesPreconditionError("0-1 program route needs DNF provenance")
    n = _n_factors(prov, labels)
    if _has_certificate(prov, labels, errs):
        return MesScore(ZERO, None, ILP, n)
    objective, fixed = {}, {}
    beta = 0.0
    for x in vars_of(prov):
        lab = labels.get(x)
        if lab is None:
            fixed[x] = 0
            continue
        p = errs[x]
        if p == 0:
            fixed[x] = lab
            continue
        lp, lq = math.log(p), math.log1p(-p)
        if lab == 1:
            beta += lp
            objective[x] = lq - lp
        else:
            beta += lq
            objective[x] = lp - lq
    sol = solve_binary_max(BinaryProgram(objective, tuple(prov.groups), fixed))
    if not sol.feasible:
        return MesScore(ZERO, None, ILP, n)
    world = {x: sol.assignment[x] for x in vars_of(prov)}
    return MesScore(sol.value + beta, world, ILP, n)


def _flip(prov: ProvExpr, labels) -> tuple[ProvExpr, dict]:
    """Complement every variable: a CNF over x becomes a DNF over not-x."""
    other = DNF if prov.form == CNF else CNF
    return ProvExpr(other, prov.groups), {x: 1 - v for x, v in labels.items()}


def _unflip(score: MesScore) -> MesScore:
    if score.witness is None:
        return score
    return MesScore(score.log_value, {x: 1 - b for x, b in score.witness.items()}, score.method, score.n_factors)


def _check_derived(output: AnnotatedOutput) -> int:
    if output.derived is None:
        raise MesPreconditionError(
            f"output {output.values!r} has an unknown derived label; re-verify its provenance tuples first"
        )
    return output.derived


def mes_of(prov: ProvExpr, derived: int, labels: Mapping[int, int], errs: Mapping[int, float]) -> MesScore:
    """MES for a bare provenance expression and annotation maps."""
    if derived is None:
        raise MesPreconditionError("derived label is unknown; re-verify first")
    if derived == 0:
        if prov.form == DNF:
            return _mes_incorrect(prov, labels, errs)
        # a CNF with a false value: flip to a DNF that must be false
        flipped, flabels = _flip(prov, labels)
        return _unflip(_mes_correct_ilp(flipped, flabels, errs))
    if prov.form == CNF:
        return _mes_cnf_dual(prov, labels, errs)
    return _mes_correct_ilp(prov, labels, errs)


def mes(des: AnnotatedDES, output: AnnotatedOutput) -> MesScore:
    """MES of ``output``, dispatched on its derived label and provenance form."""
    return mes_of(output.prov, _check_derived(output), des.labels, des.errs)


def mes_incorrect(des: AnnotatedDES, output: AnnotatedOutput) -> MesScore:
    if _check_derived(output) != 0:
        raise MesPreconditionError("term scan applies to outputs derived incorrect")
    return _mes_incorrect(output.prov, des.labels, des.errs)


def mes_correct_ilp(des: AnnotatedDES, output: AnnotatedOutput) -> MesScore:
    if _check_derived(output) != 1:
        raise MesPreconditionError("the 0-1 program applies to outputs derived correct")
    return _mes_correct_ilp(output.prov, des.labels, des.errs)


def mes_cnf_dual(des: AnnotatedDES, output: AnnotatedOutput) -> MesScore:
    if _check_derived(output) != 1:
        raise MesPreconditionError("clause scan applies to outputs derived correct")
    return _mes_cnf_dual(output.prov, des.labels, des.errs)


def exists_zero_error_one_certificate(des: AnnotatedDES, output: AnnotatedOutput) -> bool:
    """True iff some term has every variable labeled 1 with error 0."""
    if output.prov.form != DNF:
        raise MesPreconditionError("certificates are defined for DNF provenance")
    return _has_certificate(output.prov, des.labels, des.errs)


def brute_force_of(
    prov: ProvExpr, derived: int, labels: Mapping[int, int], errs: Mapping[int, float], cap: int = BRUTE_FORCE_CAP
) -> MesScore:
    """Enumerate every world over the provenance variables."""
    xs = vars_of(prov)
    n = len(xs)
    if n > cap:
        raise MesPreconditionError(f"{n} provenance variables exceed the brute-force cap of {cap}")
    if derived not in (0, 1):
        raise MesPreconditionError("derived label must be 0 or 1")
    rows = np.arange(1 << n, dtype=np.int64)
    # column j holds variable xs[j]; row order is lexicographic world order
    bits = ((rows[:, None] >> (n - 1 - np.arange(n))) & 1).astype(bool)
    pos = {x: j for j, x in enumerate(xs)}
    if prov.form == DNF:
        value = np.zeros(len(rows), dtype=bool)
        for g in prov.groups:
            value |= bits[:, [pos[x] for x in g]].all(axis=1)
    else:
        value = np.ones(len(rows), dtype=bool)
        for g in prov.groups:
            value &= bits[:, [pos[x] for x in g]].any(axis=1)
    inv = value != bool(derived)
    score = np.zeros(len(rows))
    with np.errstate(divide="ignore"):
        for x in xs:
            lab = labels.get(x)
            if lab is None:
                continue
            e = errs[x]
            match = bits[:, pos[x]] == bool(lab)
            score += np.where(match, np.log1p(-e), np.log(e) if e > 0 else -np.inf)
    score = np.where(inv, score, -np.inf)
    k = _n_factors(prov, labels)
    best = score.max()
    if best == -np.inf:
        return MesScore(ZERO, None, BRUTE_FORCE, k)
    r = int(np.argmax(score >= best - TOL))
    return MesScore(float(score[r]), {x: int(bits[r, pos[x]]) for x in xs}, BRUTE_FORCE, k)


def mes_brute_force(des: AnnotatedDES, output: AnnotatedOutput, cap: int = BRUTE_FORCE_CAP) -> MesScore:
    return brute_force_of(output.prov, _check_derived(output), des.labels, des.errs, cap)


def mes_set(des: AnnotatedDES, outputs: Sequence[AnnotatedOutput]) -> MesSetScore:
    """The largest MES over ``outputs`` (first maximizer wins ties)."""
    if not outputs:
        raise MesPreconditionError("no outputs given")
    best = None
    for i, o in enumerate(outputs):
        s = mes(des, o)
        if best is None or s.log_value > best.score.log_value + TOL:
            best = MesSetScore(s, i)
    return best


def averaged_mes(score: float, n: int) -> Optional[float]:
    """``score ** (-1/n)``; ``None`` when the score is 0 or there are no factors."""
    if score <= 0 or n <= 0:
        return None
    return score ** (-1.0 / n)
