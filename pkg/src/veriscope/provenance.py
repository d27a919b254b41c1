"""Monotone DNF/CNF provenance over tuple variables, with Kleene K3 evaluation."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable, Mapping, Optional

DNF = "DNF"
CNF = "CNF"


class ProvenanceError(ValueError):
    pass


@dataclass(frozen=True)
class ProvExpr:
    """A monotone formula: a DNF (OR of AND-terms) or CNF (AND of OR-clauses).

    Each group is a sorted tuple of variable ids and the group list is kept
    sorted, so equal formulas compare equal.  Duplicate groups are kept until
    :func:`normalize` is called.
    """

    form: str
    groups: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        if self.form not in (DNF, CNF):
            raise ProvenanceError(f"unknown form {self.form!r}")
        if not self.groups:
            raise ProvenanceError("empty expression")
        groups = []
        for g in self.groups:
            g = tuple(g)
            if not g:
                raise ProvenanceError("empty group")
            if len(set(g)) != len(g):
                raise ProvenanceError(f"duplicate variable in group {g}")
            groups.append(tuple(sorted(g)))
        object.__setattr__(self, "groups", tuple(sorted(groups)))

    @classmethod
    def dnf(cls, terms: Iterable[Iterable[int]]) -> "ProvExpr":
        return cls(DNF, tuple(tuple(set(t)) for t in terms))

    @classmethod
    def cnf(cls, clauses: Iterable[Iterable[int]]) -> "ProvExpr":
        return cls(CNF, tuple(tuple(set(c)) for c in clauses))

    @property
    def is_dnf(self) -> bool:
        return self.form == DNF

    @property
    def width(self) -> int:
        return max(len(g) for g in self.groups)

    def __str__(self):
        return serialize(self)


def vars_of(expr: ProvExpr) -> list[int]:
    """All variables of ``expr``, sorted."""
    return sorted({x for g in expr.groups for x in g})


def _and3(values) -> Optional[int]:
    unknown = False
    for v in values:
        if v == 0:
            return 0
        if v is None:
            unknown = True
    return None if unknown else 1


def _or3(values) -> Optional[int]:
    unknown = False
    for v in values:
        if v == 1:
            return 1
        if v is None:
            unknown = True
    return None if unknown else 0


def eval_k3(expr: ProvExpr, labels: Mapping[int, Optional[int]], default_unknown: bool = False) -> Optional[int]:
    """Kleene 3-valued value of ``expr``; ``None`` is unknown.

    Every variable needs an entry in ``labels`` unless ``default_unknown`` is
    set, in which case missing variables read as unknown.
    """

    def look(x):
        if x in labels:
            return labels[x]
        if default_unknown:
            return None
        raise ProvenanceError(f"no label entry for variable {x}")

    if expr.form == DNF:
        return _or3(_and3(look(x) for x in g) for g in expr.groups)
    return _and3(_or3(look(x) for x in g) for g in expr.groups)


def eval_bool(expr: ProvExpr, world: Mapping[int, int]) -> int:
    if expr.form == DNF:
        return int(any(all(world[x] for x in g) for g in expr.groups))
    return int(all(any(world[x] for x in g) for g in expr.groups))


def normalize(expr: ProvExpr, absorb: bool = False) -> ProvExpr:
    """Drop duplicated groups; with ``absorb`` also drop supersets of other groups.

    Absorption can shrink the variable set, which changes MES, so it is off
    by default.
    """
    groups = sorted(set(expr.groups))
    if absorb:
        sets = [frozenset(g) for g in groups]
        groups = [g for g, s in zip(groups, sets) if not any(o < s for o in sets)]
    return ProvExpr(expr.form, tuple(groups))


def disjoin(e1: ProvExpr, e2: ProvExpr) -> ProvExpr:
    """``e1 OR e2`` for DNF inputs (duplicates removed, no absorption)."""
    if e1.form != DNF or e2.form != DNF:
        raise ProvenanceError("disjoin needs two DNF expressions")
    return normalize(ProvExpr(DNF, e1.groups + e2.groups))


def serialize(expr: ProvExpr) -> str:
    """``(v1&v2)|(v3)`` for DNF and ``(v1|v2)&(v3)`` for CNF."""
    inner, outer = ("&", "|") if expr.form == DNF else ("|", "&")
    return outer.join("(" + inner.join(f"v{x}" for x in g) + ")" for g in expr.groups)


_GROUP = re.compile(r"\(([^()]*)\)")
_SHAPE = re.compile(r"\(v\d+(?:[&|]v\d+)*\)(?:[&|]\(v\d+(?:[&|]v\d+)*\))*")


def parse_prov(text: str) -> ProvExpr:
    """Inverse of :func:`serialize`.  A lone group is read as DNF."""
    s = text.replace(" ", "")
    if not _SHAPE.fullmatch(s):
        raise ProvenanceError(f"cannot parse provenance {text!r}")
    groups = _GROUP.findall(s)
    outer = set(re.findall(r"\)([&|])\(", s))
    inner = {op for g in groups for op in re.findall(r"[&|]", g)}
    if len(outer) > 1 or len(inner) > 1 or (outer and outer == inner):
        raise ProvenanceError(f"mixed operators in {text!r}")
    form = CNF if outer == {"&"} or (not outer and inner == {"|"}) else DNF
    return ProvExpr(form, tuple(tuple(int(n[1:]) for n in re.split(r"[&|]", g)) for g in groups))
