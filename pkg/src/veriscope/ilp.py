"""Exact 0-1 maximization with "not all ones" group constraints.

Programs have the form::

    maximize   sum_i c_i * a_i
    subject to sum_{j in G} a_j <= |G| - 1   for every group G
               a_i = f_i                      for fixed variables
               a_i in {0, 1}

which is what MES computation for correct-labeled outputs needs: every
provenance term must contain at least one false variable.

The solver is a depth-first branch and bound.  Assigning a variable to 1
can leave a group with a single undecided member and no zeros, which forces
that member to 0 (unit propagation).  The upper bound is the current value
plus every undecided positive coefficient, minus the cheapest forced loss
over a greedy packing of pairwise-disjoint unsatisfied groups.
"""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field
from typing import Hashable, Mapping, Optional

TOL = 1e-12


@dataclass(frozen=True)
class BinaryProgram:
    objective: Mapping[Hashable, float]
    groups: tuple[frozenset, ...] = ()
    fixed: Mapping[Hashable, int] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "groups", tuple(frozenset(g) for g in self.groups))
        for g in self.groups:
            if not g:
                raise ValueError("empty group")
        for v, b in self.fixed.items():
            if b not in (0, 1):
                raise ValueError(f"fixed value of {v!r} must be 0 or 1")

    @property
    def variables(self) -> list:
        names = set(self.objective) | set(self.fixed)
        for g in self.groups:
            names |= g
        return sorted(names)

    @property
    def free(self) -> list:
        return [v for v in self.variables if v not in self.fixed]

    def bound_of(self, group) -> int:
        return len(group) - 1

    def value_of(self, assignment: Mapping[Hashable, int]) -> float:
        return sum(c * assignment[v] for v, c in self.objective.items())

    def is_feasible(self, assignment: Mapping[Hashable, int]) -> bool:
        if any(assignment[v] != b for v, b in self.fixed.items()):
            return False
        return all(sum(assignment[v] for v in g) <= len(g) - 1 for g in self.groups)


@dataclass(frozen=True)
class Solution:
    status: str  # "optimal" or "infeasible"
    value: Optional[float] = None
    assignment: Optional[dict] = None
    nodes: int = 0

    @property
    def feasible(self) -> bool:
        return self.status == "optimal"


class _Search:
    def __init__(self, program: BinaryProgram, tol: float):
        self.tol = tol
        self.names = program.variables
        idx = {v: i for i, v in enumerate(self.names)}
        n = len(self.names)
        self.c = [float(program.objective.get(v, 0.0)) for v in self.names]
        self.groups = [[idx[v] for v in sorted(g)] for g in program.groups]
        self.member = [[] for _ in range(n)]
        for gi, g in enumerate(self.groups):
            for i in g:
                self.member[i].append(gi)
        self.size = [len(g) for g in self.groups]
        self.ones = [0] * len(self.groups)
        self.zeros = [0] * len(self.groups)
        self.val = [-1] * n
        self.trail: list[int] = []
        self.value = 0.0
        self.pos_left = sum(max(ci, 0.0) for ci in self.c)
        self.fixed = {idx[v]: b for v, b in program.fixed.items()}
        self.best_value = -math.inf
        self.best: Optional[list[int]] = None
        self.nodes = 0
        self.order = sorted(
            (i for i in range(n) if i not in self.fixed),
            key=lambda i: (-abs(self.c[i]), i),
        )

    def _set(self, i: int, b: int) -> None:
        self.val[i] = b
        self.trail.append(i)
        self.value += self.c[i] * b
        self.pos_left -= max(self.c[i], 0.0)
        counts = self.ones if b else self.zeros
        for g in self.member[i]:
            counts[g] += 1

    def _undo(self, mark: int) -> None:
        while len(self.trail) > mark:
            i = self.trail.pop()
            b = self.val[i]
            self.val[i] = -1
            self.value -= self.c[i] * b
            self.pos_left += max(self.c[i], 0.0)
            counts = self.ones if b else self.zeros
            for g in self.member[i]:
                counts[g] -= 1

    def _propagate(self, touched) -> bool:
        """Force last undecided members of zero-free groups to 0; False on conflict."""
        queue = list(touched)
        while queue:
            g = queue.pop()
            if self.zeros[g]:
                continue
            undecided = self.size[g] - self.ones[g]
            if undecided == 0:
                return False
            if undecided == 1:
                j = next(k for k in self.groups[g] if self.val[k] == -1)
                self._set(j, 0)
        return True

    def assign(self, i: int, b: int) -> bool:
        self._set(i, b)
        if b == 0:
            return True
        return self._propagate(self.member[i])

    def setup(self) -> bool:
        for i, b in self.fixed.items():
            self._set(i, b)
        return self._propagate(range(len(self.groups)))

    def bound(self) -> float:
        loss = []
        for g, members in enumerate(self.groups):
            if self.zeros[g]:
                continue
            undecided = [k for k in members if self.val[k] == -1]
            cheapest = min(max(self.c[k], 0.0) for k in undecided)
            if cheapest > 0:
                loss.append((cheapest, undecided))
        loss.sort(key=lambda t: -t[0])
        used: set[int] = set()
        penalty = 0.0
        for cheapest, undecided in loss:
            if used.isdisjoint(undecided):
                used.update(undecided)
                penalty += cheapest
        return self.value + self.pos_left - penalty

    def dfs(self, k: int) -> None:
        self.nodes += 1
        order, val = self.order, self.val
        while k < len(order) and val[order[k]] != -1:
            k += 1
        if k == len(order):
            if self.value > self.best_value + self.tol:
                self.best_value = self.value
                self.best = list(val)
            return
        if self.bound() <= self.best_value + self.tol:
            return
        i = order[k]
        first = 1 if self.c[i] > 0 else 0
        for b in (first, 1 - first):
            mark = len(self.trail)
            if self.assign(i, b):
                self.dfs(k + 1)
            self._undo(mark)


def solve_binary_max(program: BinaryProgram, tol: float = TOL) -> Solution:
    """Solve ``program`` exactly.

    Returns an optimal solution (the first one found under the fixed
    branching order, so results are deterministic) or an infeasible status.
    """
    search = _Search(program, tol)
    if not search.setup():
        return Solution("infeasible")
    limit = sys.getrecursionlimit()
    need = 2 * len(search.order) + 200
    if need > limit:
        sys.setrecursionlimit(need)
    try:
        search.dfs(0)
    finally:
        if need > limit:
            sys.setrecursionlimit(limit)
    assignment = {v: b for v, b in zip(search.names, search.best)}
    # recompute from the assignment to avoid drift from incremental sums
    return Solution("optimal", program.value_of(assignment), assignment, search.nodes)


def dump_program(program: BinaryProgram) -> str:
    """Line-oriented text form: ``obj v c`` / ``group v...`` / ``fix v b``."""
    lines = [f"obj {v} {program.objective[v]!r}" for v in sorted(program.objective)]
    lines += ["group " + " ".join(str(v) for v in sorted(g)) for g in program.groups]
    lines += [f"fix {v} {b}" for v, b in sorted(program.fixed.items())]
    return "\n".join(lines) + "\n"


def load_program(text: str) -> BinaryProgram:
    """Inverse of :func:`dump_program` (integer variable names)."""
    objective, groups, fixed = {}, [], {}
    for n, line in enumerate(text.splitlines(), 1):
        parts = line.split("#", 1)[0].split()
        if not parts:
            continue
        kind, args = parts[0], parts[1:]
        if kind == "obj" and len(args) == 2:
            objective[int(args[0])] = float(args[1])
        elif kind == "group" and args:
            groups.append(frozenset(int(a) for a in args))
        elif kind == "fix" and len(args) == 2:
            fixed[int(args[0])] = int(args[1])
        else:
            raise ValueError(f"line {n}: cannot parse {line!r}")
    return BinaryProgram(objective, tuple(groups), fixed)
