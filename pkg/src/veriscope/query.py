"""SPJU query subset: parsing, planning, and evaluation with DNF provenance.

Grammar (keywords case-insensitive)::

    query   := block (UNION block)* [;]
    block   := SELECT [DISTINCT] item (, item)* FROM rel (, rel)*
               [WHERE atom (AND atom)*]
    item    := colref [AS name]
    rel     := name [[AS] alias]
    atom    := expr op expr
    op      := = | <> | != | < | <= | > | >= | ILIKE | LIKE
    expr    := colref | 'string' | number
             | YEAR(colref) | DATE_PART('YEAR', colref)
    colref  := [alias .] column

Evaluation uses set semantics; each output carries the DNF whose terms are
the tuple-id sets of its derivations.
"""

from __future__ import annotations

import datetime as _dt
import re
from dataclasses import dataclass
from typing import Any, Callable, Iterable, Mapping, Optional, Sequence, Union as _U

from .model import AnnotatedDES, DESError, parse_date
from .provenance import ProvExpr, eval_k3

OPERATORS = ("=", "<>", "!=", "<", "<=", ">", ">=", "ILIKE", "LIKE")
KEYWORDS = {"SELECT", "DISTINCT", "FROM", "WHERE", "AND", "AS", "UNION", "ILIKE", "LIKE"}


class QueryError(ValueError):
    """Unknown relation or column, or an ill-typed predicate."""


class QuerySyntaxError(QueryError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


# -- tokenizer ---------------------------------------------------------------

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<string>'(?:[^']|'')*')
  | (?P<number>-?\d+(?:\.\d+)?)
  | (?P<qident>"[^"]+")
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op><=|>=|<>|!=|=|<|>)
  | (?P<punct>[(),.;*])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Tok:
    kind: str
    text: str
    pos: int


def _tokenize(text: str) -> list[_Tok]:
    toks = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise QuerySyntaxError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        if kind != "ws":
            raw = m.group()
            if kind == "ident" and raw.upper() in KEYWORDS:
                toks.append(_Tok("kw", raw.upper(), pos))
            elif kind == "qident":
                toks.append(_Tok("ident", raw[1:-1], pos))
            elif kind == "string":
                toks.append(_Tok("string", raw[1:-1].replace("''", "'"), pos))
            else:
                toks.append(_Tok(kind, raw, pos))
        pos = m.end()
    toks.append(_Tok("eof", "", len(text)))
    return toks


# -- syntax tree ---------------------------------------------------------------


@dataclass(frozen=True)
class ColumnName:
    qualifier: Optional[str]
    column: str
    pos: int = 0


@dataclass(frozen=True)
class Literal:
    value: Any


@dataclass(frozen=True)
class YearOf:
    arg: ColumnName


@dataclass(frozen=True)
class _RawAtom:
    lhs: Any
    op: str
    rhs: Any
    pos: int


@dataclass(frozen=True)
class _RawBlock:
    items: tuple[tuple[ColumnName, Optional[str]], ...]
    relations: tuple[tuple[str, str, int], ...]
    atoms: tuple[_RawAtom, ...]


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def _next(self) -> _Tok:
        t = self.toks[self.i]
        self.i += 1
        return t

    def _accept(self, kind: str, text: Optional[str] = None) -> Optional[_Tok]:
        t = self.tok
        if t.kind == kind and (text is None or t.text == text):
            self.i += 1
            return t
        return None

    def _expect(self, kind: str, text: Optional[str] = None) -> _Tok:
        t = self._accept(kind, text)
        if t is None:
            want = text or kind
            got = self.tok.text or "end of input"
            raise QuerySyntaxError(f"expected {want}, found {got!r}", self.tok.pos)
        return t

    def parse(self) -> list[_RawBlock]:
        blocks = [self._block()]
        while self._accept("kw", "UNION"):
            blocks.append(self._block())
        self._accept("punct", ";")
        if self.tok.kind != "eof":
            raise QuerySyntaxError(f"unexpected {self.tok.text!r}", self.tok.pos)
        return blocks

    def _block(self) -> _RawBlock:
        self._expect("kw", "SELECT")
        self._accept("kw", "DISTINCT")
        items = [self._item()]
        while self._accept("punct", ","):
            items.append(self._item())
        self._expect("kw", "FROM")
        rels = [self._rel()]
        while self._accept("punct", ","):
            rels.append(self._rel())
        atoms = []
        if self._accept("kw", "WHERE"):
            atoms.append(self._atom())
            while self._accept("kw", "AND"):
                atoms.append(self._atom())
        return _RawBlock(tuple(items), tuple(rels), tuple(atoms))

    def _item(self):
        col = self._colref()
        alias = None
        if self._accept("kw", "AS"):
            alias = self._expect("ident").text
        return col, alias

    def _rel(self):
        t = self._expect("ident")
        alias = t.text
        if self._accept("kw", "AS"):
            alias = self._expect("ident").text
        elif self.tok.kind == "ident":
            alias = self._next().text
        return t.text, alias, t.pos

    def _colref(self) -> ColumnName:
        t = self._expect("ident")
        if self._accept("punct", "."):
            c = self._expect("ident")
            return ColumnName(t.text, c.text, t.pos)
        return ColumnName(None, t.text, t.pos)

    def _expr(self):
        t = self.tok
        if t.kind == "string":
            self.i += 1
            return Literal(t.text)
        if t.kind == "number":
            self.i += 1
            return Literal(float(t.text) if "." in t.text else int(t.text))
        func = t.text.upper() if t.kind == "ident" else None
        after = self.toks[self.i + 1] if self.i + 1 < len(self.toks) else None
        if func not in ("YEAR", "DATE_PART") or after is None or after.text != "(":
            func = None
        if func == "YEAR":
            self.i += 2
            col = self._colref()
            self._expect("punct", ")")
            return YearOf(col)
        if func == "DATE_PART":
            self.i += 2
            part = self._expect("string")
            if part.text.upper() != "YEAR":
                raise QuerySyntaxError("only DATE_PART('YEAR', ...) is supported", part.pos)
            self._expect("punct", ",")
            col = self._colref()
            self._expect("punct", ")")
            return YearOf(col)
        if t.kind == "ident":
            return self._colref()
        raise QuerySyntaxError(f"expected expression, found {t.text or 'end of input'!r}", t.pos)

    def _atom(self) -> _RawAtom:
        start = self.tok.pos
        lhs = self._expr()
        t = self.tok
        if t.kind == "op" or (t.kind == "kw" and t.text in ("ILIKE", "LIKE")):
            self.i += 1
            op = t.text
        else:
            raise QuerySyntaxError(f"expected comparison operator, found {t.text or 'end of input'!r}", t.pos)
        rhs = self._expr()
        return _RawAtom(lhs, op, rhs, start)


# -- plan ----------------------------------------------------------------------


@dataclass(frozen=True)
class ColumnRef:
    alias: str
    column: str
    index: int
    type: str


Expr = _U[ColumnRef, Literal, YearOf]


@dataclass(frozen=True)
class Atom:
    lhs: Any
    op: str
    rhs: Any

    def aliases(self) -> set[str]:
        out = set()
        for side in (self.lhs, self.rhs):
            if isinstance(side, ColumnRef):
                out.add(side.alias)
            elif isinstance(side, YearOf):
                out.add(side.arg.alias)
        return out


@dataclass(frozen=True)
class Scan:
    relation: str
    alias: str


@dataclass(frozen=True)
class Select:
    child: Any
    atoms: tuple[Atom, ...]


@dataclass(frozen=True)
class Join:
    left: Any
    right: Any
    atoms: tuple[Atom, ...] = ()


@dataclass(frozen=True)
class Project:
    child: Any
    columns: tuple[ColumnRef, ...]
    names: tuple[str, ...]
    distinct: bool = True


@dataclass(frozen=True)
class Union:
    children: tuple[Project, ...]


QueryPlan = _U[Union, Project]


def _catalog_of(catalog) -> Mapping[str, Mapping[str, str]]:
    if isinstance(catalog, AnnotatedDES):
        return catalog.catalog()
    return catalog


def _expr_type(e) -> str:
    if isinstance(e, ColumnRef):
        return e.type
    if isinstance(e, YearOf):
        return "int"
    v = e.value
    if isinstance(v, str):
        return "string"
    return "int" if isinstance(v, int) else "float"


def _family(t: str) -> str:
    return "number" if t in ("int", "float") else t


def _plan_block(block: _RawBlock, catalog) -> Project:
    aliases: dict[str, str] = {}
    for rel, alias, pos in block.relations:
        if rel not in catalog:
            raise QueryError(f"unknown relation {rel!r}")
        if alias in aliases:
            raise QueryError(f"duplicate alias {alias!r}")
        aliases[alias] = rel

    def resolve(c: ColumnName) -> ColumnRef:
        if c.qualifier is not None:
            if c.qualifier not in aliases:
                raise QueryError(f"unknown alias {c.qualifier!r}")
            cols = catalog[aliases[c.qualifier]]
            if c.column not in cols:
                raise QueryError(f"unknown column {c.qualifier}.{c.column}")
            names = list(cols)
            return ColumnRef(c.qualifier, c.column, names.index(c.column), cols[c.column])
        hits = [a for a, r in aliases.items() if c.column in catalog[r]]
        if not hits:
            raise QueryError(f"unknown column {c.column!r}")
        if len(hits) > 1:
            raise QueryError(f"ambiguous column {c.column!r}")
        cols = catalog[aliases[hits[0]]]
        return ColumnRef(hits[0], c.column, list(cols).index(c.column), cols[c.column])

    def side(e):
        if isinstance(e, ColumnName):
            return resolve(e)
        if isinstance(e, YearOf):
            ref = resolve(e.arg)
            if ref.type != "date":
                raise QueryError(f"YEAR() applied to non-date column {ref.alias}.{ref.column}")
            return YearOf(ref)
        return e

    atoms = []
    for raw in block.atoms:
        lhs, rhs = side(raw.lhs), side(raw.rhs)
        lt, rt = _expr_type(lhs), _expr_type(rhs)
        if raw.op in ("ILIKE", "LIKE"):
            if lt != "string" or not (isinstance(rhs, Literal) and isinstance(rhs.value, str)):
                raise QueryError(f"{raw.op} needs a string column and a string pattern")
        else:
            # a string literal compared with a date column is read as a date
            if lt == "date" and isinstance(rhs, Literal) and rt == "string":
                rhs, rt = Literal(_date_literal(rhs.value)), "date"
            if rt == "date" and isinstance(lhs, Literal) and lt == "string":
                lhs, lt = Literal(_date_literal(lhs.value)), "date"
            if _family(lt) != _family(rt):
                raise QueryError(f"type mismatch: {lt} {raw.op} {rt}")
        atoms.append(Atom(lhs, raw.op, rhs))

    columns = tuple(resolve(c) for c, _ in block.items)
    names = tuple(n or c.column for (c, n) in zip(columns, (n for _, n in block.items)))

    # left-deep nested-loop joins; each atom sits at the lowest node binding its aliases
    remaining = list(atoms)
    node = None
    bound: set[str] = set()
    for rel, alias, _ in block.relations:
        scan: Any = Scan(rel, alias)
        local = [a for a in remaining if a.aliases() <= {alias}]
        remaining = [a for a in remaining if a not in local]
        if local:
            scan = Select(scan, tuple(local))
        if node is None:
            node = scan
        else:
            bound_now = bound | {alias}
            here = [a for a in remaining if a.aliases() <= bound_now]
            remaining = [a for a in remaining if a not in here]
            node = Join(node, scan, tuple(here))
        bound.add(alias)
    if remaining:
        node = Select(node, tuple(remaining))
    return Project(node, columns, names)


def _date_literal(text: str) -> _dt.date:
    try:
        return parse_date(text)
    except DESError as exc:
        raise QueryError(str(exc)) from None


def parse_query(text: str, catalog) -> QueryPlan:
    """Parse ``text`` and resolve it against ``catalog``.

    ``catalog`` is an :class:`AnnotatedDES` or a mapping
    ``relation -> {column: type}`` with columns in schema order.
    """
    blocks = _Parser(text).parse()
    cat = _catalog_of(catalog)
    projects = tuple(_plan_block(b, cat) for b in blocks)
    if len(projects) == 1:
        return projects[0]
    arity = len(projects[0].columns)
    if any(len(p.columns) != arity for p in projects):
        raise QueryError("UNION branches have different arity")
    return Union(projects)


# -- evaluation ------------------------------------------------------------------


@dataclass(frozen=True)
class AnnotatedOutput:
    """An output tuple with its DNF provenance and derived 3-valued label."""

    values: tuple[Any, ...]
    prov: ProvExpr
    derived: Optional[int] = None

    def relabel(self, labels) -> "AnnotatedOutput":
        return AnnotatedOutput(self.values, self.prov, derive_output_label(self, labels))


def _like_regex(pattern: str, flags: int) -> re.Pattern:
    parts = []
    for ch in pattern:
        if ch == "%":
            parts.append(".*")
        elif ch == "_":
            parts.append(".")
        else:
            parts.append(re.escape(ch))
    return re.compile("".join(parts), flags | re.DOTALL)


def _compile_expr(e) -> Callable[[Mapping[str, tuple]], Any]:
    if isinstance(e, ColumnRef):
        alias, idx = e.alias, e.index
        return lambda env: env[alias][idx]
    if isinstance(e, YearOf):
        alias, idx = e.arg.alias, e.arg.index
        return lambda env: env[alias][idx].year
    value = e.value
    return lambda env: value


_CMP = {
    "=": lambda a, b: a == b,
    "<>": lambda a, b: a != b,
    "!=": lambda a, b: a != b,
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
}


def _compile_atom(atom: Atom) -> Callable[[Mapping[str, tuple]], bool]:
    lhs = _compile_expr(atom.lhs)
    if atom.op in ("ILIKE", "LIKE"):
        rx = _like_regex(atom.rhs.value, re.IGNORECASE if atom.op == "ILIKE" else 0)
        return lambda env: rx.fullmatch(lhs(env)) is not None
    rhs = _compile_expr(atom.rhs)
    cmp = _CMP[atom.op]
    return lambda env: cmp(lhs(env), rhs(env))


def _conj(atoms: Sequence[Atom]):
    tests = [_compile_atom(a) for a in atoms]
    return lambda env: all(t(env) for t in tests)


def _eval(node, des: AnnotatedDES, only) -> list[tuple[dict, frozenset]]:
    if isinstance(node, Scan):
        return [
            ({node.alias: values}, frozenset((tid,)))
            for tid, values in des.scan(node.relation)
            if only is None or tid in only
        ]
    if isinstance(node, Select):
        test = _conj(node.atoms)
        return [(env, term) for env, term in _eval(node.child, des, only) if test(env)]
    if isinstance(node, Join):
        left = _eval(node.left, des, only)
        right = _eval(node.right, des, only)
        test = _conj(node.atoms)
        out = []
        for lenv, lterm in left:
            for renv, rterm in right:
                env = {**lenv, **renv}
                if test(env):
                    out.append((env, lterm | rterm))
        return out
    raise QueryError(f"cannot evaluate {type(node).__name__} here")


def _project(node: Project, des, only, acc: dict):
    for env, term in _eval(node.child, des, only):
        key = tuple(env[c.alias][c.index] for c in node.columns)
        acc.setdefault(key, set()).add(tuple(sorted(term)))


def _sort_key(values):
    return tuple((type(v).__name__ if not isinstance(v, (int, float)) else "number", v) for v in values)


def evaluate_with_provenance(
    des: AnnotatedDES, plan: QueryPlan, only: Optional[Iterable[int]] = None
) -> list[AnnotatedOutput]:
    """Evaluate ``plan`` over ``des`` with set semantics.

    ``only`` restricts the database to the given tuple ids (used to evaluate
    over sub-databases).  Outputs are sorted by value.
    """
    only_set = None if only is None else set(only)
    acc: dict[tuple, set] = {}
    for proj in plan.children if isinstance(plan, Union) else (plan,):
        _project(proj, des, only_set, acc)
    out = []
    for values in sorted(acc, key=_sort_key):
        prov = ProvExpr.dnf(acc[values])
        out.append(AnnotatedOutput(values, prov, eval_k3(prov, des.labels, default_unknown=True)))
    return out


def output_names(plan: QueryPlan) -> tuple[str, ...]:
    return (plan.children[0] if isinstance(plan, Union) else plan).names


def derive_output_label(output: AnnotatedOutput, labels) -> Optional[int]:
    """3-valued label of ``output`` from input labels (a DES or a mapping)."""
    if isinstance(labels, AnnotatedDES):
        labels = labels.labels
    return eval_k3(output.prov, labels, default_unknown=True)
