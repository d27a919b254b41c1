"""Databases with error estimation (DES), possible worlds and labeling probabilities.

Labels are three-valued: ``0`` (incorrect), ``1`` (correct) and ``None``
(unknown).  Error probabilities live in ``[0, 0.5]`` and exist exactly for
labeled tuples.  Probabilities are carried in natural-log space; probability
zero is represented by ``ZERO`` (negative infinity).
"""

from __future__ import annotations

import datetime as _dt
import math
import re
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Optional, Sequence

TriLabel = Optional[int]
UNKNOWN: TriLabel = None

LogProb = float
ZERO: LogProb = -math.inf

COLUMN_TYPES = ("string", "int", "float", "date")


class DESError(ValueError):
    """Invalid database, label or error-probability input."""


def parse_label(text: Any) -> TriLabel:
    """Parse ``0``/``1``/``unknown`` (also ``⊥``, empty, ``None``)."""
    if text is None:
        return None
    if isinstance(text, bool):
        return int(text)
    if isinstance(text, int):
        if text in (0, 1):
            return text
        raise DESError(f"invalid label {text!r}")
    s = str(text).strip().lower()
    if s in ("1", "true", "correct"):
        return 1
    if s in ("0", "false", "incorrect"):
        return 0
    if s in ("", "unknown", "none", "⊥", "bot", "?"):
        return None
    raise DESError(f"invalid label {text!r}")


def format_label(label: TriLabel) -> str:
    return "unknown" if label is None else str(label)


_ISO_DATE = re.compile(r"^(\d{4})-(\d{1,2})-(\d{1,2})$")
_DOT_DATE = re.compile(r"^(\d{1,2})\.(\d{1,2})\.(\d{4})$")


def parse_date(text: str) -> _dt.date:
    """Parse ``YYYY-MM-DD`` or ``DD.MM.YYYY``."""
    s = text.strip()
    m = _ISO_DATE.match(s)
    if m:
        return _dt.date(int(m[1]), int(m[2]), int(m[3]))
    m = _DOT_DATE.match(s)
    if m:
        return _dt.date(int(m[3]), int(m[2]), int(m[1]))
    raise DESError(f"unrecognised date {text!r}")


def render_value(value: Any) -> str:
    if isinstance(value, _dt.date):
        return value.strftime("%d.%m.%Y")
    if isinstance(value, float) and value.is_integer():
        return repr(value)
    return str(value)


def coerce_value(raw: Any, ctype: str) -> Any:
    if ctype == "string":
        return str(raw)
    if ctype == "int":
        return int(raw)
    if ctype == "float":
        return float(raw)
    if ctype == "date":
        return raw if isinstance(raw, _dt.date) else parse_date(str(raw))
    raise DESError(f"unknown column type {ctype!r}")


@dataclass(frozen=True)
class Relation:
    """A named relation: ordered typed columns, optional key column, rows."""

    name: str
    columns: tuple[str, ...]
    types: tuple[str, ...]
    rows: tuple[tuple[Any, ...], ...] = ()
    key: Optional[str] = None

    def __post_init__(self):
        if len(self.columns) != len(self.types):
            raise DESError(f"{self.name}: {len(self.columns)} columns but {len(self.types)} types")
        if len(set(self.columns)) != len(self.columns):
            raise DESError(f"{self.name}: duplicate column names")
        for t in self.types:
            if t not in COLUMN_TYPES:
                raise DESError(f"{self.name}: unknown column type {t!r}")
        if self.key is not None and self.key not in self.columns:
            raise DESError(f"{self.name}: key column {self.key!r} not in schema")
        rows = []
        for row in self.rows:
            if len(row) != len(self.columns):
                raise DESError(f"{self.name}: row {row!r} has arity {len(row)}, expected {len(self.columns)}")
            rows.append(tuple(coerce_value(v, t) for v, t in zip(row, self.types)))
        object.__setattr__(self, "rows", tuple(rows))

    @classmethod
    def from_records(cls, name, schema: Mapping[str, str], rows: Iterable[Sequence[Any]], key=None):
        return cls(name, tuple(schema), tuple(schema.values()), tuple(tuple(r) for r in rows), key)

    def column_index(self, column: str) -> int:
        try:
            return self.columns.index(column)
        except ValueError:
            raise DESError(f"{self.name} has no column {column!r}") from None

    def column_type(self, column: str) -> str:
        return self.types[self.column_index(column)]


@dataclass(frozen=True)
class Tuple:
    id: int
    relation: str
    values: tuple[Any, ...]


@dataclass(frozen=True)
class AnnotatedDES:
    """Relations plus a partial 3-valued labeling with error probabilities.

    Every tuple gets a dense integer id (starting at 1, in relation order and
    then row order); its provenance variable has the same id.  ``labels`` and
    ``errs`` only hold labeled tuples.
    """

    relations: Mapping[str, Relation]
    tuples: Mapping[int, Tuple]
    labels: Mapping[int, int] = field(default_factory=dict)
    errs: Mapping[int, float] = field(default_factory=dict)
    relation_ids: Mapping[str, tuple[int, ...]] = field(default_factory=dict)

    def label(self, tid: int) -> TriLabel:
        return self.labels.get(tid)

    def err(self, tid: int) -> Optional[float]:
        return self.errs.get(tid)

    @property
    def tuple_ids(self) -> list[int]:
        return list(self.tuples)

    def var(self, tid: int) -> int:
        # variables and tuple ids coincide
        if tid not in self.tuples:
            raise DESError(f"unknown tuple id {tid}")
        return tid

    def scan(self, relation: str):
        """Yield ``(tuple_id, values)`` for every row of ``relation``."""
        if relation not in self.relations:
            raise DESError(f"unknown relation {relation!r}")
        for tid in self.relation_ids[relation]:
            yield tid, self.tuples[tid].values

    def catalog(self) -> dict[str, dict[str, str]]:
        return {name: dict(zip(r.columns, r.types)) for name, r in self.relations.items()}

    def with_updates(
        self,
        labels: Optional[Mapping[int, TriLabel]] = None,
        errs: Optional[Mapping[int, Optional[float]]] = None,
    ) -> "AnnotatedDES":
        """Return a copy with some labels and/or error probabilities replaced.

        A label set to ``None`` also drops the tuple's error probability.
        """
        new_labels = dict(self.labels)
        new_errs = dict(self.errs)
        for tid, lab in (labels or {}).items():
            self.var(tid)
            if lab is None:
                new_labels.pop(tid, None)
                new_errs.pop(tid, None)
            else:
                new_labels[tid] = parse_label(lab)
        for tid, e in (errs or {}).items():
            self.var(tid)
            if e is None:
                new_errs.pop(tid, None)
            else:
                new_errs[tid] = e
        _validate_labels(self.tuples, new_labels, new_errs)
        return AnnotatedDES(self.relations, self.tuples, new_labels, new_errs, self.relation_ids)

    def with_err(self, tid: int, err: float) -> "AnnotatedDES":
        return self.with_updates(errs={tid: err})


def _validate_labels(tuples, labels, errs):
    for tid in labels:
        if tid not in tuples:
            raise DESError(f"label given for unknown tuple id {tid}")
    for tid, e in errs.items():
        if tid not in labels:
            raise DESError(f"error probability given for unlabeled tuple {tid}")
        if not (0.0 <= e <= 0.5):
            raise DESError(f"error probability {e} of tuple {tid} outside [0, 0.5]")
    for tid in labels:
        if tid not in errs:
            raise DESError(f"labeled tuple {tid} has no error probability")


def build_annotated_des(
    relations: Sequence[Relation],
    labels: Optional[Mapping[int, Any]] = None,
    errs: Optional[Mapping[int, float]] = None,
) -> AnnotatedDES:
    """Assemble an annotated DES, assigning tuple ids 1..N in input order.

    ``labels`` may contain unknown entries (``None``/"unknown"), which are
    dropped.  Errors: a label or error probability for a nonexistent or
    unlabeled tuple, or an error probability outside ``[0, 0.5]``.
    """
    rel_map: dict[str, Relation] = {}
    tuples: dict[int, Tuple] = {}
    rel_ids: dict[str, tuple[int, ...]] = {}
    next_id = 1
    for rel in relations:
        if rel.name in rel_map:
            raise DESError(f"duplicate relation {rel.name!r}")
        rel_map[rel.name] = rel
        ids = []
        for row in rel.rows:
            tuples[next_id] = Tuple(next_id, rel.name, row)
            ids.append(next_id)
            next_id += 1
        rel_ids[rel.name] = tuple(ids)

    clean_labels: dict[int, int] = {}
    for tid, lab in (labels or {}).items():
        tid = int(tid)
        if tid not in tuples:
            raise DESError(f"label given for unknown tuple id {tid}")
        lab = parse_label(lab)
        if lab is not None:
            clean_labels[tid] = lab
    clean_errs = {int(tid): float(e) for tid, e in (errs or {}).items() if e is not None}
    _validate_labels(tuples, clean_labels, clean_errs)
    return AnnotatedDES(rel_map, tuples, clean_labels, clean_errs, rel_ids)


def log_match(err: float) -> LogProb:
    """log(1 - err): the label agrees with the world."""
    return math.log1p(-err)


def log_mismatch(err: float) -> LogProb:
    """log(err): the label disagrees with the world."""
    return math.log(err) if err > 0 else ZERO


def to_linear(logp: LogProb) -> float:
    return 0.0 if logp == ZERO else math.exp(logp)


def labeling_probability(des: AnnotatedDES, world: Mapping[int, int], subset: Optional[Iterable[int]] = None) -> LogProb:
    """Log-probability of observing ``des``'s labels given ``world``.

    Restricted to ``subset`` (default: all tuples).  Unlabeled tuples
    contribute nothing; a mismatch on a zero-error label gives ``ZERO``.
    """
    ids = des.tuples.keys() if subset is None else subset
    total = 0.0
    for tid in ids:
        if tid not in des.tuples:
            raise DESError(f"unknown tuple id {tid}")
        lab = des.labels.get(tid)
        if lab is None:
            continue
        e = des.errs[tid]
        if world[tid] == lab:
            total += log_match(e)
        else:
            if e == 0:
                return ZERO
            total += math.log(e)
    return total


def to_cell_level(relation: Relation, name: Optional[str] = None) -> Relation:
    """Split every non-key cell into an ``(ID, Attribute, Value)`` triplet.

    Values are rendered as text (dates as ``DD.MM.YYYY``) so one column can
    hold every attribute; IDs keep the key column's type.
    """
    if relation.key is None:
        raise DESError(f"{relation.name} has no key column")
    k = relation.column_index(relation.key)
    rows = []
    for row in relation.rows:
        for i, col in enumerate(relation.columns):
            if i != k:
                rows.append((row[k], col, render_value(row[i])))
    return Relation(
        name or f"{relation.name}C",
        ("ID", "Attribute", "Value"),
        (relation.types[k], "string", "string"),
        tuple(rows),
        key=None,
    )
