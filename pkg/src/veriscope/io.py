"""File formats: schema sidecar, relation/label/truth CSVs and report writers.

The schema file is JSON::

    {"relations": [
        {"name": "Roles", "file": "Roles.csv", "key": null,
         "columns": {"Company": "string", "Role": "string", "Name": "string"}}
    ]}

``file`` defaults to ``<name>.csv`` inside the relations directory.  Tuple
ids follow the order of relations in the schema and then row order.
Labels are ``tuple_id,label,err`` with label ``0``, ``1`` or ``unknown``
(err empty for unknown); ground truth is ``tuple_id,label``.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

from .model import AnnotatedDES, DESError, Relation, build_annotated_des, format_label, parse_label, render_value


def _read_rows(path: Path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DESError(f"{path}: empty CSV file")
    return [h.strip() for h in rows[0]], [r for r in rows[1:] if any(c.strip() for c in r)]


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow(r)


def load_schema(path) -> list[dict]:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DESError(f"{path}: invalid JSON ({exc})") from None
    rels = data.get("relations") if isinstance(data, dict) else None
    if not isinstance(rels, list) or not rels:
        raise DESError(f"{path}: expected a non-empty 'relations' list")
    out = []
    for r in rels:
        if not isinstance(r, dict) or "name" not in r or not isinstance(r.get("columns"), dict):
            raise DESError(f"{path}: each relation needs 'name' and a 'columns' mapping")
        out.append({"name": r["name"], "columns": dict(r["columns"]), "key": r.get("key"), "file": r.get("file")})
    return out


def load_relations(schema_path, relations_dir=None) -> list[Relation]:
    schema_path = Path(schema_path)
    base = Path(relations_dir) if relations_dir else schema_path.parent
    relations = []
    for spec in load_schema(schema_path):
        path = base / (spec["file"] or f"{spec['name']}.csv")
        header, rows = _read_rows(path)
        cols = list(spec["columns"])
        if header != cols:
            raise DESError(f"{path}: header {header} does not match schema columns {cols}")
        relations.append(Relation.from_records(spec["name"], spec["columns"], rows, spec["key"]))
    return relations


def load_labels(path) -> tuple[dict[int, Optional[int]], dict[int, float]]:
    header, rows = _read_rows(Path(path))
    if header[:2] != ["tuple_id", "label"]:
        raise DESError(f"{path}: expected header tuple_id,label,err")
    labels, errs = {}, {}
    for n, r in enumerate(rows, 2):
        try:
            tid = int(r[0])
            lab = parse_label(r[1])
            err = r[2].strip() if len(r) > 2 else ""
        except (ValueError, IndexError):
            raise DESError(f"{path}:{n}: malformed row {r!r}") from None
        labels[tid] = lab
        if err:
            errs[tid] = float(err)
        elif lab is not None:
            raise DESError(f"{path}:{n}: labeled tuple {tid} has no error probability")
    return labels, errs


def load_truth(path) -> dict[int, int]:
    header, rows = _read_rows(Path(path))
    if header[:2] != ["tuple_id", "label"]:
        raise DESError(f"{path}: expected header tuple_id,label")
    truth = {}
    for n, r in enumerate(rows, 2):
        try:
            lab = parse_label(r[1])
            tid = int(r[0])
        except (ValueError, IndexError):
            raise DESError(f"{path}:{n}: malformed row {r!r}") from None
        if lab is None:
            raise DESError(f"{path}:{n}: ground truth must be 0 or 1")
        truth[tid] = lab
    return truth


def load_database(schema_path, relations_dir=None, labels_path=None) -> AnnotatedDES:
    relations = load_relations(schema_path, relations_dir)
    labels, errs = load_labels(labels_path) if labels_path else ({}, {})
    return build_annotated_des(relations, labels, errs)


def write_database(des: AnnotatedDES, directory, keys: Optional[Mapping[str, str]] = None) -> None:
    """Write schema.json, one CSV per relation and labels.csv."""
    d = Path(directory)
    rels = []
    for name, rel in des.relations.items():
        rels.append({"name": name, "columns": dict(zip(rel.columns, rel.types)), "key": rel.key})
        write_csv(d / f"{name}.csv", rel.columns, ([render_value(v) for v in row] for row in rel.rows))
    d.mkdir(parents=True, exist_ok=True)
    (d / "schema.json").write_text(json.dumps({"relations": rels}, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    write_labels(des, d / "labels.csv")


def write_labels(des: AnnotatedDES, path) -> None:
    rows = []
    for tid in des.tuple_ids:
        lab = des.label(tid)
        rows.append([tid, format_label(lab), "" if lab is None else repr(des.err(tid))])
    write_csv(Path(path), ["tuple_id", "label", "err"], rows)


def write_truth(truth: Mapping[int, int], path) -> None:
    write_csv(Path(path), ["tuple_id", "label"], ([t, truth[t]] for t in sorted(truth)))


def fmt_num(x: Optional[float]) -> str:
    """12 significant digits; empty for missing, ``inf``/``-inf`` spelled out."""
    if x is None:
        return ""
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".12g")


def fmt_world(world: Optional[Mapping[int, int]]) -> str:
    if not world:
        return ""
    return ";".join(f"v{x}={b}" for x, b in sorted(world.items()))
