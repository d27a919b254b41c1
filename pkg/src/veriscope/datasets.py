"""Bundled example databases: the startup-acquisitions running example and a
synthetic join workload for experiments."""

from __future__ import annotations

import numpy as np

from .model import AnnotatedDES, Relation, build_annotated_des

ACQUISITIONS = Relation.from_records(
    "Acquisitions",
    {"Acquired": "string", "Acquiring": "string", "Date": "date"},
    [
        ("BHealthy", "Fiffer", "04.03.2018"),
        ("NewHealth", "BHealthy", "02.04.2017"),
        ("NewHealth", "Optobest", "01.10.2020"),
        ("Optobest", "microBarg", "08.08.2019"),
    ],
)

ROLES = Relation.from_records(
    "Roles",
    {"Company": "string", "Role": "string", "Name": "string"},
    [
        ("BHealthy", "Founder", "Emil Lime"),
        ("NewHealth", "Co-founder", "Yara Aray"),
        ("Optobest", "Co-founder", "Nala Alan"),
        ("BHealthy", "Co-founder", "Rima Amir"),
    ],
)

EDUCATION = Relation.from_records(
    "Education",
    {"Name": "string", "University": "string", "Year": "int"},
    [
        ("Yara Aray", "U. Melbourne", 2017),
        ("Emil Lime", "U. São Paulo", 2014),
        ("Rima Amir", "U. São Paulo", 2018),
        ("Nala Alan", "U. Cape Town", 2002),
    ],
)

# tuple ids in load order
A1, A2, A3, A4, R1, R2, R3, R4, E1, E2, E3, E4 = range(1, 13)
NAMES = {i: n for i, n in zip(range(1, 13), "a1 a2 a3 a4 r1 r2 r3 r4 e1 e2 e3 e4".split())}

EXAMPLE_LABELS = {A1: 1, A2: 0, A3: 1, A4: 0, R1: 1, E2: 1}
EXAMPLE_ERRS = {A1: 0.3, A2: 0.3, A3: 0.2, A4: 0.0, R1: 0.2, E2: 0.4}
EXAMPLE_WORLD = {A1: 1, A2: 0, A3: 0, A4: 0, R1: 0, R2: 0, R3: 0, R4: 0, E1: 0, E2: 1, E3: 0, E4: 0}

FOUNDERS_QUERY = """\
SELECT DISTINCT a.Acquired, e.University
FROM Acquisitions AS a, Roles AS r, Education AS e
WHERE a.Acquired = r.Company AND
      r.Name = e.Name AND
      r.Role ILIKE '%founder%' AND
      e.Year <= DATE_PART('YEAR', a.Date)
"""

ALUMNI_QUERY = """\
SELECT DISTINCT r.Company, e.University
FROM Roles AS r, Education AS e
WHERE r.Name = e.Name
"""


def running_example(labels=None, errs=None) -> AnnotatedDES:
    """The three-relation startup database with its verifier labels."""
    return build_annotated_des(
        [ACQUISITIONS, ROLES, EDUCATION],
        EXAMPLE_LABELS if labels is None else labels,
        EXAMPLE_ERRS if errs is None else errs,
    )


def synthetic_join_database(
    n_left: int = 40,
    n_mid: int = 40,
    n_right: int = 40,
    n_groups: int = 10,
    n_keys: int = 20,
    n_targets: int = 10,
    n_links: int | None = None,
    seed: int = 0,
) -> tuple[AnnotatedDES, str]:
    """A random three-relation database and a 3-way join query over it.

    ``Left(grp, key)``, ``Mid(key, link)`` and ``Right(link, target)`` are
    joined on ``key`` and ``link``; outputs are distinct ``(grp, target)``
    pairs, each with a 3-DNF provenance of one or more terms.  All tuples are
    unlabeled; pair with :func:`veriscope.experiments.gen_scenario`.
    """
    rng = np.random.default_rng(seed)
    n_links = n_keys if n_links is None else n_links

    def rows(n, a_max, b_max):
        if n > a_max * b_max:
            raise ValueError(f"cannot draw {n} distinct rows from a {a_max}x{b_max} domain")
        seen = set()
        while len(seen) < n:
            seen.add((int(rng.integers(a_max)), int(rng.integers(b_max))))
        return sorted(seen)

    left = Relation.from_records("Left", {"grp": "int", "key": "int"}, rows(n_left, n_groups, n_keys))
    mid = Relation.from_records("Mid", {"key": "int", "link": "int"}, rows(n_mid, n_keys, n_links))
    right = Relation.from_records("Right", {"link": "int", "target": "int"}, rows(n_right, n_links, n_targets))
    query = (
        "SELECT DISTINCT l.grp, r.target FROM Left AS l, Mid AS m, Right AS r "
        "WHERE l.key = m.key AND m.link = r.link"
    )
    return build_annotated_des([left, mid, right]), query
