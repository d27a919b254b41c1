import math
import random
from pathlib import Path

import pytest

from veriscope.datasets import ALUMNI_QUERY, FOUNDERS_QUERY, running_example
from veriscope.model import Relation, build_annotated_des
from veriscope.provenance import ProvExpr
from veriscope.query import AnnotatedOutput, evaluate_with_provenance, parse_query

FIXTURES = Path(__file__).parent / "fixtures"
RUNNING = FIXTURES / "running_example"


def flat_des(n, labels=None, errs=None):
    """A one-relation database with tuple ids 1..n."""
    rel = Relation.from_records("T", {"i": "int"}, [(i,) for i in range(1, n + 1)])
    return build_annotated_des([rel], labels or {}, errs or {})


def output(prov, derived):
    return AnnotatedOutput(("o",), prov, derived)


def random_monotone(rng, n_vars, form="DNF", max_groups=5, max_width=4):
    groups = set()
    for _ in range(rng.randint(1, max_groups)):
        k = rng.randint(1, min(max_width, n_vars))
        groups.add(tuple(sorted(rng.sample(range(1, n_vars + 1), k))))
    return ProvExpr(form, tuple(groups))


def random_annotation(rng, xs, p_unknown=0.25, p_zero_err=0.15):
    labels, errs = {}, {}
    for x in xs:
        if rng.random() < p_unknown:
            continue
        labels[x] = rng.randint(0, 1)
        errs[x] = 0.0 if rng.random() < p_zero_err else rng.choice([0.5, round(rng.uniform(0.001, 0.5), 4)])
    return labels, errs


def linear(lp):
    return 0.0 if lp == -math.inf else math.exp(lp)


@pytest.fixture
def des():
    return running_example()


@pytest.fixture
def founders(des):
    return evaluate_with_provenance(des, parse_query(FOUNDERS_QUERY, des))


@pytest.fixture
def alumni(des):
    return evaluate_with_provenance(des, parse_query(ALUMNI_QUERY, des))


@pytest.fixture
def rng():
    return random.Random(20240611)
