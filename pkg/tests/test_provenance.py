import itertools

import pytest
from hypothesis import given
from hypothesis import strategies as st

from veriscope.provenance import (
    CNF,
    DNF,
    ProvenanceError,
    ProvExpr,
    disjoin,
    eval_bool,
    eval_k3,
    normalize,
    parse_prov,
    serialize,
    vars_of,
)

groups_st = st.lists(
    st.lists(st.integers(1, 9), min_size=1, max_size=4, unique=True), min_size=1, max_size=5
)


def test_groups_are_canonical():
    a = ProvExpr.dnf([[3, 1], [2]])
    b = ProvExpr.dnf([[2], [1, 3]])
    assert a == b
    assert a.groups == ((1, 3), (2,))
    assert vars_of(a) == [1, 2, 3]
    assert a.width == 2


def test_rejects_empty_and_duplicates():
    with pytest.raises(ProvenanceError):
        ProvExpr(DNF, ())
    with pytest.raises(ProvenanceError):
        ProvExpr(DNF, ((),))
    with pytest.raises(ProvenanceError):
        ProvExpr(DNF, ((1, 1),))


def test_kleene_tables():
    e = ProvExpr.dnf([[1, 2]])
    assert eval_k3(e, {1: 1, 2: 1}) == 1
    assert eval_k3(e, {1: 0, 2: None}) == 0
    assert eval_k3(e, {1: 1, 2: None}) is None
    d = ProvExpr.dnf([[1], [2]])
    assert eval_k3(d, {1: 1, 2: None}) == 1
    assert eval_k3(d, {1: 0, 2: None}) is None
    c = ProvExpr.cnf([[1, 2], [3]])
    assert eval_k3(c, {1: None, 2: 1, 3: 1}) == 1
    assert eval_k3(c, {1: None, 2: 0, 3: 1}) is None
    assert eval_k3(c, {1: None, 2: None, 3: 0}) == 0


def test_missing_variable():
    e = ProvExpr.dnf([[1]])
    with pytest.raises(ProvenanceError):
        eval_k3(e, {})
    assert eval_k3(e, {}, default_unknown=True) is None


@given(groups_st, st.sampled_from([DNF, CNF]), st.data())
def test_k3_agrees_with_every_completion(groups, form, data):
    e = ProvExpr(form, tuple(tuple(g) for g in groups))
    xs = vars_of(e)
    labels = {x: data.draw(st.sampled_from([0, 1, None])) for x in xs}
    unknown = [x for x in xs if labels[x] is None]
    values = set()
    for bits in itertools.product([0, 1], repeat=len(unknown)):
        world = dict(labels)
        world.update(zip(unknown, bits))
        values.add(eval_bool(e, world))
    k3 = eval_k3(e, labels)
    assert (values == {k3}) if k3 is not None else (values == {0, 1})


@given(groups_st, st.sampled_from([DNF, CNF]))
def test_serialize_round_trip(groups, form):
    e = ProvExpr(form, tuple(tuple(g) for g in groups))
    back = parse_prov(serialize(e))
    if e.groups == ((e.groups[0][0],),):
        # a lone single variable reads as DNF; both forms mean the same thing
        assert back == ProvExpr(DNF, e.groups)
    else:
        assert back == e


def test_serialization_format():
    assert serialize(ProvExpr.dnf([[1, 2], [3, 4]])) == "(v1&v2)|(v3&v4)"
    assert serialize(ProvExpr.cnf([[1, 2], [3]])) == "(v1|v2)&(v3)"
    assert parse_prov("(v1|v2)&(v3)").form == CNF
    assert parse_prov("(v1|v2)").form == CNF
    assert parse_prov("(v1&v2)").form == DNF
    assert parse_prov("(v7)").form == DNF
    for bad in ["v1&v2", "(v1&v2)|(v3|v4)", "(v1&v2)&(v3&v4)", "(x1)", "()"]:
        with pytest.raises(ProvenanceError):
            parse_prov(bad)


def test_normalize_and_disjoin():
    e = ProvExpr(DNF, ((1, 2), (1, 2), (1, 2, 3)))
    assert normalize(e).groups == ((1, 2), (1, 2, 3))
    assert normalize(e, absorb=True).groups == ((1, 2),)
    f = disjoin(ProvExpr.dnf([[1, 2]]), ProvExpr.dnf([[1, 2], [4]]))
    assert f.groups == ((1, 2), (4,))
    with pytest.raises(ProvenanceError):
        disjoin(ProvExpr.cnf([[1]]), ProvExpr.dnf([[1]]))
