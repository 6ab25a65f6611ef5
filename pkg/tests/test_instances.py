import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clawsim.errors import DomainError, ModeError, ParameterError, ParseError, ValidationError
from clawsim.instances import (
    COMPARISON,
    STANDARD,
    ClawTuple,
    DomainPoint,
    OracleSession,
    ProblemInstance,
    comparison_query,
    deserialize_instance,
    has_claw,
    load_instance,
    log2_ceil,
    make_planted_instance,
    make_rng,
    save_instance,
    serialize_instance,
    standard_query,
)

from conftest import brute_claws, random_instance


@pytest.fixture
def fg():
    return ProblemInstance([3, 3], 8, [[3, 1, 2], [5, 7, 5]])


def test_standard_query_reads_table(fg):
    s = OracleSession(fg)
    assert standard_query(s, DomainPoint(0, 2)) == 1
    assert standard_query(s, DomainPoint(0, 1)) == 3
    assert s.query_count == 2


def test_repeated_query_same_value_and_counted(fg):
    s = OracleSession(fg)
    a = standard_query(s, (1, 3))
    b = standard_query(s, (1, 3))
    assert a == b == 5
    assert s.query_count == 2


def test_comparison_query_examples(fg):
    s = OracleSession(fg, COMPARISON)
    assert comparison_query(s, (1, 1), (1, 2)) == 1  # 5 <= 7
    assert comparison_query(s, (1, 2), (1, 1)) == 0
    assert comparison_query(s, (0, 3), (0, 3)) == 1
    assert s.query_count == 3


def test_mode_and_domain_errors(fg):
    with pytest.raises(ModeError):
        OracleSession(fg, COMPARISON).standard(DomainPoint(0, 1))
    with pytest.raises(ModeError):
        OracleSession(fg, STANDARD).compare(DomainPoint(0, 1), DomainPoint(1, 1))
    s = OracleSession(fg)
    for bad in [(0, 0), (0, 4), (2, 1), (-1, 1)]:
        with pytest.raises(DomainError):
            s.standard(DomainPoint(*bad))
    assert s.query_count == 0
    with pytest.raises(ParameterError):
        OracleSession(fg, "quantum")


def test_comparison_agrees_with_values_on_all_pairs(rng):
    inst = random_instance(rng, [5, 6], 4)
    s = OracleSession(inst, COMPARISON)
    pts = [DomainPoint(i, x) for i in range(2) for x in range(1, inst.domain_sizes[i] + 1)]
    for p in pts:
        for q in pts:
            assert s.compare(p, q) == int(inst.value(p) <= inst.value(q))
    assert s.query_count == len(pts) ** 2


@pytest.mark.parametrize(
    "k,sizes,claws,rs",
    [(2, [4, 4], 0, 64), (2, [4, 8], 1, None), (3, [3, 4, 5], 1, None), (2, [6, 6], 3, None)],
)
def test_planted_claw_count_by_scan(k, sizes, claws, rs):
    for seed in range(5):
        inst = make_planted_instance(k, sizes, claws, rs, seed=seed)
        assert len(brute_claws(inst)) == claws
        assert sorted(brute_claws(inst)) == sorted(inst.brute_force_claws())
        assert has_claw(inst, [(1, n) for n in sizes]) == (claws > 0)


def test_planted_values_distinct_within_each_function():
    inst = make_planted_instance(2, [50, 200], 3, seed=1)
    for i in range(2):
        t = inst.table(i)
        assert len(set(t.tolist())) == t.size


def test_planted_infeasible():
    with pytest.raises(ParameterError):
        make_planted_instance(2, [4, 4], 5)
    with pytest.raises(ParameterError):
        make_planted_instance(2, [4, 4], 0, range_size=7)
    with pytest.raises(ParameterError):
        make_planted_instance(2, [8, 4], 1)
    with pytest.raises(ParameterError):
        make_planted_instance(3, [4, 4], 1)


def test_planted_deterministic():
    a = make_planted_instance(2, [16, 32], 2, seed=make_rng(7, 1))
    b = make_planted_instance(2, [16, 32], 2, seed=make_rng(7, 1))
    c = make_planted_instance(2, [16, 32], 2, seed=make_rng(7, 2))
    assert a == b and hash(a) == hash(b)
    assert a != c


def test_round_trip(tmp_path):
    inst = make_planted_instance(3, [3, 4, 5], 1, seed=4)
    assert deserialize_instance(serialize_instance(inst)) == inst
    path = tmp_path / "inst.json"
    save_instance(inst, path)
    assert load_instance(path) == inst
    assert serialize_instance(load_instance(path)) == path.read_text()


def test_empty_document():
    with pytest.raises(ParseError) as exc:
        deserialize_instance("   \n")
    assert exc.value.line == 1


def test_malformed_document_has_position():
    with pytest.raises(ParseError) as exc:
        deserialize_instance('{"k": 2,\n "domains": [1, 2,]}')
    assert exc.value.line == 2


def test_decreasing_domains_rejected():
    doc = {"k": 2, "domains": [3, 2], "range_size": 5, "values": [[1, 2, 3], [4, 5]]}
    with pytest.raises(ValidationError):
        deserialize_instance(json.dumps(doc))


def test_values_outside_range_rejected():
    with pytest.raises(ValidationError):
        ProblemInstance([2, 2], 3, [[1, 4], [1, 2]])


def test_tables_read_only(fg):
    with pytest.raises(ValueError):
        fg.table(0)[0] = 9
    with pytest.raises(AttributeError):
        fg.k = 3


def test_claw_tuple_verify(fg):
    assert ClawTuple((1, 1)).verify(fg) is False
    inst = ProblemInstance([2, 2], 4, [[1, 2], [3, 2]])
    assert ClawTuple((2, 2)).verify(inst)
    assert not ClawTuple.sentinel(2).verify(inst)
    assert ClawTuple.sentinel(3).indices == (-1, -1, -1)


def test_log2_ceil():
    assert [log2_ceil(n) for n in (1, 2, 3, 4, 5, 32, 33)] == [0, 1, 2, 2, 3, 5, 6]


@settings(max_examples=50, deadline=None)
@given(
    sizes=st.lists(st.integers(1, 6), min_size=2, max_size=3).map(sorted),
    data=st.data(),
)
def test_has_claw_matches_scan(sizes, data):
    rs = data.draw(st.integers(1, 6))
    values = [data.draw(st.lists(st.integers(1, rs), min_size=n, max_size=n)) for n in sizes]
    inst = ProblemInstance(sizes, rs, values)
    doms = []
    for n in sizes:
        lo = data.draw(st.integers(1, n))
        doms.append((lo, data.draw(st.integers(lo, n))))
    assert has_claw(inst, doms) == bool(brute_claws(inst, doms))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_round_trip_property(seed):
    r = np.random.default_rng(seed)
    inst = random_instance(r, list(r.integers(1, 9, size=int(r.integers(2, 4)))), int(r.integers(1, 20)))
    assert deserialize_instance(serialize_instance(inst)) == inst
