import json

import numpy as np
import pytest

from clawsim.detect import COST_MODEL, EXACT
from clawsim.errors import ParameterError
from clawsim.instances import COMPARISON, STANDARD, OracleSession, ProblemInstance, make_planted_instance, make_rng
from clawsim.search import (
    SearchConfig,
    claw_search,
    error_budget,
    final_scan,
    k_claw_offsets,
    k_claw_search,
    log3_ceil_pow2,
)

from conftest import brute_claws, random_instance


def test_offsets():
    assert k_claw_offsets(2) == (2, 3)
    assert k_claw_offsets(3) == (3, 3)
    assert [log3_ceil_pow2(j) for j in range(6)] == [0, 1, 2, 2, 3, 4]


def test_error_budget_examples():
    assert error_budget(1, 0) == pytest.approx(2 / 27)
    assert error_budget(0, 0) == 0
    assert error_budget(60, 60) == pytest.approx(1 / 9 + 2 / 27)
    assert error_budget(60, 60) < 1 / 3
    with pytest.raises(ParameterError):
        error_budget(-1, 0)


@pytest.mark.parametrize("mode", [STANDARD, COMPARISON])
def test_no_claw_gives_sentinel(mode):
    for seed in range(10):
        inst = make_planted_instance(2, [300, 900], 0, seed=seed)
        res = claw_search(OracleSession(inst, mode), SearchConfig(seed=seed, p_err=0))
        assert res.claw.is_sentinel and not res.found


def test_planted_claw_returned_exactly():
    for seed in range(10):
        inst = make_planted_instance(2, [512, 2048], 1, seed=seed)
        res = claw_search(OracleSession(inst), SearchConfig(p_err=0, seed=seed))
        assert [res.claw.indices] == brute_claws_fast(inst)


def brute_claws_fast(inst):
    f, g = inst.table(0), inst.table(1)
    pos = {int(v): y + 1 for y, v in enumerate(g)}
    return [(x + 1, pos[int(v)]) for x, v in enumerate(f) if int(v) in pos]


def test_k3_planted_and_absent():
    for seed in range(5):
        inst = make_planted_instance(3, [40, 50, 60], 1, seed=seed)
        res = k_claw_search(OracleSession(inst), SearchConfig(p_err=0, c_final=4, seed=seed))
        assert [res.claw.indices] == brute_claws(inst)
        empty = make_planted_instance(3, [40, 50, 60], 0, seed=seed)
        assert k_claw_search(OracleSession(empty), SearchConfig(c_final=4, seed=seed)).claw.is_sentinel


def test_k_path_matches_two_function_search():
    for seed in range(20):
        inst = make_planted_instance(2, [64, 200], seed % 2, seed=seed)
        cfg = SearchConfig(p_err=0, c_final=8, seed=seed)
        a = claw_search(OracleSession(inst), cfg)
        b = k_claw_search(OracleSession(inst), cfg)
        assert a.claw == b.claw


def test_claw_search_rejects_k3():
    inst = make_planted_instance(3, [4, 4, 4], 1, seed=0)
    with pytest.raises(ParameterError):
        claw_search(OracleSession(inst))


def test_final_scan_examples():
    inst = ProblemInstance([4, 4], 20, [[1, 2, 3, 4], [9, 2, 8, 1]])
    s = OracleSession(inst)
    assert final_scan(s, [(1, 2), (1, 2)]).indices == (2, 2)
    assert s.query_count <= 4
    assert final_scan(s, [(3, 3), (1, 3)]).is_sentinel
    assert final_scan(s, [(1, 4), (1, 4)]).indices == (1, 4)
    c = OracleSession(inst, COMPARISON)
    assert final_scan(c, [(1, 4), (1, 4)]).indices == (1, 4)
    assert c.query_count <= 8 * 3


def test_final_scan_least_among_duplicates():
    inst = ProblemInstance([3, 3], 9, [[5, 5, 1], [2, 5, 5]])
    assert final_scan(OracleSession(inst), [(1, 3), (1, 3)]).indices == (1, 2)


@pytest.mark.parametrize("backend", [COST_MODEL, EXACT])
def test_query_total_matches_session(backend):
    inst = make_planted_instance(2, [6, 12], 1, seed=4)
    s = OracleSession(inst, COMPARISON)
    s.charge(5)
    res = claw_search(s, SearchConfig(backend=backend, c_final=2, seed=1))
    assert res.total_queries == s.query_count - 5
    assert sum(r.get("queries", 0) for r in res.trace) <= res.total_queries


def test_exact_backend_soundness(rng):
    for i in range(15):
        inst = random_instance(rng, [5, 7], 9)
        res = claw_search(OracleSession(inst), SearchConfig(backend=EXACT, c_final=2, seed=i))
        if res.found:
            assert res.claw.verify(inst)
        else:
            assert res.claw.is_sentinel


def test_trace_records():
    inst = make_planted_instance(2, [64, 4096], 1, seed=2)
    res = claw_search(OracleSession(inst), SearchConfig(c_final=8, p_err=0, seed=3))
    lines = [json.loads(x) for x in res.trace_jsonl().splitlines()]
    assert lines[0]["stage"] == 1 and lines[0]["depth"] == 1 and lines[0]["repetitions"] == 3
    stage2 = [r for r in lines if r["stage"] == 2]
    assert stage2[0]["repetitions"] == 4
    assert lines[-1]["stage"] == 3
    for r in lines[:-1]:
        assert len(r["verdicts"]) == r["repetitions"]


def test_search_deterministic():
    inst = make_planted_instance(2, [256, 256], 1, seed=5)
    a = claw_search(OracleSession(inst), SearchConfig(seed=(4, 2)))
    b = claw_search(OracleSession(inst), SearchConfig(seed=(4, 2)))
    assert a.claw == b.claw and a.total_queries == b.total_queries and a.trace == b.trace


def test_config_validation():
    with pytest.raises(ParameterError):
        SearchConfig(c_final=0)


def test_stage_one_halves_only_large_domains():
    inst = make_planted_instance(2, [16, 1024], 1, seed=8)
    res = claw_search(OracleSession(inst), SearchConfig(p_err=0, c_final=4, seed=0))
    first = [r for r in res.trace if r["stage"] == 1]
    assert all(r["intervals"][0] == [1, 16] for r in first)
    assert first[-1]["intervals"][1][1] - first[-1]["intervals"][1][0] <= 16
