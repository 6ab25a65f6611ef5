"""Locating a claw with interval bisection driven by repeated detection.

Stage 1 halves the larger domains until each is no longer than the first
one; stage 2 halves every domain until all are at most ``c_final`` wide;
stage 3 scans what is left classically. At depth ``s`` each candidate box
gets ``s + offset`` detection runs, which keeps every stage's total miss
probability below 1/6 while costing only a constant factor.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from clawsim.detect import (
    COST_MODEL,
    DEFAULT_C,
    DEFAULT_P_ERR,
    claw_detect,
    sorted_list,
)
from clawsim.errors import ParameterError
from clawsim.instances import ClawTuple, OracleSession, has_claw, make_rng

Interval = tuple[int, int]


def log3_ceil_pow2(j: int) -> int:
    """``ceil(log_3 2**j)``, exactly."""
    e = 0
    while 3**e < 2**j:
        e += 1
    return e


def k_claw_offsets(k: int) -> tuple[int, int]:
    """Repetitions at depth ``s`` are ``s + offset``; one offset per stage."""
    return 1 + log3_ceil_pow2(k - 1), 1 + log3_ceil_pow2(k)


@dataclass(frozen=True)
class SearchConfig:
    backend: str = COST_MODEL
    c_final: int = 100
    p_err: float = DEFAULT_P_ERR
    c: float = DEFAULT_C
    offsets: tuple[int, int] | None = None
    seed: int | tuple[int, ...] | None = 0

    def __post_init__(self):
        if self.c_final < 1:
            raise ParameterError("c_final must be at least 1")


@dataclass
class SearchResult:
    claw: ClawTuple
    total_queries: int
    trace: list[dict] = field(default_factory=list)

    @property
    def found(self) -> bool:
        return not self.claw.is_sentinel

    def trace_jsonl(self) -> str:
        return "".join(json.dumps(rec, sort_keys=True) + "\n" for rec in self.trace)


def _width(iv: Interval) -> int:
    return iv[1] - iv[0]


def _size(iv: Interval) -> int:
    return iv[1] - iv[0] + 1


def _halves(iv: Interval) -> list[Interval]:
    lo, hi = iv
    mid = -(-(lo + hi) // 2)
    return [(lo, mid - 1), (mid, hi)]


class _Searcher:
    def __init__(self, session: OracleSession, config: SearchConfig, rng: np.random.Generator):
        self.session = session
        self.config = config
        self.rng = rng
        self.trace: list[dict] = []
        self._truth: dict[tuple[Interval, ...], bool] = {}

    def truth(self, box: tuple[Interval, ...]) -> bool | None:
        if self.config.backend != COST_MODEL:
            return None
        if box not in self._truth:
            self._truth[box] = has_claw(self.session.instance, box)
        return self._truth[box]

    def probe(self, stage: int, depth: int, box: tuple[Interval, ...], reps: int) -> bool:
        verdicts = []
        before = self.session.query_count
        truth = self.truth(box)
        for _ in range(reps):
            out = claw_detect(
                self.session,
                box,
                backend=self.config.backend,
                rng=self.rng,
                p_err=self.config.p_err,
                c=self.config.c,
                truth=truth,
            )
            verdicts.append(out.verdict)
        self.trace.append(
            {
                "stage": stage,
                "depth": depth,
                "intervals": [list(iv) for iv in box],
                "repetitions": reps,
                "verdicts": verdicts,
                "queries": self.session.query_count - before,
            }
        )
        return any(verdicts)

    def run(self, offsets: tuple[int, int]) -> ClawTuple | None:
        """Stages 1 and 2. Returns the sentinel on a dead end, otherwise None."""
        k = self.session.instance.k
        box = [(1, n) for n in self.session.instance.domain_sizes]
        sentinel = ClawTuple.sentinel(k)

        s = 1
        while any(_width(iv) > _size(box[0]) for iv in box[1:]):
            choices = [[box[0]]] + [
                _halves(iv) if _width(iv) > _size(box[0]) else [iv] for iv in box[1:]
            ]
            for cand in itertools.product(*choices):
                if self.probe(1, s, cand, s + offsets[0]):
                    box = list(cand)
                    break
            else:
                return sentinel
            s += 1

        c = self.config.c_final
        s = 1
        while any(_width(iv) > c for iv in box):
            choices = [_halves(iv) if _width(iv) > c else [iv] for iv in box]
            for cand in itertools.product(*choices):
                if self.probe(2, s, cand, s + offsets[1]):
                    box = list(cand)
                    break
            else:
                return sentinel
            s += 1
        self.box = tuple(box)
        return None


def _search(session: OracleSession, config: SearchConfig, offsets: tuple[int, int]) -> SearchResult:
    rng = make_rng(config.seed)
    before = session.query_count
    searcher = _Searcher(session, config, rng)
    dead = searcher.run(offsets)
    if dead is not None:
        claw = dead
    else:
        claw = final_scan(session, searcher.box)
        searcher.trace.append(
            {"stage": 3, "intervals": [list(iv) for iv in searcher.box], "found": not claw.is_sentinel}
        )
    return SearchResult(claw, session.query_count - before, searcher.trace)


def claw_search(session: OracleSession, config: SearchConfig = SearchConfig()) -> SearchResult:
    """Find a claw of two functions; ``(-1, -1)`` when none is found.

    Stage-1 candidates are detected on ``(X, Y')`` with ``Y'`` the candidate
    half, lower half first; the first half with any "true" is taken.
    """
    if session.instance.k != 2:
        raise ParameterError("claw_search handles two functions; use k_claw_search")
    return _search(session, config, config.offsets or (2, 3))


def k_claw_search(session: OracleSession, config: SearchConfig = SearchConfig()) -> SearchResult:
    """Find a k-claw with ``2**(k-1)``-ary then ``2**k``-ary interval search."""
    return _search(session, config, config.offsets or k_claw_offsets(session.instance.k))


def final_scan(session: OracleSession, rectangle: Sequence[Interval]) -> ClawTuple:
    """Classical search of a small box; returns the lexicographically least claw.

    Goes through :func:`sorted_list`, so standard mode reads each point once
    and comparison mode stays within ``n * ceil(log2 n)`` comparisons.
    """
    k = session.instance.k
    subsets = [range(lo, hi + 1) for lo, hi in rectangle]
    L = sorted_list(session, subsets)
    best = None
    for run in L.runs():
        per_func: dict[int, int] = {}
        for f, x in run:
            per_func[f] = min(x, per_func.get(f, x))
        if len(per_func) == k:
            cand = tuple(per_func[i] for i in range(k))
            best = cand if best is None or cand < best else best
    return ClawTuple(best) if best is not None else ClawTuple.sentinel(k)


def error_budget(
    max_depth_stage1: int,
    max_depth_stage2: int,
    branch_counts: tuple[int, int] = (2, 4),
    offsets: tuple[int, int] = (2, 3),
    p_detect: float = 1 / 3,
) -> float:
    """Union bound on missing an existing claw over both search stages.

    Depth ``s`` of a stage with ``b`` branches fails with probability at most
    ``b * p_detect**(s + offset)``.
    """
    if max_depth_stage1 < 0 or max_depth_stage2 < 0:
        raise ParameterError("depths must be non-negative")
    total = 0.0
    for depth, b, off in zip((max_depth_stage1, max_depth_stage2), branch_counts, offsets):
        total += sum(b * p_detect ** (s + off) for s in range(1, depth + 1))
    return total
