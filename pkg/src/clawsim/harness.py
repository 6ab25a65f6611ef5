"""Monte Carlo experiments: query scaling, error rates, exponent fits.

Each trial draws from its own Philox stream keyed by
``(seed, grid point, trial, purpose)``, so results do not depend on
execution order and ``workers > 1`` reproduces ``workers == 1`` exactly.
"""

from __future__ import annotations

import csv
import io
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import stats

from clawsim.detect import COST_MODEL, DEFAULT_C, DEFAULT_P_ERR
from clawsim.errors import ClawsimError, FitError, ParameterError
from clawsim.instances import STANDARD, OracleSession, make_planted_instance, make_rng
from clawsim.search import SearchConfig, claw_search, k_claw_search

_INSTANCE, _SEARCH = 0, 1

BALANCED_GRID = tuple((2**e, 2**e) for e in range(8, 17))
UNBALANCED_GRID = tuple((n, n**3) for n in (8, 16, 32, 64, 128))
K3_GRID = tuple((2**e,) * 3 for e in range(8, 17))


@dataclass(frozen=True)
class ExperimentConfig:
    grid: tuple[tuple[int, ...], ...]
    trials: int = 20
    seed: int = 0
    backend: str = COST_MODEL
    mode: str = STANDARD
    p_err: float = DEFAULT_P_ERR
    c: float = DEFAULT_C
    c_final: int = 100
    num_claws: int = 1
    workers: int = 1
    output: str | None = None

    def __post_init__(self):
        if self.trials < 1:
            raise ParameterError("trials must be at least 1")
        if not self.grid:
            raise ParameterError("grid must not be empty")
        object.__setattr__(self, "grid", tuple(tuple(int(n) for n in pt) for pt in self.grid))


@dataclass(frozen=True)
class TrialResult:
    queries: int
    claw_present: bool
    found: bool
    sound: bool


@dataclass
class ScalingRow:
    sizes: tuple[int, ...]
    trials: int
    mean_queries: float
    std_queries: float
    failure_rate: float
    soundness_violations: int
    wall_time: float = field(default=0.0, compare=False)

    @property
    def size_product(self) -> int:
        return math.prod(self.sizes)


def run_trial(config: ExperimentConfig, point: int, trial: int) -> TrialResult:
    sizes = config.grid[point]
    inst = make_planted_instance(
        len(sizes), sizes, config.num_claws, seed=make_rng(config.seed, point, trial, _INSTANCE)
    )
    session = OracleSession(inst, config.mode)
    search_cfg = SearchConfig(
        backend=config.backend,
        c_final=config.c_final,
        p_err=config.p_err,
        c=config.c,
        seed=(config.seed, point, trial, _SEARCH),
    )
    search = claw_search if inst.k == 2 else k_claw_search
    result = search(session, search_cfg)
    if result.total_queries != session.query_count:
        raise ClawsimError("search reported a query total different from the session counter")
    sound = result.claw.is_sentinel or result.claw.verify(inst)
    return TrialResult(result.total_queries, config.num_claws > 0, result.found, sound)


def _run_point(args) -> tuple[list[TrialResult], float]:
    config, point = args
    start = time.perf_counter()
    out = [run_trial(config, point, t) for t in range(config.trials)]
    return out, time.perf_counter() - start


def _run_all(config: ExperimentConfig) -> list[tuple[list[TrialResult], float]]:
    jobs = [(config, i) for i in range(len(config.grid))]
    if config.workers > 1:
        with ProcessPoolExecutor(config.workers) as pool:
            return list(pool.map(_run_point, jobs))
    return [_run_point(j) for j in jobs]


def run_scaling_experiment(config: ExperimentConfig) -> list[ScalingRow]:
    rows = []
    for sizes, (trials, elapsed) in zip(config.grid, _run_all(config)):
        q = np.array([t.queries for t in trials], dtype=float)
        misses = sum(1 for t in trials if t.claw_present and not t.found)
        claw_trials = sum(1 for t in trials if t.claw_present)
        rows.append(
            ScalingRow(
                sizes=sizes,
                trials=len(trials),
                mean_queries=float(q.mean()),
                std_queries=float(q.std(ddof=1)) if q.size > 1 else 0.0,
                failure_rate=misses / claw_trials if claw_trials else 0.0,
                soundness_violations=sum(1 for t in trials if not t.sound),
                wall_time=elapsed,
            )
        )
    if config.output:
        write_csv(rows, config.output)
    return rows


CSV_COLUMNS = ("sizes", "size_product", "trials", "mean_queries", "std_queries", "failure_rate", "soundness_violations")


def rows_to_csv(rows: Sequence[ScalingRow], timing: bool = False) -> str:
    """CSV text; ``wall_time`` is appended only on request so default output is reproducible."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS + (("wall_time",) if timing else ()))
    for r in rows:
        rec = [
            "x".join(map(str, r.sizes)),
            r.size_product,
            r.trials,
            repr(r.mean_queries),
            repr(r.std_queries),
            repr(r.failure_rate),
            r.soundness_violations,
        ]
        if timing:
            rec.append(f"{r.wall_time:.3f}")
        w.writerow(rec)
    return buf.getvalue()


def write_csv(rows: Sequence[ScalingRow], path, timing: bool = False) -> None:
    path = Path(path)
    try:
        path.write_text(rows_to_csv(rows, timing), encoding="utf-8")
    except OSError as exc:
        raise ClawsimError(f"cannot write {path}: {exc.strerror}") from exc


# -- error rates -------------------------------------------------------------


def clopper_pearson(successes: int, trials: int, confidence: float = 0.99) -> tuple[float, float]:
    """Two-sided exact binomial interval."""
    alpha = 1.0 - confidence
    lo = 0.0 if successes == 0 else float(stats.beta.ppf(alpha / 2, successes, trials - successes + 1))
    hi = 1.0 if successes == trials else float(stats.beta.ppf(1 - alpha / 2, successes + 1, trials - successes))
    return lo, hi


@dataclass(frozen=True)
class ErrorStats:
    trials: int
    claw_trials: int
    failures: int
    failure_rate: float
    ci_low: float
    ci_high: float
    confidence: float
    soundness_violations: int
    sentinel_rate: float
    mean_queries: float


def estimate_error_rate(config: ExperimentConfig, confidence: float = 0.99) -> ErrorStats:
    """Misses (claw present, sentinel returned) with a Clopper-Pearson interval.

    All grid points are pooled. Wrong claws are impossible by construction;
    they are counted anyway and reported as ``soundness_violations``.
    """
    trials = [t for batch, _ in _run_all(config) for t in batch]
    claw_trials = sum(t.claw_present for t in trials)
    failures = sum(1 for t in trials if t.claw_present and not t.found)
    lo, hi = clopper_pearson(failures, claw_trials, confidence) if claw_trials else (0.0, 0.0)
    return ErrorStats(
        trials=len(trials),
        claw_trials=claw_trials,
        failures=failures,
        failure_rate=failures / claw_trials if claw_trials else 0.0,
        ci_low=lo,
        ci_high=hi,
        confidence=confidence,
        soundness_violations=sum(1 for t in trials if not t.sound),
        sentinel_rate=sum(not t.found for t in trials) / len(trials),
        mean_queries=float(np.mean([t.queries for t in trials])),
    )


# -- exponent fits -----------------------------------------------------------


@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    residuals: tuple[float, ...]


def fit_exponent(
    rows: Sequence[ScalingRow],
    against: str = "product",
    mode: str = STANDARD,
) -> FitResult:
    """Least-squares slope of log(mean queries) against log(size).

    ``against`` is ``"product"`` (prod N_i) or ``"largest"`` (max N_i). In
    comparison mode the queries are first divided by ``log2`` of the
    smallest domain size.
    """
    if len(rows) < 4:
        raise FitError(f"need at least 4 rows, got {len(rows)}")
    if against == "product":
        x = np.array([float(r.size_product) for r in rows])
    elif against == "largest":
        x = np.array([float(max(r.sizes)) for r in rows])
    else:
        raise ParameterError(f"unknown fit axis {against!r}")
    y = np.array([r.mean_queries for r in rows], dtype=float)
    if mode != STANDARD:
        y = y / np.array([math.log2(max(2, min(r.sizes))) for r in rows])
    if np.any(x <= 0) or np.any(y <= 0):
        raise FitError("sizes and query means must be positive")
    lx, ly = np.log(x), np.log(y)
    if (lx.max() - lx.min()) / math.log(10) < 2.0:
        raise FitError("grid spans less than two decades")
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    return FitResult(float(slope), float(intercept), tuple(float(r) for r in resid))


def rows_from_values(sizes: Sequence[Sequence[int]], means: Sequence[float]) -> list[ScalingRow]:
    """Rows carrying only sizes and means; handy for synthetic fits."""
    return [ScalingRow(tuple(s), 1, float(m), 0.0, 0.0, 0) for s, m in zip(sizes, means)]


def with_grid(config: ExperimentConfig, grid) -> ExperimentConfig:
    return replace(config, grid=tuple(tuple(p) for p in grid))
