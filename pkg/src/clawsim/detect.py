"""Claw detection: parameter choice, the sorted vertex list, query accounting, backends.

A detection call walks the categorical product of ``J(n_i, l_i)`` where
``n_i`` is the size of the i-th restricted interval. A vertex carries one
``l_i``-subset per function together with the sorted list of the carried
points; it is marked when that list contains a run of equal values that
spans every function.

Two backends share the same verdict semantics (one-sided error):

``exact``
    builds the walk and simulates it amplitude by amplitude. Queries are
    counted by replaying the classical data-structure work one branch of
    the superposition performs: build the list once, then ``2t`` moves of
    ``k`` deletions and insertions.
``cost-model``
    answers from ground truth, misses an existing claw with probability
    ``p_err``, and charges the closed-form query count.
"""

from __future__ import annotations

import functools
import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Sequence

import numpy as np

from clawsim.errors import CalibrationError, ParameterError
from clawsim.instances import (
    COMPARISON,
    STANDARD,
    DomainPoint,
    OracleSession,
    ProblemInstance,
    has_claw,
    log2_ceil,
    make_planted_instance,
)
from clawsim.johnson import JohnsonGraph, ProductChain
from clawsim.walk import SzegedyWalk

log = logging.getLogger(__name__)

EXACT = "exact"
COST_MODEL = "cost-model"
BACKENDS = (EXACT, COST_MODEL)

# smallest candidate passing calibrate_constant(tiny_family()); see tests
DEFAULT_C = 1
DEFAULT_P_ERR = 1 / 3
CALIBRATION_CANDIDATES = (1, 2, 4, 8)
CALIBRATION_TARGET = 2 / 3


def iroot_ceil(x: int, r: int) -> int:
    """Smallest integer ``a`` with ``a**r >= x``."""
    if x <= 0:
        return 0
    a = max(1, int(round(x ** (1.0 / r))))
    while a**r < x:
        a += 1
    while a > 1 and (a - 1) ** r >= x:
        a -= 1
    return a


def _sqrt_ceil(x: Fraction) -> int:
    n = math.ceil(x)
    t = math.isqrt(n)
    return t if t * t >= n else t + 1


@dataclass(frozen=True)
class DetectParams:
    domain_sizes: tuple[int, ...]
    subset_sizes: tuple[int, ...]
    epsilon: Fraction
    delta: Fraction
    T: int
    c: float

    @property
    def k(self) -> int:
        return len(self.domain_sizes)

    @property
    def walked(self) -> tuple[bool, ...]:
        return tuple(l < n for l, n in zip(self.subset_sizes, self.domain_sizes))

    @property
    def list_size(self) -> int:
        return sum(self.subset_sizes)


def make_params(
    domain_sizes: Sequence[int],
    subset_sizes: Sequence[int],
    c: float = DEFAULT_C,
    epsilon: Fraction | None = None,
) -> DetectParams:
    """Derive ``epsilon``, ``delta`` and ``T = ceil(c / sqrt(epsilon * delta))``.

    ``epsilon`` defaults to ``prod(l_i / N_i)``. ``delta`` is ``1 / max l_i``
    over the walked (non-frozen) factors, or 1 when nothing walks.
    """
    domain_sizes = tuple(int(n) for n in domain_sizes)
    subset_sizes = tuple(int(l) for l in subset_sizes)
    if len(domain_sizes) < 2 or len(subset_sizes) != len(domain_sizes):
        raise ParameterError("need one subset size per function and at least two functions")
    for l, n in zip(subset_sizes, domain_sizes):
        if not 1 <= l <= n:
            raise ParameterError(f"subset size {l} outside [1..{n}]")
    if c <= 0:
        raise ParameterError("walk constant c must be positive")
    if epsilon is None:
        epsilon = math.prod((Fraction(l, n) for l, n in zip(subset_sizes, domain_sizes)), start=Fraction(1))
    walked = [l for l, n in zip(subset_sizes, domain_sizes) if l < n]
    delta = Fraction(1, max(walked)) if walked else Fraction(1)
    T = max(1, _sqrt_ceil(Fraction(c) ** 2 / (epsilon * delta)))
    return DetectParams(domain_sizes, subset_sizes, Fraction(epsilon), delta, T, c)


def choose_params(domain_sizes: Sequence[int], c: float = DEFAULT_C) -> DetectParams:
    """Subset sizes for a detection over domains of the given sizes.

    With ``N_1`` the smallest size: if ``prod_{i>=2} N_i <= N_1**k`` (for two
    functions, ``M < N**2``) every ``l_i = clamp(ceil((prod N_i)**(1/(k+1))), 2, N_1)``;
    otherwise every ``l_i = N_1``, which freezes the smallest factor.
    Sizes need not be sorted; restricted search intervals can come out of order.
    """
    sizes = [int(n) for n in domain_sizes]
    k = len(sizes)
    if k < 2:
        raise ParameterError("detection needs at least two functions")
    if any(n < 1 for n in sizes):
        raise ParameterError(f"empty domain in {sizes}")
    ordered = sorted(sizes)
    n1 = ordered[0]
    rest = math.prod(ordered[1:])
    balanced = rest < n1**2 if k == 2 else rest <= n1**k
    if balanced:
        l = min(max(iroot_ceil(math.prod(sizes), k + 1), 2), n1)
    else:
        l = n1
    return make_params(sizes, [l] * k, c)


# -- the sorted list ---------------------------------------------------------


@dataclass(frozen=True)
class SortedListL:
    """Points of all carried subsets ordered by (value, function, element).

    ``ties[i]`` records whether ``points[i]`` and ``points[i+1]`` share a value,
    which is all the marking check needs. ``values`` is kept only for
    standard-oracle lists, where the values were read anyway.
    """

    points: tuple[DomainPoint, ...]
    ties: tuple[bool, ...]
    values: tuple[int, ...] | None = None

    def runs(self) -> list[list[DomainPoint]]:
        if not self.points:
            return []
        out = [[self.points[0]]]
        for p, tie in zip(self.points[1:], self.ties):
            if tie:
                out[-1].append(p)
            else:
                out.append([p])
        return out


def _tiebreak(p: DomainPoint) -> tuple[int, int]:
    return (p[0], p[1])


class _Ordering:
    """Key comparisons against the session, one query each in comparison mode."""

    def __init__(self, session: OracleSession):
        self.session = session
        self.comparison = session.mode == COMPARISON
        self.values: dict[DomainPoint, int] = {}

    def read(self, p: DomainPoint) -> int:
        if p not in self.values:
            self.values[p] = self.session.standard(p)
        return self.values[p]

    def less(self, p: DomainPoint, q: DomainPoint) -> bool:
        """key(p) < key(q)."""
        if not self.comparison:
            return (self.values[p], _tiebreak(p)) < (self.values[q], _tiebreak(q))
        if _tiebreak(p) < _tiebreak(q):
            return self.session.compare(p, q) == 1
        return self.session.compare(q, p) == 0

    def tie(self, a: DomainPoint, b: DomainPoint) -> bool:
        """Equal values, given key(a) < key(b)."""
        if not self.comparison:
            return self.values[a] == self.values[b]
        if _tiebreak(a) < _tiebreak(b):
            return self.session.compare(b, a) == 1
        return False

    def merge_sort(self, items: list[DomainPoint]) -> list[DomainPoint]:
        if len(items) <= 1:
            return items
        mid = len(items) // 2
        left = self.merge_sort(items[:mid])
        right = self.merge_sort(items[mid:])
        out = []
        i = j = 0
        while i < len(left) and j < len(right):
            if self.less(right[j], left[i]):
                out.append(right[j])
                j += 1
            else:
                out.append(left[i])
                i += 1
        out.extend(left[i:])
        out.extend(right[j:])
        return out


def _points(subsets: Sequence[Iterable[int]]) -> list[DomainPoint]:
    return [DomainPoint(i, int(x)) for i, sub in enumerate(subsets) for x in sub]


def sorted_list(session: OracleSession, subsets: Sequence[Iterable[int]]) -> SortedListL:
    """Build ``L`` from scratch through the oracle.

    Standard mode reads each value once (``sum l_i`` queries). Comparison
    mode merge-sorts and then resolves ties between neighbours; the total
    stays within ``n * ceil(log2 n)`` queries for ``n`` points.
    """
    pts = _points(subsets)
    order = _Ordering(session)
    if not order.comparison:
        for p in pts:
            order.read(p)
    ranked = order.merge_sort(pts)
    ties = tuple(order.tie(a, b) for a, b in zip(ranked, ranked[1:]))
    values = None if order.comparison else tuple(order.values[p] for p in ranked)
    return SortedListL(tuple(ranked), ties, values)


def canonical_list(instance: ProblemInstance, subsets: Sequence[Iterable[int]], with_values: bool = True) -> SortedListL:
    """The same list, computed from the tables without touching any session."""
    pts = _points(subsets)
    vals = {p: instance.value(p) for p in pts}
    ranked = sorted(pts, key=lambda p: (vals[p], p[0], p[1]))
    ties = tuple(vals[a] == vals[b] for a, b in zip(ranked, ranked[1:]))
    values = tuple(vals[p] for p in ranked) if with_values else None
    return SortedListL(tuple(ranked), ties, values)


class IncrementalList:
    """``L`` maintained along walk moves with counted oracle work.

    Deletion locates the point by label (no queries) and merges the
    neighbouring tie bits. Insertion binary-searches the insertion point and
    then resolves the tie bits with at most two more comparisons
    (comparison mode), or reads the new value once (standard mode).
    """

    def __init__(self, session: OracleSession, subsets: Sequence[Iterable[int]]):
        self.order = _Ordering(session)
        start = sorted_list(session, subsets)
        self.points = list(start.points)
        self.ties = list(start.ties)
        if start.values is not None:
            self.order.values.update(zip(start.points, start.values))

    def delete(self, p: DomainPoint) -> None:
        pos = self.points.index(p)
        n = len(self.points)
        if 0 < pos < n - 1:
            merged = self.ties[pos - 1] and self.ties[pos]
            self.ties[pos - 1 : pos + 1] = [merged]
        elif n > 1:
            del self.ties[pos - 1 if pos == n - 1 else 0]
        self.points.pop(pos)

    def insert(self, p: DomainPoint) -> None:
        if not self.order.comparison:
            # no caching across moves: a re-inserted point is read again
            self.order.values[p] = self.order.session.standard(p)
        lo, hi = 0, len(self.points)
        while lo < hi:
            mid = (lo + hi) // 2
            if self.order.less(self.points[mid], p):
                lo = mid + 1
            else:
                hi = mid
        left = self.points[lo - 1] if lo > 0 else None
        right = self.points[lo] if lo < len(self.points) else None
        new_ties = []
        if left is not None:
            new_ties.append(self.order.tie(left, p))
        if right is not None:
            new_ties.append(self.order.tie(p, right))
        if left is not None and right is not None:
            self.ties[lo - 1 : lo] = new_ties
        elif left is not None:
            self.ties.append(new_ties[0])
        elif right is not None:
            self.ties.insert(0, new_ties[0])
        self.points.insert(lo, p)

    def snapshot(self) -> SortedListL:
        values = None
        if not self.order.comparison:
            values = tuple(self.order.values[p] for p in self.points)
        return SortedListL(tuple(self.points), tuple(self.ties), values)


def is_marked(L: SortedListL, k: int = 2) -> bool:
    """True iff some run of equal values contains a point of every function."""
    return any(len({p[0] for p in run}) == k for run in L.runs())


# -- cost accounting ---------------------------------------------------------


def setup_cost(mode: str, list_size: int) -> int:
    return list_size * log2_ceil(list_size) if mode == COMPARISON else list_size


def update_cost(mode: str, list_size: int, k: int) -> int:
    """Queries for one substep of W: ``k`` deletions plus ``k`` insertions."""
    return 2 * k * log2_ceil(list_size) if mode == COMPARISON else 2 * k


def formula_queries(params: DetectParams, mode: str) -> int:
    """``C_U + T * (C_F + 2 C_W)`` with ``C_F = 0``."""
    n = params.list_size
    return setup_cost(mode, n) + params.T * 2 * update_cost(mode, n, params.k)


# -- detection ---------------------------------------------------------------


@dataclass(frozen=True)
class DetectOutcome:
    verdict: bool
    queries_used: int
    backend: str
    t: int | None = None


Domains = tuple[tuple[int, int], ...]


def _check_domains(instance: ProblemInstance, domains: Sequence[Sequence[int]]) -> Domains:
    doms = tuple((int(lo), int(hi)) for lo, hi in domains)
    if len(doms) != instance.k:
        raise ParameterError(f"expected {instance.k} intervals, got {len(doms)}")
    for (lo, hi), n in zip(doms, instance.domain_sizes):
        if not 1 <= lo <= hi <= n:
            raise ParameterError(f"interval [{lo}..{hi}] is not a non-empty part of [1..{n}]")
    return doms


def _sizes(domains: Domains) -> tuple[int, ...]:
    return tuple(hi - lo + 1 for lo, hi in domains)


def _chain_for(params: DetectParams) -> ProductChain:
    return ProductChain([JohnsonGraph(n, l) for n, l in zip(params.domain_sizes, params.subset_sizes)])


def _absolute(state, domains: Domains) -> list[list[int]]:
    return [[lo + x - 1 for x in sub] for sub, (lo, _) in zip(state, domains)]


@functools.lru_cache(maxsize=64)
def claw_walk(instance: ProblemInstance, domains: Domains, params: DetectParams) -> SzegedyWalk:
    """Simulator for claw detection on the restriction; marking goes through ``L``."""
    chain = _chain_for(params)
    k = instance.k

    def marked(state):
        return is_marked(canonical_list(instance, _absolute(state, domains)), k)

    return SzegedyWalk(chain, marked)


@functools.lru_cache(maxsize=64)
def subset_walk(
    instance: ProblemInstance, p: int, q: int, relation: Callable, domains: Domains, params: DetectParams
) -> SzegedyWalk:
    import itertools

    chain = _chain_for(params)

    def marked(state):
        F, G = _absolute(state, domains)
        fv = [instance.value(DomainPoint(0, x)) for x in F]
        gv = [instance.value(DomainPoint(1, y)) for y in G]
        return any(
            relation(*xs, *ys)
            for xs in itertools.permutations(fv, p)
            for ys in itertools.permutations(gv, q)
        )

    return SzegedyWalk(chain, marked)


def _replay_queries(session: OracleSession, domains: Domains, params: DetectParams, t: int, rng) -> None:
    """Classical shadow of the walk's oracle work: set up ``L``, then ``2t`` moves."""
    subsets = []
    for (lo, hi), l in zip(domains, params.subset_sizes):
        pick = rng.choice(hi - lo + 1, size=l, replace=False) + lo
        subsets.append(sorted(int(x) for x in pick))
    lst = IncrementalList(session, subsets)
    for _ in range(2 * t):
        outs, ins = [], []
        for i, ((lo, hi), walked) in enumerate(zip(domains, params.walked)):
            if not walked:
                continue
            current = set(subsets[i])
            out = subsets[i][int(rng.integers(len(subsets[i])))]
            free = [x for x in range(lo, hi + 1) if x not in current]
            into = free[int(rng.integers(len(free)))]
            subsets[i] = sorted((current - {out}) | {into})
            outs.append(DomainPoint(i, out))
            ins.append(DomainPoint(i, into))
        for pt in outs:
            lst.delete(pt)
        for pt in ins:
            lst.insert(pt)


def _resolve(session, restricted_domains, params, c) -> tuple[Domains, DetectParams]:
    domains = _check_domains(session.instance, restricted_domains)
    if params is None:
        params = choose_params(_sizes(domains), c)
    elif params.domain_sizes != _sizes(domains):
        raise ParameterError(f"params built for sizes {params.domain_sizes}, restriction has {_sizes(domains)}")
    return domains, params


def _run_exact(session, walk: SzegedyWalk, domains, params, rng) -> DetectOutcome:
    before = session.query_count
    t = int(rng.integers(1, params.T + 1))
    _replay_queries(session, domains, params, t, rng)
    verdict = walk.detect_once(params.T, rng, t=t)
    return DetectOutcome(verdict, session.query_count - before, EXACT, t)


def _run_cost_model(session, truth: bool, params, rng, p_err) -> DetectOutcome:
    if not 0.0 <= p_err <= 1.0:
        raise ParameterError("p_err must lie in [0, 1]")
    verdict = bool(truth) and rng.random() >= p_err
    q = formula_queries(params, session.mode)
    session.charge(q)
    return DetectOutcome(verdict, q, COST_MODEL)


def claw_detect(
    session: OracleSession,
    restricted_domains: Sequence[Sequence[int]],
    params: DetectParams | None = None,
    backend: str = COST_MODEL,
    rng: np.random.Generator | None = None,
    p_err: float = DEFAULT_P_ERR,
    c: float = DEFAULT_C,
    truth: bool | None = None,
) -> DetectOutcome:
    """Decide, with one-sided error, whether the restriction holds a k-claw.

    ``restricted_domains`` holds one inclusive 1-based interval per function.
    ``truth`` lets a caller that already knows the ground truth for this
    restriction skip recomputing it (cost-model backend only).
    """
    rng = rng if rng is not None else np.random.default_rng()
    domains, params = _resolve(session, restricted_domains, params, c)
    if backend == EXACT:
        walk = claw_walk(session.instance, domains, params)
        return _run_exact(session, walk, domains, params, rng)
    if backend == COST_MODEL:
        if truth is None:
            truth = has_claw(session.instance, domains)
        return _run_cost_model(session, truth, params, rng, p_err)
    raise ParameterError(f"backend must be one of {BACKENDS}, got {backend!r}")


def claw_detect_profile(instance: ProblemInstance, restricted_domains, params: DetectParams | None = None, c: float = DEFAULT_C) -> np.ndarray:
    """Exact ``P(true | t)`` for ``t = 1..T`` of the exact backend."""
    domains = _check_domains(instance, restricted_domains)
    params = params or choose_params(_sizes(domains), c)
    return claw_walk(instance, domains, params).success_profile(params.T)


def subset_params(domain_sizes: Sequence[int], subset_sizes: Sequence[int], p: int, q: int, c: float = DEFAULT_C) -> DetectParams:
    """Walk parameters for (p, q)-subset detection; ``epsilon = C(l,p)C(m,q) / (C(N,p)C(M,q))``."""
    (N, M), (l, m) = domain_sizes, subset_sizes
    if p < 1 or q < 1:
        raise ParameterError("(p, q)-subset detection needs p >= 1 and q >= 1")
    if p > l or q > m:
        raise ParameterError(f"p={p}, q={q} exceed subset sizes l={l}, m={m}")
    eps = Fraction(math.comb(l, p) * math.comb(m, q), math.comb(N, p) * math.comb(M, q))
    return make_params(domain_sizes, subset_sizes, c, epsilon=eps)


def _check_subset_args(session, p, q, params):
    if session.instance.k != 2:
        raise ParameterError("(p, q)-subset detection is defined for two functions")
    if p < 1 or q < 1:
        raise ParameterError("(p, q)-subset detection needs p >= 1 and q >= 1")
    l, m = params.subset_sizes
    if p > l or q > m:
        raise ParameterError(f"p={p}, q={q} exceed subset sizes l={l}, m={m}")


def subset_truth(instance: ProblemInstance, p: int, q: int, relation: Callable, domains: Domains) -> bool:
    import itertools

    (lo1, hi1), (lo2, hi2) = domains
    fv = [instance.value(DomainPoint(0, x)) for x in range(lo1, hi1 + 1)]
    gv = [instance.value(DomainPoint(1, y)) for y in range(lo2, hi2 + 1)]
    return any(
        relation(*xs, *ys) for xs in itertools.permutations(fv, p) for ys in itertools.permutations(gv, q)
    )


def subset_detect(
    session: OracleSession,
    p: int,
    q: int,
    relation_predicate: Callable[..., bool],
    restricted_domains: Sequence[Sequence[int]],
    params: DetectParams | None = None,
    backend: str = COST_MODEL,
    rng: np.random.Generator | None = None,
    p_err: float = DEFAULT_P_ERR,
    c: float = DEFAULT_C,
) -> DetectOutcome:
    """Detect distinct ``x_1..x_p`` and ``y_1..y_q`` whose values satisfy the relation.

    ``relation_predicate`` receives the ``p + q`` values ``f(x_1), .., g(y_q)``.
    The relation must be hashable (a plain function is) for walk caching.
    """
    rng = rng if rng is not None else np.random.default_rng()
    domains = _check_domains(session.instance, restricted_domains)
    if params is None:
        base = choose_params(_sizes(domains), c)
        if p < 1 or q < 1:
            raise ParameterError("(p, q)-subset detection needs p >= 1 and q >= 1")
        params = subset_params(_sizes(domains), base.subset_sizes, p, q, c)
    _check_subset_args(session, p, q, params)
    if params.domain_sizes != _sizes(domains):
        raise ParameterError("params do not match the restriction")
    if backend == EXACT:
        walk = subset_walk(session.instance, p, q, relation_predicate, domains, params)
        return _run_exact(session, walk, domains, params, rng)
    if backend == COST_MODEL:
        truth = subset_truth(session.instance, p, q, relation_predicate, domains)
        return _run_cost_model(session, truth, params, rng, p_err)
    raise ParameterError(f"backend must be one of {BACKENDS}, got {backend!r}")


def subset_detect_profile(instance, p, q, relation, restricted_domains, params: DetectParams) -> np.ndarray:
    domains = _check_domains(instance, restricted_domains)
    return subset_walk(instance, p, q, relation, domains, params).success_profile(params.T)


# -- calibration -------------------------------------------------------------

TINY_MATRIX = tuple((n, m) for n in range(3, 7) for m in range(n, 7))


def tiny_family(num_claws: int = 1, seed: int = 2024) -> list[tuple[ProblemInstance, tuple[int, int]]]:
    """Planted two-function instances over ``3 <= N <= M <= 6`` walked with ``l = m = 2``."""
    out = []
    for idx, (n, m) in enumerate(TINY_MATRIX):
        inst = make_planted_instance(2, (n, m), num_claws, seed=np.random.default_rng([seed, idx]))
        out.append((inst, (2, 2)))
    return out


def calibration_curve(
    family: Iterable[tuple[ProblemInstance, Sequence[int]]],
    candidates: Sequence[float] = CALIBRATION_CANDIDATES,
) -> dict[float, float]:
    """Worst-case exact success probability over the claw-bearing members, per candidate ``c``."""
    members = []
    for inst, subset_sizes in family:
        full = tuple((1, n) for n in inst.domain_sizes)
        if has_claw(inst, full):
            members.append((inst, full, tuple(subset_sizes)))
    if not members:
        raise CalibrationError("calibration family has no member containing a claw")
    curve = {}
    for c in candidates:
        worst = 1.0
        for inst, full, subset_sizes in members:
            params = make_params(inst.domain_sizes, subset_sizes, c)
            worst = min(worst, float(claw_detect_profile(inst, full, params).mean()))
        curve[c] = worst
    return curve


def calibrate_constant(
    family: Iterable[tuple[ProblemInstance, Sequence[int]]] | None = None,
    candidates: Sequence[float] = CALIBRATION_CANDIDATES,
    target: float = CALIBRATION_TARGET,
) -> float:
    """Smallest candidate ``c`` whose worst member reaches ``target`` success probability."""
    curve = calibration_curve(tiny_family() if family is None else family, candidates)
    log.info("calibration curve: %s", curve)
    for c in candidates:
        if curve[c] >= target:
            return c
    raise CalibrationError(f"no candidate in {tuple(candidates)} reaches {target:.4f}", curve)
