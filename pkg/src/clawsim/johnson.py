"""Johnson graphs, categorical products of their random walks, and spectra."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np

from clawsim.errors import DomainError, ParameterError, SizeError

DEFAULT_STATE_CAP = 5000


@dataclass(frozen=True)
class JohnsonGraph:
    """J(n, k): k-subsets of [1..n], adjacent iff they share k-1 elements.

    ``k == n`` is the frozen case: a single vertex carrying a self-loop, so
    in a product it contributes no motion and no spectral constraint.
    """

    n: int
    k: int

    def __post_init__(self):
        if not 0 < self.k <= self.n:
            raise ParameterError(f"J(n, k) needs 0 < k <= n, got n={self.n}, k={self.k}")

    @property
    def frozen(self) -> bool:
        return self.k == self.n

    @property
    def num_vertices(self) -> int:
        return math.comb(self.n, self.k)

    @property
    def degree(self) -> int:
        """Out-degree of the walk (1 for the frozen self-loop)."""
        return 1 if self.frozen else self.k * (self.n - self.k)

    @cached_property
    def vertices(self) -> list[tuple[int, ...]]:
        return list(itertools.combinations(range(1, self.n + 1), self.k))

    @cached_property
    def index(self) -> dict[tuple[int, ...], int]:
        return {v: i for i, v in enumerate(self.vertices)}

    def vertex_neighbors(self, subset: Sequence[int]) -> list[tuple[int, ...]]:
        subset = tuple(sorted(subset))
        if subset not in self.index:
            raise DomainError(f"{subset} is not a {self.k}-subset of [1..{self.n}]")
        if self.frozen:
            return [subset]
        inside = set(subset)
        outside = [x for x in range(1, self.n + 1) if x not in inside]
        return [
            tuple(sorted((inside - {out}) | {into}))
            for out in subset
            for into in outside
        ]

    @cached_property
    def neighbor_table(self) -> np.ndarray:
        """(num_vertices, degree) array of neighbor indices, each row ascending."""
        idx = self.index
        rows = [sorted(idx[w] for w in self.vertex_neighbors(v)) for v in self.vertices]
        return np.array(rows, dtype=np.int64).reshape(self.num_vertices, self.degree)


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues with multiplicities, and the spectral gap.

    ``distinct`` is descending. Brute-force spectra list every computed
    eigenvalue with multiplicity 1. The expanded multiset is built only on
    request, since multiplicities grow like ``C(n, k)``.
    """

    distinct: tuple[float, ...]
    multiplicities: tuple[int, ...]
    gap: float

    @property
    def eigenvalues(self) -> tuple[float, ...]:
        return tuple(itertools.chain.from_iterable([v] * m for v, m in zip(self.distinct, self.multiplicities)))


def spectral_gap(eigenvalues: Sequence[float], tol: float = 1e-9) -> float:
    """``1 - max |lambda|`` over all but one copy of the principal eigenvalue 1.

    A chain with no non-principal eigenvalue (one state) has gap 1.
    """
    vals = sorted(eigenvalues, reverse=True)
    if not vals or abs(vals[0] - 1.0) > tol:
        raise ParameterError("spectrum has no principal eigenvalue 1")
    rest = vals[1:]
    if not rest:
        return 1.0
    return float(min(1.0, max(0.0, 1.0 - max(abs(x) for x in rest))))


def johnson_spectrum(n: int, k: int) -> Spectrum:
    """Closed-form spectrum of the simple random walk on J(n, k).

    Distinct eigenvalues ``((k-j)(n-k-j) - j) / (k(n-k))`` for
    ``j = 0..min(k, n-k)`` with multiplicities ``C(n,j) - C(n,j-1)``.
    """
    if not (0 < k <= n):
        raise ParameterError(f"invalid Johnson parameters n={n}, k={k}")
    if k == n:
        return Spectrum((1.0,), (1,), 1.0)
    denom = k * (n - k)
    distinct, mult = [], []
    for j in range(min(k, n - k) + 1):
        distinct.append(((k - j) * (n - k - j) - j) / denom)
        mult.append(math.comb(n, j) - (math.comb(n, j - 1) if j else 0))
    # strictly decreasing in j; j = 0 is the principal eigenvalue with multiplicity 1
    return Spectrum(tuple(distinct), tuple(mult), spectral_gap(distinct))


def product_gap(factor_gaps: Sequence[float]) -> float:
    """Spectral gap of a categorical product: the minimum of the factor gaps."""
    gaps = list(factor_gaps)
    if not gaps:
        raise ParameterError("product_gap needs at least one factor gap")
    for g in gaps:
        if not 0.0 <= g <= 1.0:
            raise ParameterError(f"gap {g} outside [0, 1]")
    return min(gaps)


class ProductChain:
    """Uniform random walk on the categorical product of Johnson graphs.

    States are indexed in row-major order over the factor vertex lists (first
    factor slowest). A move changes every non-frozen coordinate to one of its
    factor neighbors; all ``degree`` product neighbors are equally likely.
    """

    def __init__(self, factors: Sequence[JohnsonGraph]):
        if not factors:
            raise ParameterError("a product chain needs at least one factor")
        self.factors = tuple(factors)
        self.shape = tuple(f.num_vertices for f in self.factors)
        self.num_states = math.prod(self.shape)
        self.degree = math.prod(f.degree for f in self.factors)

    def __repr__(self) -> str:
        inner = " x ".join(f"J({f.n},{f.k})" for f in self.factors)
        return f"ProductChain({inner})"

    @property
    def num_edges(self) -> int:
        return self.num_states * self.degree

    def state(self, s: int) -> tuple[tuple[int, ...], ...]:
        coords = np.unravel_index(s, self.shape)
        return tuple(f.vertices[int(c)] for f, c in zip(self.factors, coords))

    def state_index(self, state: Sequence[Sequence[int]]) -> int:
        if len(state) != len(self.factors):
            raise DomainError(f"state has {len(state)} coordinates, chain has {len(self.factors)}")
        coords = []
        for f, subset in zip(self.factors, state):
            key = tuple(sorted(subset))
            if key not in f.index:
                raise DomainError(f"{tuple(subset)} is not a vertex of J({f.n},{f.k})")
            coords.append(f.index[key])
        return int(np.ravel_multi_index(coords, self.shape))

    def neighbors(self, state: Sequence[Sequence[int]]) -> list[tuple[tuple[tuple[int, ...], ...], float]]:
        self.state_index(state)
        per_factor = [f.vertex_neighbors(sub) for f, sub in zip(self.factors, state)]
        p = 1.0 / self.degree
        return [(tuple(combo), p) for combo in itertools.product(*per_factor)]

    @cached_property
    def neighbor_table(self) -> np.ndarray:
        """(num_states, degree) product-neighbor indices, rows ascending."""
        coords = np.unravel_index(np.arange(self.num_states), self.shape)
        strides = [math.prod(self.shape[i + 1 :]) for i in range(len(self.shape))]
        table = np.zeros((self.num_states, 1), dtype=np.int64)
        for f, c, stride in zip(self.factors, coords, strides):
            nb = f.neighbor_table[c] * stride
            table = (table[:, :, None] + nb[:, None, :]).reshape(self.num_states, -1)
        table.sort(axis=1)
        return table

    def transition_matrix(self, cap: int = DEFAULT_STATE_CAP) -> np.ndarray:
        if self.num_states > cap:
            raise SizeError(f"{self.num_states} states exceeds the cap of {cap}")
        P = np.zeros((self.num_states, self.num_states))
        rows = np.repeat(np.arange(self.num_states), self.degree)
        np.add.at(P, (rows, self.neighbor_table.ravel()), 1.0 / self.degree)
        return P


def brute_force_spectrum(chain: ProductChain | JohnsonGraph, cap: int = DEFAULT_STATE_CAP) -> Spectrum:
    """Dense symmetric eigendecomposition of the materialized transition matrix."""
    if isinstance(chain, JohnsonGraph):
        chain = ProductChain([chain])
    P = chain.transition_matrix(cap)
    eig = np.sort(np.linalg.eigvalsh(P))[::-1]
    return Spectrum(tuple(float(x) for x in eig), (1,) * len(eig), spectral_gap(eig))


def chain_gap(chain: ProductChain) -> float:
    """Analytic gap of a product chain: min over non-frozen factor gaps."""
    gaps = [johnson_spectrum(f.n, f.k).gap for f in chain.factors if not f.frozen]
    return product_gap(gaps) if gaps else 1.0


def spectrum_csv(n: int, k: int) -> str:
    spec = johnson_spectrum(n, k)
    lines = ["j,eigenvalue,multiplicity"]
    for j, (v, m) in enumerate(zip(spec.distinct, spec.multiplicities)):
        lines.append(f"{j},{v!r},{m}")
    lines.append(f"gap,{spec.gap!r},")
    return "\n".join(lines) + "\n"
