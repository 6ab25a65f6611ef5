"""Problem instances, the two oracle models, and instance files.

Domain points carry an explicit 0-based function index and a 1-based
element index, so ``DomainPoint(0, 2)`` is element 2 of the first function.
Function values live in ``[1..range_size]``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from clawsim.errors import (
    DomainError,
    ModeError,
    ParameterError,
    ParseError,
    ValidationError,
)

STANDARD = "standard"
COMPARISON = "comparison"
MODES = (STANDARD, COMPARISON)


class DomainPoint(NamedTuple):
    func: int
    index: int


class ClawTuple(NamedTuple):
    """Indices ``(x_1, ..., x_k)``; all ``-1`` is the "no claw" sentinel."""

    indices: tuple[int, ...]

    @classmethod
    def sentinel(cls, k: int) -> "ClawTuple":
        return cls((-1,) * k)

    @property
    def is_sentinel(self) -> bool:
        return all(x == -1 for x in self.indices)

    def verify(self, instance: "ProblemInstance") -> bool:
        if self.is_sentinel or len(self.indices) != instance.k:
            return False
        vals = []
        for i, x in enumerate(self.indices):
            if not 1 <= x <= instance.domain_sizes[i]:
                return False
            vals.append(instance.value(DomainPoint(i, x)))
        return len(set(vals)) == 1


class ProblemInstance:
    """Hidden functions ``f_i: [N_i] -> [1..|Z|]`` materialized as read-only tables."""

    __slots__ = ("k", "domain_sizes", "range_size", "_tables")

    def __init__(self, domain_sizes: Sequence[int], range_size: int, values: Sequence[Sequence[int]]):
        domain_sizes = tuple(int(n) for n in domain_sizes)
        k = len(domain_sizes)
        if k < 2:
            raise ValidationError(f"need at least 2 functions, got {k}")
        if any(n < 1 for n in domain_sizes):
            raise ValidationError(f"domain sizes must be positive: {domain_sizes}")
        for i in range(k - 1):
            if domain_sizes[i] > domain_sizes[i + 1]:
                raise ValidationError(
                    f"domain sizes must be non-decreasing, got N_{i + 1}={domain_sizes[i]} > "
                    f"N_{i + 2}={domain_sizes[i + 1]}"
                )
        range_size = int(range_size)
        if range_size < 1:
            raise ValidationError(f"range_size must be positive, got {range_size}")
        if len(values) != k:
            raise ValidationError(f"expected {k} value tables, got {len(values)}")
        tables = []
        for i, (n, row) in enumerate(zip(domain_sizes, values)):
            arr = np.array(row, dtype=np.int64).reshape(-1)
            if arr.shape[0] != n:
                raise ValidationError(f"table {i} has {arr.shape[0]} entries, expected {n}")
            if arr.size and (arr.min() < 1 or arr.max() > range_size):
                raise ValidationError(f"table {i} has values outside [1..{range_size}]")
            arr.setflags(write=False)
            tables.append(arr)
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "domain_sizes", domain_sizes)
        object.__setattr__(self, "range_size", range_size)
        object.__setattr__(self, "_tables", tuple(tables))

    def __setattr__(self, name, value):
        raise AttributeError("ProblemInstance is immutable")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ProblemInstance):
            return NotImplemented
        return (
            self.domain_sizes == other.domain_sizes
            and self.range_size == other.range_size
            and all(np.array_equal(a, b) for a, b in zip(self._tables, other._tables))
        )

    def __hash__(self) -> int:
        return hash((self.domain_sizes, self.range_size, tuple(t.tobytes() for t in self._tables)))

    def __repr__(self) -> str:
        return f"ProblemInstance(k={self.k}, domain_sizes={self.domain_sizes}, range_size={self.range_size})"

    def check_point(self, p: DomainPoint) -> None:
        func, index = p
        if not 0 <= func < self.k:
            raise DomainError(f"function index {func} outside [0..{self.k - 1}]")
        if not 1 <= index <= self.domain_sizes[func]:
            raise DomainError(f"element {index} outside [1..{self.domain_sizes[func]}] for function {func}")

    def value(self, p: DomainPoint) -> int:
        """Uncounted table read. Simulators and verifiers only; algorithms go through a session."""
        self.check_point(p)
        return int(self._tables[p[0]][p[1] - 1])

    def table(self, func: int) -> np.ndarray:
        """Read-only view of one table (0-based positions)."""
        return self._tables[func]

    def brute_force_claws(self) -> list[tuple[int, ...]]:
        """Every k-claw, by scanning the full product of domains. Test oracle; tiny sizes only."""
        import itertools

        ranges = [range(1, n + 1) for n in self.domain_sizes]
        out = []
        for tup in itertools.product(*ranges):
            v0 = self._tables[0][tup[0] - 1]
            if all(self._tables[i][x - 1] == v0 for i, x in enumerate(tup)):
                out.append(tup)
        return out


def has_claw(instance: ProblemInstance, domains: Sequence[tuple[int, int]]) -> bool:
    """Ground truth: is there a k-claw inside the given inclusive 1-based intervals?"""
    common = None
    for i, (lo, hi) in enumerate(domains):
        if hi < lo:
            return False
        vals = instance.table(i)[lo - 1 : hi]
        common = np.unique(vals) if common is None else np.intersect1d(common, vals, assume_unique=False)
        if common.size == 0:
            return False
    return True


@dataclass
class OracleSession:
    """Query interface over an instance with an exact invocation counter.

    One session per logical task; the counter is not thread-safe.
    """

    instance: ProblemInstance
    mode: str = STANDARD
    _count: int = field(default=0, repr=False)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ParameterError(f"mode must be one of {MODES}, got {self.mode!r}")

    @property
    def query_count(self) -> int:
        return self._count

    def standard(self, p: DomainPoint) -> int:
        if self.mode != STANDARD:
            raise ModeError("standard query on a comparison-mode session")
        self.instance.check_point(p)
        self._count += 1
        return int(self.instance.table(p[0])[p[1] - 1])

    def compare(self, p: DomainPoint, q: DomainPoint) -> int:
        """1 iff value(p) <= value(q)."""
        if self.mode != COMPARISON:
            raise ModeError("comparison query on a standard-mode session")
        self.instance.check_point(p)
        self.instance.check_point(q)
        self._count += 1
        tp = self.instance.table(p[0])[p[1] - 1]
        tq = self.instance.table(q[0])[q[1] - 1]
        return int(tp <= tq)

    def charge(self, queries: int) -> None:
        """Record ``queries`` modeled invocations (cost-model backends)."""
        if queries < 0:
            raise ParameterError("cannot charge a negative number of queries")
        self._count += int(queries)


def standard_query(session: OracleSession, p: DomainPoint) -> int:
    return session.standard(DomainPoint(*p))


def comparison_query(session: OracleSession, p: DomainPoint, q: DomainPoint) -> int:
    return session.compare(DomainPoint(*p), DomainPoint(*q))


def make_planted_instance(
    k: int,
    domain_sizes: Sequence[int],
    num_claws: int,
    range_size: int | None = None,
    seed: int | np.random.Generator | None = 0,
) -> ProblemInstance:
    """Instance with exactly ``num_claws`` k-claws at seeded random positions.

    Every non-claw value is globally distinct, and each planted claw gets its own
    value, so no function repeats a value and the claw count is exact.
    ``range_size`` defaults to ``4 * sum(domain_sizes)``.
    """
    domain_sizes = tuple(int(n) for n in domain_sizes)
    if len(domain_sizes) != k:
        raise ParameterError(f"k={k} but {len(domain_sizes)} domain sizes given")
    if k < 2:
        raise ParameterError("k must be at least 2")
    if any(n < 1 for n in domain_sizes):
        raise ParameterError("domain sizes must be positive")
    if list(domain_sizes) != sorted(domain_sizes):
        raise ParameterError(f"domain sizes must be non-decreasing: {domain_sizes}")
    if num_claws < 0 or num_claws > domain_sizes[0]:
        raise ParameterError(f"num_claws must lie in [0..{domain_sizes[0]}], got {num_claws}")
    total = sum(domain_sizes)
    if range_size is None:
        range_size = 4 * total
    needed = total - (k - 1) * num_claws
    if range_size < needed:
        raise ParameterError(f"range_size {range_size} too small; need at least {needed} distinct values")

    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    pool = rng.choice(range_size, size=needed, replace=False).astype(np.int64) + 1
    claw_values, rest = pool[:num_claws], pool[num_claws:]

    tables = []
    offset = 0
    for n in domain_sizes:
        table = np.empty(n, dtype=np.int64)
        claw_pos = rng.choice(n, size=num_claws, replace=False)
        mask = np.ones(n, dtype=bool)
        mask[claw_pos] = False
        table[claw_pos] = claw_values
        free = n - num_claws
        table[mask] = rest[offset : offset + free]
        offset += free
        tables.append(table)
    return ProblemInstance(domain_sizes, range_size, tables)


def serialize_instance(instance: ProblemInstance) -> str:
    doc = {
        "k": instance.k,
        "domains": list(instance.domain_sizes),
        "range_size": instance.range_size,
        "values": [instance.table(i).tolist() for i in range(instance.k)],
    }
    return json.dumps(doc, separators=(", ", ": ")) + "\n"


_FIELDS = ("k", "domains", "range_size", "values")


def deserialize_instance(text: str) -> ProblemInstance:
    if not text.strip():
        raise ParseError("empty instance document", line=1, column=1)
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"malformed instance document: {exc.msg}", exc.lineno, exc.colno) from exc
    if not isinstance(doc, dict):
        raise ParseError("instance document must be a JSON object", line=1, column=1)
    missing = [f for f in _FIELDS if f not in doc]
    if missing:
        raise ParseError(f"missing fields: {', '.join(missing)}")

    def ints(x, what):
        if isinstance(x, bool) or not isinstance(x, int):
            raise ParseError(f"{what} must be an integer, got {x!r}")
        return x

    k = ints(doc["k"], "k")
    domains = doc["domains"]
    values = doc["values"]
    if not isinstance(domains, list) or not isinstance(values, list):
        raise ParseError("'domains' and 'values' must be arrays")
    domains = [ints(n, "domain size") for n in domains]
    if len(domains) != k:
        raise ValidationError(f"k={k} but {len(domains)} domains listed")
    rows = []
    for row in values:
        if not isinstance(row, list):
            raise ParseError("each entry of 'values' must be an array")
        rows.append([ints(v, "value") for v in row])
    return ProblemInstance(domains, ints(doc["range_size"], "range_size"), rows)


def load_instance(path) -> ProblemInstance:
    with open(path, encoding="utf-8") as fh:
        return deserialize_instance(fh.read())


def save_instance(instance: ProblemInstance, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize_instance(instance))


def log2_ceil(n: int) -> int:
    """``ceil(log2 n)`` for positive integers, exactly."""
    if n < 1:
        raise ParameterError("log2_ceil needs a positive integer")
    return (n - 1).bit_length()


def comb(n: int, k: int) -> int:
    return math.comb(n, k) if 0 <= k <= n else 0


def make_rng(*key) -> np.random.Generator:
    """Philox generator keyed by a tuple of non-negative ints, e.g. ``(seed, trial)``.

    Streams for distinct keys are independent, so trials can run in any
    order or in parallel and still reproduce.
    """
    flat = []
    for part in key:
        if isinstance(part, (tuple, list)):
            flat.extend(int(x) for x in part)
        elif part is not None:
            flat.append(int(part))
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(flat or None)))
