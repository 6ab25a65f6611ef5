"""Exact amplitude simulation of Szegedy-walk detection on a product chain.

The walk register holds one amplitude per directed edge ``(i, j)`` of the
chain, stored row-major as ``edge = i * degree + slot`` where
``j = chain.neighbor_table[i, slot]``. The full detection state prepends a
control qubit: ``amplitudes[b * num_edges + edge]``.

Transition probabilities are uniform (``1/degree``), so the projector ``C``
onto ``span{|c_i>}`` replaces each row block by its mean, and ``R`` does the
same on column blocks after the edge-reversal permutation.

Marked states are absorbing: the gated reflection is ``2C' - I`` with
``C' = sum over unmarked i of |c_i><c_i|``, which is ``-I`` on a marked row
block. Leaving marked blocks untouched instead would make ``W`` fix the
uniform superposition whatever is marked, and the walk would detect nothing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from clawsim.errors import ParameterError, SizeError
from clawsim.johnson import ProductChain

DEFAULT_EDGE_CAP = 50_000


@dataclass(frozen=True)
class WalkState:
    """Control qubit (x) edge register, as one complex vector of length ``2 * num_edges``."""

    amplitudes: np.ndarray

    @property
    def num_edges(self) -> int:
        return self.amplitudes.shape[0] // 2

    def sector(self, b: int) -> np.ndarray:
        e = self.num_edges
        return self.amplitudes[b * e : (b + 1) * e]

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


class SzegedyWalk:
    """Precomputed edge layout plus marked mask for one chain."""

    def __init__(self, chain: ProductChain, marked, edge_cap: int = DEFAULT_EDGE_CAP):
        if chain.num_edges > edge_cap:
            raise SizeError(f"{chain.num_edges} directed edges exceeds the simulator cap of {edge_cap}")
        self.chain = chain
        self.S = chain.num_states
        self.r = chain.degree
        self.E = chain.num_edges
        self.marked = marked_mask(chain, marked)
        self.unmarked = ~self.marked

        nbr = chain.neighbor_table
        src = np.repeat(np.arange(self.S), self.r)
        dst = nbr.ravel()
        # rows of nbr are ascending, so keys src*S+dst are globally sorted
        keys = src * self.S + dst
        rev = np.searchsorted(keys, dst * self.S + src)
        if not np.array_equal(keys[rev], dst * self.S + src):
            raise ParameterError("chain is not symmetric; reversed edge missing")
        self.src, self.dst, self.rev = src, dst, rev
        self.touches_marked = self.marked[src] | self.marked[dst]

    # -- projectors and reflections on the edge register --------------------

    def project_C(self, psi: np.ndarray) -> np.ndarray:
        A = psi.reshape(self.S, self.r)
        return np.repeat(A.mean(axis=1), self.r)

    def project_R(self, psi: np.ndarray) -> np.ndarray:
        B = psi[self.rev].reshape(self.S, self.r)
        out = np.empty_like(psi)
        out[self.rev] = np.repeat(B.mean(axis=1), self.r)
        return out

    def reflect_C(self, psi: np.ndarray, gated: bool = True) -> np.ndarray:
        """``2C - I`` on unmarked row blocks, ``-I`` on marked ones; plain ``2C - I`` if not ``gated``."""
        A = psi.reshape(self.S, self.r)
        refl = 2.0 * A.mean(axis=1, keepdims=True) - A
        if gated:
            refl = np.where(self.unmarked[:, None], refl, -A)
        return refl.ravel()

    def reflect_R(self, psi: np.ndarray, gated: bool = True) -> np.ndarray:
        B = psi[self.rev].reshape(self.S, self.r)
        refl = 2.0 * B.mean(axis=1, keepdims=True) - B
        if gated:
            refl = np.where(self.unmarked[:, None], refl, -B)
        out = np.empty_like(psi)
        out[self.rev] = refl.ravel()
        return out

    def apply_W(self, psi: np.ndarray) -> np.ndarray:
        return self.reflect_R(self.reflect_C(psi))

    # -- detection ----------------------------------------------------------

    def phi0(self) -> np.ndarray:
        return np.full(self.E, 1.0 / np.sqrt(self.E), dtype=np.complex128)

    def prepare(self) -> WalkState:
        amps = np.zeros(2 * self.E, dtype=np.complex128)
        amps[: self.E] = self.phi0()
        return WalkState(amps)

    def final_state(self, t: int) -> WalkState:
        """State after Hadamard, controlled ``W^t``, Hadamard."""
        phi = self.phi0()
        psi = phi
        for _ in range(t):
            psi = self.apply_W(psi)
        return WalkState(np.concatenate([(phi + psi) / 2.0, (phi - psi) / 2.0]))

    def _p_true(self, phi: np.ndarray, psi: np.ndarray) -> float:
        zero = (phi + psi) / 2.0
        one = (phi - psi) / 2.0
        p1 = float(np.vdot(one, one).real)
        p0_marked = float(np.sum(np.abs(zero[self.touches_marked]) ** 2))
        return min(1.0, p1 + p0_marked)

    def success_profile(self, T: int) -> np.ndarray:
        """``P(true | t)`` for ``t = 1..T``, exactly."""
        if T < 1:
            raise ParameterError("T must be at least 1")
        phi = self.phi0()
        psi = phi
        out = np.empty(T)
        for t in range(T):
            psi = self.apply_W(psi)
            out[t] = self._p_true(phi, psi)
        return out

    def outcome_is_true(self, outcome: int) -> bool:
        b, e = divmod(outcome, self.E)
        return b == 1 or bool(self.touches_marked[e])

    def detect_once(self, T: int, rng: np.random.Generator, t: int | None = None) -> bool:
        if T < 1:
            raise ParameterError("T must be at least 1")
        if t is None:
            t = int(rng.integers(1, T + 1))
        probs = np.abs(self.final_state(t).amplitudes) ** 2
        cdf = np.cumsum(probs)
        outcome = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
        return self.outcome_is_true(min(outcome, probs.size - 1))


def marked_mask(chain: ProductChain, marked) -> np.ndarray:
    """Normalize a marked predicate (callable on states), index set, or mask to a bool array."""
    if callable(marked):
        return np.array([bool(marked(chain.state(s))) for s in range(chain.num_states)], dtype=bool)
    arr = np.asarray(marked)
    if arr.dtype == bool:
        if arr.shape != (chain.num_states,):
            raise ParameterError("marked mask has the wrong length")
        return arr.copy()
    mask = np.zeros(chain.num_states, dtype=bool)
    mask[arr.astype(np.int64)] = True
    return mask


def prepare_edge_superposition(chain: ProductChain, edge_cap: int = DEFAULT_EDGE_CAP) -> WalkState:
    return SzegedyWalk(chain, np.zeros(chain.num_states, dtype=bool), edge_cap).prepare()


def apply_W(chain: ProductChain, marked, psi: np.ndarray) -> np.ndarray:
    """One application of ``W`` to an edge-register vector."""
    return SzegedyWalk(chain, marked).apply_W(np.asarray(psi, dtype=np.complex128))


def detect_once(chain: ProductChain, marked, T: int, rng: np.random.Generator) -> bool:
    return SzegedyWalk(chain, marked).detect_once(T, rng)


def detect_success_probability(chain: ProductChain, marked, T: int) -> float:
    """Exact probability that :func:`detect_once` answers true, averaged over ``t``."""
    return float(SzegedyWalk(chain, marked).success_profile(T).mean())
