import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from clawsim.errors import SizeError
from clawsim.johnson import JohnsonGraph, ProductChain
from clawsim.walk import (
    SzegedyWalk,
    apply_W,
    detect_once,
    detect_success_probability,
    marked_mask,
    prepare_edge_superposition,
)

CHAINS = [
    [JohnsonGraph(4, 2)],
    [JohnsonGraph(4, 1), JohnsonGraph(5, 2)],
    [JohnsonGraph(3, 3), JohnsonGraph(5, 2)],
    [JohnsonGraph(4, 2), JohnsonGraph(4, 2)],
]


def dense_W(P, marked):
    """Walk operator on the full |i, j> space, from explicit |c_i> and |r_j> vectors."""
    S = P.shape[0]
    I = np.eye(S * S)
    PiC = np.zeros((S * S, S * S))
    PiR = np.zeros((S * S, S * S))
    for i in range(S):
        if marked[i]:
            continue
        c = np.zeros((S, S))
        c[i, :] = np.sqrt(P[i, :])
        c = c.ravel()
        PiC += np.outer(c, c)
        r = np.zeros((S, S))
        r[:, i] = np.sqrt(P[i, :])
        r = r.ravel()
        PiR += np.outer(r, r)
    return (2 * PiR - I) @ (2 * PiC - I)


def embed(walk, psi):
    full = np.zeros(walk.S * walk.S, dtype=complex)
    full[walk.src * walk.S + walk.dst] = psi
    return full


def random_state(rng, n):
    v = rng.normal(size=n) + 1j * rng.normal(size=n)
    return v / np.linalg.norm(v)


def test_edge_superposition_single_factor():
    st_ = prepare_edge_superposition(ProductChain([JohnsonGraph(4, 2)]))
    assert st_.num_edges == 24
    np.testing.assert_allclose(st_.sector(0), 1 / np.sqrt(24), atol=1e-15)
    np.testing.assert_allclose(st_.sector(1), 0)
    assert st_.norm() == pytest.approx(1.0, abs=1e-12)


def test_edge_superposition_product():
    st_ = prepare_edge_superposition(ProductChain([JohnsonGraph(4, 2)] * 2))
    assert st_.num_edges == 576
    np.testing.assert_allclose(st_.sector(0), 1 / 24, atol=1e-15)


def test_edge_cap():
    with pytest.raises(SizeError):
        prepare_edge_superposition(ProductChain([JohnsonGraph(6, 3)] * 2), edge_cap=1000)


@pytest.mark.parametrize("factors", CHAINS, ids=str)
def test_W_matches_dense_oracle(factors, rng):
    chain = ProductChain(factors)
    walk = SzegedyWalk(chain, np.zeros(chain.num_states, dtype=bool))
    P = chain.transition_matrix()
    for _ in range(3):
        marked = rng.random(chain.num_states) < 0.3
        W = dense_W(P, marked)
        w = SzegedyWalk(chain, marked)
        psi = random_state(rng, walk.E)
        np.testing.assert_allclose(embed(w, w.apply_W(psi)), W @ embed(w, psi), atol=1e-12)


@pytest.mark.parametrize("factors", CHAINS, ids=str)
def test_empty_marking_fixes_uniform(factors):
    chain = ProductChain(factors)
    w = SzegedyWalk(chain, [])
    np.testing.assert_allclose(w.apply_W(w.phi0()), w.phi0(), atol=1e-9)


@pytest.mark.parametrize("factors", CHAINS, ids=str)
def test_all_marked_is_identity(factors, rng):
    chain = ProductChain(factors)
    psi = random_state(rng, chain.num_edges)
    out = apply_W(chain, np.ones(chain.num_states, dtype=bool), psi)
    np.testing.assert_allclose(out, psi, atol=1e-12)


@pytest.mark.parametrize("factors", CHAINS, ids=str)
def test_unitarity_and_involutions(factors, rng):
    chain = ProductChain(factors)
    w = SzegedyWalk(chain, rng.random(chain.num_states) < 0.2)
    for _ in range(100):
        psi = random_state(rng, w.E)
        assert abs(np.linalg.norm(w.apply_W(psi)) - 1) < 1e-9
    psi = random_state(rng, w.E)
    for gated in (False, True):
        np.testing.assert_allclose(w.reflect_C(w.reflect_C(psi, gated), gated), psi, atol=1e-9)
        np.testing.assert_allclose(w.reflect_R(w.reflect_R(psi, gated), gated), psi, atol=1e-9)


def test_projectors_idempotent_and_self_adjoint(rng):
    chain = ProductChain([JohnsonGraph(4, 1), JohnsonGraph(5, 2)])
    w = SzegedyWalk(chain, [])
    a, b = random_state(rng, w.E), random_state(rng, w.E)
    for proj in (w.project_C, w.project_R):
        np.testing.assert_allclose(proj(proj(a)), proj(a), atol=1e-12)
        assert np.vdot(a, proj(b)) == pytest.approx(np.vdot(proj(a), b), abs=1e-12)


def test_rev_is_involution():
    w = SzegedyWalk(ProductChain([JohnsonGraph(5, 2)]), [])
    assert np.array_equal(w.rev[w.rev], np.arange(w.E))
    assert np.array_equal(w.src[w.rev], w.dst)


@pytest.mark.parametrize("factors", CHAINS, ids=str)
def test_no_marked_never_true(factors, rng):
    chain = ProductChain(factors)
    w = SzegedyWalk(chain, [])
    np.testing.assert_allclose(w.success_profile(12), 0.0, atol=1e-9)
    assert detect_success_probability(chain, [], 12) <= 1e-9
    assert not any(detect_once(chain, [], 5, rng) for _ in range(20))


def test_all_marked_always_true(rng):
    chain = ProductChain([JohnsonGraph(4, 2)])
    every = np.ones(chain.num_states, dtype=bool)
    assert detect_success_probability(chain, every, 1) == pytest.approx(1.0, abs=1e-12)
    assert all(detect_once(chain, every, 1, rng) for _ in range(20))


def test_profile_matches_dense_oracle(rng):
    chain = ProductChain([JohnsonGraph(4, 1), JohnsonGraph(5, 2)])
    marked = np.zeros(chain.num_states, dtype=bool)
    marked[[3, 17]] = True
    w = SzegedyWalk(chain, marked)
    W = dense_W(chain.transition_matrix(), marked)
    phi = embed(w, w.phi0())
    psi = phi.copy()
    S = chain.num_states
    touch = np.add.outer(marked, marked).ravel() > 0
    expect = []
    for _ in range(8):
        psi = W @ psi
        zero, one = (phi + psi) / 2, (phi - psi) / 2
        expect.append(np.sum(np.abs(one) ** 2) + np.sum(np.abs(zero[touch]) ** 2))
    np.testing.assert_allclose(w.success_profile(8), expect, atol=1e-12)
    assert S == 40


def test_final_state_normalized():
    chain = ProductChain([JohnsonGraph(5, 2)])
    w = SzegedyWalk(chain, [0, 4])
    for t in range(1, 6):
        assert w.final_state(t).norm() == pytest.approx(1.0, abs=1e-9)


def test_sampling_agrees_with_exact(rng):
    chain = ProductChain([JohnsonGraph(4, 1), JohnsonGraph(5, 2)])
    w = SzegedyWalk(chain, [7])
    p = w.success_profile(6)[3]
    hits = sum(w.detect_once(6, rng, t=4) for _ in range(4000))
    sd = np.sqrt(p * (1 - p) / 4000)
    assert abs(hits / 4000 - p) < 5 * sd + 1e-3


def test_marked_mask_forms():
    chain = ProductChain([JohnsonGraph(4, 2)])
    by_idx = marked_mask(chain, [0, 5])
    by_fn = marked_mask(chain, lambda s: s[0] in {chain.state(0)[0], chain.state(5)[0]})
    assert np.array_equal(by_idx, by_fn)
    assert by_idx.sum() == 2


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_W_unitary_property(seed):
    r = np.random.default_rng(seed)
    chain = ProductChain([JohnsonGraph(4, int(r.integers(1, 4))), JohnsonGraph(5, int(r.integers(1, 5)))])
    w = SzegedyWalk(chain, r.random(chain.num_states) < r.random())
    psi = random_state(r, w.E)
    assert abs(np.linalg.norm(w.apply_W(psi)) - 1) < 1e-9
    assert np.vdot(w.apply_W(psi), w.apply_W(w.phi0())) == pytest.approx(np.vdot(psi, w.phi0()), abs=1e-9)
