import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oat.algebra import full_algebra, upper_triangular
from oat.errors import PreconditionError
from oat.matcore import E
from oat.tripotent import (
    Tripotent,
    hat,
    is_star_open,
    is_tripotent,
    peirce,
    peirce_order_check,
    pz_decide,
    pz_verify,
    range_tripotent,
    tripotent_join,
    tripotent_leq,
)

import oracles
from _gen import block_algebra, crandn, partial_isometry, random_blocks

seeds = st.integers(0, 2**32 - 1)


def test_tripotent_basics():
    assert is_tripotent(E(1, 2))
    assert not is_tripotent(2 * E(1, 2))
    t = Tripotent.of(E(1, 2))
    assert np.allclose(t.initial, E(2, 2)) and np.allclose(t.final, E(1, 1))
    assert np.allclose(t.adjoint.v, E(2, 1))
    with pytest.raises(PreconditionError):
        Tripotent.of(np.eye(2) * 0.5)


@given(seeds, st.integers(1, 5))
def test_hat_is_projection_exactly_for_tripotents(seed, n):
    rng = np.random.default_rng(seed)
    v = partial_isometry(rng, n, int(rng.integers(1, n + 1)))
    h = hat(v)
    assert np.allclose(h @ h, h, atol=1e-10)
    x = crandn(rng, n, n)
    hx = hat(x)
    assert not np.allclose(hx @ hx, hx, atol=1e-6)


@given(seeds, st.integers(1, 5))
def test_range_tripotent_has_the_range_of_x(seed, n):
    rng = np.random.default_rng(seed)
    r = int(rng.integers(1, n + 1))
    x = crandn(rng, n, r) @ crandn(rng, r, n)
    t = range_tripotent(x)
    assert np.allclose(t.final, oracles.range_proj(x), atol=1e-8)
    assert np.allclose(t.initial, oracles.range_proj(x.conj().T), atol=1e-8)


def test_order_examples():
    w = E(1, 1, 3) + E(2, 2, 3)
    assert tripotent_leq(E(1, 1, 3), w)
    assert not tripotent_leq(E(3, 3, 3), w)
    assert not tripotent_leq(-E(1, 1, 3), w)


@given(seeds, st.integers(2, 5))
def test_subtripotents_are_below(seed, n):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(1, n + 1))
    w = partial_isometry(rng, n, k)
    # restricting w to a subspace of its initial space gives u <= w
    P = oracles.range_proj(w.conj().T @ crandn(rng, n, int(rng.integers(1, k + 1))))
    u = w @ P
    assert tripotent_leq(u, w)
    assert tripotent_leq(w, w)


def test_join_of_orthogonal_units():
    j = tripotent_join(E(1, 2, 3), E(2, 3, 3))
    assert np.allclose(j, E(1, 2, 3) + E(2, 3, 3))


def test_join_without_upper_bound():
    with pytest.raises(PreconditionError):
        tripotent_join(E(1, 1), -E(1, 1))


def test_star_open_in_triangular():
    T2 = upper_triangular(2)
    assert is_star_open(T2, E(1, 1))
    assert not is_star_open(T2, E(1, 2))
    assert is_star_open(full_algebra(2), E(1, 2))


def test_peirce_algebra_of_matrix_unit():
    P = peirce(full_algebra(3), E(1, 2, 3))
    assert P.space.dim == 1
    assert np.allclose(P.unit, E(1, 2, 3))
    assert np.allclose(P.involution(2j * E(1, 2, 3)), -2j * E(1, 2, 3))
    assert P.in_S(0.5 * E(1, 2, 3))


@given(seeds)
def test_peirce_order_characterizations_agree(seed):
    rng = np.random.default_rng(seed)
    BA = block_algebra(rng, random_blocks(rng, max_n=5))
    A = BA.algebra()
    p, mins = BA.projection(rng, BA.random_ranks(rng))
    # p and any sum of its minimal projections are *-open and ordered
    sub = sum(mins[: max(1, len(mins) // 2)])
    assert peirce_order_check(A, sub, p, samples=8, seed=seed).yes
    if not np.allclose(sub, p):
        assert peirce_order_check(A, p, sub, samples=8, seed=seed).no


def test_pz_triangular_obstruction():
    T2, M2 = upper_triangular(2), full_algebra(2)
    ver = pz_decide(T2, E(1, 1), E(2, 2))
    assert ver.no
    ver = pz_decide(M2, E(1, 1), E(2, 2))
    assert ver.yes
    assert pz_verify(M2, E(1, 1), E(2, 2), ver.witness).yes


def test_pz_verify_rejects_non_projection():
    with pytest.raises(PreconditionError):
        pz_verify(full_algebra(2), E(1, 2), E(2, 2), E(1, 2))


@given(seeds)
def test_pz_decide_matches_block_rank_oracle(seed):
    rng = np.random.default_rng(seed)
    BA = block_algebra(rng, random_blocks(rng, max_n=6), upper=bool(rng.random() < 0.5))
    A = BA.algebra()
    rp = BA.random_ranks(rng, at_least_one=False)
    rq = rp if rng.random() < 0.5 else BA.random_ranks(rng, at_least_one=False)
    p, mp = BA.projection(rng, rp)
    q, mq = BA.projection(rng, rq)
    ver = pz_decide(A, p, q, seed=seed)
    assert ver.yes == (rp == rq)
    assert ver.answer.value != "unknown"
    if ver.yes:
        assert pz_verify(A, p, q, ver.witness).yes
    brute = oracles.pz_by_witness(BA.diagonal_basis(), p, q, rng)
    assert brute == ver.yes
