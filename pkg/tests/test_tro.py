import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oat.errors import DimensionError, PreconditionError
from oat.matcore import E, MatSubspace
from oat.tro import (
    is_tro_inner_ideal,
    isu_construct,
    make_tro,
    sep_decompose,
    singly_generated_dim,
    tro_from_json,
    tro_from_space,
    tro_pz_verify,
    tro_pz_via_linking,
)

import oracles
from _gen import block_tro, crandn, partial_isometry, polar_part

seeds = st.integers(0, 2**32 - 1)


def _random_tro(rng):
    bt = block_tro(rng)
    return bt, make_tro(bt.basis(), (bt.rows, bt.cols))


def test_full_rectangular_tro():
    # orthogonal rank-one generators only span themselves
    assert make_tro([E(1, 1, 2, 3), E(2, 3, 2, 3)]).Z.dim == 2
    # E2j = E21 E11* E1j fills the rest
    Z = make_tro([E(1, 1, 2, 3), E(1, 2, 2, 3), E(1, 3, 2, 3), E(2, 1, 2, 3)])
    assert Z.Z.dim == 6
    assert Z.left.dim == 4 and Z.right.dim == 9
    assert Z.linking.dim == 25


def test_shape_checks():
    with pytest.raises(DimensionError):
        make_tro([E(1, 1, 2, 3), E(1, 1, 2, 2)])
    with pytest.raises(DimensionError):
        make_tro([])
    Z = make_tro([E(1, 2)])
    with pytest.raises(DimensionError):
        tro_pz_verify(Z, E(1, 2, 2, 3))


def test_non_ternary_space_rejected():
    with pytest.raises(PreconditionError):
        tro_from_space(MatSubspace.span([E(1, 1) + 2 * E(2, 2)]))


def test_json_round_trip():
    Z = make_tro([E(1, 2, 2, 3)])
    back = tro_from_json(json.loads(json.dumps(Z.to_json())))
    assert back.Z.equal(Z.Z)


@given(seeds, st.integers(1, 4), st.integers(1, 4))
def test_singly_generated_dimension(seed, m, n):
    rng = np.random.default_rng(seed)
    x = crandn(rng, m, n)
    if rng.random() < 0.5:
        # repeat a singular value
        u, s, vh = np.linalg.svd(x, full_matrices=False)
        s[:] = s[0]
        x = u @ np.diag(s) @ vh
    want = oracles.distinct_singular_values(x)
    assert make_tro([x]).Z.dim == want
    assert singly_generated_dim(x) == want


@given(seeds)
def test_every_partial_isometry_of_full_square_tro(seed):
    rng = np.random.default_rng(seed)
    Z = make_tro([E(1, 1), E(1, 2), E(2, 1), E(2, 2)])
    v = partial_isometry(rng, 2, int(rng.integers(1, 3)))
    assert tro_pz_verify(Z, v).yes
    assert tro_pz_via_linking(Z, v).yes


@given(seeds)
def test_pz_routes_agree_on_random_tros(seed):
    rng = np.random.default_rng(seed)
    bt, Z = _random_tro(rng)
    v = polar_part(Z.Z.random_element(rng))
    assert tro_pz_verify(Z, v).yes == tro_pz_via_linking(Z, v).yes is True
    w = polar_part(crandn(rng, bt.rows, bt.cols))
    assert tro_pz_verify(Z, w).yes == tro_pz_via_linking(Z, w).yes


def test_isu_example():
    Z = make_tro([E(1, 1), E(1, 2), E(2, 1), E(2, 2)])
    ver = isu_construct(Z, E(1, 2), E(2, 2))
    assert ver.yes
    assert np.allclose(ver.witness["a"], E(1, 1))
    assert np.allclose(ver.witness["x"], E(1, 2))
    assert np.allclose(ver.witness["y"], E(2, 1))


@given(seeds)
def test_isu_identities_on_random_tros(seed):
    rng = np.random.default_rng(seed)
    _, Z = _random_tro(rng)
    v = polar_part(Z.Z.random_element(rng))
    p = v.conj().T @ v
    c = p @ Z.right.random_element(rng) @ p
    c = c / np.linalg.norm(c, 2) * rng.uniform(0.1, 0.9)
    b = (p - c) / 2
    ver = isu_construct(Z, v, b)
    assert ver.yes
    w = ver.witness
    assert np.allclose(w["x"] @ w["y"], w["a"], atol=1e-8)
    assert np.allclose(w["y"] @ w["x"], b, atol=1e-8)
    assert np.allclose(oracles.range_proj(w["a"]), v @ v.conj().T, atol=1e-8)


def test_isu_needs_matching_support():
    Z = make_tro([E(1, 1), E(1, 2), E(2, 1), E(2, 2)])
    with pytest.raises(PreconditionError):
        isu_construct(Z, E(1, 2), E(1, 1))


def test_sep_example():
    Z = make_tro([E(1, 1), E(1, 2), E(2, 1), E(2, 2)])
    D = MatSubspace.span([E(1, 2)])
    ver = sep_decompose(Z, D)
    assert ver.yes
    assert np.allclose(ver.witness["a"], E(1, 1))
    assert np.allclose(ver.witness["b"], E(2, 2))
    assert "tripotent" in ver.witness


@given(seeds)
def test_sep_on_random_corners(seed):
    rng = np.random.default_rng(seed)
    _, Z = _random_tro(rng)
    z1, z2 = Z.Z.random_element(rng), Z.Z.random_element(rng)
    q = oracles.range_proj(z1 @ z1.conj().T @ z1 @ z1.conj().T)
    p = oracles.range_proj(z2.conj().T @ z2)
    D = MatSubspace.span([q @ b @ p for b in Z.Z.basis], Z.shape)
    assert is_tro_inner_ideal(Z, D)
    if D.dim == 0:
        return
    ver = sep_decompose(Z, D, seed=seed)
    assert ver.yes
    a, b = ver.witness["a"], ver.witness["b"]
    assert D.equal(MatSubspace.span([a @ z @ b for z in Z.Z.basis], Z.shape), 1e-7)


def test_sep_rejects_non_inner_ideal():
    Z = make_tro([E(1, 1), E(1, 2), E(2, 1), E(2, 2)])
    with pytest.raises(PreconditionError):
        sep_decompose(Z, MatSubspace.span([E(1, 1) + E(2, 2)]))
