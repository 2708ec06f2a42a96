import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oat.algebra import (
    SConvention,
    algebra_from_json,
    algebra_from_space,
    center,
    full_algebra,
    hsa_check,
    make_algebra,
    minimal_projections,
    unit_of,
    unitize,
    upper_triangular,
    wedderburn,
)
from oat.errors import ParseError, PreconditionError
from oat.matcore import E, MatSubspace, matrix_to_json

from _gen import block_algebra, random_blocks

seeds = st.integers(0, 2**32 - 1)


def test_triangular_dimensions():
    T2 = upper_triangular(2)
    assert T2.dim == 3
    assert T2.diagonal().dim == 2
    assert T2.unital and not T2.is_self_adjoint()


def test_generated_algebra_closes_under_products():
    A = make_algebra(3, [E(1, 2, 3), E(2, 3, 3)])
    assert A.dim == 3  # E12, E23, E13
    assert A.contains(E(1, 3, 3))
    assert not A.unital


def test_algebra_from_space_rejects_non_algebra():
    with pytest.raises(PreconditionError):
        algebra_from_space(MatSubspace.span([E(1, 2), E(2, 1)]))


def test_unitize_adds_identity():
    A = make_algebra(2, [E(1, 2)])
    assert unitize(A).dim == 2


def test_convention_parsing():
    assert SConvention.parse("shifted") is SConvention.SHIFTED_BALL
    assert SConvention.parse("half-ball").factor == 2.0
    with pytest.raises(ParseError):
        SConvention.parse("quarter")


def test_algebra_json():
    A = algebra_from_json({"ambient": 2, "generators": [matrix_to_json(E(1, 1)),
                                                          matrix_to_json(E(1, 2))]})
    assert A.dim == 2
    with pytest.raises(ParseError):
        algebra_from_json({"generators": []})


def test_unit_of_corner_and_nilpotent():
    M3 = full_algebra(3)
    p = E(1, 1, 3) + E(2, 2, 3)
    assert np.allclose(unit_of(M3.corner(p)), p)
    assert unit_of(MatSubspace.span([E(1, 2)])) is None


def test_hsa_check():
    M2 = full_algebra(2)
    assert hsa_check(M2, M2.corner(E(1, 1)))
    assert not hsa_check(M2, MatSubspace.span([E(1, 2)]))
    # span{E12} is an inner ideal of T2 without a unit
    assert not hsa_check(upper_triangular(2), MatSubspace.span([E(1, 2)]))


def test_wedderburn_needs_cstar_algebra():
    with pytest.raises(PreconditionError):
        wedderburn(upper_triangular(2))


@given(seeds)
def test_wedderburn_recovers_block_structure(seed):
    rng = np.random.default_rng(seed)
    blocks = random_blocks(rng, max_n=6)
    BA = block_algebra(rng, blocks)
    C = BA.algebra()
    dec = wedderburn(C, seed=seed)
    assert center(C).dim == len(blocks)
    assert sorted(dec.multiplicities()) == sorted(m for _, m in blocks)
    ranks = BA.random_ranks(rng, at_least_one=False)
    p, _ = BA.projection(rng, ranks)
    # block order is internal; ambient ranks are multiplicity times block rank
    got = sorted(zip(dec.multiplicities(), dec.block_ranks(p)))
    want = sorted((m, m * r) for (_, m), r in zip(blocks, ranks))
    assert got == want


@given(seeds)
def test_minimal_projections_decompose(seed):
    rng = np.random.default_rng(seed)
    BA = block_algebra(rng, random_blocks(rng, max_n=6))
    C = BA.algebra()
    ranks = BA.random_ranks(rng, at_least_one=False)
    p, mins = BA.projection(rng, ranks)
    got = minimal_projections(C, p, seed=seed)
    assert len(got) == len(mins) == sum(ranks)
    assert np.allclose(sum(got) if got else 0 * p, p, atol=1e-8)
    for q in got:
        assert np.allclose(q @ q, q, atol=1e-8)
