import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.linalg import fractional_matrix_power as scipy_fractional_power
from scipy.linalg import sqrtm

from oat.algebra import full_algebra, upper_triangular
from oat.calculus import (
    as_cone,
    cofr_check,
    cone_scale,
    in_S,
    in_S_matrix,
    modulus,
    numerical_range_in_sector,
    power,
    power_laws_check,
    power_t,
    power_t_report,
    quotient_distance,
    root,
    support,
    support_projection,
    vpow_check,
)
from oat.errors import DimensionError, PreconditionError
from oat.matcore import E

import oracles
from _gen import cone_base, contraction, crandn, unitary

seeds = st.integers(0, 2**32 - 1)
convs = st.sampled_from(["half-ball", "shifted"])
NILP = np.array([[0.5, 0.25], [0, 0.5]], dtype=complex)


def test_membership_examples():
    M2 = full_algebra(2)
    assert in_S(M2, np.eye(2))
    assert in_S(M2, NILP)
    assert not in_S(M2, E(1, 2))
    z = np.diag([0.5 + 0.8j, 0.1])
    assert in_S_matrix(z, "shifted") and not in_S_matrix(z, "half-ball")


def test_membership_needs_algebra():
    T2 = upper_triangular(2)
    assert not in_S(T2, E(2, 1) * 0.1)


@given(seeds, convs, st.integers(1, 5))
def test_cone_scale_is_the_least_scale(seed, conv, n):
    rng = np.random.default_rng(seed)
    a = cone_base(rng, n, conv, rank=int(rng.integers(1, n + 1))) * rng.uniform(0.1, 5)
    lam = cone_scale(a, conv)
    assert lam is not None
    assert in_S_matrix(a / lam, conv)
    # just below the scale the element leaves the base (unless a is tiny)
    if lam > 1e-6:
        assert not in_S_matrix(a / (lam * (1 - 1e-4)), conv)


def test_cone_scale_rejects_non_accretive():
    assert cone_scale(-np.eye(2)) is None
    assert cone_scale(E(1, 2)) is None
    with pytest.raises(PreconditionError):
        as_cone(E(1, 2))


def test_nilpotent_square_root():
    expected = np.array([[1, 0.25], [0, 1]]) / np.sqrt(2)
    assert np.allclose(power_t(NILP, 0.5), expected, atol=1e-12)


def test_projection_powers():
    p = E(1, 1, 3) + E(3, 3, 3)
    for t in (0.5, 0.3, 1 / 7):
        assert np.allclose(power_t(p, t), p, atol=1e-10)


@given(seeds, st.integers(1, 6), convs)
def test_root_matches_eigen_oracle(seed, n, conv):
    rng = np.random.default_rng(seed)
    a = cone_base(rng, n, conv, rank=int(rng.integers(1, n + 1)))
    for t in (0.5, 1 / 3, 0.7):
        ref = oracles.eig_power(a, t)
        if ref is not None:
            assert np.allclose(power_t(a, t, conv), ref, atol=1e-8)


@given(seeds, st.integers(1, 5))
def test_square_root_matches_scipy(seed, n):
    rng = np.random.default_rng(seed)
    a = cone_base(rng, n)
    assert np.allclose(root(a, 2), sqrtm(a), atol=1e-8)


@given(seeds, st.integers(2, 8), convs)
def test_root_lies_in_sector_and_commutes(seed, k, conv):
    rng = np.random.default_rng(seed)
    a = cone_base(rng, 4, conv)
    r = root(a, k, conv)
    assert numerical_range_in_sector(r, np.pi / k)
    assert np.allclose(r @ a, a @ r, atol=1e-9)
    if conv == "half-ball":
        assert in_S_matrix(r, conv)
    else:
        # only the ||1 - r|| <= 1 half survives in general, see below
        assert np.linalg.norm(np.eye(4) - r, 2) <= 1 + 1e-9


# in the shifted ball, but its fourth root has norm 1 + 4.52e-5
# (50-digit mpmath logm/expm and the binomial series agree)
SHIFTED_ESCAPE = np.array([
    [0.5410681710198844 + 0.09253431886880958j, -0.003193509543252676 - 0.40251788309599934j],
    [-0.046628977328495046 + 0.3434651553262983j, 0.675059833388376 - 0.10173156510943071j],
])


def test_shifted_ball_root_can_leave_the_ball():
    a = SHIFTED_ESCAPE
    assert in_S_matrix(a, "shifted")
    r = root(a, 4, "shifted")
    assert np.allclose(r, scipy_fractional_power(a, 0.25), atol=1e-12)
    assert np.linalg.norm(r, 2) - 1 == pytest.approx(4.5200912225e-5, rel=1e-6)
    assert np.linalg.norm(np.eye(2) - r, 2) < 1
    assert not in_S_matrix(r, "shifted")
    # the power laws still hold; the escape is only noted
    ver = power_laws_check(a, 0.25, 0.5, "shifted")
    assert ver.yes and any("leaves the shifted ball" in n for n in ver.notes)


def test_root_rejects_bad_input():
    with pytest.raises(PreconditionError):
        power_t(E(1, 2), 0.5)
    with pytest.raises(PreconditionError):
        power_t(np.eye(2), 1.5)


def test_series_report_fields():
    rep = power_t_report(np.diag([0.9, 0.01]).astype(complex), 0.5)
    assert rep.terms >= 1 and rep.tail_bound < 1e-10
    assert np.allclose(rep.value, np.diag([0.9 ** 0.5, 0.1]), atol=1e-10)


def test_integer_and_mixed_powers():
    a = np.diag([0.81, 0.25]).astype(complex)
    assert np.allclose(power(a, 2.5), np.diag([0.81 ** 2.5, 0.25 ** 2.5]), atol=1e-10)
    assert np.allclose(power(a, 3), a @ a @ a, atol=1e-12)


def test_power_law_diagonal_example():
    a = np.diag([0.81, 0.25]).astype(complex)
    ver = power_laws_check(a, 0.5, 0.5)
    assert ver.yes
    assert np.allclose(power_t(a, 0.25), np.diag([0.81 ** 0.25, 0.25 ** 0.25]), atol=1e-10)


@given(seeds, st.floats(0.05, 1.0), st.floats(0.05, 1.0), convs)
def test_power_laws_property(seed, r, s, conv):
    rng = np.random.default_rng(seed)
    a = cone_base(rng, int(rng.integers(1, 6)), conv)
    assert power_laws_check(a, r, s, conv).yes


def test_support_examples():
    assert np.allclose(support(np.diag([1.0, 0.0])), np.diag([1.0, 0.0]))
    assert np.allclose(support(NILP), np.eye(2))
    cert = support_projection(np.diag([0.0, 0.81]).astype(complex))
    assert cert.rank == 1 and cert.deviation < 1e-6


@given(seeds, st.integers(1, 6), convs)
def test_support_matches_svd_oracle(seed, n, conv):
    rng = np.random.default_rng(seed)
    r = int(rng.integers(0, n + 1))
    a = cone_base(rng, n, conv, rank=r)
    cert = support_projection(a, conv)
    assert cert.rank == oracles.rank(a) == r
    assert np.allclose(cert.projection, oracles.range_proj(a), atol=1e-6)
    # left and right supports coincide
    assert np.allclose(oracles.range_proj(a), oracles.range_proj(a.conj().T), atol=1e-8)
    # fractional powers keep the support; a @ a can leave the cone, so only its range is compared
    assert np.allclose(support(power_t(a, 0.5, conv)), cert.projection, atol=1e-6)
    assert np.allclose(oracles.range_proj(a @ a), cert.projection, atol=1e-6)


def test_half_root_is_not_modulus():
    # (a^1/2)* a^1/2 and |a| differ for a non-normal cone element
    c = power_t(NILP, 0.5)
    assert not np.allclose(c.conj().T @ c, modulus(NILP), atol=1e-3)


def test_quotient_distance_examples():
    M2 = full_algebra(2)
    d = quotient_distance(M2, E(1, 1), E(2, 2))
    assert d.direct == pytest.approx(1, abs=1e-6) and d.limit == pytest.approx(1, abs=1e-6)
    d = quotient_distance(M2, E(1, 1), E(1, 1))
    assert d.direct == pytest.approx(0, abs=1e-6) and d.agree
    d = quotient_distance(M2, NILP, E(1, 2) + E(2, 1))
    assert d.direct == pytest.approx(0, abs=1e-6)


@given(seeds, st.integers(2, 4))
def test_quotient_distance_matches_projection_oracle(seed, n):
    rng = np.random.default_rng(seed)
    a = cone_base(rng, n, rank=int(rng.integers(1, n)))
    x = crandn(rng, n, n)
    d = quotient_distance(full_algebra(n), a, x)
    ref = oracles.distance_to_ideal(a, x)
    assert abs(d.direct - ref) <= 1e-4 * (1 + np.linalg.norm(x, 2))
    assert abs(d.limit - ref) <= 1e-4 * (1 + np.linalg.norm(x, 2))


def test_cofr_trivial_cases():
    rng = np.random.default_rng(0)
    T = contraction(rng, 3)
    assert cofr_check(np.eye(3), T).yes
    S = np.eye(3) - contraction(rng, 3)
    assert cofr_check(S, np.eye(3)).yes
    with pytest.raises(PreconditionError):
        cofr_check(3 * np.eye(2), np.eye(2))
    with pytest.raises(DimensionError):
        cofr_check(np.eye(2), np.eye(3))


@given(seeds, st.integers(1, 5), st.integers(1, 5))
def test_cofr_rectangular(seed, m, k):
    rng = np.random.default_rng(seed)
    S = np.eye(m) - contraction(rng, m)
    T = contraction(rng, m, k)
    ver = cofr_check(S, T)
    assert ver.yes
    direct = np.linalg.norm(np.eye(k) - T.conj().T @ S @ T, 2)
    assert direct <= 1 + 1e-10


def test_vpow_examples():
    a = np.diag([0.0, 0.81]).astype(complex)
    ver = vpow_check(a, E(1, 2), 0.5)
    assert ver.yes
    assert np.allclose(ver.witness["lhs"], np.diag([0.9, 0.0]))
    with pytest.raises(PreconditionError):
        vpow_check(np.diag([0.81, 0.0]).astype(complex), E(1, 2), 0.5)


@given(seeds, st.integers(2, 5), st.sampled_from([0.5, 0.3, 2.0, 3.0]))
def test_vpow_property(seed, n, r):
    rng = np.random.default_rng(seed)
    k = int(rng.integers(1, n + 1))
    a = cone_base(rng, n, rank=k)
    p = oracles.range_proj(a)
    v = unitary(rng, n) @ p
    ver = vpow_check(a, v, r)
    assert ver.yes
    if r < 1:
        ref = oracles.eig_power(v @ a @ v.conj().T, r)
        if ref is not None:
            assert np.allclose(ver.witness["lhs"], ref, atol=1e-7)
