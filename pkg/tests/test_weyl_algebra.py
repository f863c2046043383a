import itertools
import math
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from helpers import (connection_curvature, mixed_curvature, pure_holomorphic_curvature,
                     rand_alpha0, rand_weyl, rand_weyl_low)
from rwk.weyl_algebra import (ConnectionData, WeylElement, WeylError, covariant_derivative,
                              curvature_of_connection, fedosov_differential, fedosov_solve,
                              flat_section_lift, flatness_residual, injectivity_stages,
                              op_delta, op_delta_inverse, op_delta_star, project_pi0,
                              standard_omega, weyl_bracket, weyl_product)

W = WeylElement
seeds = st.integers(min_value=0, max_value=10 ** 9)


# ---------------------------------------------------------------------------
# an independent Moyal product on form-free elements
# ---------------------------------------------------------------------------

def _moyal_oracle(a: W, b: W) -> W:
    """Apply P = winv^{ij} d_i (x) d_j repeatedly to a (x) b, then multiply out."""
    m = 2 * a.n
    winv = a.winv
    out = {}
    tensor = {}
    for (ea, fa, ha), ca in a.terms.items():
        assert not fa
        for (eb, fb, hb), cb in b.terms.items():
            assert not fb
            key = (ea, eb, ha + hb)
            tensor[key] = tensor.get(key, 0) + ca * cb
    k = 0
    while tensor:
        for (ea, eb, h), c in tensor.items():
            e = tuple(x + y for x, y in zip(ea, eb))
            key = (e, (), h + k)
            out[key] = out.get(key, 0) + c / math.factorial(k)
        nxt = {}
        for (ea, eb, h), c in tensor.items():
            for i in range(m):
                if not ea[i]:
                    continue
                for j in range(m):
                    if not eb[j] or not winv[i][j]:
                        continue
                    na = ea[:i] + (ea[i] - 1,) + ea[i + 1:]
                    nb = eb[:j] + (eb[j] - 1,) + eb[j + 1:]
                    key = (na, nb, h)
                    nxt[key] = nxt.get(key, 0) + c * ea[i] * eb[j] * winv[i][j]
        tensor = {kk: v for kk, v in nxt.items() if v}
        k += 1
    return W(a.n, a.cutoff, out)


@settings(max_examples=40, deadline=None)
@given(seeds, st.sampled_from([1, 2]))
def test_product_matches_moyal_oracle(seed, n):
    rng = random.Random(seed)
    a = rand_weyl(rng, n, 6, 3, max_forms=0)
    b = rand_weyl(rng, n, 6, 3, max_forms=0)
    assert weyl_product(a, b) == _moyal_oracle(a, b)


def test_generator_commutator():
    d1, d2 = W.generator(1, 4, 0), W.generator(1, 4, 1)
    hbar = W.monomial(1, 4, 1, hbar=1)
    assert weyl_product(d1, d2) == W.monomial(1, 4, 1, (1, 1)) - hbar
    assert weyl_bracket(d1, d2) == hbar.scale(-2)


def test_delta_is_inner_derivation():
    # delta = (1/2hbar)[theta, -] with theta = omega_ij dz^i delta^j
    rng = random.Random(3)
    for n in (1, 2):
        om = standard_omega(n)
        theta = W.zero(n, 8)
        for i in range(2 * n):
            for j in range(2 * n):
                if om[i][j]:
                    e = [0] * (2 * n)
                    e[j] = 1
                    theta = theta + W.monomial(n, 8, om[i][j], e, dz=[i])
        for _ in range(10):
            a = rand_weyl(rng, n, 6, 3).with_cutoff(8)
            lhs = weyl_bracket(theta, a).div_hbar().scale(Fraction(1, 2)).with_cutoff(5)
            assert lhs == op_delta(a).with_cutoff(5)


@settings(max_examples=60, deadline=None)
@given(seeds, st.sampled_from([1, 2]))
def test_koszul_identities(seed, n):
    rng = random.Random(seed)
    a = rand_weyl(rng, n, 6, 4)
    assert op_delta(op_delta(a)).is_zero()
    assert op_delta_star(op_delta_star(a)).is_zero()
    assert op_delta_inverse(op_delta_inverse(a)).is_zero()
    b = a.with_cutoff(7)
    lhs = op_delta(op_delta_inverse(b)) + op_delta_inverse(op_delta(b)) + project_pi0(b)
    assert lhs.with_cutoff(6) == a


@settings(max_examples=30, deadline=None)
@given(seeds, st.sampled_from([1, 2]), st.integers(0, 1), st.integers(0, 1), st.integers(0, 1))
def test_associativity_and_graded_jacobi(seed, n, pa, pb, pc):
    rng = random.Random(seed)
    a, b, c = (rand_weyl_low(rng, n, 6, 3, parity=p) for p in (pa, pb, pc))
    assert weyl_product(weyl_product(a, b), c) == weyl_product(a, weyl_product(b, c))
    lhs = weyl_bracket(a, weyl_bracket(b, c))
    rhs = weyl_bracket(weyl_bracket(a, b), c) + \
        weyl_bracket(b, weyl_bracket(a, c)).scale((-1) ** (pa * pb))
    assert lhs == rhs


def test_text_roundtrip():
    rng = random.Random(11)
    for n in (1, 2):
        a = rand_weyl(rng, n, 6, 6)
        assert W.from_text(a.to_text()) == a


def test_mismatched_operands_rejected():
    with pytest.raises(WeylError):
        weyl_product(W.one(1, 4), W.one(2, 4))
    with pytest.raises(WeylError):
        W.monomial(1, 4, 1, (1, 0, 0))


def test_div_hbar_requires_hbar():
    with pytest.raises(WeylError):
        W.one(1, 4).div_hbar()


# ---------------------------------------------------------------------------
# Fedosov recursion
# ---------------------------------------------------------------------------

FIXTURES = [pure_holomorphic_curvature, connection_curvature, mixed_curvature]


@pytest.mark.parametrize("make", FIXTURES)
def test_fedosov_normalization(make):
    rng = random.Random(7)
    conn = make(rng, 8)
    I = fedosov_solve(conn, 8)
    assert flatness_residual(I, conn).is_zero()
    assert op_delta_inverse(I).is_zero()
    assert project_pi0(I).is_zero()
    assert I.weight_part(3) == op_delta_inverse(conn.R.with_cutoff(8))


def test_fedosov_first_orders_by_hand():
    # I_3 = delta^{-1} R, I_4 = delta^{-1} nabla I_3, and
    # I_5 = delta^{-1}(nabla I_4 + (1/hbar) I_3.I_3), assembled without the solver loop.
    rng = random.Random(5)
    conn = connection_curvature(rng, 7)
    I = fedosov_solve(conn, 7)
    I3 = op_delta_inverse(conn.R.with_cutoff(7))
    I4 = op_delta_inverse(covariant_derivative(I3, conn, 7).with_cutoff(7))
    sq = weyl_product(I3.with_cutoff(9), I3.with_cutoff(9)).div_hbar().with_cutoff(7)
    I5 = op_delta_inverse(covariant_derivative(I4, conn, 7) + sq)
    assert I.weight_part(3) == I3
    assert I.weight_part(4) == I4.weight_part(4)
    assert I.weight_part(5) == I5.weight_part(5)


def test_connection_curvature_squares_covariant_derivative():
    # nabla^2 a = (1/hbar)[R_nabla, a]
    rng = random.Random(9)
    conn = connection_curvature(rng, 8)
    for _ in range(5):
        a = rand_weyl(rng, 1, 5, 3).with_cutoff(8)
        lhs = covariant_derivative(covariant_derivative(a, conn, 8), conn, 6)
        rhs = weyl_bracket(conn.R.with_cutoff(8), a).div_hbar().with_cutoff(6)
        assert lhs == rhs


def test_paired_antiholomorphic_directions_are_not_enough():
    # delta R = 0 alone does not make the recursion flat: this n = 2 curvature
    # uses dzbar^1 on fiber index 0 and dzbar^2 on its Darboux partner slot 2
    cut = 6
    R = W.zero(2, cut)
    for abar, i in [(0, 0), (1, 2)]:
        for j, k, l in itertools.product(range(4), repeat=3):
            if (j, k, l) == (i, i, i):
                e = [0] * 4
                e[k] += 1
                e[l] += 1
                R = R + W.monomial(2, cut, Fraction(1, 2), e, dz=[j], dzbar=[abar])
    conn = ConnectionData(2, R)
    conn.validate()
    I = fedosov_solve(conn, cut)
    assert not flatness_residual(I, conn).is_zero()


def test_curvature_validation():
    bad = ConnectionData(1, W.monomial(1, 4, 1, (2, 0), dz=[0]))
    with pytest.raises(WeylError):
        bad.validate()
    with pytest.raises(WeylError):
        ConnectionData(1, W.zero(1, 4), {(0, 0, 1): 1})
    with pytest.raises(WeylError):
        fedosov_solve(pure_holomorphic_curvature(random.Random(0), 4), 2)


def test_connection_text_roundtrip():
    conn = connection_curvature(random.Random(2), 6)
    back = ConnectionData.from_text(conn.to_text())
    assert back.R == conn.R and back.christoffels == conn.christoffels


@pytest.mark.parametrize("make", FIXTURES)
def test_flat_lift_and_injectivity(make):
    rng = random.Random(13)
    conn = make(rng, 8)
    I = fedosov_solve(conn, 8)
    for _ in range(3):
        a0 = rand_alpha0(rng, 1, 6)
        a = flat_section_lift(a0, I, 7, conn)
        assert project_pi0(a) == a0.with_cutoff(7)
        assert fedosov_differential(a, I, conn, 6).is_zero()
    for w, dim, r in injectivity_stages(I, conn, 5):
        assert r == dim


def test_fedosov_differential_squares_to_zero_mod_hbar():
    rng = random.Random(17)
    conn = ConnectionData(1, W.zero(1, 9), connection_curvature(rng, 9).christoffels)
    conn = ConnectionData(1, curvature_of_connection(conn, 9), conn.christoffels)
    I = fedosov_solve(conn, 9)
    for _ in range(4):
        a = rand_weyl(rng, 1, 5, 3).with_cutoff(8)
        Da = fedosov_differential(a, I, conn, 7)
        DDa = fedosov_differential(Da, I, conn, 6)
        assert DDa.hbar_part(0).is_zero()


def test_lift_rejects_non_pi0_input():
    I = fedosov_solve(pure_holomorphic_curvature(random.Random(0), 5), 5)
    with pytest.raises(WeylError):
        flat_section_lift(W.generator(1, 5, 0), I, 5)


def test_injectivity_needs_resolved_solution():
    conn = pure_holomorphic_curvature(random.Random(0), 5)
    I = fedosov_solve(conn, 5)
    with pytest.raises(WeylError):
        injectivity_stages(I, conn, 5)
