import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import basis, contexts, random_poly
from kswkit.errors import BasisOverlap, DomainMismatch, MissingLimbs
from kswkit.rns import (
    RnsBasis,
    RnsPolynomial,
    bconv,
    bconv_fused_t_to_q,
    bconv_two_step,
    crt_reconstruct,
    decompose,
    mod_down,
    zeros,
)


def big_int_value(x: RnsPolynomial):
    """Independent CRT: brute search is too slow, so use Garner's algorithm."""
    qs = x.basis.moduli
    out = []
    for k in range(x.n):
        v, m = 0, 1
        for row, q in zip(x.limbs, qs):
            r = int(row[k])
            t = ((r - v) * pow(m, -1, q)) % q
            v += t * m
            m *= q
        out.append(v - m if v > m // 2 else v)
    return out


@pytest.fixture(scope="module")
def pool8():
    return contexts(28, 8, 14)


def test_basis_constants(pool8):
    b = basis(pool8[:5], "Q")
    assert b.check_constants()
    assert b.product == np.prod([int(q) for q in b.moduli], dtype=object)
    with pytest.raises(ValueError):
        RnsBasis((pool8[0], pool8[0]))
    assert basis(pool8[:2], "Q").disjoint(basis(pool8[2:4], "T"))


def test_roles(pool8):
    b = basis(pool8[:2], "P") + basis(pool8[2:5], "Q")
    assert len(b.with_role("Q")) == 3
    assert b.with_role("P").moduli == tuple(c.q for c in pool8[:2])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(-(2**100), 2**100), min_size=8, max_size=8))
def test_decompose_reconstruct_roundtrip(vals):
    b = basis(contexts(28, 8, 5), "Q")
    assert crt_reconstruct(decompose(vals, b)) == vals


def test_crt_matches_garner(pool8):
    b = basis(pool8[:4], "Q")
    x = random_poly(np.random.default_rng(0), b, 8)
    assert crt_reconstruct(x) == big_int_value(x)


def test_single_limb_centered(pool8):
    b = basis(pool8[:1], "Q")
    q = b.moduli[0]
    x = RnsPolynomial(np.array([[0, 1, q // 2, q // 2 + 1, q - 1, 5, 6, 7]]), b)
    assert crt_reconstruct(x) == [0, 1, q // 2, q // 2 + 1 - q, -1, 5, 6, 7]


def test_zero_converts_to_zero(pool8):
    a, t = basis(pool8[:3], "Q"), basis(pool8[3:5], "T")
    assert not bconv(zeros(a, 8), t).limbs.any()
    assert not bconv_fused_t_to_q(zeros(t, 8), a).limbs.any()
    assert not mod_down(zeros(t + a, 8), t, a).limbs.any()


def test_single_limb_source_is_exact(pool8):
    a, b = basis(pool8[:1], "Q"), basis(pool8[1:3], "T")
    q = a.moduli[0]
    v = [0, 1, 2, q // 2, -(q // 2), -1, 77, -77]
    out = crt_reconstruct(bconv(decompose(v, a), b))
    assert out == v


def test_bconv_error_n8_three_to_two(pool8):
    a, b = basis(pool8[:3], "Q"), basis(pool8[3:5], "P")
    rng = np.random.default_rng(7)
    for _ in range(50):
        x = random_poly(rng, a, 8)
        v = big_int_value(x)
        got = big_int_value(bconv(x, b))
        for vi, gi in zip(v, got):
            # the converted value is v + e*A with |e| <= 2; check every e against b
            ok = [e for e in range(-2, 3) if (vi + e * a.product - gi) % b.product == 0]
            assert ok, (vi, gi)


def test_bconv_guards(pool8):
    a = basis(pool8[:3], "Q")
    x = random_poly(np.random.default_rng(1), a, 8)
    with pytest.raises(BasisOverlap):
        bconv(x, basis(pool8[2:4], "P"))
    with pytest.raises(DomainMismatch):
        bconv(x.to_eval(), basis(pool8[4:6], "P"))
    with pytest.raises(MissingLimbs):
        x.restrict(basis(pool8[5:6], "Q"))


def test_fused_error_divisible_by_t(pool8):
    t, q = basis(pool8[:2], "T"), basis(pool8[6:13], "Q")
    rng = np.random.default_rng(2)
    for _ in range(20):
        x = random_poly(rng, t, 8)
        v = big_int_value(x)
        got = crt_reconstruct(bconv_fused_t_to_q(x, q))
        assert all((g - vi) % t.product == 0 for g, vi in zip(got, v))


def test_two_step_error_has_p_component(pool8):
    t, p, q = basis(pool8[:2], "T"), basis(pool8[2:6], "P"), basis(pool8[6:13], "Q")
    rng = np.random.default_rng(3)
    wins, total, p_part = 0, 0, 0
    for _ in range(40):
        x = random_poly(rng, t, 8)
        v = big_int_value(x)
        f = crt_reconstruct(bconv_fused_t_to_q(x, q))
        s = crt_reconstruct(bconv_two_step(x, p, q))
        for vi, fi, si in zip(v, f, s):
            total += 1
            wins += abs(fi - vi) <= abs(si - vi)
            assert (si - fi) % p.product == 0
            p_part += si != fi
    assert wins / total >= 0.95
    assert p_part > 0


def test_mod_down_exact_multiple(pool8):
    p, q = basis(pool8[:2], "P"), basis(pool8[2:6], "Q")
    rng = np.random.default_rng(4)
    y = [int(v) * 1000 + 7 for v in rng.integers(-(10**17), 10**17, 8)]
    x = decompose([p.product * v for v in y], p + q)
    assert crt_reconstruct(mod_down(x, p, q)) == y


def test_mod_down_rounding_error(pool8):
    p, q = basis(pool8[:2], "P"), basis(pool8[2:6], "Q")
    rng = np.random.default_rng(5)
    x = random_poly(rng, p + q, 8)
    v = big_int_value(x)
    out = crt_reconstruct(mod_down(x, p, q))
    for vi, oi in zip(v, out):
        # (v - [v]_P - e*P)/P with |e| <= 1 is within 2 of v/P
        assert abs(oi * p.product - vi) <= 2 * p.product


def test_polynomial_arithmetic(pool8):
    b = basis(pool8[:3], "Q")
    rng = np.random.default_rng(6)
    x, y = random_poly(rng, b, 8), random_poly(rng, b, 8)
    assert crt_reconstruct((x + y) - y) == crt_reconstruct(x)
    with pytest.raises(DomainMismatch):
        x * y
    xe = x.to_eval()
    assert np.array_equal(xe.to_coeff().limbs, x.limbs)
