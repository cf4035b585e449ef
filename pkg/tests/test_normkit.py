import decimal
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from advrad.errors import DomainError, ZeroVector
from advrad.normkit import (Exponent, c1_const, c2_const, check_group_norm_inequalities, constants,
                            dual_exponent, dual_witness, group_norm, khintchine_const, lp_norm,
                            norm_ratio_factor, norm_ratio_sup)
from advrad.perturb import sample_r_sphere

ORDERS = [1, 1.5, 2, 3, 4, "inf"]
finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)
orders = st.sampled_from(ORDERS)


def naive_norm(v, p):
    """Direct summation oracle in 50-digit decimal arithmetic (no float range issues)."""
    with decimal.localcontext() as ctx:
        ctx.prec = 50
        v = [abs(decimal.Decimal(float(t))) for t in v]
        if p == "inf":
            return float(max(v))
        q = decimal.Decimal(repr(float(p)))
        total = sum((t ** q for t in v), decimal.Decimal(0))
        return float(total ** (1 / q)) if total else 0.0


class TestExponent:
    def test_parses_inf_and_decimals(self):
        assert Exponent("inf").is_inf
        assert Exponent("1.5").inv == Fraction(2, 3)
        assert Exponent(math.inf) == "inf"

    def test_rejects_below_one(self):
        with pytest.raises(DomainError):
            Exponent(0.5)
        with pytest.raises(DomainError):
            Exponent("abc")

    def test_dual_examples(self):
        assert dual_exponent(2) == 2
        assert dual_exponent(1).is_inf
        assert dual_exponent(4).inv == Fraction(3, 4)

    @given(orders)
    def test_dual_is_an_involution(self, p):
        e = Exponent(p)
        assert e.dual().dual() == e
        assert e.inv + e.dual().inv == 1

    def test_ordering_and_json(self):
        assert Exponent(2) < Exponent(3) < Exponent("inf")
        assert Exponent("inf").to_json() == "inf"
        assert Exponent(2).to_json() == 2.0


class TestLpNorm:
    def test_examples(self):
        assert lp_norm([3, 4], 2) == 5
        assert lp_norm([1, -1, 1], "inf") == 1
        assert lp_norm([1, 1, 1, 1], 3) == pytest.approx(4 ** (1 / 3), rel=1e-15)
        assert lp_norm([1, 1, 1, 1], 3) == pytest.approx(naive_norm([1, 1, 1, 1], 3), rel=1e-15)

    @given(arrays(float, st.integers(1, 6), elements=finite), orders)
    def test_matches_direct_summation(self, v, p):
        assert lp_norm(v, p) == pytest.approx(naive_norm(v, p), rel=1e-12, abs=1e-300)

    def test_large_exponent_does_not_overflow(self):
        assert lp_norm([1e200, 1e200], 4) == pytest.approx(1e200 * 2 ** 0.25)

    def test_euclidean_extremes(self):
        assert lp_norm([1e-200, 1e-200], 2) == pytest.approx(math.sqrt(2) * 1e-200, rel=1e-15)
        assert lp_norm([1e200, 1e200], 2) == pytest.approx(math.sqrt(2) * 1e200, rel=1e-15)
        cols = lp_norm(np.array([[1e-200, 3.0], [1e-200, 4.0]]), 2, axis=0)
        np.testing.assert_allclose(cols, [math.sqrt(2) * 1e-200, 5.0], rtol=1e-15)

    def test_zero_and_nonfinite(self):
        assert lp_norm(np.zeros(3), 3) == 0
        with pytest.raises(ValueError):
            lp_norm([np.nan], 2)

    def test_axis(self):
        M = np.array([[3.0, 1.0], [4.0, 0.0]])
        np.testing.assert_allclose(lp_norm(M, 2, axis=0), [5.0, 1.0])


class TestDualWitness:
    def test_examples(self):
        np.testing.assert_allclose(dual_witness([3, 4], 2), [0.6, 0.8])
        v = dual_witness([5, -2], "inf")
        np.testing.assert_array_equal(v, [1, -1])
        assert np.dot([5, -2], v) == 7
        v = dual_witness([1, 1, 1], 1)
        np.testing.assert_array_equal(v, [1, 0, 0])

    def test_zero_vector(self):
        with pytest.raises(ZeroVector):
            dual_witness([0, 0], 2)

    def test_sign_zero_convention(self):
        v = dual_witness([0.0, 2.0, -1.0], 3)
        assert v[0] == 0.0

    @settings(max_examples=300)
    @given(arrays(float, st.integers(1, 6), elements=finite), orders)
    def test_contract(self, u, q):
        if not np.any(np.abs(u) > 1e-6):
            return
        v = dual_witness(u, q)
        qs = Exponent(q).dual()
        assert lp_norm(v, q) == pytest.approx(1.0, abs=1e-12)
        assert float(u @ v) == pytest.approx(lp_norm(u, qs), rel=1e-10)

    @settings(max_examples=300)
    @given(arrays(float, 4, elements=finite), arrays(float, 4, elements=finite), orders)
    def test_holder(self, w, x, p):
        ps = Exponent(p).dual()
        assert abs(float(w @ x)) <= lp_norm(w, p) * lp_norm(x, ps) * (1 + 1e-12) + 1e-300


class TestGroupNorm:
    def test_examples(self):
        assert group_norm(np.eye(2), 2, "inf") == 1
        for q in (1, 1.5, 2, 7, "inf"):
            assert group_norm(np.eye(4), q, 2) == pytest.approx(2.0, rel=1e-15)
        assert group_norm(np.ones((3, 2)), 1, 1) == 6

    @given(arrays(float, (3, 4), elements=finite), orders)
    def test_entrywise_symmetry(self, M, p):
        assert group_norm(M, p, p) == pytest.approx(group_norm(M.T, p, p), rel=1e-12, abs=1e-300)

    def test_identity_block_is_tight(self):
        M = np.zeros((3, 5))
        M[:, :3] = np.eye(3)
        rep = check_group_norm_inequalities(M, 3, 1.5)
        assert all(rep.holds)
        assert rep.norm_m_qp == pytest.approx(rep.ratio_lower * rep.norm_mt_pq, rel=1e-12)

    def test_identity_ratio_for_small_pstar(self):
        for q in (1.2, 1.5, 1.8):
            rep = check_group_norm_inequalities(np.eye(4), 2, q)
            assert rep.norm_mt_pq >= rep.norm_m_qp
            assert rep.norm_m_qp / rep.norm_mt_pq == pytest.approx(4 ** (0.5 - 1 / q), rel=1e-12)

    def test_all_ones_equality(self):
        rep = check_group_norm_inequalities(np.ones((4, 6)), 3, 1.5)
        assert rep.norm_m_qp == pytest.approx(rep.norm_mt_pq, rel=1e-12)

    @settings(max_examples=200)
    @given(st.integers(1, 8), st.integers(1, 8), orders, orders, st.integers(0, 2 ** 32 - 1))
    def test_chains_hold(self, d, m, p, q, seed):
        M = np.random.default_rng(seed).standard_normal((d, m))
        assert all(check_group_norm_inequalities(M, p, q).holds)


class TestNormRatio:
    def test_examples(self):
        assert norm_ratio_factor(2, 2, 5) == 1
        assert norm_ratio_factor("inf", "inf", 4) == pytest.approx(4, rel=1e-15)
        assert norm_ratio_factor(2, "inf", 9) == pytest.approx(3, rel=1e-15)

    @pytest.mark.parametrize("p", ORDERS)
    @pytest.mark.parametrize("r", ORDERS)
    def test_dominates_samples_and_witness_attains(self, p, r):
        d = 6
        law = norm_ratio_factor(p, r, d)
        rs = Exponent(r).dual()
        W = sample_r_sphere(d, p, 10_000, 3)
        assert np.all(lp_norm(W, rs, axis=1) <= law + 1e-12)
        wit = norm_ratio_sup(p, r, d).witness
        assert lp_norm(wit, p) == pytest.approx(1.0, abs=1e-12)
        assert lp_norm(wit, rs) == pytest.approx(law, abs=1e-12)

    def test_large_dimension_stays_finite(self):
        assert math.isfinite(norm_ratio_factor("inf", "inf", 10 ** 12))


class TestConstants:
    def test_at_two(self):
        rep = constants(2)
        assert rep.c1 == 1.0
        assert rep.c2 == pytest.approx(1.0, abs=1e-15)
        assert rep.b_qstar == 1.0
        assert khintchine_const(2.0) == 1.0

    def test_p_eleven_tenths(self):
        rep = constants(1.1)
        assert rep.pstar.value == pytest.approx(11)
        assert 2.0113 <= rep.c2 <= 2.1010
        assert rep.envelope_holds

    def test_c2_against_independent_gamma(self):
        # c2 from the product formula of Gamma at half-integers, independent of lgamma
        for k in range(2, 30):
            q = float(k)
            if k % 2 == 1:
                gamma = math.factorial((k + 1) // 2 - 1)
            else:
                n = k // 2  # Gamma(n + 1/2) = (2n)! sqrt(pi) / (4^n n!)
                gamma = math.factorial(2 * n) * math.sqrt(math.pi) / (4 ** n * math.factorial(n))
            expected = math.sqrt(2) * (gamma / math.sqrt(math.pi)) ** (1 / q)
            assert c2_const(q) == pytest.approx(expected, rel=1e-13)

    def test_khintchine_at_four(self):
        # B_4 = 4 Gamma(5/2)/sqrt(pi) = 3
        assert khintchine_const(4.0) == pytest.approx(3.0, rel=1e-14)

    @given(st.floats(2.0, 60.0))
    def test_envelope(self, q):
        c2 = c2_const(q)
        assert math.exp(-0.5) * math.sqrt(q) <= c2 <= math.exp(-0.5) * math.sqrt(q + 1)
        assert c2 <= c1_const(q) * (1 + 1e-12)

    def test_p_one_rejected(self):
        with pytest.raises(DomainError):
            constants(1)
        with pytest.raises(DomainError):
            c2_const(math.inf)
