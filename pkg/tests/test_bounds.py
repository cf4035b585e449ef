import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from advrad.bounds import (MarginBoundInputs, adversarial_linear_bounds, covering_size_bound,
                           covering_size_log, k_const, linear_rc_bounds, margin_loss,
                           net_lipschitz_bound, net_shatter_bound, pruned_indices, relu_bounds,
                           robust_margin_bound)
from advrad.errors import DomainError, HypothesisViolated
from advrad.normkit import c1_const, c2_const
from advrad.perturb import PerturbSpec
from advrad.rademacher import LinearFamilySpec, NetFamilySpec, Sample

ORDERS = [1, 1.5, 2, 3, "inf"]
seeds = st.integers(0, 2 ** 32 - 1)


def gaussian_sample(d, m, seed, labels=None):
    g = np.random.default_rng(seed)
    y = np.where(np.arange(m) % 2 == 0, 1.0, -1.0) if labels is None else np.asarray(labels, float)
    return Sample(g.standard_normal((d, m)), y)


class TestLinearRc:
    @pytest.mark.parametrize("seed", range(5))
    def test_p2_new_equals_classical(self, seed):
        s = gaussian_sample(3, 7, seed)
        rep = linear_rc_bounds(s, LinearFamilySpec(2, 1.5))
        frob = 1.5 / 7 * float(np.sqrt((s.X ** 2).sum()))
        assert rep["new_bound"] == pytest.approx(rep["classical_bound"], rel=1e-12)
        assert rep.value == pytest.approx(frob, rel=1e-12)

    def test_p1_identity(self):
        rep = linear_rc_bounds(Sample(np.eye(4), [1, -1, 1, -1]), LinearFamilySpec(1))
        assert rep.value == pytest.approx(0.25 * math.sqrt(2 * math.log(8)), rel=1e-14)
        assert rep["classical_bound"] == pytest.approx(math.sqrt(2 * math.log(8) / 4), rel=1e-14)

    @pytest.mark.parametrize("p", [1.1, 1.5, 1.9, 2])
    def test_new_not_above_classical(self, p):
        for seed in range(100):
            rep = linear_rc_bounds(gaussian_sample(4, 4, seed), LinearFamilySpec(p))
            assert rep["new_bound"] <= rep["classical_bound"] * (1 + 1e-12)
            assert rep["new_is_smaller"]

    def test_mid_range_against_direct_formula(self):
        s = gaussian_sample(3, 5, 11)
        q = 3.0  # dual of 1.5
        feature = np.sqrt((s.X ** 2).sum(axis=1))
        expected = 2.0 / 5 * c2_const(q) * float((feature ** q).sum() ** (1 / q))
        point_norms = ((np.abs(s.X) ** q).sum(axis=0)) ** (1 / q)
        classical = 2.0 / 5 * c1_const(q) * float(np.sqrt((point_norms ** 2).sum()))
        rep = linear_rc_bounds(s, LinearFamilySpec(1.5, 2.0))
        assert rep.value == pytest.approx(expected, rel=1e-12)
        assert rep["classical_bound"] == pytest.approx(classical, rel=1e-12)

    def test_large_p_has_no_classical_bound(self):
        rep = linear_rc_bounds(gaussian_sample(3, 5, 0), LinearFamilySpec(3))
        assert "classical_bound" not in rep.components


class TestAdversarialLinear:
    def test_zero_budget_collapses(self):
        s = gaussian_sample(3, 6, 1)
        rep = adversarial_linear_bounds(s, LinearFamilySpec(2), PerturbSpec(2, 0.0), clean=0.37)
        assert rep["upper"] == rep["lower"] == 0.37

    def test_dimension_term_example(self):
        s = gaussian_sample(4, 100, 2)
        rep = adversarial_linear_bounds(s, LinearFamilySpec("inf"), PerturbSpec("inf", 0.1))
        assert rep["dimension_term"] == pytest.approx(0.02, rel=1e-14)

    @pytest.mark.parametrize("p,r", [(1, 1), (2, 2), (1, "inf"), (1.5, 3)])
    def test_no_dimension_growth_when_exponents_large(self, p, r):
        s = gaussian_sample(6, 25, 3)
        rep = adversarial_linear_bounds(s, LinearFamilySpec(p, 2.0), PerturbSpec(r, 0.3))
        assert rep["dimension_factor"] == 1.0
        assert rep["dimension_term"] == pytest.approx(0.3 * 2.0 / (2 * 5), rel=1e-14)

    @settings(max_examples=60, deadline=None)
    @given(seeds, st.sampled_from(ORDERS), st.sampled_from(ORDERS), st.floats(0, 2))
    def test_ordering_and_components(self, seed, p, r, eps):
        s = gaussian_sample(3, 6, seed % 10_000)
        rep = adversarial_linear_bounds(s, LinearFamilySpec(p), PerturbSpec(r, eps))
        assert rep["upper"] >= rep["lower"] >= 0
        assert rep.value == rep["upper"]
        assert abs(rep["upper"] - (rep["clean_term"] + rep["dimension_term"])) <= 1e-12

    @settings(max_examples=60, deadline=None)
    @given(seeds, st.sampled_from(ORDERS), st.sampled_from(ORDERS), st.floats(0, 2), st.floats(0, 2),
           st.floats(0.1, 3), st.floats(0, 3))
    def test_monotone_in_eps_and_W(self, seed, p, r, e1, e2, W, dW):
        s = gaussian_sample(3, 6, seed % 10_000)
        lo, hi = sorted((e1, e2))
        a = adversarial_linear_bounds(s, LinearFamilySpec(p, W), PerturbSpec(r, lo))
        b = adversarial_linear_bounds(s, LinearFamilySpec(p, W), PerturbSpec(r, hi))
        c = adversarial_linear_bounds(s, LinearFamilySpec(p, W + dW), PerturbSpec(r, lo))
        for key in ("upper", "lower"):
            assert b[key] >= a[key] and c[key] >= a[key]

    def test_mc_mode_uses_the_estimate(self):
        s = gaussian_sample(3, 10, 4)
        rep = adversarial_linear_bounds(s, LinearFamilySpec(2), PerturbSpec(2, 0.1), mode="mc",
                                        draws=300, seed=1)
        assert 0 < rep["clean_term"] <= linear_rc_bounds(s, LinearFamilySpec(2)).value * 1.2
        with pytest.raises(ValueError):
            adversarial_linear_bounds(s, LinearFamilySpec(2), PerturbSpec(2, 0.1), mode="exact")


class TestRelu:
    def test_all_pruned_gives_zero_clean_term(self):
        s = Sample(np.array([[0.1, 0.0], [0.0, -0.2]]), [1, 1])
        rep = relu_bounds(s, LinearFamilySpec(2), PerturbSpec(2, 0.5))
        assert pruned_indices(s, PerturbSpec(2, 0.5)).size == 0
        assert rep["clean_term"] == 0.0 and rep["pruned_size"] == 0

    def test_single_point_lower(self):
        s = Sample(np.array([[1.0], [0.0]]), [1])
        rep = relu_bounds(s, LinearFamilySpec(2), PerturbSpec(2, 0.0))
        assert rep["lower"] == pytest.approx(1 / (2 * math.sqrt(2)), rel=1e-12)

    def test_zero_delta_refined_lower_vanishes(self):
        rep = relu_bounds(gaussian_sample(3, 8, 1), LinearFamilySpec(1.5), PerturbSpec(3, 0.2))
        assert rep["refined_lower"] == 0.0 and rep["refined_lower_as_printed"] == 0.0

    def test_refined_lower_formula(self):
        # p = r = 2, d = 2: the witness is e1 and the dual norm 1
        X = np.array([[1.0, 2.0, -1.0, 0.5], [0.0, 1.0, 0.0, 3.0]])
        s = Sample(X, [1, 1, -1, -1])
        eps, delta = 0.3, 0.5
        rep = relu_bounds(s, LinearFamilySpec(2), PerturbSpec(2, eps), delta_refine=delta)
        margin = X[0] - (1 + delta * s.y) * s.y * eps
        t = int(np.count_nonzero(margin > 0))
        assert rep["refined_set_size"] == t
        pre = delta * eps / (2 * math.sqrt(2) * 4)
        assert rep["refined_lower"] == pytest.approx(pre * math.sqrt(t), rel=1e-14)
        assert rep["refined_lower_as_printed"] == pytest.approx(pre * t, rel=1e-14)

    def test_components_and_ordering(self):
        for seed in range(5):
            rep = relu_bounds(gaussian_sample(3, 8, seed), LinearFamilySpec(2), PerturbSpec(2, 0.2))
            assert abs(rep.value - (rep["clean_term"] + rep["dimension_term"])) <= 1e-12
            assert rep["upper"] >= rep["lower"] >= 0

    def test_monotone_in_eps_while_pruning_is_fixed(self):
        # all labels -1: nothing is pruned, so growing eps only grows the budget term
        s = gaussian_sample(3, 8, 5, labels=-np.ones(8))
        ups = [relu_bounds(s, LinearFamilySpec(1.5), PerturbSpec(3, e))["upper"] for e in (0, 0.1, 0.5, 2)]
        assert ups == sorted(ups)

    def test_monotone_in_W(self):
        s = gaussian_sample(3, 8, 6)
        a = relu_bounds(s, LinearFamilySpec(2, 1.0), PerturbSpec(2, 0.3))
        b = relu_bounds(s, LinearFamilySpec(2, 2.5), PerturbSpec(2, 0.3))
        assert b["upper"] >= a["upper"] and b["lower"] >= a["lower"]

    def test_negative_delta_rejected(self):
        with pytest.raises(ValueError):
            relu_bounds(gaussian_sample(2, 3, 0), LinearFamilySpec(2), PerturbSpec(2, 0.1), delta_refine=-1)


class TestNetLipschitz:
    def test_single_point_example(self):
        s = Sample(np.array([[1.0]]), [1])
        rep = net_lipschitz_bound(s, NetFamilySpec(2, 1, 1, 1), PerturbSpec(2, 0.0))
        expected = 1 + math.sqrt(2 * math.log(36))
        assert rep.value == pytest.approx(expected, rel=1e-14)
        assert rep.value == pytest.approx(3.67713, abs=5e-6)
        assert rep["log9m"] == pytest.approx(1 + math.sqrt(2 * math.log(9)), rel=1e-14)
        assert rep["log36m"] == pytest.approx(1 + math.sqrt(2 * math.log(36)), rel=1e-14)

    def test_doubling_eps(self):
        s = gaussian_sample(3, 16, 2)
        spec = NetFamilySpec(2, 1.5, 2.0, 3)
        a = net_lipschitz_bound(s, spec, PerturbSpec("inf", 0.1))
        b = net_lipschitz_bound(s, spec, PerturbSpec("inf", 0.2))
        fac = 3 ** (1 - 0.5)  # d^(1 - 1/r - 1/p) with r = inf, p = 2
        step = 1.5 * 2.0 * fac * 0.1 / 4 * (1 + math.sqrt(3 * 4 * math.log(36)))
        assert b.value - a.value == pytest.approx(step, rel=1e-12)

    def test_leaky_matches_relu(self):
        s = gaussian_sample(3, 16, 2)
        a = net_lipschitz_bound(s, NetFamilySpec(2, 1, 1, 2, "relu"), PerturbSpec(2, 0.1))
        b = net_lipschitz_bound(s, NetFamilySpec(2, 1, 1, 2, "leaky_relu(0.1)"), PerturbSpec(2, 0.1))
        assert a.value == b.value

    @settings(max_examples=50, deadline=None)
    @given(seeds, st.sampled_from(ORDERS), st.sampled_from(ORDERS), st.floats(0, 2), st.floats(0, 2),
           st.floats(0.1, 3), st.floats(0, 3), st.floats(0.1, 3), st.floats(0, 3))
    def test_monotone(self, seed, p, r, e1, e2, W, dW, L, dL):
        s = gaussian_sample(2, 5, seed % 10_000)
        lo, hi = sorted((e1, e2))
        base = net_lipschitz_bound(s, NetFamilySpec(p, W, L, 2), PerturbSpec(r, lo))
        assert base.value >= 0
        assert abs(base.value - base["scale"] * base["log_term"]) <= 1e-12 * max(1.0, base.value)
        for other in (net_lipschitz_bound(s, NetFamilySpec(p, W, L, 2), PerturbSpec(r, hi)),
                      net_lipschitz_bound(s, NetFamilySpec(p, W + dW, L, 2), PerturbSpec(r, lo)),
                      net_lipschitz_bound(s, NetFamilySpec(p, W, L + dL, 2), PerturbSpec(r, lo))):
            for key in ("log36", "log9m", "log36m"):
                assert other[key] >= base[key]


class TestNetShatter:
    def test_k_const(self):
        assert k_const(2, 7) == 1.0
        assert k_const(3, 7) == 1.0
        assert k_const(1, 4) == pytest.approx(math.sqrt(2 * math.log(8)), rel=1e-15)
        assert k_const(1.5, 4) == c2_const(3.0)

    def test_unit_factors(self):
        s = gaussian_sample(3, 9, 1)
        rep = net_shatter_bound(s, NetFamilySpec(2), PerturbSpec(2, 0.0), 1, 1)
        expected = float(np.sqrt((np.abs(s.X).max(axis=1) ** 2).sum())) / 3
        assert rep.value == pytest.approx(expected, rel=1e-12)
        assert rep["partition_counts_are_lower_estimates"] is True

    def test_two_norm_variant(self):
        s = gaussian_sample(3, 9, 1)
        rep = net_shatter_bound(s, NetFamilySpec(2), PerturbSpec(2, 0.0), 2, 3, variant="two_norm")
        expected = float(np.sqrt((s.X ** 2).sum())) / 3 * 6
        assert rep.value == pytest.approx(expected, rel=1e-12)

    def test_multiplier_and_components(self):
        s = gaussian_sample(3, 9, 1)
        a = net_shatter_bound(s, NetFamilySpec(1.5, 2, 3, 4), PerturbSpec(3, 0.01), 1, 1)
        b = net_shatter_bound(s, NetFamilySpec(1.5, 2, 3, 4), PerturbSpec(3, 0.01), 5, 4)
        assert b.value == pytest.approx(10 * a.value, rel=1e-12)
        assert abs(b.value - b["scale"] * b["multiplier"]) <= 1e-12 * b.value

    def test_hypothesis_violation_names_points(self):
        X = np.array([[1.0, 0.01, 2.0, 0.0], [0.0, 0.0, 0.0, 0.05]])
        with pytest.raises(HypothesisViolated) as info:
            net_shatter_bound(Sample(X, [1, -1, 1, 1]), NetFamilySpec(2), PerturbSpec(2, 0.1), 1, 1)
        assert info.value.indices == [1, 3]
        assert "||x_i||_r >= eps" in str(info.value)

    def test_domain(self):
        s = gaussian_sample(2, 4, 0)
        for pert in (PerturbSpec(1, 0.0), PerturbSpec("inf", 0.0)):
            with pytest.raises(DomainError):
                net_shatter_bound(s, NetFamilySpec(2), pert, 1, 1)
        with pytest.raises(DomainError):
            net_shatter_bound(s, NetFamilySpec(2, activation="tanh"), PerturbSpec(2, 0.0), 1, 1)
        with pytest.raises(ValueError):
            net_shatter_bound(s, NetFamilySpec(2), PerturbSpec(2, 0.0), 0, 1)
        with pytest.raises(ValueError):
            net_shatter_bound(s, NetFamilySpec(2), PerturbSpec(2, 0.0), 1, 1, variant="frobenius")

    @settings(max_examples=50, deadline=None)
    @given(seeds, st.sampled_from([1, 1.5, 2, 3]), st.sampled_from([1.5, 2, 3]), st.floats(0, 0.3),
           st.floats(0, 0.3), st.floats(0.1, 3), st.floats(0, 3), st.sampled_from(["infty_norm", "two_norm"]))
    def test_monotone(self, seed, p, r, e1, e2, W, dW, variant):
        g = np.random.default_rng(seed)
        X = g.standard_normal((2, 5))
        X = X / np.linalg.norm(X, axis=0) * g.uniform(1, 2, 5)  # every point well outside the budget
        s = Sample(X, [1, -1, 1, -1, 1])
        lo, hi = sorted((e1, e2))
        base = net_shatter_bound(s, NetFamilySpec(p, W, 1.0, 2), PerturbSpec(r, lo), 3, 2, variant)
        assert base.value >= 0
        for other in (net_shatter_bound(s, NetFamilySpec(p, W, 1.0, 2), PerturbSpec(r, hi), 3, 2, variant),
                      net_shatter_bound(s, NetFamilySpec(p, W + dW, 1.0, 2), PerturbSpec(r, lo), 3, 2, variant),
                      net_shatter_bound(s, NetFamilySpec(p, W, 1.0 + dW, 2), PerturbSpec(r, lo), 3, 2, variant)):
            assert other.value >= base.value


class TestMargin:
    def test_loss_endpoints(self):
        assert margin_loss(2.0, 2.0) == 0.0
        assert margin_loss(0.0, 2.0) == 1.0
        assert margin_loss(1.0, 2.0) == 0.5
        np.testing.assert_array_equal(margin_loss([-1.0, 5.0], 2.0), [1.0, 0.0])

    def test_confidence_example(self):
        inputs = MarginBoundInputs(rho=1.0, delta=2 / math.e ** 2, loss_cap=1.0, complexity=0.0)
        assert robust_margin_bound(0.0, inputs, 2) == pytest.approx(3 / math.sqrt(2), rel=1e-14)

    def test_large_margin_drops_complexity(self):
        inputs = MarginBoundInputs(rho=1e15, delta=0.05, loss_cap=1.0, complexity=4.0)
        conf = 3 * math.sqrt(math.log(2 / 0.05) / 20)
        assert robust_margin_bound(0.1, inputs, 10) == pytest.approx(0.1 + conf, rel=1e-12)

    def test_validation(self):
        for bad in (dict(rho=0.0), dict(delta=1.0), dict(delta=0.0), dict(loss_cap=-1.0), dict(complexity=-1.0)):
            kw = dict(rho=1.0, delta=0.1, loss_cap=1.0, complexity=0.0)
            kw.update(bad)
            with pytest.raises(ValueError):
                MarginBoundInputs(**kw)
        with pytest.raises(ValueError):
            robust_margin_bound(0.0, MarginBoundInputs(1.0, 0.1, 1.0, 0.0), 0)


class TestCovering:
    def test_examples(self):
        assert covering_size_bound(0.5 / 3, 0.5, 7) == pytest.approx(1.0, rel=1e-12)
        assert covering_size_bound(1.0, 1.0, 2) == pytest.approx(9.0, rel=1e-14)
        for m, d in ((4, 3), (25, 2), (100, 5)):
            lam = 2.5
            got = covering_size_bound(lam, lam / (2 * math.sqrt(m)), d)
            assert got == pytest.approx((6 * math.sqrt(m)) ** d, rel=1e-12)

    def test_overflow_goes_to_log(self):
        assert covering_size_bound(1.0, 1e-6, 200) == math.inf
        assert covering_size_log(1.0, 1e-6, 200) == pytest.approx(200 * math.log(3e6), rel=1e-14)

    def test_validation(self):
        with pytest.raises(ValueError):
            covering_size_bound(0.0, 1.0, 2)


def test_report_serializes_flat():
    s = gaussian_sample(3, 6, 0)
    reports = [linear_rc_bounds(s, LinearFamilySpec(1.5)),
               adversarial_linear_bounds(s, LinearFamilySpec(2), PerturbSpec("inf", 0.1)),
               net_lipschitz_bound(s, NetFamilySpec(2), PerturbSpec(2, 0.1)),
               net_shatter_bound(s, NetFamilySpec(2), PerturbSpec(2, 0.0), 2, 2)]
    for rep in reports:
        obj = json.loads(rep.to_json())
        assert obj["value"] == rep.value and len(obj["inputs_digest"]) == 64
        assert not any(isinstance(v, (dict, list)) for v in obj.values())


def test_digest_tracks_inputs():
    s = gaussian_sample(3, 6, 0)
    a = adversarial_linear_bounds(s, LinearFamilySpec(2), PerturbSpec(2, 0.1))
    b = adversarial_linear_bounds(s, LinearFamilySpec(2), PerturbSpec(2, 0.2))
    c = adversarial_linear_bounds(s, LinearFamilySpec(2), PerturbSpec(2, 0.1))
    assert a.inputs_digest != b.inputs_digest and a.inputs_digest == c.inputs_digest
