"""Enumeration-backed expectations and the derivative identity."""

import math
import random

import numpy as np
import pytest

from perclr import exact_enumeration as ee
from perclr import kernel
from perclr.errors import CapacityError, InvalidInputError

# Frozen oracles (hand-derived, cross-checked in module docately tests below):
#   path {0,1,2} + optional {0,2}: E[D(0,2)] = 2 - p, p(1,k=2) = 1/4
#   n=4 box at beta=1: E[D(0,3)] = 1/9 + (8/9)*(2*(7/16) + 3*(9/16)) = 43/18
E_PATH3_BETA1 = 1.75
E_BOX4_BETA1 = 43.0 / 18.0
RUSSO_PATH3_BETA1 = -0.21576155433883568
DERIV_N3 = -0.2876820724517809
DERIV_N4 = -0.8109302162163288
RATIO_2_8 = -0.644527624242397
RATIO_2_16 = -0.8196809073451999


def path3():
    return ee.path_box_model(3), ee.distance_functional(0, 2)


class TestExactExpectation:
    def test_constant_functional(self):
        model = ee.path_box_model(5)
        one = ee.Functional(name="one", evaluate=lambda m, es: 1.0)
        for beta in (0.0, 0.7, 3.0):
            assert ee.exact_expectation(model, one, beta) == pytest.approx(1.0, abs=1e-12)

    def test_path3_distance(self):
        model, f = path3()
        assert ee.exact_expectation(model, f, 1.0) == pytest.approx(E_PATH3_BETA1, abs=1e-12)

    def test_box4_distance(self):
        model = ee.path_box_model(4)
        f = ee.distance_functional(0, 3)
        assert ee.exact_expectation(model, f, 1.0) == pytest.approx(E_BOX4_BETA1, abs=1e-12)

    def test_indicator_product_factorizes(self):
        """Independence sanity: E[1_e1 * 1_e2] = p1 * p2."""
        model = ee.path_box_model(5)
        e1, e2 = model.optional_edges[0], model.optional_edges[-1]

        def both(m, open_edges):
            return float(e1 in open_edges and e2 in open_edges)

        f = ee.Functional(name="both", evaluate=both)
        beta = 1.3
        p = model.edge_probs(beta)
        expected = p[0] * p[len(model.optional_edges) - 1]
        assert ee.exact_expectation(model, f, beta) == pytest.approx(expected, abs=1e-12)

    def test_guard(self):
        with pytest.raises(CapacityError):
            ee.path_box_model(9)  # 28 optional edges


class TestRussoDerivative:
    def test_path3_value(self):
        model, f = path3()
        assert ee.russo_derivative(model, f, 1.0) == pytest.approx(RUSSO_PATH3_BETA1, abs=1e-12)

    def test_constant_functional_zero(self):
        model = ee.path_box_model(5)
        c = ee.Functional(name="c", evaluate=lambda m, es: 4.25)
        assert ee.russo_derivative(model, c, 1.0) == pytest.approx(0.0, abs=1e-14)

    def test_monotone_increasing_indicator_nonnegative(self):
        """Classical Russo sign: increasing events have nonnegative derivative."""
        model = ee.path_box_model(5)
        probe = model.optional_edges[2]
        ind = ee.Functional(name="ind", evaluate=lambda m, es: float(probe in es))
        for beta in (0.0, 0.4, 1.0, 2.5):
            assert ee.russo_derivative(model, ind, beta) >= -1e-14

    def test_negative_distance_is_monotone(self):
        """f = -D(u,v) increases with edges, so its derivative is >= 0."""
        model = ee.path_box_model(6)
        f = ee.distance_functional(0, 5)
        neg = ee.Functional(name="negD", evaluate=lambda m, es: -f.evaluate(m, es))
        for beta in (0.3, 1.0, 2.0):
            assert ee.russo_derivative(model, neg, beta) >= 0.0

    def test_prob_derivative_bracket_on_model_edges(self):
        model = ee.path_box_model(8)
        for beta in (0.3, 1.0, 2.0):
            dv = model.edge_prob_derivatives(beta)
            for (u, v), d in zip(model.optional_edges, dv):
                k = abs(v - u)
                assert math.exp(-beta) * (k + 1) ** -2 <= d + 1e-15
                assert d <= (k - 1) ** -2 + 1e-15


class TestVerifyRusso:
    def test_path3_small_step(self):
        model, f = path3()
        report = ee.verify_russo(model, f, 1.0, h=1e-4)
        assert report.mode == "central"
        assert report.abs_error < 1e-7

    def test_second_order_convergence(self):
        """Halving h roughly quarters the central-difference error."""
        model = ee.path_box_model(4)
        f = ee.distance_functional(0, 3)
        for h in (4e-2, 2e-2, 1e-2):
            e1 = ee.verify_russo(model, f, 1.0, h=h).abs_error
            e2 = ee.verify_russo(model, f, 1.0, h=h / 2).abs_error
            assert 3.5 <= e1 / e2 <= 4.5

    def test_beta_zero_forward_fallback(self):
        model = ee.path_box_model(4)
        f = ee.distance_functional(0, 3)
        report = ee.verify_russo(model, f, 0.0, h=1e-5)
        assert report.mode == "forward"
        assert report.abs_error < 1e-4
        assert report.analytic == pytest.approx(ee.lambda_small_beta_derivative(4), abs=1e-12)

    def test_randomized_suite_sample(self):
        """15-model slice of the randomized suite at three betas."""
        for model_id, model, f in ee.default_russo_suite(count=15):
            for beta in (0.3, 1.0, 2.0):
                report = ee.verify_russo(model, f, beta, h=1e-4)
                assert report.abs_error < 1e-6, (model_id, beta)


class TestLambdaSmallBetaDerivative:
    def test_known_small_n(self):
        assert ee.lambda_small_beta_derivative(3) == pytest.approx(DERIV_N3, abs=1e-12)
        assert ee.lambda_small_beta_derivative(4) == pytest.approx(DERIV_N4, abs=1e-12)

    def test_matches_enumeration_analytic_at_zero(self):
        for n in range(3, 9):
            model = ee.path_box_model(n)
            f = ee.distance_functional(0, n - 1)
            assert ee.russo_derivative(model, f, 0.0) == pytest.approx(
                ee.lambda_small_beta_derivative(n), abs=1e-10
            )

    def test_frozen_ratios(self):
        n8, n16 = 2 ** 8, 2 ** 16
        r8 = ee.lambda_small_beta_derivative(n8) / (n8 * math.log(n8))
        r16 = ee.lambda_small_beta_derivative(n16) / (n16 * math.log(n16))
        assert r8 == pytest.approx(RATIO_2_8, abs=1e-12)
        assert r16 == pytest.approx(RATIO_2_16, abs=1e-12)

    def test_n_too_small(self):
        with pytest.raises(InvalidInputError):
            ee.lambda_small_beta_derivative(2)


class TestModelValidation:
    def test_nearest_neighbor_optional_rejected(self):
        with pytest.raises(InvalidInputError):
            ee.FiniteModel(
                vertices=(0, 1, 2),
                optional_edges=((0, 1),),
                forced_edges=((1, 2),),
            )

    def test_unknown_vertex_rejected(self):
        with pytest.raises(InvalidInputError):
            ee.FiniteModel(
                vertices=(0, 1, 2),
                optional_edges=((0, 9),),
                forced_edges=(),
            )

    def test_random_models_valid_and_connected(self):
        rng = random.Random(77)
        for _ in range(40):
            model, f = ee.random_finite_model(rng)
            assert 1 <= len(model.optional_edges) <= 8
            # every functional is total on every assignment
            table = ee.functional_table(model, f)
            assert np.all(np.isfinite(table))
