import json
import math

import numpy as np
import pytest

from bbgamma.data import Dataset
from bbgamma.model import (BBHyper, LinearModel, asymptotic_init, grad_hyper, grad_weights, log_likelihood,
                           mu_bbgamma, predict, rates)
from helpers import central_diff, naive_loglik, random_dataset, rel_err


def random_hyper(rng, gamma_max=16.0):
    a, b, n = rng.uniform(0.2, 5.0, size=3) * np.array([1.0, 1.0, 10.0])
    return BBHyper.from_counts(a, b, n, rng.uniform(0.5, gamma_max))


class TestBBHyper:
    def test_counts_and_mixing_views_agree(self):
        h = BBHyper.from_counts(1, 1, 100)
        assert h.w == pytest.approx(2 / 102)
        assert h.theta_b == 0.5
        assert h.a == pytest.approx(1 / 102)
        assert h.b == pytest.approx(100 / 102)
        assert (h.alpha, h.beta, h.n) == (1.0, 1.0, 100.0)

    def test_asymmetric_plateaus(self):
        # alpha = n, beta = 2n
        h = BBHyper.from_counts(5.0, 10.0, 5.0)
        assert h.w == pytest.approx(0.75)
        assert h.theta_b == pytest.approx(1 / 3)
        assert h.a == pytest.approx(0.25)
        assert h.a + h.b == pytest.approx(0.5)

    def test_mixing_view_normalizes_counts(self):
        h = BBHyper.from_mixing(0.3, 0.25)
        assert h.alpha + h.beta + h.n == pytest.approx(1.0)
        assert (h.alpha + h.beta) / (h.alpha + h.beta + h.n) == pytest.approx(0.3)

    @pytest.mark.parametrize("w,theta", [(1.0, 0.5), (-0.1, 0.5), (0.5, 1.5)])
    def test_invalid(self, w, theta):
        with pytest.raises(ValueError):
            BBHyper(w, theta)

    def test_json_round_trip(self, rng):
        for _ in range(20):
            h = random_hyper(rng)
            back = BBHyper.from_json(json.loads(json.dumps(h.to_json())))
            assert back == h and back.counts == h.counts


class TestMu:
    def test_midpoint(self):
        m = LinearModel(np.array([1.0, -1.0, 0.0]))
        mu = mu_bbgamma(m, np.array([2.0, 2.0]), BBHyper.weak())
        assert mu == pytest.approx(0.5, abs=1e-12)

    def test_w_zero_is_sigmoid(self, rng):
        m = LinearModel(rng.normal(size=4))
        X = rng.normal(size=(10, 3))
        s = X @ m.weights[:-1] + m.weights[-1]
        np.testing.assert_allclose(mu_bbgamma(m, X, BBHyper(0.0, 0.5, 3.0)), 1 / (1 + np.exp(-3.0 * s)),
                                   rtol=1e-14)

    def test_range_and_monotone(self, rng):
        h = BBHyper.from_counts(5.0, 10.0, 5.0, 4.0)
        m = LinearModel(np.array([1.0, 0.0]))
        mu = mu_bbgamma(m, np.linspace(-50, 50, 1001)[:, None], h)
        assert np.all(mu >= h.a) and np.all(mu <= h.a + h.b)
        assert np.all(np.diff(mu) >= 0)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            mu_bbgamma(LinearModel(np.zeros(3)), np.zeros(5), BBHyper.weak())


class TestLogLikelihood:
    def test_single_example_at_midpoint(self):
        data = Dataset(np.array([[0.0]]), np.array([1]))
        m = LinearModel(np.array([2.0, 0.0]))
        lam = 0.3
        want = math.log(0.5) - lam / 2 * 4.0
        assert log_likelihood(data, m, BBHyper(0.0, 0.5), lam) == pytest.approx(want, abs=1e-12)

    def test_reduces_to_logistic(self, rng):
        data = random_dataset(rng, 30, 4)
        m = LinearModel(rng.normal(size=5))
        s = data.X @ m.weights[:-1] + m.weights[-1]
        t = data.t
        want = -np.sum(np.logaddexp(0.0, -t * s))
        assert log_likelihood(data, m, BBHyper.logistic()) == pytest.approx(want, abs=1e-12)

    def test_matches_naive_sum(self, rng):
        for _ in range(10):
            data = random_dataset(rng, 20, 5)
            m = LinearModel(rng.normal(size=6))
            h = random_hyper(rng)
            lam = rng.uniform(0, 2)
            want = naive_loglik(data.X, data.y, m.weights, h.a, h.b, h.gamma, lam)
            assert log_likelihood(data, m, h, lam) == pytest.approx(want, abs=1e-12, rel=1e-12)


class TestGradients:
    def test_weights_vs_finite_difference(self, rng):
        worst = 0.0
        for _ in range(100):
            data = random_dataset(rng, 20, 5)
            h = random_hyper(rng)
            w = rng.normal(scale=0.5, size=6)
            lam = rng.uniform(0, 1)
            g = grad_weights(data, LinearModel(w), h, lam)
            fd = central_diff(lambda v: log_likelihood(data, LinearModel(v), h, lam), w)
            worst = max(worst, rel_err(g, fd))
        assert worst < 1e-6

    def test_hyper_vs_finite_difference(self, rng):
        worst = 0.0
        eps = 1e-6
        for _ in range(100):
            data = random_dataset(rng, 20, 5)
            h = random_hyper(rng)
            m = LinearModel(rng.normal(scale=0.5, size=6))
            got = grad_hyper(data, m, h)
            f = lambda w, th, g: log_likelihood(data, m, BBHyper(w, th, g))
            fd = ((f(h.w + eps, h.theta_b, h.gamma) - f(h.w - eps, h.theta_b, h.gamma)) / (2 * eps),
                  (f(h.w, h.theta_b + eps, h.gamma) - f(h.w, h.theta_b - eps, h.gamma)) / (2 * eps),
                  (f(h.w, h.theta_b, h.gamma + eps) - f(h.w, h.theta_b, h.gamma - eps)) / (2 * eps))
            worst = max(worst, rel_err(got, fd))
        assert worst < 1e-6

    def test_weight_gradient_vanishes_as_w_goes_to_one(self, rng):
        data = random_dataset(rng, 20, 3)
        m = LinearModel(rng.normal(size=4))
        norms = [np.linalg.norm(grad_weights(data, m, BBHyper(w, 0.5, 2.0))) for w in (0.9, 0.99, 1 - 1e-9)]
        assert norms[0] > norms[1] > norms[2]
        assert norms[2] < 1e-7

    def test_symmetric_pair_at_zero(self):
        # (x, 1) and (-x, 0) at weights 0: each term is gamma (1 - w) / 4 / mu * (+-x) with mu = 1/2
        x = np.array([1.0, -2.0])
        data = Dataset(np.vstack([x, -x]), np.array([1, 0]))
        h = BBHyper.from_counts(3.0, 3.0, 10.0, 2.0)
        g = grad_weights(data, LinearModel(np.zeros(3)), h)
        coef = h.gamma * h.b * 0.25 / 0.5
        np.testing.assert_allclose(g, np.r_[2 * coef * x, 0.0], atol=1e-14)

    def test_theta_partial_zero_when_w_zero(self, rng):
        data = random_dataset(rng)
        assert grad_hyper(data, LinearModel(rng.normal(size=6)), BBHyper(0.0, 0.3, 2.0))[1] == 0.0

    def test_w_partial_zero_when_theta_equals_sigmoid(self):
        # every example sits at the same score, with theta_b = sigmoid(gamma s)
        X = np.zeros((6, 1))
        y = np.array([0, 1, 0, 1, 1, 0])
        m = LinearModel(np.array([0.0, 0.7]))
        theta = 1 / (1 + math.exp(-2.0 * 0.7))
        assert grad_hyper(Dataset(X, y), m, BBHyper(0.4, theta, 2.0))[0] == pytest.approx(0.0, abs=1e-12)


class TestAsymptoticInit:
    def test_substitution(self):
        w, th = asymptotic_init(0.9, 0.8)
        assert w == pytest.approx(0.3) and th == pytest.approx(2 / 3)

    def test_half_rates_clamp_w(self):
        assert asymptotic_init(0.5, 0.5)[0] == pytest.approx(1 - 1e-4)

    def test_perfect_rates(self):
        w, th = asymptotic_init(1.0, 1.0)
        assert w == pytest.approx(1e-4)
        assert th == pytest.approx(0.5)

    def test_plateaus_hit_the_rates(self, rng):
        for _ in range(50):
            tpr, tnr = rng.uniform(0.55, 0.99, size=2)
            w, th = asymptotic_init(tpr, tnr)
            assert w * th + (1 - w) == pytest.approx(tpr)
            assert 1 - w * th == pytest.approx(tnr)


class TestPredict:
    def test_sign_rule(self):
        m = LinearModel(np.array([1.0, 0.0]))
        labels, mu = predict(m, np.array([[5.0], [0.0], [-5.0]]), BBHyper.from_counts(5.0, 10.0, 5.0))
        np.testing.assert_array_equal(labels, [1, 1, 0])
        assert mu[2] >= 0.25

    def test_scale_invariance(self, rng):
        X = rng.normal(size=(50, 3))
        m = LinearModel(rng.normal(size=4))
        h = BBHyper.weak()
        base = predict(m, X, h)[0]
        for c in (1e-3, 0.5, 7.0, 1e4):
            np.testing.assert_array_equal(predict(LinearModel(c * m.weights), X, h)[0], base)

    def test_rates(self):
        assert rates([1, 0, 1, 1], [1, 0, 0, 1]) == (1.0, 0.5)


class TestSerialization:
    def test_round_trip(self, rng):
        m = LinearModel(rng.normal(size=7) * 10.0 ** rng.integers(-300, 300, size=7))
        h = random_hyper(rng)
        back, hb = LinearModel.loads(m.dumps(h))
        np.testing.assert_array_equal(back.weights, m.weights)
        assert hb == h
        obj = json.loads(m.dumps(h))
        assert set(obj["hyper"]) >= {"alpha", "beta", "n", "w", "theta_B", "gamma"}
