import json

import numpy as np
import pytest
from scipy.optimize import minimize

from bbgamma.data import Dataset, augment
from bbgamma.kernel import KernelSpec, gram, kernel_objective, support_count
from bbgamma.model import BBHyper, LinearModel, objective_for
from bbgamma.objective import LOGISTIC, Link, Objective
from bbgamma.optimizer import (SlaConfig, anneal, find_sla_solution, grad_desc_in_range, grad_desc_in_range_sparse,
                               probe_steps, vanilla_grad_desc)
from bbgamma.priors import LAPLACE, L2Prior, MixturePrior
from helpers import blobs, random_dataset


class Fn:
    """Generic objective from a value function and its gradient."""

    def __init__(self, f, g=None):
        self.f, self.g = f, g

    def value(self, v):
        return float(self.f(v))

    def value_grad(self, v):
        return self.value(v), (np.zeros_like(v) if self.g is None else self.g(v))


def double_well(v):
    # wells at 0 (height 1) and 3 (height 2)
    return np.log(np.exp(-v[0] ** 2 / 0.5) + 2 * np.exp(-(v[0] - 3) ** 2 / 0.5))


def double_well_grad(v):
    e0, e3 = np.exp(-v[0] ** 2 / 0.5), 2 * np.exp(-(v[0] - 3) ** 2 / 0.5)
    return np.array([(-4 * v[0] * e0 - 4 * (v[0] - 3) * e3) / (e0 + e3)])


class TestSlaConfig:
    def test_defaults_schedule(self):
        assert SlaConfig().schedule() == [2.0, 20.0, 200.0]

    def test_single_stage(self):
        assert SlaConfig(gamma_min=5.0, gamma_max=5.0).schedule() == [5.0]

    def test_truncated_schedule(self):
        assert SlaConfig(gamma_min=1.0, gamma_max=50.0, r_gamma=3.0).schedule() == [1.0, 3.0, 9.0, 27.0]

    @pytest.mark.parametrize("kwargs", [{"r_gamma": 1.0}, {"r_R": 1.0}, {"r_G": 0.0}, {"gamma_min": 300.0},
                                        {"R0": -1.0}, {"eps_S0": 10.0}])
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            SlaConfig(**kwargs)

    def test_json_round_trip(self, tmp_path):
        cfg = SlaConfig(R0=4.0, r_gamma=5.0, max_iter=77)
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(cfg.to_json()))
        assert SlaConfig.load(path) == cfg

    def test_unknown_key(self):
        with pytest.raises(ValueError):
            SlaConfig.from_json({"R0": 1.0, "radius": 2.0})


class TestVanillaGradDesc:
    def test_concave_quadratic(self):
        target = np.array([1.5, -0.5, 3.0])
        obj = Fn(lambda v: -np.sum((v - target) ** 2), lambda v: -2 * (v - target))
        out = vanilla_grad_desc(obj, np.zeros(3), SlaConfig(eps_L=1e-12, eps_G=1e-9))
        assert np.abs(out - target).max() < 1e-4

    def test_zero_gradient_start(self):
        obj = Fn(lambda v: -np.sum(v ** 2), lambda v: -2 * v)
        np.testing.assert_array_equal(vanilla_grad_desc(obj, np.zeros(4), SlaConfig()), 0.0)

    def test_logistic_matches_convex_solver(self):
        X = np.array([[1.0, 2.0], [-1.0, -0.5]])
        y = np.array([1, 0])
        lam = 0.1
        obj = Objective(augment(X), y, Link(LOGISTIC), L2Prior(lam))
        cfg = SlaConfig(eps_L=1e-14, eps_G=1e-10, max_iter=100000)
        ours = vanilla_grad_desc(obj, np.zeros(3), cfg)
        A, t = augment(X), 2 * y - 1

        def neg(w):
            return np.sum(np.logaddexp(0, -t * (A @ w))) + lam / 2 * w @ w

        ref = minimize(neg, np.zeros(3), method="BFGS", options={"gtol": 1e-12}).x
        assert np.abs(ours - ref).max() < 1e-3


class TestProbing:
    def test_step_order(self):
        np.testing.assert_allclose(probe_steps(0.2, 0.6), [0.2, -0.2, 0.4, -0.4, 0.6, -0.6])
        np.testing.assert_allclose(probe_steps(0.2, 0.5), [0.2, -0.2, 0.4, -0.4, 0.5, -0.5])
        assert probe_steps(0.2, 8.0).size == 80

    def test_bad_steps(self):
        with pytest.raises(ValueError):
            probe_steps(1.0, 0.5)

    def test_unimodal_no_probe(self):
        target = np.array([0.3, -1.2])
        obj = Fn(lambda v: -np.sum((v - target) ** 2), lambda v: -2 * (v - target))
        cfg = SlaConfig(eps_L=1e-12, eps_G=1e-9)
        start = np.array([2.0, 2.0])
        np.testing.assert_array_equal(grad_desc_in_range(obj, start, None, 8.0, 0.2, cfg),
                                      vanilla_grad_desc(obj, start, cfg))

    def test_double_well_escape(self):
        grid = np.linspace(-5, 8, 130001)
        deeper = grid[np.argmax([double_well([g]) for g in grid])]
        obj = Fn(double_well, double_well_grad)
        out = grad_desc_in_range(obj, np.array([0.0]), None, 8.0, 0.2, SlaConfig(eps_L=1e-10))
        assert vanilla_grad_desc(obj, np.array([0.0]), SlaConfig())[0] == pytest.approx(0.0, abs=1e-6)
        assert out[0] == pytest.approx(deeper, abs=1e-3)

    def test_first_improving_step_wins(self):
        # both +0.4 and -0.2 improve; -0.2 comes first in the enumeration
        def f(v):
            return 1.0 if abs(v[0] + 0.2) < 1e-9 else (2.0 if abs(v[0] - 0.4) < 1e-9 else 0.0)

        out = grad_desc_in_range(Fn(f), np.zeros(1), None, 1.0, 0.2, SlaConfig(max_probe_rounds=1))
        assert out[0] == pytest.approx(-0.2)

    def test_compiled_probe_matches_loop_oracle(self, rng):
        for _ in range(10):
            data = random_dataset(rng, 15, 3)
            obj = objective_for(data, BBHyper.weak(20.0), 0.1)
            coef = rng.normal(size=4)
            steps = probe_steps(0.2, 2.0)
            base = obj.value(coef)
            want = (-1, -1)
            for i in range(4):
                hit = [k for k, s in enumerate(steps) if obj.value(coef + s * np.eye(4)[i]) - base >= 1e-6]
                if hit:
                    want = (i, hit[0])
                    break
            i, k, _ = obj.probe(coef, steps, 1e-6)
            assert (i, k) == want


class TestAnneal:
    def test_trajectory_and_shrinking_grid(self, rng):
        data = blobs(rng, 40, 2, 0.8)
        rep = find_sla_solution(data, None, BBHyper.weak(), 0.1, SlaConfig())
        assert rep.gammas == [2.0, 20.0, 200.0]
        assert [r.radius for r in rep.trajectory] == [8.0, 4.0, 2.0]
        assert [r.spacing for r in rep.trajectory] == pytest.approx([0.2, 0.1, 0.05])
        assert rep.hyper.gamma == 200.0

    def test_single_stage(self, rng):
        data = blobs(rng, 30, 2)
        rep = find_sla_solution(data, None, BBHyper.weak(), 0.1, SlaConfig(gamma_min=3.0, gamma_max=3.0))
        assert rep.gammas == [3.0]

    def test_stage_monotone(self, rng):
        data = blobs(rng, 40, 3, 0.6)
        cfg = SlaConfig()
        obj = objective_for(data, BBHyper.weak(), 0.05)
        coef = np.zeros(4)
        radius, spacing = cfg.R0, cfg.eps_S0
        for g in cfg.schedule():
            before = obj.with_gamma(g).value(coef)
            coef = grad_desc_in_range(obj, coef, g, radius, spacing, cfg)
            assert obj.with_gamma(g).value(coef) >= before
            radius, spacing = radius * cfg.r_R, spacing * cfg.r_eps

    def test_deterministic(self, rng):
        data = blobs(rng, 40, 3, 0.5)
        a = find_sla_solution(data, None, BBHyper.weak(), 0.1, SlaConfig(), seed=3)
        b = find_sla_solution(data, None, BBHyper.weak(), 0.1, SlaConfig(), seed=3)
        np.testing.assert_array_equal(a.coef, b.coef)
        assert [r.objective for r in a.trajectory] == [r.objective for r in b.trajectory]

    def test_start_model_used(self, rng):
        data = blobs(rng, 30, 2, 3.0)
        w0 = LinearModel(np.array([1.0, 1.0, 0.0]))
        cfg = SlaConfig(gamma_min=2.0, gamma_max=2.0, max_iter=1, max_probe_rounds=0, rG_max=1e-5)
        rep = find_sla_solution(data, w0, BBHyper.weak(), 0.0, cfg)
        assert np.abs(rep.coef - w0.weights).max() < 1e-3

    def test_report_json(self, rng):
        rep = find_sla_solution(blobs(rng, 20, 2), None, BBHyper.weak(), 0.1, SlaConfig())
        obj = json.loads(json.dumps(rep.to_json()))
        assert len(obj["trajectory"]) == 3 and obj["lambda"] == 0.1


def informative_kernel_problem(rng):
    # 30 points; labels follow three prototypes, the rest are copies with jitter
    protos = np.array([[-2.0, 0.0], [2.0, 0.0], [0.0, 2.5]])
    labels = np.array([0, 1, 1])
    idx = np.arange(30) % 3
    X = protos[idx] + rng.normal(scale=0.3, size=(30, 2))
    return Dataset(X, labels[idx])


class TestSparseRange:
    def test_pure_gauss_mixture_equals_l2(self, rng):
        data = informative_kernel_problem(rng)
        G = gram(data, KernelSpec(1.0))
        h = BBHyper.empirical(data.y, 2.0)
        sigma = 2.0
        mix = MixturePrior(1.0, sigma, 0.0, 0.1)
        # converge fully: the sparse variant runs extra ascents inside its EM loop
        cfg = SlaConfig(eps_L=1e-14, eps_G=1e-10, max_iter=100000)
        a, _ = grad_desc_in_range_sparse(kernel_objective(G, data.y, h), np.zeros(30), 2.0, 8.0, 0.2, cfg, mix,
                                         freeze=True)
        b = grad_desc_in_range(kernel_objective(G, data.y, h, L2Prior(1 / sigma ** 2)), np.zeros(30), 2.0, 8.0,
                               0.2, cfg)
        np.testing.assert_allclose(a, b, atol=1e-6)

    def test_sparser_than_l2(self, rng):
        data = informative_kernel_problem(rng)
        G = gram(data, KernelSpec(1.0))
        h = BBHyper.empirical(data.y)
        obj = kernel_objective(G, data.y, h, L2Prior(0.1))
        cfg = SlaConfig(max_probe_rounds=5)
        dense = anneal(obj, np.zeros(30), cfg)
        sparse = anneal(obj, dense.coef, cfg, sparse_prior=MixturePrior.initial(dense.coef), prune=True,
                        freeze_prior=True)
        lap_fraction = np.mean(sparse.prior.assign == LAPLACE)
        assert lap_fraction > np.mean(MixturePrior.initial(dense.coef).assign == LAPLACE) or \
            support_count(sparse.coef) < support_count(dense.coef)
        assert support_count(sparse.coef) < support_count(dense.coef)

    def test_fixed_point_single_pass(self, rng):
        data = informative_kernel_problem(rng)
        G = gram(data, KernelSpec(1.0))
        obj = kernel_objective(G, data.y, BBHyper.empirical(data.y), L2Prior(0.1))
        cfg = SlaConfig(gamma_min=2.0, gamma_max=2.0, max_probe_rounds=0)
        first = anneal(obj, np.zeros(30), cfg, sparse_prior=MixturePrior.initial(np.ones(30)), freeze_prior=True)
        again = anneal(obj, first.coef, cfg, sparse_prior=first.prior, freeze_prior=True)
        assert again.trajectory[0].em_passes == 1
        np.testing.assert_array_equal(again.prior.assign, first.prior.assign)
