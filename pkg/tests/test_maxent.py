import numpy as np
import pytest
from numpy.testing import assert_allclose

from softirl.envs import GridworldSpec, build_env, expert_policy, sample_transitions
from softirl.maxent import MaxEntConfig, maxent_fit, maxent_loglik_and_grad
from softirl.metrics import evaluate
from softirl.mdp import TabularMdp, joint_frequency

from conftest import random_mdp, random_policy


def one_hot_features(ns, na):
    return np.eye(ns * na).reshape(ns, na, ns * na)


class TestLoglikAndGrad:
    def test_gradient_vanishes_at_realizable_optimum(self):
        # theta reproducing the empirical log-conditional is stationary:
        # soft value iteration then yields v = 0 and pi_theta = empirical pi
        rng = np.random.default_rng(0)
        mdp = random_mdp(rng, 4, 3, 0.9)
        s = rng.integers(0, 4, size=4000)
        a = rng.integers(0, 3, size=4000)
        w = joint_frequency(s, a, 4, 3)
        pi_bar = w / w.sum(axis=1, keepdims=True)
        theta = np.log(pi_bar).reshape(-1)
        ll, grad = maxent_loglik_and_grad(mdp, one_hot_features(4, 3), theta, w)
        assert np.linalg.norm(grad) <= 1e-6
        mean_ll = float(np.sum(w * np.log(pi_bar)))
        assert_allclose(ll, mean_ll, atol=1e-8)

    def test_gamma_zero_gradient_is_feature_gap(self):
        # at theta = 0 the policy is uniform and, with no lookahead, the
        # gradient is the empirical minus uniform expected feature
        rng = np.random.default_rng(1)
        t = rng.dirichlet(np.ones(4), size=(4, 3))
        mdp = TabularMdp(t, 0.0)
        phi = rng.normal(size=(4, 3, 6))
        s = rng.integers(0, 4, size=500)
        a = rng.integers(0, 3, size=500)
        w = joint_frequency(s, a, 4, 3)
        _, grad = maxent_loglik_and_grad(mdp, phi, np.zeros(6), w)
        state_w = w.sum(axis=1)
        expected = np.einsum("sa,sad->d", w, phi) - np.einsum(
            "s,sad->d", state_w / 3.0, phi)
        assert_allclose(grad, expected, atol=1e-10)

    def test_matches_central_finite_differences(self):
        rng = np.random.default_rng(2)
        mdp = random_mdp(rng, 4, 3, 0.9)
        phi = rng.normal(size=(4, 3, 5))
        theta = rng.normal(size=5)
        w = random_policy(rng, 4, 3) * rng.dirichlet(np.ones(4))[:, None]
        ll, grad = maxent_loglik_and_grad(mdp, phi, theta, w)
        h = 1e-5
        for j in range(5):
            e = np.zeros(5)
            e[j] = h
            lp, _ = maxent_loglik_and_grad(mdp, phi, theta + e, w)
            lm, _ = maxent_loglik_and_grad(mdp, phi, theta - e, w)
            fd = (lp - lm) / (2 * h)
            assert abs(grad[j] - fd) <= 1e-4 * max(1.0, abs(fd))


class TestMaxentFit:
    def test_zero_epochs_returns_init(self):
        rng = np.random.default_rng(3)
        mdp = random_mdp(rng, 3, 2, 0.8)
        phi = rng.normal(size=(3, 2, 4))
        w = random_policy(rng, 3, 2) * rng.dirichlet(np.ones(3))[:, None]
        fit = maxent_fit(mdp, phi, w, MaxEntConfig(max_epochs=0))
        assert_allclose(fit.theta, 0.0)
        assert len(fit.loss_trace) == 1

    def test_gaussian_init_is_seeded(self):
        rng = np.random.default_rng(4)
        mdp = random_mdp(rng, 3, 2, 0.8)
        phi = rng.normal(size=(3, 2, 4))
        w = random_policy(rng, 3, 2) * rng.dirichlet(np.ones(3))[:, None]
        cfg = MaxEntConfig(max_epochs=0, init="gaussian", init_seed=5)
        f1 = maxent_fit(mdp, phi, w, cfg)
        f2 = maxent_fit(mdp, phi, w, cfg)
        assert np.array_equal(f1.theta, f2.theta)
        assert np.any(f1.theta != 0.0)

    def test_best_likelihood_is_monotone_over_trace(self):
        rng = np.random.default_rng(5)
        mdp = random_mdp(rng, 4, 3, 0.9)
        phi = one_hot_features(4, 3)
        w = random_policy(rng, 4, 3) * rng.dirichlet(np.ones(4))[:, None]
        fit = maxent_fit(mdp, phi, w, MaxEntConfig(step_size=0.05, optimizer="adam",
                                                   schedule="constant", max_epochs=60))
        best = np.minimum.accumulate(fit.loss_trace)
        assert np.all(np.diff(best) <= 0)
        assert fit.diagnostics["best_loglik"] == -min(fit.loss_trace)

    def test_realizable_recovery_on_tiny_grid(self):
        spec = GridworldSpec(2, 2, topology="torus", seed=8, gamma=0.9,
                             min_action_prob=0.05)
        mdp, r_true, _ = build_env(spec)
        pi = expert_policy(mdp, r_true)
        ds = sample_transitions(mdp, pi, 20_000, seed=0, env_id="tiny")
        phi = one_hot_features(mdp.n_states, mdp.n_actions)
        fit = maxent_fit(mdp, phi, ds, MaxEntConfig(step_size=0.05, optimizer="adam",
                                                    schedule="constant",
                                                    max_epochs=250, patience=50))
        report = evaluate(mdp, r_true, pi, fit.r_hat)
        assert report.corr_qdiff >= 0.97

    def test_misspecified_features_underfit(self):
        spec = GridworldSpec(4, 4, topology="bounded", reward_kind="nonlinear",
                             seed=2, gamma=0.9, min_action_prob=0.03)
        mdp, r_true, fmap = build_env(spec)
        pi = expert_policy(mdp, r_true)
        ds = sample_transitions(mdp, pi, 20_000, seed=0, env_id="tiny")
        fit = maxent_fit(mdp, fmap.phi, ds, MaxEntConfig(step_size=0.05,
                                                         optimizer="adam",
                                                         schedule="constant",
                                                         max_epochs=150))
        base = evaluate(mdp, r_true, pi, fit.r_hat)
        from softirl.solver import SolverConfig, classify_then_regress
        from softirl.oracles import ClassifierSpec

        sol = classify_then_regress(ds, SolverConfig(
            gamma=0.9, classifier=ClassifierSpec(smoothing_alpha=1.0)))
        ours = evaluate(mdp, r_true, pi, sol.r, sol.v)
        assert base.corr_qdiff < ours.corr_qdiff

    def test_bad_config_rejected(self):
        rng = np.random.default_rng(6)
        mdp = random_mdp(rng, 3, 2, 0.8)
        phi = rng.normal(size=(3, 2, 4))
        w = random_policy(rng, 3, 2) * rng.dirichlet(np.ones(3))[:, None]
        with pytest.raises(ValueError):
            maxent_fit(mdp, phi, w, MaxEntConfig(step_size=-1.0))
        with pytest.raises(ValueError):
            maxent_fit(mdp, phi, w, MaxEntConfig(schedule="linear"))
