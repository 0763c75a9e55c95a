import numpy as np
import pytest
from numpy.testing import assert_allclose

from softirl.envs import (
    GridworldSpec,
    TransitionDataset,
    build_env,
    expert_policy,
    read_dataset,
    sample_transitions,
    write_dataset,
)
from softirl.mdp import sup_norm
from softirl.solver import shape


def small_spec(**kw):
    defaults = dict(width=3, height=3, topology="torus", reward_kind="tabular-linear",
                    seed=5, min_action_prob=0.0)
    defaults.update(kw)
    return GridworldSpec(**defaults)


class TestBuildEnv:
    def test_torus_4x4_shape_and_determinism_of_kernel(self):
        mdp, r, fmap = build_env(GridworldSpec(4, 4, topology="torus",
                                               reward_kind="linear", seed=0,
                                               min_action_prob=0.0))
        assert mdp.n_states == 16 and mdp.n_actions == 5
        # deterministic moves: every row is one-hot
        assert np.all(np.isin(mdp.transition, (0.0, 1.0)))
        assert r.shape == (16, 5)
        assert fmap.phi.shape[:2] == (16, 5)

    def test_bounded_corner_is_noop(self):
        mdp, _, _ = build_env(GridworldSpec(8, 8, topology="bounded", seed=0,
                                            min_action_prob=0.0))
        # state 0 is (x=0, y=0); moving down (action 2) or left (action 3) stays
        assert mdp.transition[0, 2, 0] == 1.0
        assert mdp.transition[0, 3, 0] == 1.0

    def test_same_seed_bit_identical(self):
        spec = small_spec(reward_kind="nonlinear")
        mdp1, r1, f1 = build_env(spec)
        mdp2, r2, f2 = build_env(spec)
        assert np.array_equal(mdp1.transition, mdp2.transition)
        assert np.array_equal(r1, r2)
        assert np.array_equal(f1.phi, f2.phi)

    def test_zero_size_grid_rejected(self):
        with pytest.raises(ValueError):
            build_env(small_spec(width=0))

    def test_tabular_features_are_one_hot(self):
        _, _, fmap = build_env(small_spec())
        assert fmap.dim == 9 * 5
        assert_allclose(fmap.phi.reshape(45, 45), np.eye(45))

    def test_min_action_prob_guard(self):
        mdp, r, _ = build_env(small_spec(min_action_prob=0.05, reward_scale=10.0))
        pi = expert_policy(mdp, r)
        assert pi.min() >= 0.05

    def test_move_noise_spreads_mass(self):
        mdp, _, _ = build_env(small_spec(move_noise=0.2))
        assert np.max(mdp.transition) < 1.0
        assert_allclose(mdp.transition.sum(axis=2), 1.0, atol=1e-12)


class TestExpertPolicy:
    def test_zero_reward_uniform(self):
        mdp, _, _ = build_env(small_spec())
        pi = expert_policy(mdp, np.zeros((9, 5)))
        assert_allclose(pi, 0.2, atol=1e-9)

    def test_log_policy_reward_returns_policy(self):
        rng = np.random.default_rng(3)
        mdp, _, _ = build_env(small_spec())
        pi = rng.dirichlet(np.ones(5), size=9)
        assert_allclose(expert_policy(mdp, np.log(pi)), pi, atol=1e-9)

    def test_invariant_under_potential_shaping(self):
        rng = np.random.default_rng(4)
        mdp, r, _ = build_env(small_spec())
        r2, _ = shape(r, np.zeros_like(r), rng.normal(size=9), mdp)
        assert sup_norm(expert_policy(mdp, r) - expert_policy(mdp, r2)) <= 1e-9


class TestSampleTransitions:
    def test_deterministic_rollout_prefix(self):
        # always-toggle policy on a deterministic 2-state chain from a point mass
        from conftest import toggle_mdp

        mdp = toggle_mdp()
        pi = np.zeros((2, 2))
        pi[:, 1] = 1.0
        init = np.array([1.0, 0.0])
        ds = sample_transitions(mdp, pi, 6, init=init, regime="trajectory", seed=0)
        assert_allclose(ds.states, [0, 1, 0, 1, 0, 1])
        assert_allclose(ds.next_states, [1, 0, 1, 0, 1, 0])

    def test_same_seed_identical(self):
        mdp, r, _ = build_env(small_spec())
        pi = expert_policy(mdp, r)
        d1 = sample_transitions(mdp, pi, 500, seed=9)
        d2 = sample_transitions(mdp, pi, 500, seed=9)
        assert np.array_equal(d1.states, d2.states)
        assert np.array_equal(d1.actions, d2.actions)
        assert np.array_equal(d1.next_states, d2.next_states)

    def test_records_obey_kernel_support(self):
        mdp, r, _ = build_env(small_spec(move_noise=0.1))
        pi = expert_policy(mdp, r)
        ds = sample_transitions(mdp, pi, 2000, seed=1)
        assert np.all(mdp.transition[ds.states, ds.actions, ds.next_states] > 0)

    def test_conditional_frequencies_within_three_se(self):
        # binomial concentration on a tiny chain at n = 200k
        from conftest import toggle_mdp

        mdp = toggle_mdp()
        pi = np.array([[0.7, 0.3], [0.4, 0.6]])
        ds = sample_transitions(mdp, pi, 200_000, seed=12)
        for s in range(2):
            mask = ds.states == s
            n_s = mask.sum()
            for a in range(2):
                p_hat = np.mean(ds.actions[mask] == a)
                se = np.sqrt(pi[s, a] * (1 - pi[s, a]) / n_s)
                assert abs(p_hat - pi[s, a]) <= 3 * se

    def test_restart_regime_mixes_more_than_trajectory(self):
        # with a point-mass init, restarts revisit the initial state
        mdp, r, _ = build_env(small_spec())
        pi = expert_policy(mdp, r)
        init = np.zeros(9)
        init[0] = 1.0
        ds = sample_transitions(mdp, pi, 4000, init=init, regime="iid-restart", seed=2)
        frac0 = np.mean(ds.states == 0)
        assert frac0 > 1.0 / 9.0  # restarts overweight state 0

    def test_n_must_be_positive(self):
        mdp, r, _ = build_env(small_spec())
        with pytest.raises(ValueError):
            sample_transitions(mdp, expert_policy(mdp, r), 0)


class TestDatasetIO:
    def test_round_trip_identity(self, tmp_path):
        ds = TransitionDataset(np.array([0, 1, 2]), np.array([1, 0, 3]),
                               np.array([2, 2, 0]),
                               meta={"seed": 7, "env": "toy", "n": 3,
                                     "n_states": 4, "n_actions": 5,
                                     "regime": "iid-restart"})
        path = tmp_path / "data.txt"
        write_dataset(ds, path)
        back = read_dataset(path)
        assert np.array_equal(back.states, ds.states)
        assert np.array_equal(back.actions, ds.actions)
        assert np.array_equal(back.next_states, ds.next_states)
        assert back.meta == ds.meta

    def test_header_only_file(self, tmp_path):
        path = tmp_path / "empty.txt"
        path.write_text("# transitions seed=0 env=- n=0 n_states=2 n_actions=2 regime=trajectory\n")
        ds = read_dataset(path)
        assert ds.n == 0

    def test_malformed_line_reports_line_number(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("# transitions seed=0 env=- n=2 n_states=4 n_actions=5 regime=trajectory\n"
                        "0,1,2\n0,1\n")
        with pytest.raises(ValueError, match=":3:"):
            read_dataset(path)

    def test_out_of_range_state_reports_line(self, tmp_path):
        path = tmp_path / "oor.txt"
        path.write_text("# transitions seed=0 env=- n=1 n_states=2 n_actions=2 regime=trajectory\n"
                        "5,0,1\n")
        with pytest.raises(ValueError, match=":2:.*out of range"):
            read_dataset(path)

    def test_missing_header_rejected(self, tmp_path):
        path = tmp_path / "nohdr.txt"
        path.write_text("0,1,2\n")
        with pytest.raises(ValueError, match="header"):
            read_dataset(path)

    def test_count_mismatch_rejected(self, tmp_path):
        path = tmp_path / "short.txt"
        path.write_text("# transitions seed=0 env=- n=2 n_states=4 n_actions=5 regime=trajectory\n"
                        "0,1,2\n")
        with pytest.raises(ValueError, match="n=2"):
            read_dataset(path)
