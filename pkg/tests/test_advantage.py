"""GAE against a brute-force discounted-return oracle, plus scale utilities."""

import numpy as np
import pytest

from gammaroute.advantage import (GammaSet, batch_normalize, compute_gae,
                                  normalization_stats, td_residuals, value_bound)
from gammaroute.envs import MiniLander
from gammaroute.nn import DenseNet, NonFiniteError
from gammaroute.ppo import Trajectory, collect_rollout


def make_traj(rewards, terminated=None, truncated=None, obs_dim=2):
    rewards = np.asarray(rewards, dtype=np.float64)
    t = rewards.shape[0]
    if terminated is None:
        terminated = np.zeros(t, dtype=bool)
        terminated[-1] = True
    if truncated is None:
        truncated = np.zeros(t, dtype=bool)
    return Trajectory(obs=np.zeros((t, obs_dim)), actions=np.zeros(t, dtype=np.int64),
                      logp=np.zeros(t), rewards=rewards,
                      terminated=np.asarray(terminated), truncated=np.asarray(truncated),
                      next_obs=np.zeros((t, obs_dim)))


def mc_discounted_returns(rewards, gamma):
    """Brute-force oracle: G_t = sum_k gamma^k r_{t+k} within one episode."""
    t = len(rewards)
    out = np.zeros(t)
    for start in range(t):
        out[start] = sum(gamma**k * rewards[start + k] for k in range(t - start))
    return out


def test_single_step_terminal_any_gamma_lambda():
    traj = make_traj([1.0])
    gammas = GammaSet((0.3, 0.7, 0.95))
    for lam in (0.0, 0.5, 1.0):
        mga = compute_gae(traj, np.zeros((1, 3)), np.zeros((1, 3)), gammas, lam)
        assert np.allclose(mga.advantages, 1.0, atol=1e-15)


def test_two_step_closed_forms():
    traj = make_traj([1.0, 1.0])
    gammas = GammaSet((0.5,))
    zeros = np.zeros((2, 1))
    full = compute_gae(traj, zeros, zeros, gammas, lam=1.0)
    assert np.allclose(full.advantages[0], [1.5, 1.0], atol=1e-15)
    td = compute_gae(traj, zeros, zeros, gammas, lam=0.0)
    assert np.allclose(td.advantages[0], [1.0, 1.0], atol=1e-15)


def test_gae_lambda_one_matches_monte_carlo_oracle():
    # 100 random terminated episodes of length <= 8, arbitrary value
    # predictions: with lam = 1, advantage + value telescopes to the
    # discounted return at every head.
    rng = np.random.default_rng(0)
    gammas = GammaSet()
    for _ in range(100):
        length = int(rng.integers(1, 9))
        rewards = rng.normal(size=length)
        # consistent value chain: the successor prediction at step t is the
        # prediction for the state observed at t+1 (the post-terminal entry
        # is arbitrary; termination masks it)
        chain = rng.normal(size=(length + 1, 4))
        values, next_values = chain[:-1], chain[1:]
        traj = make_traj(rewards)
        mga = compute_gae(traj, values, next_values, gammas, lam=1.0)
        for i, gamma in enumerate(gammas):
            expected = mc_discounted_returns(rewards, gamma)
            assert np.allclose(mga.advantages[i] + values[:, i], expected, atol=1e-10, rtol=0)
            assert np.allclose(mga.targets[i], expected, atol=1e-10, rtol=0)


def test_gae_multi_episode_rollout_respects_boundaries():
    # two episodes back to back in one rollout; traces must not leak across
    rewards = np.array([1.0, 2.0, 3.0, 4.0])
    terminated = np.array([False, True, False, True])
    traj = make_traj(rewards, terminated=terminated)
    gammas = GammaSet((0.5,))
    zeros = np.zeros((4, 1))
    mga = compute_gae(traj, zeros, zeros, gammas, lam=1.0)
    assert np.allclose(mga.advantages[0], [1.0 + 0.5 * 2.0, 2.0, 3.0 + 0.5 * 4.0, 4.0],
                       atol=1e-15)


def test_gae_truncation_bootstraps_with_value():
    # truncated episode: the final delta bootstraps with the critic's
    # next-state value, while the recursion still stops at the boundary
    rewards = np.array([1.0, 1.0])
    terminated = np.array([False, False])
    truncated = np.array([False, True])
    traj = make_traj(rewards, terminated=terminated, truncated=truncated)
    values = np.zeros((2, 1))
    next_values = np.array([[0.0], [10.0]])
    mga = compute_gae(traj, values, next_values, GammaSet((0.5,)), lam=1.0)
    assert mga.advantages[0, 1] == pytest.approx(1.0 + 0.5 * 10.0)
    assert mga.advantages[0, 0] == pytest.approx(1.0 + 0.5 * (1.0 + 0.5 * 10.0))


def test_gae_rejects_nan_values():
    traj = make_traj([1.0, 1.0])
    bad = np.array([[np.nan], [0.0]])
    with pytest.raises(NonFiniteError):
        compute_gae(traj, bad, np.zeros((2, 1)), GammaSet((0.5,)), lam=1.0)


def test_td_residuals_match_lambda_zero_gae():
    rng = np.random.default_rng(4)
    rewards = rng.normal(size=6)
    traj = make_traj(rewards)
    values = rng.normal(size=(6, 4))
    next_values = rng.normal(size=(6, 4))
    gammas = GammaSet()
    deltas = td_residuals(traj, values, next_values, gammas)
    mga = compute_gae(traj, values, next_values, gammas, lam=0.0)
    assert np.allclose(deltas, mga.advantages, atol=1e-15)


def test_value_bound_examples():
    assert value_bound(1.0, 0.5) == pytest.approx(2.0)
    assert value_bound(1.0, 0.5, horizon=2) == pytest.approx(1.5)
    assert value_bound(0.0, 0.9) == 0.0
    assert value_bound(0.0, 0.3, horizon=17) == 0.0
    with pytest.raises(ValueError, match="gamma"):
        value_bound(1.0, 1.0)
    with pytest.raises(ValueError, match="gamma"):
        value_bound(1.0, -0.1)
    with pytest.raises(ValueError, match="r_max"):
        value_bound(-1.0, 0.5)


def test_batch_normalize_examples():
    assert np.array_equal(batch_normalize(np.array([1.0, -1.0])), [1.0, -1.0])
    assert np.array_equal(batch_normalize(np.array([2.0, 2.0, 2.0])), [0.0, 0.0, 0.0])
    out = batch_normalize(np.array([0.0, 1.0, 2.0, 3.0]))
    assert abs(out.mean()) < 1e-12
    assert abs(out.std() - 1.0) < 1e-12
    with pytest.raises(ValueError, match="length >= 2"):
        batch_normalize(np.array([1.0]))


def test_normalization_stats_degenerate_flag():
    mean, inv_std = normalization_stats(np.array([3.0, 3.0, 3.0]))
    assert mean == 3.0 and inv_std == 0.0


def test_gamma_set_validation():
    with pytest.raises(ValueError, match="increasing"):
        GammaSet((0.9, 0.5))
    with pytest.raises(ValueError, match="\\(0, 1\\)"):
        GammaSet((0.5, 1.0))
    gs = GammaSet()
    assert gs.gammas == (0.5, 0.9, 0.99, 0.999)
    assert gs.long_index == 3 and gs.long_gamma == 0.999


def test_long_gamma_advantages_have_larger_spread_on_lander():
    # The scale-mismatch mechanism: on random-policy rollouts the long-head
    # advantages disperse more than the short-head ones.
    env = MiniLander()
    env.reset(seed=0)
    policy = DenseNet((4, 32, 4), np.random.default_rng(0), out_gain=0.01)
    rng = np.random.default_rng(1)
    traj = collect_rollout(policy, env, 1500, rng)
    gammas = GammaSet()
    zeros = np.zeros((1500, 4))
    mga = compute_gae(traj, zeros, zeros, gammas, lam=0.95)
    spread_short = mga.advantages[0].std()
    spread_long = mga.advantages[3].std()
    assert spread_long > spread_short
