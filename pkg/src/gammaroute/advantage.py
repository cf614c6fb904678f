"""Per-discount GAE advantages and value targets, plus scale utilities.

A rollout is scored once per discount factor: each head gets its own
lambda-weighted sum of one-step residuals, truncated at episode boundaries.
Heads share lambda and differ only in gamma, so any cross-head scale
difference comes from the discounting itself.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .nn import NonFiniteError

log = logging.getLogger(__name__)

NORM_EPS = 1e-8

DEFAULT_GAMMAS = (0.5, 0.9, 0.99, 0.999)


@dataclass(frozen=True)
class GammaSet:
    """Ordered discount factors with a designated long-horizon head."""

    gammas: tuple = DEFAULT_GAMMAS

    def __post_init__(self):
        gs = tuple(float(g) for g in self.gammas)
        object.__setattr__(self, "gammas", gs)
        if len(gs) < 1:
            raise ValueError("GammaSet needs at least one discount factor")
        if any(not 0.0 < g < 1.0 for g in gs):
            raise ValueError(f"discount factors must lie in (0, 1): {gs}")
        if any(a >= b for a, b in zip(gs, gs[1:])):
            raise ValueError(f"discount factors must be strictly increasing: {gs}")

    @property
    def long_index(self) -> int:
        return len(self.gammas) - 1

    @property
    def long_gamma(self) -> float:
        return self.gammas[self.long_index]

    def __len__(self) -> int:
        return len(self.gammas)

    def __iter__(self):
        return iter(self.gammas)


@dataclass
class MultiGammaAdvantages:
    """Per-head GAE estimates and value targets for one rollout.

    `advantages[i, t]` and `targets[i, t]` are indexed head-first, aligned
    with the source trajectory's T steps.
    """

    advantages: np.ndarray  # (K, T)
    targets: np.ndarray     # (K, T)
    lam: float

    @property
    def n_heads(self) -> int:
        return self.advantages.shape[0]

    @property
    def n_steps(self) -> int:
        return self.advantages.shape[1]

    def head(self, i: int) -> np.ndarray:
        return self.advantages[i]


def compute_gae(traj, values: np.ndarray, next_values: np.ndarray,
                gammas: GammaSet, lam: float) -> MultiGammaAdvantages:
    """Backward-recursion GAE for every head of a rollout.

    `values` and `next_values` are (T, K) predictions for the observed and
    successor states. Termination zeroes the bootstrap; any episode end
    (terminated or truncated) stops the residual trace from crossing into
    the next episode.
    """
    values = np.asarray(values, dtype=np.float64)
    next_values = np.asarray(next_values, dtype=np.float64)
    if not (np.all(np.isfinite(values)) and np.all(np.isfinite(next_values))):
        raise NonFiniteError("non-finite value predictions; GAE aborted")

    rewards = np.asarray(traj.rewards, dtype=np.float64)
    n_steps = rewards.shape[0]
    k = len(gammas)
    if values.shape != (n_steps, k) or next_values.shape != (n_steps, k):
        raise ValueError(
            f"values must be (T={n_steps}, K={k}); got {values.shape} and {next_values.shape}"
        )

    nonterminal = 1.0 - np.asarray(traj.terminated, dtype=np.float64)
    carry = 1.0 - np.asarray(traj.terminated | traj.truncated, dtype=np.float64)

    advantages = np.zeros((k, n_steps))
    for i, gamma in enumerate(gammas):
        delta = rewards + gamma * next_values[:, i] * nonterminal - values[:, i]
        acc = 0.0
        for t in range(n_steps - 1, -1, -1):
            acc = delta[t] + gamma * lam * carry[t] * acc
            advantages[i, t] = acc

    targets = advantages + values.T
    return MultiGammaAdvantages(advantages=advantages, targets=targets, lam=lam)


def td_residuals(traj, values: np.ndarray, next_values: np.ndarray,
                 gammas: GammaSet) -> np.ndarray:
    """One-step residuals r + gamma*V(s') - V(s) per head, shape (K, T)."""
    values = np.asarray(values, dtype=np.float64)
    next_values = np.asarray(next_values, dtype=np.float64)
    rewards = np.asarray(traj.rewards, dtype=np.float64)
    nonterminal = 1.0 - np.asarray(traj.terminated, dtype=np.float64)
    out = np.zeros((len(gammas), rewards.shape[0]))
    for i, gamma in enumerate(gammas):
        out[i] = rewards + gamma * next_values[:, i] * nonterminal - values[:, i]
    return out


def value_bound(r_max: float, gamma: float, horizon: int | None = None) -> float:
    """Largest possible |discounted value| given a reward bound.

    Infinite-horizon: r_max / (1 - gamma). With a finite horizon H the
    geometric sum truncates to r_max * (1 - gamma^H) / (1 - gamma).
    """
    if r_max < 0:
        raise ValueError(f"r_max must be >= 0, got {r_max}")
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"gamma must be in (0, 1), got {gamma}")
    if horizon is None:
        return r_max / (1.0 - gamma)
    if horizon < 0:
        raise ValueError(f"horizon must be >= 0, got {horizon}")
    return r_max * (1.0 - gamma ** horizon) / (1.0 - gamma)


def batch_normalize(advantages: np.ndarray) -> np.ndarray:
    """Shift/scale a batch of scalar advantages to mean 0, std 1.

    A near-constant batch cannot be scaled meaningfully; it normalizes to
    zeros (with a log warning) instead of dividing by epsilon-noise.
    Applied only to the routed scalar that enters the policy loss -- never
    to per-head advantages before routing.
    """
    a = np.asarray(advantages, dtype=np.float64)
    if a.ndim != 1 or a.size < 2:
        raise ValueError(f"batch_normalize expects a vector of length >= 2, got shape {a.shape}")
    mean, inv_std = normalization_stats(a)
    if inv_std == 0.0:
        log.warning("constant advantage batch; normalized to zeros")
        return np.zeros_like(a)
    return (a - mean) * inv_std


def normalization_stats(advantages: np.ndarray) -> tuple:
    """(mean, inverse std) used by batch_normalize, with the same guard.

    Returned as plain floats so a caller can apply the affine map inside a
    gradient tape while keeping the batch statistics out of the gradient.
    Inverse std of 0 signals the degenerate constant batch.
    """
    a = np.asarray(advantages, dtype=np.float64)
    if a.ndim != 1 or a.size < 2:
        raise ValueError(f"normalization_stats expects a vector of length >= 2, got shape {a.shape}")
    mean = float(a.mean())
    std = float(a.std())
    if std < NORM_EPS:
        return mean, 0.0
    return mean, 1.0 / std
