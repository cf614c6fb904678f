"""Clipped-surrogate policy optimization over routed multi-discount advantages.

One `Trainer` owns a policy, a shared-trunk multi-head critic, and (in
attention mode) a router. Each update collects an on-policy rollout, scores
it with per-head GAE, routes the heads into a scalar actor advantage, and
runs several epochs of minibatch updates.

The critic deliberately computes each head as a separate dot product off the
shared trunk: with auxiliary losses switched off, the long head's entire
forward/backward arithmetic is then identical to a plain single-head critic,
which is what makes the decoupled mode exactly reducible to single-gamma
training.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import nn
from .advantage import (GammaSet, MultiGammaAdvantages, compute_gae,
                        normalization_stats, td_residuals)
from .diagnostics import (DiagnosticsRecord, hack_rate, long_adv_variance,
                          router_entropy)
from .nn import Adam, DenseNet, NonFiniteError, Tensor, gradients
from .routing import (RouterOutput, make_router, route_attention,
                      route_by_error, route_decoupled, softmax)

ACTOR_MODES = ("attention", "error", "decoupled", "long_only")
CRITIC_MODES = ("mean_all", "long_plus_aux")

NET_HIDDEN = (64, 64)


@dataclass
class Trajectory:
    """One on-policy rollout; all per-step arrays share length T."""

    obs: np.ndarray           # (T, obs_dim)
    actions: np.ndarray       # (T,) int64
    logp: np.ndarray          # (T,) behavior log-probs at sampling time
    rewards: np.ndarray       # (T,)
    terminated: np.ndarray    # (T,) bool
    truncated: np.ndarray     # (T,) bool
    next_obs: np.ndarray      # (T, obs_dim) true successor states
    values: np.ndarray | None = None        # (T, K) per-head V(s_t)
    next_values: np.ndarray | None = None   # (T, K) per-head V(s_{t+1})
    episode_returns: list = field(default_factory=list)

    @property
    def length(self) -> int:
        return self.obs.shape[0]

    def __post_init__(self):
        t = self.obs.shape[0]
        for name in ("actions", "logp", "rewards", "terminated", "truncated", "next_obs"):
            if getattr(self, name).shape[0] != t:
                raise ValueError(f"trajectory field {name} has mismatched length")


@dataclass(frozen=True)
class PpoHyper:
    clip_eps: float = 0.2
    rollout_len: int = 2048
    epochs: int = 10
    minibatch: int = 64
    entropy_coef: float = 0.01
    lr_actor: float = 3e-4
    lr_critic: float = 3e-4
    lr_router: float = 3e-4
    lambda_aux: float = 0.5
    gae_lambda: float = 0.95
    updates: int = 200

    def __post_init__(self):
        if not 0.0 < self.clip_eps < 1.0:
            raise ValueError(f"clip_eps must be in (0, 1), got {self.clip_eps}")
        if self.lambda_aux < 0.0:
            raise ValueError(f"lambda_aux must be >= 0, got {self.lambda_aux}")
        if self.minibatch < 2:
            raise ValueError("minibatch must be >= 2")
        if self.rollout_len % self.minibatch != 0:
            raise ValueError("rollout_len must be a multiple of minibatch")
        if not 0.0 <= self.gae_lambda <= 1.0:
            raise ValueError(f"gae_lambda must be in [0, 1], got {self.gae_lambda}")


def clip_objective(ratio, advantage, epsilon: float):
    """Per-sample clipped surrogate: min(r*A, clip(r, 1-eps, 1+eps)*A)."""
    ratio = np.asarray(ratio, dtype=np.float64)
    advantage = np.asarray(advantage, dtype=np.float64)
    clipped = np.clip(ratio, 1.0 - epsilon, 1.0 + epsilon)
    out = np.minimum(ratio * advantage, clipped * advantage)
    return float(out) if out.ndim == 0 else out


def clipped_policy_loss(policy: DenseNet, obs: np.ndarray, actions: np.ndarray,
                        logp_old: np.ndarray, adv_norm, clip_eps: float,
                        ent_coef: float) -> Tensor:
    """Negated clipped surrogate plus action-entropy bonus, as a tape scalar.

    `adv_norm` may be a plain array (constant advantages) or a Tensor wired
    to router parameters, in which case the surrogate gradient also flows
    into the routing weights.
    """
    lsm = nn.log_softmax(policy.forward(obs))
    logp = nn.gather_rows(lsm, actions)
    ratio = (logp - logp_old).exp()
    adv_t = adv_norm if isinstance(adv_norm, Tensor) else Tensor(adv_norm)
    unclipped = ratio * adv_t
    clipped = nn.clip(ratio, 1.0 - clip_eps, 1.0 + clip_eps) * adv_t
    objective = nn.minimum(unclipped, clipped).mean()
    entropy = -((lsm.exp() * lsm).sum(axis=1).mean())
    return -(objective + entropy * ent_coef)


def critic_loss(values, targets: np.ndarray, mode: str, lambda_aux: float,
                long_index: int) -> Tensor:
    """Multi-head value loss.

    `values` is a list of K (B,) tensors, `targets` a (K, B) array.
    mean_all averages the per-head half-squared errors; long_plus_aux takes
    the long head's loss plus lambda_aux times the summed short-head losses.
    """
    if mode not in CRITIC_MODES:
        raise ValueError(f"unknown critic mode {mode!r}")
    k = len(values)
    if targets.shape[0] != k:
        raise ValueError(f"targets have {targets.shape[0]} heads, expected {k}")
    for v in values:
        if v.data.shape != targets.shape[1:]:
            raise ValueError(f"value batch {v.data.shape} does not match targets {targets.shape}")

    losses = [((v - targets[i]).square().mean()) * 0.5 for i, v in enumerate(values)]
    if mode == "mean_all":
        total = losses[0]
        for extra in losses[1:]:
            total = total + extra
        return total * (1.0 / k)

    if not 0 <= long_index < k:
        raise ValueError(f"long_index {long_index} out of range for {k} heads")
    total = losses[long_index]
    aux = None
    for i, extra in enumerate(losses):
        if i == long_index:
            continue
        aux = extra if aux is None else aux + extra
    if aux is not None:
        total = total + aux * lambda_aux
    return total


class MultiHeadCritic:
    """Shared tanh trunk with one scalar value head per discount factor."""

    def __init__(self, obs_dim: int, n_heads: int, rng: np.random.Generator,
                 hidden=NET_HIDDEN):
        self.trunk = DenseNet((obs_dim, *hidden), rng, out_activation="tanh")
        self.n_heads = n_heads
        width = hidden[-1]
        self.head_weights = []
        self.head_biases = []
        for _ in range(n_heads):
            w = nn.scaled_uniform(rng, width, 1, 1.0)[:, 0]
            self.head_weights.append(Tensor(w))
            self.head_biases.append(Tensor(0.0))

    def parameters(self) -> list:
        params = list(self.trunk.parameters())
        for w, b in zip(self.head_weights, self.head_biases):
            params.append(w)
            params.append(b)
        return params

    def values(self, obs: np.ndarray) -> list:
        """Tape-recorded per-head values: list of K (B,) tensors."""
        h = self.trunk.forward(obs)
        return [h @ w + b for w, b in zip(self.head_weights, self.head_biases)]

    def values_np(self, obs: np.ndarray) -> np.ndarray:
        """(B, K) value matrix without the tape."""
        h = self.trunk.forward_np(obs)
        cols = [h @ w.data + b.data for w, b in zip(self.head_weights, self.head_biases)]
        return np.stack(cols, axis=1)


def sample_categorical(rng: np.random.Generator, probs: np.ndarray) -> int:
    u = rng.random()
    idx = int(np.searchsorted(np.cumsum(probs), u))
    return min(idx, probs.shape[0] - 1)


def collect_rollout(policy: DenseNet, env, length: int, rng: np.random.Generator,
                    critic: MultiHeadCritic | None = None) -> Trajectory:
    """Roll the current policy for `length` steps with automatic resets.

    Actions are sampled from the policy's categorical distribution;
    log-probs are recorded at sampling time. When a critic is given, the
    per-head values for observed and successor states are filled in with
    batched forward passes after collection.
    """
    if policy.out_dim != env.spec.n_actions:
        raise ValueError(
            f"policy emits {policy.out_dim} logits but env has {env.spec.n_actions} actions"
        )
    obs_dim = env.spec.obs_dim
    if length == 0:
        empty = np.zeros((0, obs_dim))
        traj = Trajectory(obs=empty, actions=np.zeros(0, dtype=np.int64),
                          logp=np.zeros(0), rewards=np.zeros(0),
                          terminated=np.zeros(0, dtype=bool),
                          truncated=np.zeros(0, dtype=bool), next_obs=empty.copy())
        if critic is not None:
            traj.values = np.zeros((0, critic.n_heads))
            traj.next_values = np.zeros((0, critic.n_heads))
        return traj

    obs_buf = np.zeros((length, obs_dim))
    next_obs_buf = np.zeros((length, obs_dim))
    actions = np.zeros(length, dtype=np.int64)
    logps = np.zeros(length)
    rewards = np.zeros(length)
    terminated = np.zeros(length, dtype=bool)
    truncated = np.zeros(length, dtype=bool)
    episode_returns = []

    obs = env.reset()
    ep_return = 0.0
    for t in range(length):
        logits = policy.forward_np(obs[None, :])[0]
        z = logits - logits.max()
        log_probs = z - np.log(np.exp(z).sum())
        action = sample_categorical(rng, np.exp(log_probs))

        result = env.step(action)
        obs_buf[t] = obs
        next_obs_buf[t] = result.obs
        actions[t] = action
        logps[t] = log_probs[action]
        rewards[t] = result.reward
        terminated[t] = result.terminated
        truncated[t] = result.truncated

        ep_return += result.reward
        if result.done:
            episode_returns.append(ep_return)
            ep_return = 0.0
            obs = env.reset()
        else:
            obs = result.obs

    traj = Trajectory(obs=obs_buf, actions=actions, logp=logps, rewards=rewards,
                      terminated=terminated, truncated=truncated,
                      next_obs=next_obs_buf, episode_returns=episode_returns)
    if critic is not None:
        traj.values = critic.values_np(obs_buf)
        traj.next_values = critic.values_np(next_obs_buf)
    return traj


class Trainer:
    """One seeded training run of a single actor mode on one environment."""

    def __init__(self, env, mode: str, gammas: GammaSet | None = None,
                 hyper: PpoHyper | None = None, tau: float = 1.0, seed: int = 0):
        if mode not in ACTOR_MODES:
            raise ValueError(f"unknown actor mode {mode!r}; expected one of {ACTOR_MODES}")
        self.env = env
        self.mode = mode
        self.gammas = gammas or GammaSet()
        self.hyper = hyper or PpoHyper()
        self.tau = float(tau)
        self.seed = int(seed)

        children = np.random.SeedSequence(self.seed).spawn(5)
        env_seed = int(children[0].generate_state(1)[0])
        spec = env.spec
        k = len(self.gammas)

        self.policy = DenseNet((spec.obs_dim, *NET_HIDDEN, spec.n_actions),
                               np.random.default_rng(children[1]), out_gain=0.01)
        self.critic = MultiHeadCritic(spec.obs_dim, k, np.random.default_rng(children[2]))
        self.router = (make_router(spec.obs_dim, k, np.random.default_rng(children[3]))
                       if mode == "attention" else None)
        self.rng = np.random.default_rng(children[4])

        self.adam_actor = Adam(self.policy.parameters(), self.hyper.lr_actor)
        self.adam_critic = Adam(self.critic.parameters(), self.hyper.lr_critic)
        self.adam_router = (Adam(self.router.parameters(), self.hyper.lr_router)
                            if self.router is not None else None)

        if mode in ("decoupled", "long_only"):
            self.critic_mode = "long_plus_aux"
        else:
            self.critic_mode = "mean_all"
        self.lambda_aux = 0.0 if mode == "long_only" else self.hyper.lambda_aux

        env.reset(seed=env_seed)
        self._last_return = float("nan")

    @property
    def n_heads(self) -> int:
        return len(self.gammas)

    def collect(self) -> Trajectory:
        return collect_rollout(self.policy, self.env, self.hyper.rollout_len,
                               self.rng, critic=self.critic)

    def _route(self, traj: Trajectory, mga: MultiGammaAdvantages) -> RouterOutput:
        if self.mode == "attention":
            logits = self.router.forward_np(traj.obs)
            return route_attention(mga, logits)
        if self.mode == "error":
            deltas = td_residuals(traj, traj.values, traj.next_values, self.gammas)
            return route_by_error(mga, np.abs(deltas).T, self.tau)
        return route_decoupled(mga)

    def run_update(self, traj: Trajectory, update_index: int = 0) -> DiagnosticsRecord | None:
        """One full PPO update on a rollout; returns its diagnostics row.

        Empty rollouts are skipped (returns None). Per-head GAE and the
        routing decision are computed once up front from collection-time
        values; the epochs below only re-evaluate the policy (and, in
        attention mode, the router, whose weights are re-derived inside the
        tape so surrogate gradients reach its parameters).
        """
        if traj.length == 0:
            return None
        hyper = self.hyper
        mga = compute_gae(traj, traj.values, traj.next_values, self.gammas,
                          hyper.gae_lambda)
        routed = self._route(traj, mga)

        heads_t = mga.advantages.T  # (T, K)
        record = DiagnosticsRecord(
            update=update_index,
            mean_return=float(np.mean(traj.episode_returns)) if traj.episode_returns else float("nan"),
            hack_rate=hack_rate(routed.weights, heads_t),
            router_entropy=float(np.mean(router_entropy(routed.weights))),
            w_mean=tuple(float(x) for x in routed.weights.mean(axis=0)),
            long_adv_var=long_adv_variance(mga),
            policy_entropy=self._mean_policy_entropy(traj.obs),
            diverged=False,
        )

        n_policy = len(self.policy.parameters())
        for _ in range(hyper.epochs):
            perm = self.rng.permutation(traj.length)
            for start in range(0, traj.length, hyper.minibatch):
                idx = perm[start:start + hyper.minibatch]
                obs_mb = traj.obs[idx]
                act_mb = traj.actions[idx]
                logp_old = traj.logp[idx]

                if self.mode == "attention":
                    z = self.router.forward(obs_mb)
                    w = nn.softmax(z)
                    raw = (w * Tensor(heads_t[idx])).sum(axis=1)
                    mean, inv_std = normalization_stats(raw.data)
                    adv_norm = (raw - mean) * inv_std
                    loss = clipped_policy_loss(self.policy, obs_mb, act_mb, logp_old,
                                               adv_norm, hyper.clip_eps, hyper.entropy_coef)
                    grads = gradients(loss, self.policy.parameters() + self.router.parameters())
                    self.adam_actor.step(grads[:n_policy])
                    self.adam_router.step(grads[n_policy:])
                else:
                    raw = routed.routed[idx]
                    mean, inv_std = normalization_stats(raw)
                    adv_norm = (raw - mean) * inv_std
                    loss = clipped_policy_loss(self.policy, obs_mb, act_mb, logp_old,
                                               adv_norm, hyper.clip_eps, hyper.entropy_coef)
                    self.adam_actor.step(gradients(loss, self.policy.parameters()))

                values_mb = self.critic.values(obs_mb)
                closs = critic_loss(values_mb, mga.targets[:, idx], self.critic_mode,
                                    self.lambda_aux, self.gammas.long_index)
                self.adam_critic.step(gradients(closs, self.critic.parameters()))

        if not np.isnan(record.mean_return):
            self._last_return = record.mean_return
        return record

    def _mean_policy_entropy(self, obs: np.ndarray) -> float:
        probs = softmax(self.policy.forward_np(obs), axis=1)
        return float(np.mean(router_entropy(probs)))

    def _diverged_record(self, update_index: int) -> DiagnosticsRecord:
        k = self.n_heads
        return DiagnosticsRecord(update=update_index, mean_return=self._last_return,
                                 hack_rate=None, router_entropy=float("nan"),
                                 w_mean=(float("nan"),) * k, long_adv_var=None,
                                 policy_entropy=float("nan"), diverged=True)

    def run(self, n_updates: int | None = None, on_record=None) -> list:
        """Train for `n_updates` (default: hyper.updates) rollout/update cycles.

        A non-finite loss or gradient halts the run and appends a final
        record flagged as diverged; callers decide how to report it.
        """
        total = self.hyper.updates if n_updates is None else n_updates
        records = []
        for u in range(total):
            try:
                traj = self.collect()
                record = self.run_update(traj, u)
            except NonFiniteError:
                record = self._diverged_record(u)
                records.append(record)
                if on_record is not None:
                    on_record(record)
                break
            if record is None:
                continue
            records.append(record)
            if on_record is not None:
                on_record(record)
        return records
