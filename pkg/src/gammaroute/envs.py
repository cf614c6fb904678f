"""Episodic toy environments with dense short-horizon shaping in tension with
a delayed terminal outcome, plus an exact horizon-aware solver for the chain.

Both environments are dependency-free, deterministic given a reset seed, and
declare a hard reward bound so value-scale arithmetic elsewhere can rely on
|r| <= r_max.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class StepResult:
    obs: np.ndarray
    reward: float
    terminated: bool
    truncated: bool

    @property
    def done(self) -> bool:
        return self.terminated or self.truncated


@dataclass(frozen=True)
class EnvSpec:
    obs_dim: int
    n_actions: int
    r_max: float
    horizon: int


class DistractorChain:
    """Line of N positions with a per-step distractor reward.

    Actions: ADVANCE moves one position toward the goal for zero reward;
    COLLECT stays put for a small positive reward. Reaching position N pays
    +1 and ends the episode. Whether grabbing distractor rewards forever
    beats walking to the goal depends on the discount factor, which is the
    whole point of the environment.
    """

    ADVANCE = 0
    COLLECT = 1

    def __init__(self, n: int = 10, horizon: int = 40,
                 collect_reward: float = 0.05, goal_reward: float = 1.0):
        if n < 1 or horizon < 1:
            raise ValueError("n and horizon must be >= 1")
        self.n = int(n)
        self.horizon = int(horizon)
        self.collect_reward = float(collect_reward)
        self.goal_reward = float(goal_reward)
        self._pos = None
        self._steps = 0
        self._done = True

    @property
    def spec(self) -> EnvSpec:
        return EnvSpec(obs_dim=self.n + 1, n_actions=2,
                       r_max=max(abs(self.collect_reward), abs(self.goal_reward)),
                       horizon=self.horizon)

    def _obs(self) -> np.ndarray:
        one_hot = np.zeros(self.n + 1)
        one_hot[self._pos] = 1.0
        return one_hot

    def reset(self, seed: int | None = None) -> np.ndarray:
        # The chain has a fixed start state; seed is accepted for API parity.
        del seed
        self._pos = 0
        self._steps = 0
        self._done = False
        return self._obs()

    def step(self, action: int) -> StepResult:
        if self._done:
            raise RuntimeError("episode is over; call reset() before step()")
        if action not in (self.ADVANCE, self.COLLECT):
            raise ValueError(f"invalid action {action}; expected 0 (advance) or 1 (collect)")

        reward = 0.0
        terminated = False
        if action == self.ADVANCE:
            self._pos += 1
            if self._pos == self.n:
                reward = self.goal_reward
                terminated = True
        else:
            reward = self.collect_reward

        self._steps += 1
        truncated = (not terminated) and self._steps >= self.horizon
        self._done = terminated or truncated
        return StepResult(obs=self._obs(), reward=reward,
                          terminated=terminated, truncated=truncated)


class MiniLander:
    """Four-dimensional lander: drift to the pad, touch down gently.

    State is (x, y, vx, vy). Per tick: gravity pulls vy down, one of four
    discrete actions may thrust, positions integrate velocities. Reward is
    dense progress toward the pad minus a fuel penalty, plus a +1/-1
    touchdown outcome, all clipped to [-1, 1] so r_max = 1.
    """

    NOOP = 0
    THRUST_UP = 1
    THRUST_LEFT = 2
    THRUST_RIGHT = 3

    GRAVITY = 0.05
    THRUST = 0.1
    FUEL_PENALTY = 0.03
    SOFT_SPEED = 0.1

    def __init__(self, horizon: int = 300, pad_halfwidth: float = 0.25,
                 start_offset: float = 0.4, start_altitude: float = 1.0):
        self.horizon = int(horizon)
        self.pad_halfwidth = float(pad_halfwidth)
        self.start_offset = float(start_offset)
        self.start_altitude = float(start_altitude)
        self._rng = None
        self._state = None
        self._steps = 0
        self._done = True

    @property
    def spec(self) -> EnvSpec:
        return EnvSpec(obs_dim=4, n_actions=4, r_max=1.0, horizon=self.horizon)

    def reset(self, seed: int | None = None) -> np.ndarray:
        if seed is not None:
            self._rng = np.random.default_rng(seed)
        elif self._rng is None:
            self._rng = np.random.default_rng()
        x = self._rng.uniform(-self.start_offset, self.start_offset)
        self._state = np.array([x, self.start_altitude, 0.0, 0.0])
        self._steps = 0
        self._done = False
        return self._state.copy()

    def _distance_to_pad(self) -> float:
        x, y = self._state[0], self._state[1]
        return float(np.hypot(x, y))

    def step(self, action: int) -> StepResult:
        if self._done:
            raise RuntimeError("episode is over; call reset() before step()")
        if not 0 <= action < 4:
            raise ValueError(f"invalid action {action}; expected 0..3")

        d_before = self._distance_to_pad()
        x, y, vx, vy = self._state
        if action == self.THRUST_UP:
            vy += self.THRUST
        elif action == self.THRUST_LEFT:
            vx -= self.THRUST
        elif action == self.THRUST_RIGHT:
            vx += self.THRUST
        vy -= self.GRAVITY
        x += vx
        y += vy
        self._state = np.array([x, y, vx, vy])

        reward = d_before - self._distance_to_pad()
        if action != self.NOOP:
            reward -= self.FUEL_PENALTY

        terminated = False
        if y <= 0.0:
            terminated = True
            soft = abs(vx) < self.SOFT_SPEED and abs(vy) < self.SOFT_SPEED
            on_pad = abs(x) <= self.pad_halfwidth
            reward += 1.0 if (soft and on_pad) else -1.0

        self._steps += 1
        truncated = (not terminated) and self._steps >= self.horizon
        self._done = terminated or truncated
        reward = float(np.clip(reward, -1.0, 1.0))
        return StepResult(obs=self._state.copy(), reward=reward,
                          terminated=terminated, truncated=truncated)


ENV_FACTORIES = {
    "distractor_chain": DistractorChain,
    "mini_lander": MiniLander,
}


def make_env(name: str, params: dict | None = None):
    if name not in ENV_FACTORIES:
        raise ValueError(f"unknown environment {name!r}; known: {sorted(ENV_FACTORIES)}")
    return ENV_FACTORIES[name](**(params or {}))


@dataclass(frozen=True)
class OracleSolution:
    """Exact solution of the chain MDP at one discount factor.

    `label` is "far-sighted" when the greedy optimal policy reaches the goal
    from the start state within the horizon, else "myopic". `value` is the
    optimal discounted value of the start state; `greedy_return` is the
    undiscounted episode return of the greedy policy.
    """

    label: str
    value: float
    greedy_return: float


def optimal_return_oracle(env, gamma: float) -> OracleSolution:
    """Finite-horizon dynamic programming over the chain.

    The value function is time-dependent (with few steps left, walking to
    the goal may no longer pay), so this runs backward induction over the
    full horizon rather than stationary value iteration.
    """
    if not isinstance(env, DistractorChain):
        raise ValueError(
            f"oracle supports DistractorChain only, got {type(env).__name__}"
        )
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"gamma must be in (0, 1), got {gamma}")

    n, horizon = env.n, env.horizon
    collect, goal = env.collect_reward, env.goal_reward

    # values[k][p]: optimal discounted value at position p with k steps left
    values = np.zeros(n)  # k = 0
    advance_action = np.zeros((horizon + 1, n), dtype=bool)
    for k in range(1, horizon + 1):
        nxt = np.zeros(n)
        for p in range(n):
            if p + 1 == n:
                advance_value = goal
            else:
                advance_value = gamma * values[p + 1]
            collect_value = collect + gamma * values[p]
            take_advance = advance_value > collect_value
            advance_action[k, p] = take_advance
            nxt[p] = advance_value if take_advance else collect_value
        values = nxt

    # Greedy rollout from the start state.
    pos, reached, undiscounted = 0, False, 0.0
    for k in range(horizon, 0, -1):
        if advance_action[k, pos]:
            pos += 1
            if pos == n:
                undiscounted += goal
                reached = True
                break
        else:
            undiscounted += collect

    label = "far-sighted" if reached else "myopic"
    return OracleSolution(label=label, value=float(values[0] if horizon else 0.0),
                          greedy_return=float(undiscounted))
