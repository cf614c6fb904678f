"""Actor-advantage strategies over the multi-discount heads.

Three ways to turn K per-head advantages into the scalar the policy loss
consumes:

* attention  -- learned state-dependent softmax weights; the mixture is
  differentiable, so the policy objective back-propagates into the router.
* error      -- softmax over negative absolute TD errors; gradient-free by
  construction, the weights are data as far as the tape is concerned.
* decoupled  -- hard selection of the long-horizon head; no router exists.

All three emit weights on the K-simplex so the diagnostics can treat them
uniformly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .advantage import MultiGammaAdvantages
from .nn import DenseNet, NonFiniteError

ROUTER_HIDDEN = 64


def softmax(logits: np.ndarray, axis: int = -1) -> np.ndarray:
    """Max-subtracted softmax; safe for arbitrarily large finite logits."""
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def make_router(obs_dim: int, n_heads: int, rng: np.random.Generator) -> DenseNet:
    """Router head: observation -> K logits through one hidden layer."""
    return DenseNet((obs_dim, ROUTER_HIDDEN, n_heads), rng, out_gain=1.0)


@dataclass
class RouterOutput:
    """Per-sample routing weights and the routed scalar advantage.

    `logit_grads[t, j]` is d(routed[t])/d(logit_j) and is only present in
    the attention mode, where that derivative is what the policy surrogate
    pushes on.
    """

    weights: np.ndarray              # (T, K) rows on the simplex
    routed: np.ndarray               # (T,)
    logit_grads: np.ndarray | None   # (T, K) or None


def route_attention(adv: MultiGammaAdvantages, logits: np.ndarray) -> RouterOutput:
    """Softmax-weighted advantage mixture with its analytic logit gradients.

    For each sample, d(routed)/d(logit_j) = w_j * (A_j - routed): the router
    is pulled toward any head whose advantage beats the current mixture.
    """
    logits = np.asarray(logits, dtype=np.float64)
    heads = adv.advantages.T  # (T, K)
    if logits.shape != heads.shape:
        raise ValueError(f"logits shape {logits.shape} does not match advantages {heads.shape}")
    if not np.all(np.isfinite(heads)):
        raise NonFiniteError("non-finite advantages; routing aborted")

    weights = softmax(logits, axis=1)
    routed = (weights * heads).sum(axis=1)
    logit_grads = weights * (heads - routed[:, None])
    return RouterOutput(weights=weights, routed=routed, logit_grads=logit_grads)


def route_by_error(adv: MultiGammaAdvantages, abs_td_errors: np.ndarray,
                   tau: float) -> RouterOutput:
    """Weights from prediction reliability: w_i proportional to exp(-|delta_i|/tau).

    Heads whose one-step targets are easier to fit get larger weights. No
    gradient reaches any router parameter -- there is none -- and the
    weights enter the policy loss as constants.
    """
    if tau <= 0:
        raise ValueError(f"tau must be > 0, got {tau}")
    errors = np.asarray(abs_td_errors, dtype=np.float64)
    heads = adv.advantages.T
    if errors.shape != heads.shape:
        raise ValueError(f"TD error shape {errors.shape} does not match advantages {heads.shape}")
    if np.any(errors < 0):
        raise ValueError("absolute TD errors must be non-negative")

    weights = softmax(-errors / tau, axis=1)
    routed = (weights * heads).sum(axis=1)
    return RouterOutput(weights=weights, routed=routed, logit_grads=None)


def route_decoupled(adv: MultiGammaAdvantages) -> RouterOutput:
    """Hard selection of the long-horizon head (the last one).

    The actor sees only the long-gamma advantage; shorter heads can still
    be trained as auxiliary critic targets but never touch the policy
    objective.
    """
    n_steps, n_heads = adv.n_steps, adv.n_heads
    weights = np.zeros((n_steps, n_heads))
    weights[:, n_heads - 1] = 1.0
    routed = adv.advantages[n_heads - 1].copy()
    return RouterOutput(weights=weights, routed=routed, logit_grads=None)
