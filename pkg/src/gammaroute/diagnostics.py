"""Per-update training diagnostics and end-of-run reliability statistics."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass
class DiagnosticsRecord:
    """One row of training telemetry, emitted once per policy update."""

    update: int
    mean_return: float
    hack_rate: float | None
    router_entropy: float
    w_mean: tuple          # K per-head mean routing weights
    long_adv_var: float | None
    policy_entropy: float
    diverged: bool = False


@dataclass(frozen=True)
class ReliabilitySummary:
    """Across-seed statistics of trailing-window returns."""

    per_seed: tuple
    mean: float
    std: float
    worst: float
    diverged: tuple


def hack_rate(weights: np.ndarray, advantages: np.ndarray) -> float | None:
    """Fraction of samples whose top routing weight sits on the top advantage head.

    Both argmaxes break ties toward the lowest head index. Chance level for
    independent weights is 1/K. An empty batch has no defined rate and
    returns None rather than a misleading 0.
    """
    weights = np.asarray(weights, dtype=np.float64)
    advantages = np.asarray(advantages, dtype=np.float64)
    if weights.shape != advantages.shape or weights.ndim != 2:
        raise ValueError(f"shape mismatch: weights {weights.shape}, advantages {advantages.shape}")
    if weights.shape[0] == 0:
        return None
    return float(np.mean(np.argmax(weights, axis=1) == np.argmax(advantages, axis=1)))


def router_entropy(weights: np.ndarray):
    """Shannon entropy -sum(w log w) with 0*log(0) = 0.

    Accepts one simplex vector (returns a float) or a batch of rows
    (returns one entropy per row). Batch summaries should average the
    per-row entropies, not take the entropy of the mean weights.
    """
    w = np.asarray(weights, dtype=np.float64)
    terms = np.where(w > 0.0, w * np.log(np.where(w > 0.0, w, 1.0)), 0.0)
    ent = -terms.sum(axis=-1)
    return float(ent) if w.ndim == 1 else ent


def long_adv_variance(adv) -> float | None:
    """Unbiased within-batch variance of the long-head advantage."""
    long_head = adv.advantages[adv.n_heads - 1]
    if long_head.shape[0] < 2:
        return None
    return float(np.var(long_head, ddof=1))


def reliability_summary(curves, window_fraction: float = 0.1,
                        diverged=None) -> ReliabilitySummary:
    """Trailing-window return per seed, then mean/std/min across seeds.

    Each curve is one seed's per-update mean return. Healthy seeds are
    scored by their mean over the trailing ceil(fraction * length) updates;
    diverged seeds are scored by their last recorded return and flagged.
    """
    if not 0.0 < window_fraction <= 1.0:
        raise ValueError(f"window_fraction must be in (0, 1], got {window_fraction}")
    curves = [np.asarray(c, dtype=np.float64) for c in curves]
    if len(curves) == 0 or any(c.size == 0 for c in curves):
        raise ValueError("reliability_summary needs at least one non-empty curve")
    if diverged is None:
        diverged = [False] * len(curves)
    if len(diverged) != len(curves):
        raise ValueError("diverged flags must match the number of curves")

    per_seed = []
    for curve, bad in zip(curves, diverged):
        if bad:
            per_seed.append(float(curve[-1]))
        else:
            window = math.ceil(window_fraction * curve.size)
            per_seed.append(float(curve[-window:].mean()))

    values = np.array(per_seed)
    std = float(values.std(ddof=1)) if values.size >= 2 else 0.0
    return ReliabilitySummary(per_seed=tuple(per_seed), mean=float(values.mean()),
                              std=std, worst=float(values.min()),
                              diverged=tuple(bool(b) for b in diverged))
