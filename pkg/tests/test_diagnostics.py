"""Diagnostics: hack rate, router entropy, variance, reliability windows."""

import math

import numpy as np
import pytest

from gammaroute.advantage import MultiGammaAdvantages
from gammaroute.diagnostics import (hack_rate, long_adv_variance,
                                    reliability_summary, router_entropy)


def test_hack_rate_perfect_tracking():
    rng = np.random.default_rng(0)
    adv = rng.normal(size=(50, 4))
    weights = np.zeros_like(adv)
    weights[np.arange(50), np.argmax(adv, axis=1)] = 1.0
    assert hack_rate(weights, adv) == 1.0


def test_hack_rate_worst_tracking():
    rng = np.random.default_rng(1)
    adv = rng.normal(size=(50, 4))
    weights = np.zeros_like(adv)
    weights[np.arange(50), np.argmin(adv, axis=1)] = 1.0
    assert hack_rate(weights, adv) == 0.0


def test_hack_rate_uniform_random_near_quarter():
    # statistical anchor: independent weights land within 3 standard errors
    # of 1/4 over 1e4 samples
    rng = np.random.default_rng(2024)
    n = 10_000
    weights = rng.uniform(size=(n, 4))
    weights /= weights.sum(axis=1, keepdims=True)
    adv = rng.normal(size=(n, 4))
    rate = hack_rate(weights, adv)
    se = math.sqrt(0.25 * 0.75 / n)
    assert abs(rate - 0.25) <= 3 * se


def test_hack_rate_tie_breaks_to_lowest_index():
    weights = np.array([[0.5, 0.5, 0.0, 0.0]])
    adv = np.array([[2.0, 2.0, 1.0, 0.0]])
    assert hack_rate(weights, adv) == 1.0  # both argmaxes resolve to head 0


def test_hack_rate_empty_batch_is_absent():
    assert hack_rate(np.zeros((0, 4)), np.zeros((0, 4))) is None


def test_router_entropy_closed_forms():
    assert router_entropy(np.full(4, 0.25)) == pytest.approx(math.log(4.0))
    assert router_entropy(np.array([1.0, 0.0, 0.0, 0.0])) == 0.0
    assert router_entropy(np.array([0.5, 0.5, 0.0, 0.0])) == pytest.approx(math.log(2.0))


def test_router_entropy_bounds_over_random_simplex():
    rng = np.random.default_rng(5)
    for k in (2, 4, 7):
        w = rng.dirichlet(np.ones(k), size=500)
        ent = router_entropy(w)
        assert np.all(ent >= -1e-12)
        assert np.all(ent <= math.log(k) + 1e-12)


def test_long_adv_variance_examples():
    def mga(long_head):
        a = np.vstack([np.zeros_like(long_head, dtype=float), long_head])
        return MultiGammaAdvantages(advantages=a, targets=a.copy(), lam=0.95)

    assert long_adv_variance(mga(np.array([3.0, 3.0, 3.0]))) == 0.0
    assert long_adv_variance(mga(np.array([0.0, 2.0]))) == pytest.approx(2.0)
    assert long_adv_variance(mga(np.array([1.0]))) is None

    rng = np.random.default_rng(8)
    batch = rng.normal(size=256)
    # two-pass reference
    mean = batch.sum() / batch.size
    ref = ((batch - mean) ** 2).sum() / (batch.size - 1)
    assert long_adv_variance(mga(batch)) == pytest.approx(ref, abs=1e-12)


def test_reliability_summary_arithmetic():
    curves = [np.full(50, 100.0), np.full(50, 200.0), np.full(50, 50.0)]
    summary = reliability_summary(curves, window_fraction=0.1)
    assert summary.worst == 50.0
    assert summary.mean == pytest.approx(350.0 / 3.0)
    assert summary.per_seed == (100.0, 200.0, 50.0)
    assert summary.worst <= summary.mean


def test_reliability_summary_single_seed():
    summary = reliability_summary([np.arange(10.0)], window_fraction=0.2)
    assert summary.worst == summary.mean == pytest.approx(8.5)  # mean of [8, 9]
    assert summary.std == 0.0


def test_reliability_summary_full_window():
    summary = reliability_summary([np.arange(4.0)], window_fraction=1.0)
    assert summary.mean == pytest.approx(1.5)


def test_reliability_summary_trailing_window_is_ceil():
    curve = np.array([0.0] * 9 + [10.0])
    summary = reliability_summary([curve], window_fraction=0.1)  # ceil(1.0) = 1
    assert summary.mean == 10.0
    summary2 = reliability_summary([curve], window_fraction=0.11)  # ceil(1.1) = 2
    assert summary2.mean == 5.0


def test_reliability_summary_diverged_uses_last_return():
    healthy = np.linspace(0, 100, 20)
    crashed = np.array([5.0, 4.0, -3.0])
    summary = reliability_summary([healthy, crashed], 0.1, diverged=[False, True])
    assert summary.per_seed[1] == -3.0
    assert summary.diverged == (False, True)
    assert summary.worst == -3.0


def test_reliability_summary_validation():
    with pytest.raises(ValueError, match="window_fraction"):
        reliability_summary([np.ones(3)], 0.0)
    with pytest.raises(ValueError, match="non-empty"):
        reliability_summary([np.array([])], 0.5)
