import math

import numpy as np
import pytest

from ldu.defer_loss import DeferLossParams, batch_defer_loss, defer_loss_grad, defer_loss_value
from ldu.errors import InvalidArgumentError
from ldu.numerics import softmax

LN3 = 1.09861228866810969140  # mpmath
LOSS_10_0_0 = 10.000181591474934489  # -10 + 2*ln(e^10 + 2), mpmath


def central_difference(f, x, h=1e-6):
    g = np.zeros_like(x)
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = h
        g[j] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def test_loss_examples():
    assert defer_loss_value([0, 0, 0], 0, DeferLossParams(1.0)) == pytest.approx(2 * LN3, abs=1e-12)
    assert defer_loss_value([0, 0, 0], 0, DeferLossParams(0.0)) == pytest.approx(LN3, abs=1e-12)
    assert defer_loss_value([10, 0, 0], 0, DeferLossParams(1.0)) == pytest.approx(LOSS_10_0_0, abs=1e-9)


def test_loss_matches_definition(rng):
    for _ in range(50):
        x = rng.uniform(-5, 5, 3)
        t = int(rng.integers(0, 2))
        a = rng.uniform(0, 2)
        p = softmax(x)
        expected = -math.log(p[t]) - a * math.log(p[2])
        assert defer_loss_value(x, t, DeferLossParams(a)) == pytest.approx(expected, rel=1e-12)


def test_grad_example():
    g = defer_loss_grad([0, 0, 0], 0, DeferLossParams(1.0))
    np.testing.assert_allclose(g, [-1 / 3, 2 / 3, -1 / 3], atol=1e-15)


def test_grad_alpha_zero_is_cross_entropy(rng):
    x = rng.normal(size=3)
    np.testing.assert_allclose(
        defer_loss_grad(x, 1, DeferLossParams(0.0)), softmax(x) - np.array([0, 1, 0]), atol=1e-15
    )


def test_gradient_check_random_cases(rng):
    worst = 0.0
    for _ in range(100):
        x = rng.uniform(-5, 5, 3)
        t = int(rng.integers(0, 2))
        params = DeferLossParams(float(rng.uniform(0, 2)))
        g = defer_loss_grad(x, t, params)
        fd = central_difference(lambda z: defer_loss_value(z, t, params), x)
        worst = max(worst, np.max(np.abs(g - fd) / np.maximum(np.abs(fd) + np.abs(g), 1e-8)))
        assert abs(g.sum()) < 1e-12
    assert worst < 1e-5


def test_shift_invariance(rng):
    for _ in range(20):
        x = rng.uniform(-5, 5, 3)
        c = rng.uniform(-50, 50)
        p = DeferLossParams(0.7)
        assert defer_loss_value(x, 0, p) == pytest.approx(defer_loss_value(x + c, 0, p), abs=1e-9)


def test_affine_in_alpha(rng):
    x = rng.uniform(-3, 3, 3)
    slope = -math.log(softmax(x)[2])
    base = defer_loss_value(x, 1, DeferLossParams(0.0))
    for a in (0.3, 1.0, 1.7):
        assert defer_loss_value(x, 1, DeferLossParams(a)) == pytest.approx(base + a * slope, abs=1e-9)
    assert slope >= 0


def test_errors():
    with pytest.raises(InvalidArgumentError):
        defer_loss_value([0, 0, 0], 2, DeferLossParams(1.0))
    with pytest.raises(InvalidArgumentError):
        defer_loss_grad([0, 0], 0, DeferLossParams(1.0))
    with pytest.raises(InvalidArgumentError):
        DeferLossParams(-0.1)
    with pytest.raises(InvalidArgumentError):
        defer_loss_value([0, np.nan, 0], 0, DeferLossParams(1.0))


def test_batch_loss_is_mean(rng):
    z = rng.normal(size=(6, 3))
    t = rng.integers(0, 2, 6)
    expected = np.mean([defer_loss_value(z[i], int(t[i]), DeferLossParams(0.4)) for i in range(6)])
    assert batch_defer_loss(z, t, 0.4) == pytest.approx(expected, abs=1e-12)
