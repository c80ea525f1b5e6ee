import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from ldu.errors import InvalidArgumentError
from ldu.numerics import logsumexp, softmax, xlogx, xlogx_array


def test_softmax_uniform():
    np.testing.assert_allclose(softmax([0.0, 0.0, 0.0]), [1 / 3] * 3, atol=1e-15)


def test_softmax_ln2():
    # exp(ln 2) = 2, normaliser 3
    np.testing.assert_allclose(softmax([math.log(2.0), 0.0]), [2 / 3, 1 / 3], atol=1e-15)


def test_softmax_large_logits_do_not_overflow():
    with np.errstate(over="raise"):
        p = softmax([1000.0, 0.0])
    assert p[0] == 1.0
    assert 0.0 <= p[1] < 1e-300


@pytest.mark.parametrize("bad", [[], [np.nan, 0.0], [np.inf], [[1.0, 2.0]]])
def test_softmax_rejects_bad_input(bad):
    with pytest.raises(InvalidArgumentError):
        softmax(bad)


def test_softmax_sums_to_one_on_random_vectors(rng):
    for _ in range(1000):
        v = rng.uniform(-100, 100, size=rng.integers(1, 20))
        p = softmax(v)
        assert abs(p.sum() - 1.0) < 1e-12
        assert np.all(p > 0) or v.max() - v.min() > 700


@given(
    arrays(np.float64, st.integers(1, 12), elements=st.floats(-50, 50)),
    st.floats(-100, 100),
)
def test_softmax_shift_invariance(v, c):
    np.testing.assert_allclose(softmax(v), softmax(v + c), rtol=0, atol=1e-12)


def test_logsumexp_matches_direct_sum():
    v = np.array([0.3, -1.2, 2.5])
    assert logsumexp(v) == pytest.approx(math.log(sum(math.exp(x) for x in v)), abs=1e-14)


@pytest.mark.parametrize("p,expected", [(0.0, 0.0), (1.0, 0.0), (0.5, -0.346573590279972654708616)])
def test_xlogx_values(p, expected):
    assert xlogx(p) == pytest.approx(expected, abs=1e-15)


def test_xlogx_exact_zero_at_endpoints():
    assert xlogx(0.0) == 0.0
    assert xlogx(1.0) == 0.0


@pytest.mark.parametrize("p", [-1e-9, 1.0000001, 2.0])
def test_xlogx_rejects_out_of_range(p):
    with pytest.raises(InvalidArgumentError):
        xlogx(p)


def test_xlogx_minimum_at_inverse_e():
    assert xlogx(1 / math.e) == pytest.approx(-1 / math.e, abs=1e-12)
    grid = np.linspace(0.0, 1.0, 10001)
    values = np.array([xlogx(p) for p in grid])
    assert np.all(values <= 0.0)
    assert values.min() >= -1 / math.e - 1e-12


def test_xlogx_array_matches_scalar(rng):
    p = np.concatenate([[0.0, 1.0], rng.uniform(size=100)])
    np.testing.assert_array_equal(xlogx_array(p), [xlogx(v) for v in p])
