"""Numerically stable softmax / log-sum-exp / entropy primitives.

All functions work in float64 and natural logarithms.
"""
import math

import numpy as np

from .errors import InvalidArgumentError


def _as_finite_vector(values, name="logits"):
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise InvalidArgumentError(f"{name} must be a non-empty vector")
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError(f"{name} must be finite")
    return arr


def logsumexp(values, axis=-1):
    """log(sum(exp(values))) along ``axis`` with max-subtraction."""
    arr = np.asarray(values, dtype=np.float64)
    m = np.max(arr, axis=axis, keepdims=True)
    out = m + np.log(np.sum(np.exp(arr - m), axis=axis, keepdims=True))
    return np.squeeze(out, axis=axis)


def softmax(logits):
    """Softmax of a single logit vector.

    >>> softmax([0.0, 0.0]).tolist()
    [0.5, 0.5]
    """
    z = _as_finite_vector(logits)
    e = np.exp(z - z.max())
    return e / e.sum()


def softmax_rows(logits):
    """Row-wise softmax of an (N, J) matrix; no validation."""
    z = np.asarray(logits, dtype=np.float64)
    e = np.exp(z - z.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def log_softmax(logits):
    z = _as_finite_vector(logits)
    return z - logsumexp(z)


def xlogx(p):
    """``p * ln(p)`` with the convention ``0 * ln 0 = 0``."""
    p = float(p)
    if not 0.0 <= p <= 1.0:
        raise InvalidArgumentError(f"xlogx needs p in [0, 1], got {p!r}")
    if p == 0.0 or p == 1.0:
        return 0.0
    return p * math.log(p)


def xlogx_array(p):
    """Elementwise :func:`xlogx` for arrays already known to lie in [0, 1]."""
    p = np.asarray(p, dtype=np.float64)
    out = np.zeros_like(p)
    mask = (p > 0.0) & (p < 1.0)
    out[mask] = p[mask] * np.log(p[mask])
    return out
