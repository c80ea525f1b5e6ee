"""Cross-entropy with an extra alpha-weighted defer term.

For logits ``x`` over C classes plus one defer output (the last index)::

    loss = -log p[target] - alpha * log p[defer],   p = softmax(x)

which is evaluated as ``-x[target] - alpha*x[defer] + (1+alpha)*lse(x)``.
Its gradient with respect to the logits is
``(1+alpha)*p - onehot(target) - alpha*onehot(defer)``.
"""
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError
from .numerics import logsumexp, softmax


@dataclass(frozen=True)
class DeferLossParams:
    alpha: float
    class_count: int = 2

    def __post_init__(self):
        if not (self.alpha >= 0.0 and np.isfinite(self.alpha)):
            raise InvalidArgumentError(f"alpha must be a finite value >= 0, got {self.alpha!r}")
        if self.class_count < 2:
            raise InvalidArgumentError("class_count must be at least 2")

    @property
    def defer_index(self):
        return self.class_count


def _check(logits, target, params):
    x = np.asarray(logits, dtype=np.float64)
    if x.shape != (params.class_count + 1,):
        raise InvalidArgumentError(
            f"expected {params.class_count + 1} logits, got shape {x.shape}"
        )
    if not np.all(np.isfinite(x)):
        raise InvalidArgumentError("logits must be finite")
    if target == params.defer_index:
        raise InvalidArgumentError("the defer class is never a ground-truth target")
    if not 0 <= target < params.class_count:
        raise InvalidArgumentError(f"target {target!r} outside 0..{params.class_count - 1}")
    return x


def defer_loss_value(logits, target, params):
    x = _check(logits, target, params)
    a = params.alpha
    return float(-x[target] - a * x[params.defer_index] + (1.0 + a) * logsumexp(x))


def defer_loss_grad(logits, target, params):
    x = _check(logits, target, params)
    a = params.alpha
    g = (1.0 + a) * softmax(x)
    g[target] -= 1.0
    g[params.defer_index] -= a
    return g


def batch_defer_loss(logits, targets, alpha):
    """Mean loss over rows of an (N, C+1) logit matrix; the defer index is last."""
    z = np.asarray(logits, dtype=np.float64)
    t = np.asarray(targets, dtype=np.int64)
    n = z.shape[0]
    per = -z[np.arange(n), t] - alpha * z[:, -1] + (1.0 + alpha) * logsumexp(z, axis=1)
    return float(per.mean())
