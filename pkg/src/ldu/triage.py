"""Routing strategies: LDU, LD and DT.

Verdicts are int64 arrays holding a class index (0 or 1) or ``DEFER``.

* LDU trains a defer network on the ensemble's probabilities plus the two
  entropy features.
* LD adds a defer output to the diagnostic architecture itself and trains
  it on the raw features with the same loss.
* DT defers every sample whose entropy exceeds a threshold and otherwise
  returns the ensemble majority vote.
"""
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError
from .nn import NetworkParams, forward_batch, init_params, mlp_specs, train
from .uncertainty import (
    N_CLASSES,
    DeferFeatures,
    PredictionMatrix,
    build_defer_features,
    diagnostic_entropies,
    ensemble_entropies,
    majority_vote,
)

DEFER = -1
LDU_HIDDEN = (100, 100)
MEASURES = ("diagnostic", "ensemble")


@dataclass(frozen=True)
class DtConfig:
    threshold: float
    measure: str = "diagnostic"

    def __post_init__(self):
        if not (np.isfinite(self.threshold) and self.threshold >= 0.0):
            raise InvalidArgumentError("threshold must be finite and >= 0")
        if self.measure not in MEASURES:
            raise InvalidArgumentError(f"measure must be one of {MEASURES}")


def decide_from_logits(logits):
    """Argmax over C+1 logits (ties to the lowest index); the last index is DEFER."""
    logits = np.asarray(logits, dtype=np.float64)
    if logits.ndim == 1:
        logits = logits[None, :]
    verdict = np.argmax(logits, axis=1).astype(np.int64)
    verdict[verdict == logits.shape[1] - 1] = DEFER
    return verdict


def _defer_config(config, alpha):
    return config.replace(loss="defer", alpha=float(alpha))


def _as_features(data, sort_members=False):
    if isinstance(data, DeferFeatures):
        return data
    if isinstance(data, PredictionMatrix):
        return build_defer_features(data, sort_members=sort_members)
    raise InvalidArgumentError("expected a PredictionMatrix or DeferFeatures")


def ldu_specs(n_members, hidden=LDU_HIDDEN, hidden_activation="sigmoid"):
    return mlp_specs(n_members + 2, list(hidden), N_CLASSES + 1, hidden_activation)


def train_ldu(data, alpha, config, hidden=LDU_HIDDEN, sort_members=False, backend=None):
    """Train the stage-two defer network on K+2 uncertainty features."""
    feats = _as_features(data, sort_members)
    if feats.labels is None:
        raise InvalidArgumentError("LDU training needs labels")
    specs = ldu_specs(feats.n_members, hidden)
    return train(feats.rows, feats.labels, specs, _defer_config(config, alpha), backend=backend)


def decide_ldu(defer_net, data, sort_members=False):
    feats = _as_features(data, sort_members)
    if defer_net.input_dim != feats.rows.shape[1] or defer_net.output_dim != N_CLASSES + 1:
        raise InvalidArgumentError(
            f"defer network maps {defer_net.input_dim} -> {defer_net.output_dim}, "
            f"features have {feats.rows.shape[1]} columns"
        )
    return decide_from_logits(forward_batch(defer_net, feats.rows))


def ld_specs(diagnostic_specs):
    """The diagnostic architecture with one extra output for the defer class."""
    specs = list(diagnostic_specs)
    last = specs[-1]
    return specs[:-1] + [type(last)(last.input_dim, last.output_dim + 1, last.activation)]


def warm_start_ld(diagnostic, seed):
    """Copy a trained diagnostic net and append a freshly initialised defer row."""
    fresh = init_params(ld_specs(diagnostic.specs), seed)
    weights = [w.copy() for w in diagnostic.weights]
    biases = [b.copy() for b in diagnostic.biases]
    weights[-1] = np.vstack([weights[-1], fresh.weights[-1][-1:]])
    biases[-1] = np.append(biases[-1], 0.0)
    return NetworkParams(weights, biases, list(diagnostic.activations))


def train_ld(train_set, alpha, specs, config, init=None, backend=None):
    """Train the defer-augmented diagnostic network on raw features.

    ``specs`` describes the plain diagnostic network (two outputs); the
    head is widened by one.  ``init`` optionally warm-starts from a trained
    diagnostic network (see :func:`warm_start_ld`); by default training
    starts from a fresh seeded initialisation.
    """
    start = warm_start_ld(init, config.seed) if init is not None else None
    return train(train_set.features, train_set.labels, ld_specs(specs),
                 _defer_config(config, alpha), init=start, backend=backend)


def decide_ld(ld_net, features):
    return decide_from_logits(forward_batch(ld_net, features))


def entropy_for(data, measure):
    """Per-row entropy; stored columns are used when given defer features."""
    if measure not in MEASURES:
        raise InvalidArgumentError(f"measure must be one of {MEASURES}")
    if isinstance(data, DeferFeatures):
        return data.diagnostic_entropy if measure == "diagnostic" else data.ensemble_entropy
    if measure == "diagnostic":
        return diagnostic_entropies(data.probs)
    return ensemble_entropies(data.probs)


def decide_dt(data, config):
    """Defer iff entropy > threshold (strictly), else the majority vote."""
    u = entropy_for(data, config.measure)
    verdict = majority_vote(data.probs)
    verdict[u > config.threshold] = DEFER
    return verdict


def decide_majority(data):
    """No-defer baseline: the ensemble majority vote."""
    return majority_vote(data.probs)
