"""Stage-one uncertainty features computed from ensemble predictions.

Two entropies summarise each row of an N x K matrix of positive-class
probabilities:

* ensemble entropy ``-sum_k p_k ln p_k`` over the raw member probabilities
  (not a normalised distribution, it is used as a feature), and
* diagnostic entropy, the Shannon entropy of the members' class-vote
  fractions.  It is zero whenever every member votes the same class.

Only binary tasks (two classes) are supported.
"""
from dataclasses import dataclass
import math

import numpy as np

from .errors import InvalidArgumentError
from .numerics import xlogx, xlogx_array

N_CLASSES = 2
LN2 = math.log(2.0)


def _check_labels(labels, n):
    if labels is None:
        return None
    labels = np.asarray(labels)
    if labels.shape != (n,):
        raise InvalidArgumentError(f"labels must have length {n}, got shape {labels.shape}")
    if not np.all((labels == 0) | (labels == 1)):
        raise InvalidArgumentError("labels must be 0 or 1")
    return labels.astype(np.int64)


def _default_ids(ids, n):
    if ids is None:
        return np.arange(n, dtype=np.int64)
    ids = np.asarray(ids, dtype=np.int64)
    if ids.shape != (n,):
        raise InvalidArgumentError(f"ids must have length {n}")
    return ids


@dataclass(eq=False)
class PredictionMatrix:
    """Per-member positive-class probabilities, one row per sample."""

    probs: np.ndarray
    labels: np.ndarray | None = None
    ids: np.ndarray | None = None

    def __post_init__(self):
        probs = np.array(self.probs, dtype=np.float64)
        if probs.ndim != 2 or probs.shape[0] < 1 or probs.shape[1] < 1:
            raise InvalidArgumentError("probs must be an N x K matrix with N, K >= 1")
        if not np.all((probs >= 0.0) & (probs <= 1.0)):
            raise InvalidArgumentError("probabilities must lie in [0, 1]")
        self.probs = probs
        self.labels = _check_labels(self.labels, probs.shape[0])
        self.ids = _default_ids(self.ids, probs.shape[0])

    @property
    def n_samples(self):
        return self.probs.shape[0]

    @property
    def n_members(self):
        return self.probs.shape[1]

    def subset(self, index):
        return PredictionMatrix(
            self.probs[index],
            None if self.labels is None else self.labels[index],
            self.ids[index],
        )


@dataclass(eq=False)
class DeferFeatures:
    """N x (K+2) stage-two inputs: member probabilities, u_e, u_d."""

    rows: np.ndarray
    labels: np.ndarray | None = None
    ids: np.ndarray | None = None

    def __post_init__(self):
        rows = np.array(self.rows, dtype=np.float64)
        if rows.ndim != 2 or rows.shape[1] < 3 or rows.shape[0] < 1:
            raise InvalidArgumentError("defer features need shape N x (K+2) with K >= 1")
        self.rows = rows
        self.labels = _check_labels(self.labels, rows.shape[0])
        self.ids = _default_ids(self.ids, rows.shape[0])

    @property
    def n_members(self):
        return self.rows.shape[1] - 2

    @property
    def probs(self):
        return self.rows[:, :-2]

    @property
    def ensemble_entropy(self):
        return self.rows[:, -2]

    @property
    def diagnostic_entropy(self):
        return self.rows[:, -1]

    def to_matrix(self):
        return PredictionMatrix(self.probs, self.labels, self.ids)


def ensemble_entropy(row):
    """``-sum_k p_k ln p_k`` in nats for one row of member probabilities."""
    total = 0.0
    for p in np.asarray(row, dtype=np.float64).ravel():
        if not 0.0 <= p <= 1.0:
            raise InvalidArgumentError(f"probability {p!r} outside [0, 1]")
        total -= xlogx(p)
    return total


def vote_fractions(row, n_classes=N_CLASSES):
    """Fraction of members voting each class.

    A member votes class 1 iff its probability is strictly above 0.5, so an
    exact 0.5 counts as a vote for class 0.
    """
    if n_classes != N_CLASSES:
        raise InvalidArgumentError("only binary tasks are supported")
    row = np.asarray(row, dtype=np.float64).ravel()
    if row.size == 0:
        raise InvalidArgumentError("need at least one ensemble member")
    if not np.all((row >= 0.0) & (row <= 1.0)):
        raise InvalidArgumentError("probabilities must lie in [0, 1]")
    k = row.size
    ones = int(np.count_nonzero(row > 0.5))
    return np.array([(k - ones) / k, ones / k])


def diagnostic_entropy(fractions):
    """Shannon entropy (nats) of a vector of class-vote fractions."""
    fractions = np.asarray(fractions, dtype=np.float64).ravel()
    if fractions.size == 0 or not np.all((fractions >= 0.0) & (fractions <= 1.0)):
        raise InvalidArgumentError("fractions must lie in [0, 1]")
    if abs(fractions.sum() - 1.0) > 1e-12:
        raise InvalidArgumentError(f"fractions sum to {fractions.sum()!r}, expected 1")
    return -sum(xlogx(f) for f in fractions)


# vectorised forms used on whole matrices


def ensemble_entropies(probs):
    return -xlogx_array(probs).sum(axis=1)


def positive_votes(probs):
    return np.count_nonzero(np.asarray(probs) > 0.5, axis=1)


def diagnostic_entropies(probs):
    k = probs.shape[1]
    ones = positive_votes(probs)
    frac = np.stack([(k - ones) / k, ones / k], axis=1)
    return -xlogx_array(frac).sum(axis=1)


def majority_vote(probs):
    """Ensemble majority class per row; ties go to class 0."""
    k = probs.shape[1]
    return (2 * positive_votes(probs) > k).astype(np.int64)


def is_unanimous(probs):
    ones = positive_votes(probs)
    return (ones == 0) | (ones == probs.shape[1])


def build_defer_features(matrix, sort_members=False):
    """Append ensemble and diagnostic entropy columns to ``matrix.probs``.

    With ``sort_members`` the member probabilities are sorted ascending per
    row, which makes the features invariant to member order.
    """
    probs = matrix.probs
    if sort_members:
        probs = np.sort(probs, axis=1)
    rows = np.empty((probs.shape[0], probs.shape[1] + 2))
    rows[:, :-2] = probs
    rows[:, -2] = ensemble_entropies(probs)
    rows[:, -1] = diagnostic_entropies(probs)
    return DeferFeatures(rows, matrix.labels, matrix.ids)
