"""Stage one: a deep ensemble of identically configured diagnostic nets.

Member ``k`` is trained on the full training set with seed
``base_seed + k``; members differ only through initialisation and batch
order (no bootstrap resampling).
"""
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
import os

import numpy as np

from .errors import InvalidArgumentError, ParseError, TrainingDivergedError
from .nn import (
    TrainConfig,
    atomic_write_text,
    forward_batch,
    load_params,
    mlp_specs,
    save_params,
    train,
)
from .numerics import softmax_rows
from .uncertainty import PredictionMatrix

MANIFEST = "manifest.txt"


def default_member_specs(input_dim, hidden=(16,)):
    return mlp_specs(input_dim, list(hidden), 2)


@dataclass
class EnsembleSpec:
    specs: list
    config: TrainConfig = field(default_factory=TrainConfig)
    member_count: int = 50
    base_seed: int = 0

    def __post_init__(self):
        if self.member_count < 1:
            raise InvalidArgumentError("an ensemble needs at least one member")

    def member_config(self, k):
        return self.config.replace(seed=self.base_seed + k, loss="cross_entropy", alpha=0.0)


def train_member(train_set, spec, k, backend=None):
    try:
        return train(train_set.features, train_set.labels, spec.specs,
                     spec.member_config(k), backend=backend)
    except TrainingDivergedError as exc:
        raise TrainingDivergedError(f"ensemble member {k}: {exc}", step=exc.step, member=k) from exc


def _member_task(args):
    return train_member(*args)


def train_ensemble(train_set, spec, jobs=1, order=None, backend=None):
    """Train all members; the result is indexed by member, whatever ``order``
    (an iterable of member indices) they were trained in."""
    if len(train_set) == 0:
        raise InvalidArgumentError("empty training set")
    order = list(range(spec.member_count)) if order is None else list(order)
    if sorted(order) != list(range(spec.member_count)):
        raise InvalidArgumentError("order must be a permutation of the member indices")
    tasks = [(train_set, spec, k, backend) for k in order]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            trained = list(pool.map(_member_task, tasks))
    else:
        trained = [_member_task(t) for t in tasks]
    members = [None] * spec.member_count
    for k, params in zip(order, trained):
        members[k] = params
    return members


def predict_matrix(members, features, labels=None, ids=None):
    """Positive-class probability of every member on every row."""
    if not members:
        raise InvalidArgumentError("no ensemble members")
    x = np.asarray(features, dtype=np.float64)
    d_in, d_out = members[0].input_dim, members[0].output_dim
    for k, m in enumerate(members):
        if (m.input_dim, m.output_dim) != (d_in, d_out):
            raise InvalidArgumentError(f"member {k} has a different input/output shape")
    if d_out != 2:
        raise InvalidArgumentError("ensemble members must have two outputs")
    if x.ndim != 2 or x.shape[1] != d_in:
        raise InvalidArgumentError(f"features must have {d_in} columns")
    probs = np.empty((x.shape[0], len(members)))
    for k, m in enumerate(members):
        probs[:, k] = softmax_rows(forward_batch(m, x))[:, 1]
    return PredictionMatrix(probs, labels, ids)


def predict_dataset(members, dataset):
    return predict_matrix(members, dataset.features, dataset.labels, dataset.ids)


def member_path(directory, k):
    return os.path.join(directory, f"member_{k:03d}.txt")


def save_ensemble(members, base_seed, directory):
    os.makedirs(directory, exist_ok=True)
    for k, m in enumerate(members):
        save_params(m, member_path(directory, k))
    atomic_write_text(os.path.join(directory, MANIFEST), f"{len(members)} {base_seed}\n")


def load_ensemble(directory):
    """Return ``(members, base_seed)`` from a saved ensemble directory."""
    path = os.path.join(directory, MANIFEST)
    try:
        with open(path) as fh:
            k, base_seed = (int(v) for v in fh.read().split())
    except ValueError:
        raise ParseError("manifest must contain 'K base_seed'", line=1, path=path) from None
    return [load_params(member_path(directory, i)) for i in range(k)], base_seed
