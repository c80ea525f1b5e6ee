"""Small fully connected networks trained from scratch.

Layers are dense with a sigmoid or identity activation and the network
output is a vector of raw logits; callers apply softmax.  Training uses
the compiled kernel when available (see :mod:`ldu._backend`).
"""
from dataclasses import dataclass, field
import math
import os
import tempfile

import numpy as np

from . import _backend
from .errors import InvalidArgumentError, ParseError, TrainingDivergedError
from .rng import OFFSET_INIT, OFFSET_SHUFFLE, SplitMix64, derive_seed

ACTIVATIONS = {"identity": 0, "sigmoid": 1}
OPTIMIZERS = {"sgd": 0, "adam": 1}
LOSSES = ("cross_entropy", "defer")

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


@dataclass(frozen=True)
class LayerSpec:
    input_dim: int
    output_dim: int
    activation: str = "sigmoid"

    def __post_init__(self):
        if self.input_dim < 1 or self.output_dim < 1:
            raise InvalidArgumentError("layer dimensions must be >= 1")
        if self.activation not in ACTIVATIONS:
            raise InvalidArgumentError(f"unknown activation {self.activation!r}")


def mlp_specs(input_dim, hidden, output_dim, hidden_activation="sigmoid"):
    """Specs for ``input -> hidden... -> output`` with an identity head."""
    dims = [input_dim, *hidden, output_dim]
    specs = [LayerSpec(a, b, hidden_activation) for a, b in zip(dims[:-2], dims[1:-1])]
    specs.append(LayerSpec(dims[-2], dims[-1], "identity"))
    return specs


def check_chain(specs):
    specs = list(specs)
    if not specs:
        raise InvalidArgumentError("a network needs at least one layer")
    for i, (a, b) in enumerate(zip(specs, specs[1:])):
        if a.output_dim != b.input_dim:
            raise InvalidArgumentError(
                f"layer {i} outputs {a.output_dim} but layer {i + 1} expects {b.input_dim}"
            )
    return specs


@dataclass(eq=False)
class NetworkParams:
    """Weights (out x in) and biases for each layer, plus activations."""

    weights: list
    biases: list
    activations: list

    def __post_init__(self):
        if not (len(self.weights) == len(self.biases) == len(self.activations) >= 1):
            raise InvalidArgumentError("weights, biases and activations must align")
        self.weights = [np.ascontiguousarray(w, dtype=np.float64) for w in self.weights]
        self.biases = [np.ascontiguousarray(b, dtype=np.float64) for b in self.biases]
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.shape != (w.shape[0],):
                raise InvalidArgumentError(f"layer {i}: bias shape {b.shape} vs weight {w.shape}")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise InvalidArgumentError(f"layer {i}: parameters must be finite")
        check_chain(self.specs)

    @property
    def specs(self):
        return [
            LayerSpec(w.shape[1], w.shape[0], act)
            for w, act in zip(self.weights, self.activations)
        ]

    @property
    def input_dim(self):
        return self.weights[0].shape[1]

    @property
    def output_dim(self):
        return self.weights[-1].shape[0]

    def copy(self):
        return NetworkParams(
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            list(self.activations),
        )

    def equals(self, other):
        return (
            self.activations == other.activations
            and all(np.array_equal(a, b) for a, b in zip(self.weights, other.weights))
            and all(np.array_equal(a, b) for a, b in zip(self.biases, other.biases))
        )


@dataclass
class TrainConfig:
    epochs: int = 20
    learning_rate: float = 1e-3
    batch_size: int = 32
    optimizer: str = "adam"
    weight_decay: float = 0.0
    seed: int = 0
    loss: str = "cross_entropy"
    alpha: float = 0.0

    def __post_init__(self):
        if self.epochs < 0:
            raise InvalidArgumentError("epochs must be >= 0")
        if not self.learning_rate > 0:
            raise InvalidArgumentError("learning_rate must be > 0")
        if self.batch_size < 1:
            raise InvalidArgumentError("batch_size must be >= 1")
        if self.optimizer not in OPTIMIZERS:
            raise InvalidArgumentError(f"unknown optimizer {self.optimizer!r}")
        if self.weight_decay < 0:
            raise InvalidArgumentError("weight_decay must be >= 0")
        if self.loss not in LOSSES:
            raise InvalidArgumentError(f"unknown loss {self.loss!r}")
        if not self.alpha >= 0:
            raise InvalidArgumentError("alpha must be >= 0")

    def replace(self, **changes):
        values = {**self.__dict__, **changes}
        return TrainConfig(**values)


def init_params(specs, seed):
    """Uniform Glorot initialisation, zero biases, fully determined by ``seed``."""
    specs = check_chain(specs)
    stream = SplitMix64(derive_seed(seed, OFFSET_INIT))
    weights, biases = [], []
    for s in specs:
        limit = math.sqrt(6.0 / (s.input_dim + s.output_dim))
        u = stream.uniform(s.input_dim * s.output_dim)
        weights.append(((2.0 * u - 1.0) * limit).reshape(s.output_dim, s.input_dim))
        biases.append(np.zeros(s.output_dim))
    return NetworkParams(weights, biases, [s.activation for s in specs])


def _activate(z, activation):
    if activation == "sigmoid":
        with np.errstate(over="ignore"):
            return 1.0 / (1.0 + np.exp(-z))
    return z


def forward_batch(params, features):
    """Logits for every row of an (N, d) feature matrix."""
    h = np.asarray(features, dtype=np.float64)
    if h.ndim != 2 or h.shape[1] != params.input_dim:
        raise InvalidArgumentError(
            f"expected features with {params.input_dim} columns, got shape {h.shape}"
        )
    for w, b, act in zip(params.weights, params.biases, params.activations):
        h = _activate(h @ w.T + b, act)
    return h


def forward(params, features):
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 1:
        raise InvalidArgumentError("forward takes a single feature vector")
    return forward_batch(params, x[None, :])[0]


def _loss_setup(params, targets, config):
    targets = np.asarray(targets)
    if targets.ndim != 1 or targets.size == 0:
        raise InvalidArgumentError("need a non-empty vector of targets")
    defer = config.loss == "defer"
    n_classes = params.output_dim - 1 if defer else params.output_dim
    if n_classes < 1 or not np.all((targets >= 0) & (targets < n_classes)):
        raise InvalidArgumentError(
            f"targets must lie in 0..{n_classes - 1} for a {config.loss} head "
            f"with {params.output_dim} outputs"
        )
    return targets.astype(np.int64), defer


def network_gradients(params, features, targets, config, backend=None):
    """Mean batch loss and its gradient with respect to every parameter.

    Returns ``(loss, weight_grads, bias_grads)``.  Weight decay is not
    included; it is added by the optimiser step.
    """
    kernel = _backend.kernel if backend is None else _backend.load(backend)
    x = np.ascontiguousarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != params.input_dim:
        raise InvalidArgumentError("feature matrix does not match the first layer")
    targets, defer = _loss_setup(params, targets, config)
    if x.shape[0] != targets.shape[0]:
        raise InvalidArgumentError("features and targets differ in length")
    grad_w = [np.empty_like(w) for w in params.weights]
    grad_b = [np.empty_like(b) for b in params.biases]
    acts = [ACTIVATIONS[a] for a in params.activations]
    loss = kernel.loss_and_grads(params.weights, params.biases, acts, x, targets,
                                 float(config.alpha), defer, grad_w, grad_b)
    return loss, grad_w, grad_b


def epoch_order(seed, epoch, n):
    """Sample order for one epoch, a function of (seed, epoch) only."""
    return SplitMix64(derive_seed(seed, OFFSET_SHUFFLE + epoch)).permutation(n)


@dataclass
class TrainResult:
    params: NetworkParams
    losses: np.ndarray = field(repr=False)


def train(features, targets, specs, config, init=None, backend=None, return_losses=False):
    """Mini-batch training of a fresh (or ``init``-warm-started) network.

    Each epoch visits the samples in a seeded permutation; the final batch
    may be smaller.  Raises :class:`TrainingDivergedError` naming the
    0-based step at which the batch loss became non-finite.
    """
    kernel = _backend.kernel if backend is None else _backend.load(backend)
    x = np.ascontiguousarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise InvalidArgumentError("training needs a non-empty (N, d) feature matrix")
    params = init.copy() if init is not None else init_params(specs, config.seed)
    if x.shape[1] != params.input_dim:
        raise InvalidArgumentError(
            f"features have {x.shape[1]} columns, network expects {params.input_dim}"
        )
    targets, defer = _loss_setup(params, targets, config)
    if x.shape[0] != targets.shape[0]:
        raise InvalidArgumentError("features and targets differ in length")

    n = x.shape[0]
    steps_per_epoch = -(-n // config.batch_size)
    losses = np.full(config.epochs * steps_per_epoch, np.nan)
    if config.epochs > 0:
        orders = np.stack([epoch_order(config.seed, e, n) for e in range(config.epochs)])
        m_w = [np.zeros_like(w) for w in params.weights]
        m_b = [np.zeros_like(b) for b in params.biases]
        v_w = [np.zeros_like(w) for w in params.weights]
        v_b = [np.zeros_like(b) for b in params.biases]
        acts = [ACTIVATIONS[a] for a in params.activations]
        failed = kernel.train_epochs(
            params.weights, params.biases, acts, x, targets, float(config.alpha), defer,
            orders, config.batch_size, OPTIMIZERS[config.optimizer],
            float(config.learning_rate), float(config.weight_decay),
            ADAM_BETA1, ADAM_BETA2, ADAM_EPS, m_w, m_b, v_w, v_b, 0, losses,
        )
        if failed >= 0:
            raise TrainingDivergedError(
                f"non-finite training loss at step {failed} "
                f"(epoch {failed // steps_per_epoch})",
                step=int(failed),
            )
    if return_losses:
        return TrainResult(params, losses)
    return params


# serialisation: one line per tensor, "layer kind rows cols v1 v2 ...",
# preceded by a comment line listing the layer activations


def format_params(params):
    lines = ["# activations " + " ".join(params.activations)]
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        for kind, arr, rows, cols in (("W", w, w.shape[0], w.shape[1]), ("b", b, b.shape[0], 1)):
            values = " ".join(f"{v:.17g}" for v in arr.ravel())
            lines.append(f"{i} {kind} {rows} {cols} {values}")
    return "\n".join(lines) + "\n"


def parse_params(text, path=None):
    activations = None
    tensors = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            parts = line[1:].split()
            if parts and parts[0] == "activations":
                activations = parts[1:]
            continue
        parts = line.split()
        try:
            layer, kind, rows, cols = int(parts[0]), parts[1], int(parts[2]), int(parts[3])
            values = np.array([float(v) for v in parts[4:]])
        except (IndexError, ValueError) as exc:
            raise ParseError(f"malformed tensor line ({exc})", line=lineno, path=path) from None
        if kind not in ("W", "b") or values.size != rows * cols:
            raise ParseError(f"bad tensor header or size for layer {layer}", lineno, path)
        tensors[(layer, kind)] = values.reshape(rows, cols) if kind == "W" else values
    n_layers = len(tensors) // 2
    try:
        weights = [tensors[(i, "W")] for i in range(n_layers)]
        biases = [tensors[(i, "b")] for i in range(n_layers)]
    except KeyError as exc:
        raise ParseError(f"missing tensor {exc}", path=path) from None
    if activations is None:
        activations = ["sigmoid"] * (n_layers - 1) + ["identity"]
    try:
        return NetworkParams(weights, biases, activations)
    except InvalidArgumentError as exc:
        raise ParseError(str(exc), path=path) from None


def atomic_write_text(path, text):
    """Write via a temporary file in the same directory, then rename."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_params(params, path):
    atomic_write_text(path, format_params(params))


def load_params(path):
    with open(path) as fh:
        return parse_params(fh.read(), path=os.fspath(path))
