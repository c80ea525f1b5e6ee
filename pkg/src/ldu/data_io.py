"""Synthetic diagnostic tasks, 70/30 splits and CSV persistence.

CSV layouts (floats printed with 9 decimals, ``\\n`` line endings):

* dataset   ``id,label,f0,...,f{d-1}``
* preds     ``id[,label],p0,...,p{K-1}``
* features  ``id[,label],p0,...,p{K-1},u_e,u_d``
* curve     ``param,defer_rate,f1,f1_overall,accuracy,sensitivity,specificity``
  (undefined metrics are empty fields)
* decisions ``id,verdict`` with verdict ``0``, ``1`` or ``DEFER``
"""
from dataclasses import dataclass
import math
import os

import numpy as np

from .errors import InvalidArgumentError, ParseError
from .metrics import CURVE_FIELDS, MetricsRow
from .nn import atomic_write_text
from .rng import OFFSET_FLIP, OFFSET_SPLIT, SplitMix64, derive_seed
from .triage import DEFER
from .uncertainty import LN2, DeferFeatures, PredictionMatrix

SCHEMAS = ("dataset", "preds", "features", "curve", "decisions")


@dataclass(eq=False)
class LabeledDataset:
    ids: np.ndarray
    features: np.ndarray
    labels: np.ndarray
    clean_labels: np.ndarray | None = None

    def __post_init__(self):
        self.features = np.array(self.features, dtype=np.float64)
        if self.features.ndim != 2 or self.features.shape[0] < 1:
            raise InvalidArgumentError("features must be an (N, d) matrix with N >= 1")
        n = self.features.shape[0]
        self.ids = np.asarray(self.ids, dtype=np.int64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.ids.shape != (n,) or self.labels.shape != (n,):
            raise InvalidArgumentError("ids and labels must have one entry per row")
        if np.unique(self.ids).size != n:
            raise InvalidArgumentError("ids must be unique")
        if not np.all((self.labels == 0) | (self.labels == 1)):
            raise InvalidArgumentError("labels must be 0 or 1")

    def __len__(self):
        return self.features.shape[0]

    @property
    def dim(self):
        return self.features.shape[1]

    def subset(self, index):
        return LabeledDataset(
            self.ids[index],
            self.features[index],
            self.labels[index],
            None if self.clean_labels is None else self.clean_labels[index],
        )


@dataclass
class SyntheticConfig:
    n: int = 4000
    d: int = 8
    mu: float = 1.0
    confound_fraction: float = 0.1
    flip_prob: float = 0.8
    seed: int = 0
    expose_clean_labels: bool = False

    def __post_init__(self):
        if self.n < 2:
            raise InvalidArgumentError("n must be at least 2")
        if self.d < 1:
            raise InvalidArgumentError("d must be at least 1")
        if not 0.0 <= self.confound_fraction <= 1.0:
            raise InvalidArgumentError("confound_fraction must lie in [0, 1]")
        if not 0.0 <= self.flip_prob <= 1.0:
            raise InvalidArgumentError("flip_prob must lie in [0, 1]")


def confound_size(config):
    return int(round(config.confound_fraction * config.n))


def gen_synthetic(config):
    """Two unit-variance Gaussian blobs at ``-mu*1`` and ``+mu*1`` with a
    label-noise pocket.

    Labels alternate 0, 1, 0, ... so the classes are balanced by
    construction.  The ``confound_fraction * n`` samples with the largest
    first feature (mostly positives) then have their labels flipped with
    probability ``flip_prob``.  Networks fit to this data tend to stay
    confident on the pocket while being wrong most of the time there.
    """
    n, d = config.n, config.d
    clean = (np.arange(n) % 2).astype(np.int64)
    noise = SplitMix64(config.seed).normal(n * d).reshape(n, d)
    features = noise + ((2.0 * clean - 1.0) * config.mu)[:, None]

    labels = clean.copy()
    m = confound_size(config)
    if m > 0:
        region = np.argsort(-features[:, 0], kind="stable")[:m]
        flips = SplitMix64(derive_seed(config.seed, OFFSET_FLIP)).uniform(m) < config.flip_prob
        labels[region[flips]] = 1 - labels[region[flips]]
    return LabeledDataset(
        np.arange(n, dtype=np.int64),
        features,
        labels,
        clean if config.expose_clean_labels else None,
    )


def split_dataset(dataset, ratio=0.7, seed=0):
    """Seeded permutation, then the first ``floor(ratio*N)`` rows train."""
    if not 0.0 < ratio < 1.0:
        raise InvalidArgumentError("ratio must lie strictly between 0 and 1")
    n = len(dataset)
    perm = SplitMix64(derive_seed(seed, OFFSET_SPLIT)).permutation(n)
    cut = math.floor(ratio * n)
    return dataset.subset(perm[:cut]), dataset.subset(perm[cut:])


# writing


def _fmt(v):
    return "" if v is None else f"{v:.9f}"


def _fmt_row(values):
    return ",".join(f"{v:.9f}" for v in values)


def format_dataset(ds):
    header = "id,label," + ",".join(f"f{j}" for j in range(ds.dim))
    lines = [header]
    for i in range(len(ds)):
        lines.append(f"{ds.ids[i]},{ds.labels[i]},{_fmt_row(ds.features[i])}")
    return "\n".join(lines) + "\n"


def _format_prob_table(ids, labels, rows, names):
    cols = ["id"] + (["label"] if labels is not None else []) + names
    lines = [",".join(cols)]
    for i in range(rows.shape[0]):
        prefix = f"{ids[i]}," + (f"{labels[i]}," if labels is not None else "")
        lines.append(prefix + _fmt_row(rows[i]))
    return "\n".join(lines) + "\n"


def format_preds(matrix):
    names = [f"p{k}" for k in range(matrix.n_members)]
    return _format_prob_table(matrix.ids, matrix.labels, matrix.probs, names)


def format_features(feats):
    names = [f"p{k}" for k in range(feats.n_members)] + ["u_e", "u_d"]
    return _format_prob_table(feats.ids, feats.labels, feats.rows, names)


def format_curve(rows):
    lines = [",".join(CURVE_FIELDS)]
    for r in rows:
        lines.append(",".join(_fmt(getattr(r, f)) for f in CURVE_FIELDS))
    return "\n".join(lines) + "\n"


def format_decisions(ids, decisions):
    lines = ["id,verdict"]
    for i, v in zip(ids, decisions):
        lines.append(f"{i},{'DEFER' if v == DEFER else int(v)}")
    return "\n".join(lines) + "\n"


def write_csv(obj, path):
    """Write a dataset, prediction matrix, defer features or curve."""
    if isinstance(obj, LabeledDataset):
        text = format_dataset(obj)
    elif isinstance(obj, PredictionMatrix):
        text = format_preds(obj)
    elif isinstance(obj, DeferFeatures):
        text = format_features(obj)
    elif isinstance(obj, (list, tuple)) and all(isinstance(r, MetricsRow) for r in obj):
        text = format_curve(obj)
    else:
        raise InvalidArgumentError(f"cannot write {type(obj).__name__} as CSV")
    atomic_write_text(path, text)


def write_decisions(ids, decisions, path):
    atomic_write_text(path, format_decisions(ids, decisions))


# reading


def _read_lines(path):
    with open(path, newline="") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ParseError("empty file", line=1, path=os.fspath(path))
    return lines


def _float(text, lineno, path, column):
    try:
        v = float(text)
    except ValueError:
        raise ParseError(f"non-numeric value {text!r} in column {column}", lineno, path) from None
    if not math.isfinite(v):
        raise ParseError(f"non-finite value in column {column}", lineno, path)
    return v


def _int(text, lineno, path, column):
    try:
        return int(text)
    except ValueError:
        raise ParseError(f"non-integer value {text!r} in column {column}", lineno, path) from None


def _check_header(header, expected, path):
    if header != expected:
        raise ParseError(
            f"header mismatch: expected {','.join(expected)!r}, got {','.join(header)!r}",
            line=1, path=path,
        )


def _numbered(header, prefix):
    """Length of the run ``prefix0, prefix1, ...`` at the start of ``header``."""
    k = 0
    while k < len(header) and header[k] == f"{prefix}{k}":
        k += 1
    return k


def _parse_table(path, lines, fixed_tail):
    """Parse ``id[,label],p0..p{K-1}[,tail...]`` tables."""
    header = lines[0].split(",")
    has_label = len(header) > 1 and header[1] == "label"
    start = 2 if has_label else 1
    k = _numbered(header[start:], "p")
    expected = ["id"] + (["label"] if has_label else []) + [f"p{j}" for j in range(k)] + fixed_tail
    if k == 0 or header[0] != "id":
        raise ParseError("header mismatch: expected id[,label],p0,...", line=1, path=path)
    _check_header(header, expected, path)

    ids, labels, rows = [], [], []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        fields = line.split(",")
        if len(fields) != len(expected):
            raise ParseError(f"expected {len(expected)} fields, got {len(fields)}", lineno, path)
        ids.append(_int(fields[0], lineno, path, "id"))
        if has_label:
            lab = _int(fields[1], lineno, path, "label")
            if lab not in (0, 1):
                raise ParseError(f"label {lab} not in {{0, 1}}", lineno, path)
            labels.append(lab)
        vals = [_float(f, lineno, path, expected[start + j]) for j, f in enumerate(fields[start:])]
        for j in range(k):
            if not 0.0 <= vals[j] <= 1.0:
                raise ParseError(f"probability {vals[j]} in column p{j} outside [0, 1]", lineno, path)
        rows.append(vals)
        if fixed_tail:
            u_e, u_d = vals[k], vals[k + 1]
            if u_e < 0.0:
                raise ParseError("u_e must be >= 0", lineno, path)
            if not 0.0 <= u_d <= LN2 + 5e-10:
                raise ParseError("u_d must lie in [0, ln 2]", lineno, path)
    if not rows:
        raise ParseError("no data rows", line=2, path=path)
    if len(set(ids)) != len(ids):
        raise ParseError("duplicate ids", path=path)
    return (
        np.array(ids, dtype=np.int64),
        np.array(labels, dtype=np.int64) if has_label else None,
        np.array(rows, dtype=np.float64),
    )


def read_dataset(path):
    path = os.fspath(path)
    lines = _read_lines(path)
    header = lines[0].split(",")
    d = _numbered(header[2:], "f")
    if d == 0:
        raise ParseError("header mismatch: expected id,label,f0,...", line=1, path=path)
    _check_header(header, ["id", "label"] + [f"f{j}" for j in range(d)], path)
    ids, labels, feats = [], [], []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        fields = line.split(",")
        if len(fields) != d + 2:
            raise ParseError(f"expected {d + 2} fields, got {len(fields)}", lineno, path)
        ids.append(_int(fields[0], lineno, path, "id"))
        lab = _int(fields[1], lineno, path, "label")
        if lab not in (0, 1):
            raise ParseError(f"label {lab} not in {{0, 1}}", lineno, path)
        labels.append(lab)
        feats.append([_float(f, lineno, path, f"f{j}") for j, f in enumerate(fields[2:])])
    if not feats:
        raise ParseError("no data rows", line=2, path=path)
    try:
        return LabeledDataset(np.array(ids), np.array(feats), np.array(labels))
    except InvalidArgumentError as exc:
        raise ParseError(str(exc), path=path) from None


def read_preds(path):
    path = os.fspath(path)
    ids, labels, rows = _parse_table(path, _read_lines(path), [])
    return PredictionMatrix(rows, labels, ids)


def read_features(path):
    path = os.fspath(path)
    ids, labels, rows = _parse_table(path, _read_lines(path), ["u_e", "u_d"])
    return DeferFeatures(rows, labels, ids)


def read_curve(path):
    path = os.fspath(path)
    lines = _read_lines(path)
    _check_header(lines[0].split(","), list(CURVE_FIELDS), path)
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        fields = line.split(",")
        if len(fields) != len(CURVE_FIELDS):
            raise ParseError(f"expected {len(CURVE_FIELDS)} fields, got {len(fields)}", lineno, path)
        values = {}
        for name, text in zip(CURVE_FIELDS, fields):
            if text == "":
                if name == "param":
                    raise ParseError("param must not be empty", lineno, path)
                values[name] = None
                continue
            v = _float(text, lineno, path, name)
            if name != "param" and not 0.0 <= v <= 1.0:
                raise ParseError(f"{name} = {v} outside [0, 1]", lineno, path)
            values[name] = v
        rows.append(MetricsRow(**values))
    return rows


def read_decisions(path):
    path = os.fspath(path)
    lines = _read_lines(path)
    _check_header(lines[0].split(","), ["id", "verdict"], path)
    ids, verdicts = [], []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        fields = line.split(",")
        if len(fields) != 2:
            raise ParseError("expected 2 fields", lineno, path)
        ids.append(_int(fields[0], lineno, path, "id"))
        if fields[1] == "DEFER":
            verdicts.append(DEFER)
        elif fields[1] in ("0", "1"):
            verdicts.append(int(fields[1]))
        else:
            raise ParseError(f"verdict {fields[1]!r} not in 0, 1, DEFER", lineno, path)
    return np.array(ids, dtype=np.int64), np.array(verdicts, dtype=np.int64)


_READERS = {
    "dataset": read_dataset,
    "preds": read_preds,
    "features": read_features,
    "curve": read_curve,
    "decisions": read_decisions,
}


def read_csv(path, schema):
    """Read ``path`` as one of :data:`SCHEMAS`, validating header and values."""
    try:
        reader = _READERS[schema]
    except KeyError:
        raise InvalidArgumentError(f"unknown schema {schema!r}; expected one of {SCHEMAS}") from None
    return reader(path)
