"""Confusion-matrix metrics over triage verdicts and the sweep drivers.

``f1``, accuracy, sensitivity and specificity are computed on the
non-deferred samples.  ``f1_overall`` scores every sample after replacing
each deferred verdict with its true label, i.e. assuming the human expert
is always right.  A metric whose denominator is empty is ``None``.
"""
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
import logging
import math

import numpy as np

from .errors import InvalidArgumentError, TrainingDivergedError
from .triage import (
    DEFER,
    DtConfig,
    decide_dt,
    decide_ld,
    decide_ldu,
    entropy_for,
    train_ld,
    train_ldu,
)

log = logging.getLogger(__name__)

CURVE_FIELDS = ("param", "defer_rate", "f1", "f1_overall", "accuracy", "sensitivity", "specificity")


@dataclass
class MetricsRow:
    param: float
    defer_rate: float | None = None
    f1: float | None = None
    f1_overall: float | None = None
    accuracy: float | None = None
    sensitivity: float | None = None
    specificity: float | None = None
    error: str | None = None


def confusion(predicted, labels):
    """(tp, fp, fn, tn) for the positive class 1."""
    predicted = np.asarray(predicted)
    labels = np.asarray(labels)
    tp = int(np.count_nonzero((predicted == 1) & (labels == 1)))
    fp = int(np.count_nonzero((predicted == 1) & (labels == 0)))
    fn = int(np.count_nonzero((predicted == 0) & (labels == 1)))
    tn = int(np.count_nonzero((predicted == 0) & (labels == 0)))
    return tp, fp, fn, tn


def f1_from_counts(tp, fp, fn):
    denom = 2 * tp + fp + fn
    return None if denom == 0 else 2 * tp / denom


def _ratio(num, den):
    return None if den == 0 else num / den


def evaluate(decisions, labels, param=0.0):
    decisions = np.asarray(decisions, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    if decisions.shape != labels.shape or decisions.ndim != 1:
        raise InvalidArgumentError(
            f"decisions and labels differ in shape: {decisions.shape} vs {labels.shape}"
        )
    if not np.all((labels == 0) | (labels == 1)):
        raise InvalidArgumentError("labels must be 0 or 1")
    if not np.all((decisions == 0) | (decisions == 1) | (decisions == DEFER)):
        raise InvalidArgumentError("verdicts must be 0, 1 or DEFER")
    n = labels.size
    deferred = decisions == DEFER
    kept = ~deferred
    tp, fp, fn, tn = confusion(decisions[kept], labels[kept])
    overall = np.where(deferred, labels, decisions)
    otp, ofp, ofn, _ = confusion(overall, labels)
    n_kept = int(np.count_nonzero(kept))
    return MetricsRow(
        param=float(param),
        defer_rate=(n - n_kept) / n if n else None,
        f1=f1_from_counts(tp, fp, fn),
        f1_overall=f1_from_counts(otp, ofp, ofn),
        accuracy=_ratio(tp + tn, n_kept),
        sensitivity=_ratio(tp, tp + fn),
        specificity=_ratio(tn, tn + fp),
    )


def _sorted_grid(grid):
    grid = [float(g) for g in grid]
    if not grid:
        raise InvalidArgumentError("sweep grid must not be empty")
    if not all(math.isfinite(g) for g in grid):
        raise InvalidArgumentError("sweep grid values must be finite")
    return sorted(grid)


def _alpha_point(args):
    strategy, alpha, train, test, config, specs, init, hidden, backend = args
    try:
        if strategy == "ldu":
            net = train_ldu(train, alpha, config, hidden=hidden, backend=backend)
            decisions = decide_ldu(net, test)
        else:
            net = train_ld(train, alpha, specs, config, init=init, backend=backend)
            decisions = decide_ld(net, test.features)
    except TrainingDivergedError as exc:
        return MetricsRow(param=alpha, error=str(exc)), None
    return evaluate(decisions, test.labels, alpha), decisions


def sweep_alpha(strategy, grid, train, test, config, specs=None, init=None,
                hidden=(100, 100), jobs=1, backend=None, return_decisions=False):
    """One independently trained network per alpha, all from ``config.seed``.

    ``strategy`` is ``"ldu"`` (``train``/``test`` are defer features or
    prediction matrices) or ``"ld"`` (``train``/``test`` are labelled
    datasets and ``specs`` the diagnostic architecture).  Rows come back in
    ascending alpha.  A grid point whose training diverges yields a row
    with only ``param`` and ``error`` set; the sweep carries on.
    """
    if strategy not in ("ldu", "ld"):
        raise InvalidArgumentError(f"unknown strategy {strategy!r}")
    if strategy == "ld" and specs is None:
        raise InvalidArgumentError("LD sweeps need the diagnostic layer specs")
    if test.labels is None:
        raise InvalidArgumentError("the test split needs labels")
    tasks = [(strategy, a, train, test, config, specs, init, tuple(hidden), backend)
             for a in _sorted_grid(grid)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_alpha_point, tasks))
    else:
        results = [_alpha_point(t) for t in tasks]
    for row, _ in results:
        if row.error:
            log.warning("alpha=%g: %s", row.param, row.error)
    rows = [r for r, _ in results]
    if return_decisions:
        return rows, [d for _, d in results]
    return rows


def sweep_threshold(matrix, grid, measure="diagnostic"):
    """DT metrics for each threshold in ``grid`` (ascending order)."""
    if matrix.labels is None:
        raise InvalidArgumentError("threshold sweeps need labels")
    rows = []
    for tau in _sorted_grid(grid):
        decisions = decide_dt(matrix, DtConfig(tau, measure))
        rows.append(evaluate(decisions, matrix.labels, tau))
    return rows


def full_threshold_grid(matrix, measure="diagnostic"):
    """Every threshold at which the DT defer set can change: 0 and each
    distinct entropy value in ``matrix``."""
    u = entropy_for(matrix, measure)
    return sorted(set([0.0]) | set(float(v) for v in np.unique(u)))


def best_row(rows, max_defer_rate=1.0):
    """Row with the highest non-deferred F1 among those within the defer budget."""
    best = None
    for r in rows:
        if r.f1 is None or r.defer_rate is None or r.defer_rate > max_defer_rate:
            continue
        if best is None or r.f1 > best.f1:
            best = r
    return best
