import numpy as np
import pytest

from ldu.errors import InvalidArgumentError
from ldu.metrics import (
    MetricsRow,
    best_row,
    confusion,
    evaluate,
    full_threshold_grid,
    sweep_alpha,
    sweep_threshold,
)
from ldu.nn import TrainConfig
from ldu.triage import DEFER
from ldu.uncertainty import PredictionMatrix

D = DEFER


def brute_force(decisions, labels):
    """Loop-based oracle for the metrics on one verdict vector."""
    tp = fp = fn = tn = 0
    otp = ofp = ofn = 0
    kept = 0
    for v, y in zip(decisions, labels):
        o = y if v == D else v
        otp += o == 1 and y == 1
        ofp += o == 1 and y == 0
        ofn += o == 0 and y == 1
        if v == D:
            continue
        kept += 1
        tp += v == 1 and y == 1
        fp += v == 1 and y == 0
        fn += v == 0 and y == 1
        tn += v == 0 and y == 0

    def f1(a, b, c):
        return None if 2 * a + b + c == 0 else 2 * a / (2 * a + b + c)

    return {
        "defer_rate": (len(labels) - kept) / len(labels),
        "f1": f1(tp, fp, fn),
        "f1_overall": f1(otp, ofp, ofn),
        "accuracy": None if kept == 0 else (tp + tn) / kept,
        "sensitivity": None if tp + fn == 0 else tp / (tp + fn),
        "specificity": None if tn + fp == 0 else tn / (tn + fp),
    }


def random_case(rng):
    n = int(rng.integers(1, 40))
    labels = rng.integers(0, 2, size=n)
    decisions = rng.choice([0, 1, D], size=n, p=rng.dirichlet([1, 1, 1]))
    return decisions, labels


def test_examples():
    row = evaluate([1, D, 0, D], [1, 0, 0, 1])
    assert row.defer_rate == 0.5
    assert row.f1 == 1.0
    assert row.f1_overall == 1.0
    assert evaluate([1, 1, 0, 0], [1, 0, 0, 1]).f1 == 0.5
    all_deferred = evaluate([D, D], [0, 1])
    assert all_deferred.f1 is None and all_deferred.accuracy is None
    assert all_deferred.f1_overall == 1.0
    assert evaluate([0, 0], [0, 0]).f1 is None


def test_confusion_counts():
    assert confusion([1, 1, 0, 0, 1], [1, 0, 0, 1, 1]) == (2, 1, 1, 1)


def test_against_brute_force(rng):
    for _ in range(1000):
        decisions, labels = random_case(rng)
        row = evaluate(decisions, labels)
        for key, expect in brute_force(decisions, labels).items():
            got = getattr(row, key)
            if expect is None:
                assert got is None, key
            else:
                assert got == pytest.approx(expect, abs=1e-12), key


def test_overall_f1_never_below_plain_f1(rng):
    for _ in range(1000):
        decisions, labels = random_case(rng)
        row = evaluate(decisions, labels)
        if row.f1 is not None and row.f1_overall is not None:
            assert row.f1_overall >= row.f1 - 1e-12


def test_defer_rate_is_a_count_over_n(rng):
    for _ in range(200):
        decisions, labels = random_case(rng)
        dr = evaluate(decisions, labels).defer_rate
        assert dr * len(labels) == pytest.approx(round(dr * len(labels)), abs=1e-9)


def test_input_validation():
    with pytest.raises(InvalidArgumentError):
        evaluate([0, 1], [0])
    with pytest.raises(InvalidArgumentError):
        evaluate([2], [0])
    with pytest.raises(InvalidArgumentError):
        evaluate([0], [3])


def test_threshold_sweep(rng):
    m = PredictionMatrix(rng.uniform(size=(200, 5)), rng.integers(0, 2, 200))
    grid = full_threshold_grid(m)
    assert grid[0] == 0.0 and grid == sorted(grid)
    rows = sweep_threshold(m, list(reversed(grid)))
    assert [r.param for r in rows] == grid
    rates = [r.defer_rate for r in rows]
    assert all(a >= b for a, b in zip(rates, rates[1:]))
    assert rows[-1].defer_rate == 0.0


def test_best_row_respects_budget():
    rows = [MetricsRow(0.1, 0.9, 0.99), MetricsRow(0.2, 0.3, 0.8), MetricsRow(0.3, 0.1, None)]
    assert best_row(rows).param == 0.1
    assert best_row(rows, max_defer_rate=0.5).param == 0.2
    assert best_row(rows, max_defer_rate=0.0) is None


@pytest.fixture
def small_matrix(rng):
    probs = rng.uniform(size=(150, 3))
    labels = (probs.mean(axis=1) + 0.2 * rng.normal(size=150) > 0.5).astype(np.int64)
    return PredictionMatrix(probs, labels)


def test_alpha_sweep_sorted_and_repeatable(small_matrix):
    cfg = TrainConfig(epochs=3, learning_rate=0.01)
    rows = sweep_alpha("ldu", [0.9, 0.5, 0.5], small_matrix, small_matrix, cfg, hidden=(6,))
    assert [r.param for r in rows] == [0.5, 0.5, 0.9]
    assert rows[0] == rows[1]
    again = sweep_alpha("ldu", [0.9], small_matrix, small_matrix, cfg, hidden=(6,))
    assert again[0] == rows[2]


def test_alpha_sweep_parallel_matches_serial(small_matrix):
    cfg = TrainConfig(epochs=2, learning_rate=0.01)
    a = sweep_alpha("ldu", [0.3, 0.8], small_matrix, small_matrix, cfg, hidden=(4,))
    b = sweep_alpha("ldu", [0.3, 0.8], small_matrix, small_matrix, cfg, hidden=(4,), jobs=2)
    assert a == b


def test_diverged_point_becomes_an_error_row(small_matrix):
    cfg = TrainConfig(epochs=3, learning_rate=1e308, optimizer="sgd")
    features = small_matrix.probs * 1e150
    blown = PredictionMatrix(np.clip(features, 0, 1), small_matrix.labels)
    rows = sweep_alpha("ldu", [0.5], blown, blown, cfg, hidden=(4,))
    assert rows[0].error is not None and "step" in rows[0].error
    assert rows[0].f1 is None


def test_sweep_argument_checks(small_matrix):
    cfg = TrainConfig(epochs=1)
    with pytest.raises(InvalidArgumentError):
        sweep_alpha("xyz", [0.5], small_matrix, small_matrix, cfg)
    with pytest.raises(InvalidArgumentError):
        sweep_alpha("ldu", [], small_matrix, small_matrix, cfg)
    with pytest.raises(InvalidArgumentError):
        sweep_alpha("ld", [0.5], small_matrix, small_matrix, cfg)
