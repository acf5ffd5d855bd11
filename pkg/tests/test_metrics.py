import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from semtab.traineval.metrics import (
    accuracy,
    macro_f1,
    mean_absolute_error,
    relative_improvement,
    smape,
)


def brute_force_metrics(targets, preds):
    """Independent oracle: pure-Python loops, no shared code with the package."""
    n = len(targets)
    acc = sum(1 for t, p in zip(targets, preds) if t == p) / n
    classes = sorted(set(targets))
    f1s = []
    for c in classes:
        tp = sum(1 for t, p in zip(targets, preds) if t == c and p == c)
        fp = sum(1 for t, p in zip(targets, preds) if t != c and p == c)
        fn = sum(1 for t, p in zip(targets, preds) if t == c and p != c)
        f1s.append(0.0 if tp == 0 else 2 * tp / (2 * tp + fp + fn))
    return acc, sum(f1s) / len(f1s)


def brute_force_regression(y, yhat):
    n = len(y)
    mae = math.fsum(abs(a - b) for a, b in zip(y, yhat)) / n
    terms = []
    for a, b in zip(y, yhat):
        denom = (abs(a) + abs(b)) / 2
        terms.append(0.0 if denom == 0 else abs(a - b) / denom)
    return mae, (sum(terms) / n) / 2


class TestMetricOracle:
    def test_100_random_prediction_sets(self):
        rng = np.random.default_rng(42)
        for trial in range(100):
            n = int(rng.integers(3, 40))
            k = int(rng.integers(2, 6))
            targets = rng.integers(0, k, n)
            preds = rng.integers(0, k, n)
            acc_o, f1_o = brute_force_metrics(list(targets), list(preds))
            assert accuracy(targets, preds) == acc_o  # exact
            assert abs(macro_f1(targets, preds) - f1_o) <= 1e-9
            y = np.round(rng.uniform(0, 200, n), 2)
            yhat = np.round(rng.uniform(0, 200, n), 2)
            # make some exact zeros to exercise the 0/0 convention
            if trial % 7 == 0:
                y[0] = 0.0
                yhat[0] = 0.0
            mae_o, smape_o = brute_force_regression(list(y), list(yhat))
            assert mean_absolute_error(y, yhat) == mae_o  # exact
            assert abs(smape(y, yhat) - smape_o) <= 1e-9

    def test_hand_worked_majority_fixture(self):
        # 3 classes with counts (6, 3, 1); constant-majority predictor
        targets = np.array([0] * 6 + [1] * 3 + [2])
        preds = np.zeros(10, dtype=int)
        assert accuracy(targets, preds) == pytest.approx(0.6)
        # class 0: F1 = 2*6/(12+4+0) = 0.75; classes 1, 2: F1 = 0
        assert macro_f1(targets, preds) == pytest.approx(0.25)

    def test_perfect_predictions(self):
        y = np.array([3.0, 10.0, 0.5])
        c = np.array([0, 1, 2, 1])
        assert mean_absolute_error(y, y) == 0.0
        assert smape(y, y) == 0.0
        assert accuracy(c, c) == 1.0
        assert macro_f1(c, c) == 1.0

    def test_smape_hand_example(self):
        # y=100, yhat=50: |50| / 75 = 0.6667, normalized by 2 -> 0.3333
        assert smape(np.array([100.0]), np.array([50.0])) == pytest.approx(1.0 / 3.0, abs=1e-9)

    def test_smape_bounded(self):
        rng = np.random.default_rng(0)
        y = rng.uniform(0, 100, 500)
        yhat = rng.uniform(0, 100, 500)
        s = smape(y, yhat)
        assert 0.0 <= s <= 1.0


class TestRelativeImprovement:
    def test_eq1_conformance(self):
        assert relative_improvement(1.5, 1.0) == pytest.approx(50.0)
        assert relative_improvement(2.0, 2.0) == 0.0
        assert relative_improvement(0.5, 2.0) == pytest.approx(-75.0)

    def test_monotone_in_s_eval_1k_pairs(self):
        rng = np.random.default_rng(7)
        for _ in range(1000):
            base = float(rng.uniform(0.05, 10.0))
            a, b = sorted(rng.uniform(0.0, 10.0, 2))
            if a == b:
                continue
            assert relative_improvement(a, base) < relative_improvement(b, base)

    def test_nonpositive_baseline_rejected(self):
        with pytest.raises(ValueError):
            relative_improvement(1.0, 0.0)
        with pytest.raises(ValueError):
            relative_improvement(1.0, -2.0)

    @given(st.floats(0.01, 100), st.floats(0.01, 100))
    def test_identity_property(self, s, base):
        assert relative_improvement(s, s) == 0.0
        ri = relative_improvement(s, base)
        assert ri == pytest.approx((s - base) / base * 100.0)
