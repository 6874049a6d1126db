import math

import numpy as np
import pytest

from fairlens.data import Dataset, SensitiveAttribute
from fairlens.errors import PreconditionError
from fairlens.learners import (AdaBoostEstimator, BaggingEstimator, ConstantEstimator, Stump,
                               balanced_error_rate, ber_audit, confusion, cross_validate,
                               feature_ablation, fit, fit_stump, make_folds, parse_learner,
                               performance, train)

from conftest import make_dataset


def cross_pattern(n_side=12):
    """Grid on [0,1]^2 with label 1 inside a horizontal or a vertical band."""
    g = (np.arange(n_side) + 0.5) / n_side
    x1, x2 = np.meshgrid(g, g)
    Z = np.column_stack([x1.ravel(), x2.ravel()])
    band = lambda v: np.abs(v - 0.5) < 0.2
    y = (band(Z[:, 0]) | band(Z[:, 1])).astype(int)
    return Z, y


def test_parse_learner():
    assert parse_learner("stump") == ("stump", ())
    assert parse_learner("bagging") == ("bagging", (10,))
    assert parse_learner("adaboost:7") == ("adaboost", (7,))
    assert parse_learner("logreg:50:0.1") == ("logreg", (50, 0.1))
    for bad in ("forest", "stump:3", "bagging:x", "logreg:1:2:3"):
        with pytest.raises(PreconditionError):
            parse_learner(bad)


def test_stump_separable():
    Z = np.array([[0.1], [0.3], [0.6], [0.9]])
    y = np.array([0, 0, 1, 1])
    s = fit_stump(Z, y)
    assert s.predict(Z).tolist() == [0, 0, 1, 1]
    assert 0.3 < s.threshold <= 0.6 and s.polarity == 1
    assert (fit("stump", Z, 1 - y).predict(Z) == 1 - y).all()


def test_stump_tie_break_lowest_feature():
    # both features separate the labels equally well
    Z = np.array([[0.0, 0.0], [1.0, 1.0]])
    assert fit_stump(Z, np.array([0, 1])).feature == 0


def test_stump_weights_matter():
    Z = np.array([[0.0], [1.0], [2.0]])
    y = np.array([0, 1, 0])
    s = fit_stump(Z, y, np.array([0.1, 0.8, 0.1]))
    assert s.predict(Z)[1] == 1


def test_adaboost_cross_pattern():
    Z, y = cross_pattern()
    est = fit("adaboost:50", Z, y)
    assert isinstance(est, AdaBoostEstimator)
    assert np.mean(est.predict(Z) == y) == 1.0
    assert all(b <= a + 1e-12 for a, b in zip(est.exp_loss, est.exp_loss[1:]))
    # training error is bounded by the exponential loss after every round
    assert all(e <= l + 1e-12 for e, l in zip(est.train_error, est.exp_loss))


def test_adaboost_pure_xor_has_no_weak_learner():
    Z = np.array([[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]])
    y = np.array([0, 0, 1, 1])
    est = fit("adaboost:50", Z, y)
    assert isinstance(est, ConstantEstimator) and "adaboost_no_weak_learner" in est.flags


def test_single_class_gives_constant():
    est = fit("logreg", np.zeros((4, 2)), np.ones(4, dtype=int))
    assert isinstance(est, ConstantEstimator) and est.flags == ("single_class_training",)
    assert est.predict(np.zeros((2, 2))).tolist() == [1, 1]
    with pytest.raises(PreconditionError):
        fit("stump", np.zeros((1, 1)), np.array([1]))


def test_bagging_tie_predicts_one():
    est = BaggingEstimator([Stump(0, 0.5, 1), Stump(0, 0.5, -1)])
    assert est.predict(np.array([[0.0], [1.0]])).tolist() == [1, 1]


def test_logreg_learns_direction():
    rng = np.random.default_rng(0)
    Z = rng.random((300, 2))
    y = (Z[:, 0] > 0.5).astype(int)
    est = fit("logreg:500:1.0", Z, y)
    assert est.weights[0] > 0 and abs(est.weights[0]) > abs(est.weights[1])
    assert np.mean(est.predict(Z) == y) > 0.9


@pytest.mark.parametrize("lid", ["stump", "bagging:5", "adaboost:10", "logreg:20"])
def test_training_is_deterministic(lid):
    ds = make_dataset(150, (3, 2), seed=2)
    a, b = train(lid, ds, seed=9), train(lid, ds, seed=9)
    assert np.array_equal(a.scores(ds), b.scores(ds))


def test_fold_sizes_and_determinism():
    y = np.array([0, 1] * 50)
    plan = make_folds(y, 5, seed=3)
    assert [len(f) for f in plan.folds] == [20] * 5
    rows = np.sort(np.concatenate(plan.folds))
    assert rows.tolist() == list(range(100))
    again = make_folds(y, 5, seed=3)
    assert all(np.array_equal(a, b) for a, b in zip(plan.folds, again.folds))
    with pytest.raises(PreconditionError):
        make_folds(y[:3], 5)


@pytest.mark.parametrize("n,rate", [(101, 0.3), (57, 0.1), (400, 0.5)])
def test_stratified_folds_balanced(n, rate):
    y = (np.random.default_rng(n).random(n) < rate).astype(int)
    plan = make_folds(y, 5, seed=0)
    sizes = [len(f) for f in plan.folds]
    assert max(sizes) - min(sizes) <= 1
    expected = y.mean()
    for f in plan.folds:
        assert abs(y[f].sum() - expected * len(f)) <= 1 + 1e-9


def test_cross_validate_out_of_fold():
    ds = make_dataset(100, (2,), seed=1)
    cv = cross_validate(ds, "stump", k=5, seed=0)
    assert cv.plan.k == 5 and len(cv.folds) == 5
    for fr in cv.folds:
        assert set(fr.train_rows).isdisjoint(fr.test_rows)
        assert np.array_equal(cv.oof.hard[fr.test_rows], fr.predictions.hard)
    assert np.array_equal(cv.oof.model.predict(ds), cv.oof.hard)
    again = cross_validate(ds, "stump", k=5, seed=0)
    assert np.array_equal(again.oof.scores, cv.oof.scores)


def test_single_class_test_fold_flagged():
    ds = make_dataset(10, (2,), seed=0)
    ds = Dataset(ds.features, ds.sensitive, np.array([1] * 9 + [0]), ds.specs)
    cv = cross_validate(ds, "stump", k=5, seed=0)
    assert sum("single_class_test_fold" in fr.flags for fr in cv.folds) >= 4


def test_performance_examples():
    yhat = [1] * 4 + [1] + [0] + [0] * 4
    y = [1] * 4 + [0] + [1] + [0] * 4
    assert confusion(yhat, y) == (4, 1, 1, 4)
    p = performance(yhat, y)
    assert (p.accuracy, p.f1, p.gmean) == pytest.approx((0.8, 0.8, 0.8))
    assert performance(y, y).as_dict() == {"accuracy": 1.0, "f1": 1.0, "gmean": 1.0}
    ones = performance([1, 1], [1, 1])
    assert ones.f1 == 1.0 and ones.gmean == 0.0 and "gmean_empty_class" in ones.flags
    none = performance([0, 0], [0, 0])
    assert none.f1 == 0.0 and "f1_undefined" in none.flags
    with pytest.raises(PreconditionError):
        performance([], [])


@pytest.mark.parametrize("seed", range(10))
def test_performance_properties(seed):
    rng = np.random.default_rng(seed)
    yhat, y = rng.integers(0, 2, 50), rng.integers(0, 2, 50)
    p = performance(yhat, y)
    tp, fp, fn, tn = confusion(yhat, y)
    tpr, tnr = tp / (tp + fn), tn / (tn + fp)
    prec = tp / (tp + fp)
    assert p.gmean <= max(tpr, tnr) + 1e-12
    assert min(prec, tpr) - 1e-12 <= p.f1 <= max(prec, tpr) + 1e-12
    assert all(0 <= v <= 1 for v in p.as_dict().values())


def test_ber_constant_predictor():
    assert balanced_error_rate(np.zeros(4), np.array([0, 1, 0, 1])) == 0.5
    with pytest.raises(PreconditionError):
        balanced_error_rate(np.zeros(2), np.zeros(2))


def test_ber_audit_predictable_attribute():
    rng = np.random.default_rng(0)
    a = rng.integers(0, 2, 300)
    X = np.column_stack([a.astype(float), rng.random(300)])
    ds = Dataset(X, a[:, None], rng.integers(0, 2, 300),
                 (SensitiveAttribute("s", ("0", "1"), "1"),))
    audit = ber_audit(ds, "s", ["stump", "bagging:3"], seed=0, epsilon=0.05)
    assert audit.ber["stump"] == 0.0 and audit.fair is False


def test_ber_audit_independent_attribute():
    ds = make_dataset(2000, (3,), seed=5)
    audit = ber_audit(ds, 0, ["stump"], seed=0, epsilon=0.1)
    assert abs(audit.ber["stump"] - 0.5) < 0.06
    assert audit.fair and audit.flags == ("binarised_privileged_vs_rest",)


def test_feature_ablation_shape():
    ds = make_dataset(120, (2,), seed=3)
    names = ["x0", "x1"]
    out = feature_ablation(ds, names, "stump", seed=0, k=3)
    assert set(out["acc_without"]) == set(names)
    assert 0 <= out["acc_full"] <= 1 and 0 <= out["disp_full"] <= 1
    assert math.isfinite(out["disp_without"][names[0]])
