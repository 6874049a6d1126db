"""Built-in learners, cross-validation and performance metrics.

The learners are deliberately small (stumps and ensembles of stumps, plus
logistic regression by gradient descent) so that every downstream metric is
reproducible from a seed.  Learner ids: ``stump``, ``bagging[:B]``,
``adaboost[:T]``, ``logreg[:epochs[:lr]]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .data import Dataset, PredictionSet, partition
from .errors import PreconditionError
from .group import probe_metric

DEFAULTS = {"bagging": 10, "adaboost": 50, "logreg": (200, 0.5)}


# --------------------------------------------------------------------------
# decision stump


@dataclass(frozen=True)
class Stump:
    """Predicts 1 when ``x[feature] >= threshold`` (polarity +1) or when it is below (-1)."""

    feature: int
    threshold: float
    polarity: int

    def predict(self, Z: np.ndarray) -> np.ndarray:
        above = Z[:, self.feature] >= self.threshold
        return (above if self.polarity == 1 else ~above).astype(np.int64)


def fit_stump(Z: np.ndarray, y: np.ndarray, w: np.ndarray | None = None,
              order: np.ndarray | None = None) -> Stump:
    """Threshold stump with the smallest (weighted) misclassification.

    Ties go to the lowest feature index, then the lowest threshold, then
    polarity +1.
    """
    n, d = Z.shape
    if d == 0:
        raise PreconditionError("stump: no features")
    w = np.ones(n) if w is None else np.asarray(w, dtype=float)
    if order is None:
        order = np.argsort(Z, axis=0, kind="stable")
    Zs = np.take_along_axis(Z, order, axis=0)
    ys = y[order]
    ws = w[order]
    zero = np.zeros((1, d))
    pos = np.vstack([zero, np.cumsum(ws * ys, axis=0)])
    neg = np.vstack([zero, np.cumsum(ws * (1 - ys), axis=0)])
    # split k: sorted rows [0, k) predicted 0, rows [k, n) predicted 1
    err_plus = pos + (neg[-1] - neg)
    err_minus = (pos[-1] + neg[-1]) - err_plus
    valid = np.ones((n + 1, d), dtype=bool)
    valid[1:n] = Zs[:-1] < Zs[1:]
    errs = np.where(valid[None], np.stack([err_plus, err_minus]), np.inf)
    best = errs.min()
    pol_i, k, f = np.nonzero(errs == best)
    pick = np.lexsort((pol_i, k, f))[0]
    pol_i, k, f = int(pol_i[pick]), int(k[pick]), int(f[pick])
    if k == 0:
        t = -np.inf
    elif k == n:
        t = np.inf
    else:
        lo, hi = Zs[k - 1, f], Zs[k, f]
        mid = lo + (hi - lo) / 2
        t = float(mid if mid > lo else hi)
    return Stump(f, t, 1 if pol_i == 0 else -1)


# --------------------------------------------------------------------------
# estimators on design matrices


class Estimator:
    flags: tuple[str, ...] = ()

    def scores(self, Z: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def predict(self, Z: np.ndarray) -> np.ndarray:
        return (self.scores(Z) >= 0.5).astype(np.int64)


@dataclass
class ConstantEstimator(Estimator):
    label: int
    flags: tuple[str, ...] = ("single_class_training",)

    def scores(self, Z):
        return np.full(Z.shape[0], float(self.label))


@dataclass
class StumpEstimator(Estimator):
    stump: Stump

    def scores(self, Z):
        return self.stump.predict(Z).astype(float)


@dataclass
class BaggingEstimator(Estimator):
    stumps: list
    flags: tuple[str, ...] = ()

    def scores(self, Z):
        votes = np.zeros(Z.shape[0])
        for s in self.stumps:
            votes += s.predict(Z)
        # a tied vote lands exactly on 0.5 and so predicts 1
        return votes / len(self.stumps)


@dataclass
class AdaBoostEstimator(Estimator):
    stumps: list
    alphas: list
    exp_loss: list = field(default_factory=list)
    train_error: list = field(default_factory=list)
    flags: tuple[str, ...] = ()

    def margin(self, Z):
        F = np.zeros(Z.shape[0])
        for s, a in zip(self.stumps, self.alphas):
            F += a * (2.0 * s.predict(Z) - 1.0)
        return F

    def scores(self, Z):
        total = math.fsum(abs(a) for a in self.alphas)
        if total == 0:
            return np.full(Z.shape[0], 0.5)
        return np.clip((self.margin(Z) / total + 1.0) / 2.0, 0.0, 1.0)


@dataclass
class LogRegEstimator(Estimator):
    weights: np.ndarray
    bias: float
    flags: tuple[str, ...] = ()

    def scores(self, Z):
        return 1.0 / (1.0 + np.exp(-(Z @ self.weights + self.bias)))


def parse_learner(learner_id: str) -> tuple[str, tuple]:
    parts = learner_id.split(":")
    kind = parts[0]
    try:
        if kind == "stump" and len(parts) == 1:
            return kind, ()
        if kind == "bagging" and len(parts) <= 2:
            return kind, (int(parts[1]) if len(parts) > 1 else DEFAULTS["bagging"],)
        if kind == "adaboost" and len(parts) <= 2:
            return kind, (int(parts[1]) if len(parts) > 1 else DEFAULTS["adaboost"],)
        if kind == "logreg" and len(parts) <= 3:
            epochs = int(parts[1]) if len(parts) > 1 else DEFAULTS["logreg"][0]
            lr = float(parts[2]) if len(parts) > 2 else DEFAULTS["logreg"][1]
            return kind, (epochs, lr)
    except ValueError:
        pass
    raise PreconditionError(f"unknown learner id {learner_id!r}")


def _fit_adaboost(Z, y, rounds):
    n = len(y)
    order = np.argsort(Z, axis=0, kind="stable")
    w = np.full(n, 1.0 / n)
    ypm = 2.0 * y - 1.0
    stumps, alphas, exp_loss, train_error = [], [], [], []
    F = np.zeros(n)
    loss = 1.0
    for _ in range(rounds):
        stump = fit_stump(Z, y, w, order)
        h = stump.predict(Z)
        eps = float(w[h != y].sum())
        if eps >= 0.5:
            break
        if eps <= 0.0:
            alpha = 0.5 * math.log((1 - 1e-10) / 1e-10)
            stumps.append(stump)
            alphas.append(alpha)
            F += alpha * (2.0 * h - 1.0)
            exp_loss.append(float(np.mean(np.exp(-ypm * F))))
            train_error.append(float(np.mean((F >= 0) != (y == 1))))
            break
        alpha = 0.5 * math.log((1.0 - eps) / eps)
        stumps.append(stump)
        alphas.append(alpha)
        F += alpha * (2.0 * h - 1.0)
        w = w * np.exp(-alpha * ypm * (2.0 * h - 1.0))
        z = w.sum()
        w /= z
        loss *= z
        exp_loss.append(loss)
        train_error.append(float(np.mean((F >= 0) != (y == 1))))
    if not stumps:
        return ConstantEstimator(int(np.mean(y) >= 0.5), flags=("adaboost_no_weak_learner",))
    return AdaBoostEstimator(stumps, alphas, exp_loss, train_error)


def _fit_logreg(Z, y, epochs, lr):
    n, d = Z.shape
    w = np.zeros(d)
    b = 0.0
    yf = y.astype(float)
    for _ in range(epochs):
        p = 1.0 / (1.0 + np.exp(-(Z @ w + b)))
        g = p - yf
        w -= lr * (Z.T @ g) / n
        b -= lr * float(g.mean())
    return LogRegEstimator(w, b)


def fit(learner_id: str, Z: np.ndarray, y: np.ndarray, seed: int = 0) -> Estimator:
    """Train a learner on a design matrix; deterministic given ``seed``."""
    kind, args = parse_learner(learner_id)
    Z = np.asarray(Z, dtype=float)
    y = np.asarray(y, dtype=np.int64)
    if len(y) < 2:
        raise PreconditionError("need at least 2 training rows")
    if np.unique(y).size < 2:
        return ConstantEstimator(int(y[0]))
    if kind == "stump":
        return StumpEstimator(fit_stump(Z, y))
    if kind == "bagging":
        rng = np.random.default_rng(seed)
        stumps = []
        for _ in range(args[0]):
            idx = rng.integers(0, len(y), size=len(y))
            yb = y[idx]
            if np.unique(yb).size < 2:
                stumps.append(Stump(0, -np.inf, 1 if yb[0] == 1 else -1))
            else:
                stumps.append(fit_stump(Z[idx], yb))
        return BaggingEstimator(stumps)
    if kind == "adaboost":
        return _fit_adaboost(Z, y, args[0])
    return _fit_logreg(Z, y, *args)


# --------------------------------------------------------------------------
# dataset-level models


@dataclass
class Model:
    """A trained estimator plus the recipe for building its input from a Dataset."""

    learner_id: str
    estimator: Estimator
    exclude: tuple[str, ...] = ()
    seed: int = 0

    @property
    def flags(self):
        return self.estimator.flags

    def scores(self, ds: Dataset, sensitive: np.ndarray | None = None) -> np.ndarray:
        return self.estimator.scores(ds.design_matrix(sensitive, self.exclude))

    def predict(self, ds: Dataset, sensitive: np.ndarray | None = None) -> np.ndarray:
        return (self.scores(ds, sensitive) >= 0.5).astype(np.int64)


def train(learner_id: str, ds: Dataset, seed: int = 0, exclude: Iterable[str] = ()) -> Model:
    exclude = tuple(exclude)
    est = fit(learner_id, ds.design_matrix(exclude=exclude), ds.labels, seed)
    return Model(learner_id, est, exclude, seed)


@dataclass(frozen=True)
class FoldPlan:
    folds: tuple[np.ndarray, ...]
    seed: int
    stratified: bool = True

    @property
    def k(self) -> int:
        return len(self.folds)

    def train_rows(self, f: int) -> np.ndarray:
        return np.sort(np.concatenate([self.folds[g] for g in range(self.k) if g != f]))


def make_folds(y, k: int = 5, seed: int = 0, stratified: bool = True) -> FoldPlan:
    """Seeded k-fold split; stratified plans deal each label class round-robin."""
    y = np.asarray(y)
    n = len(y)
    if n < k:
        raise PreconditionError(f"cannot make {k} folds from {n} rows")
    rng = np.random.default_rng(seed)
    assign = np.empty(n, dtype=np.int64)
    if stratified:
        offset = 0
        for c in np.unique(y):
            idx = rng.permutation(np.flatnonzero(y == c))
            assign[idx] = (offset + np.arange(len(idx))) % k
            offset += len(idx)
    else:
        idx = rng.permutation(n)
        assign[idx] = np.arange(n) % k
    return FoldPlan(tuple(np.flatnonzero(assign == f) for f in range(k)), seed, stratified)


class OutOfFoldModel:
    """Predicts every row with the fold model that never saw it."""

    def __init__(self, plan: FoldPlan, models: Sequence[Model]):
        self.plan = plan
        self.models = list(models)
        self.learner_id = self.models[0].learner_id

    def scores(self, ds: Dataset, sensitive: np.ndarray | None = None) -> np.ndarray:
        sens = ds.sensitive if sensitive is None else np.asarray(sensitive)
        out = np.empty(ds.n)
        for rows, m in zip(self.plan.folds, self.models):
            out[rows] = m.scores(ds.subset(rows), sens[rows])
        return out

    def predict(self, ds: Dataset, sensitive: np.ndarray | None = None) -> np.ndarray:
        return (self.scores(ds, sensitive) >= 0.5).astype(np.int64)


@dataclass
class FoldResult:
    fold: int
    train_rows: np.ndarray
    test_rows: np.ndarray
    model: Model
    predictions: PredictionSet
    flags: tuple[str, ...] = ()


@dataclass
class CVResult:
    learner_id: str
    plan: FoldPlan
    folds: list[FoldResult]
    oof: PredictionSet


def fold_seeds(seed: int, k: int) -> list[int]:
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(k)]


def cross_validate(ds: Dataset, learner_id: str, k: int = 5, seed: int = 0,
                   stratified: bool = True, exclude: Iterable[str] = ()) -> CVResult:
    plan = make_folds(ds.labels, k, seed, stratified)
    folds, models = [], []
    for f, (rows, fseed) in enumerate(zip(plan.folds, fold_seeds(seed, k))):
        tr = plan.train_rows(f)
        model = train(learner_id, ds.subset(tr), fseed, exclude)
        test = ds.subset(rows)
        preds = PredictionSet.from_scores(model.scores(test), source=learner_id, seed=fseed,
                                          model=model)
        flags = []
        if np.unique(ds.labels[rows]).size < 2:
            flags.append("single_class_test_fold")
        flags.extend(model.flags)
        folds.append(FoldResult(f, tr, rows, model, preds, tuple(flags)))
        models.append(model)
    oof_model = OutOfFoldModel(plan, models)
    oof = PredictionSet.from_scores(oof_model.scores(ds), source=learner_id, seed=seed,
                                    model=oof_model)
    return CVResult(learner_id, plan, folds, oof)


# --------------------------------------------------------------------------
# performance


@dataclass(frozen=True)
class PerformanceTriple:
    accuracy: float
    f1: float
    gmean: float
    flags: tuple[str, ...] = ()

    def as_dict(self) -> dict[str, float]:
        return {"accuracy": self.accuracy, "f1": self.f1, "gmean": self.gmean}


def confusion(yhat, y) -> tuple[int, int, int, int]:
    yhat = yhat.hard if isinstance(yhat, PredictionSet) else np.asarray(yhat)
    y = np.asarray(y)
    tp = int(np.count_nonzero((yhat == 1) & (y == 1)))
    fp = int(np.count_nonzero((yhat == 1) & (y == 0)))
    fn = int(np.count_nonzero((yhat == 0) & (y == 1)))
    tn = int(np.count_nonzero((yhat == 0) & (y == 0)))
    return tp, fp, fn, tn


def performance(yhat, y) -> PerformanceTriple:
    tp, fp, fn, tn = confusion(yhat, y)
    n = tp + fp + fn + tn
    if n == 0:
        raise PreconditionError("performance: no rows")
    flags = []
    acc = (tp + tn) / n
    if 2 * tp + fp + fn == 0:
        f1 = 0.0
        flags.append("f1_undefined")
    else:
        f1 = 2 * tp / (2 * tp + fp + fn)
    if tp + fn == 0 or tn + fp == 0:
        gmean = 0.0
        flags.append("gmean_empty_class")
    else:
        gmean = math.sqrt((tp / (tp + fn)) * (tn / (tn + fp)))
    return PerformanceTriple(acc, f1, gmean, tuple(flags))


# --------------------------------------------------------------------------
# attribute predictability


@dataclass(frozen=True)
class BerAudit:
    attribute: str
    ber: dict[str, float]
    epsilon: float
    fair: bool
    flags: tuple[str, ...] = ()


def balanced_error_rate(pred, target) -> float:
    pred, target = np.asarray(pred), np.asarray(target)
    pos, neg = target == 1, target == 0
    if not pos.any() or not neg.any():
        raise PreconditionError("ber: attribute is constant")
    return 0.5 * (np.mean(pred[pos] == 0) + np.mean(pred[neg] == 1))


def ber_audit(ds: Dataset, attribute: int | str = 0, learners: Sequence[str] = ("stump",),
              seed: int = 0, epsilon: float = 0.1, k: int = 5) -> BerAudit:
    """How well the non-sensitive features predict an attribute (privileged vs rest).

    The dataset is epsilon-fair w.r.t. the tried learners iff every held-out
    balanced error rate exceeds epsilon.
    """
    i = ds.attribute_index(attribute)
    spec = ds.specs[i]
    target = (ds.sensitive[:, i] == spec.privileged_code).astype(np.int64)
    if np.unique(target).size < 2:
        raise PreconditionError(f"ber: attribute {spec.name!r} is constant")
    flags = ("binarised_privileged_vs_rest",) if spec.n_values > 2 else ()
    plan = make_folds(target, k, seed)
    Z = ds.features
    out = {}
    for lid in learners:
        pred = np.empty(ds.n, dtype=np.int64)
        for f, fseed in zip(range(plan.k), fold_seeds(seed, plan.k)):
            tr = plan.train_rows(f)
            est = fit(lid, Z[tr], target[tr], fseed)
            pred[plan.folds[f]] = est.predict(Z[plan.folds[f]])
        out[lid] = float(balanced_error_rate(pred, target))
    return BerAudit(spec.name, out, epsilon, min(out.values()) > epsilon, flags)


def feature_ablation(ds: Dataset, features: Sequence[str], learner_id: str = "stump",
                     seed: int = 0, k: int = 5, attribute: int | str = 0) -> dict:
    """Cross-validated accuracy and dp.binarised disparity with and without each feature.

    Feeds the accuracy- and disparity-conditioned procedural measures.
    """
    part = partition(ds, attribute)

    def run(exclude):
        cv = cross_validate(ds, learner_id, k, seed, exclude=exclude)
        acc = performance(cv.oof, ds.labels).accuracy
        disp = probe_metric("DP", cv.oof.hard, ds.labels, part, "binarised").value
        return acc, disp

    acc_full, disp_full = run(())
    acc_without, disp_without = {}, {}
    for s in features:
        acc_without[s], disp_without[s] = run((s,))
    return {"acc_full": acc_full, "acc_without": acc_without,
            "disp_full": disp_full, "disp_without": disp_without}
