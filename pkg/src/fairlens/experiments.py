"""Experiment pipelines: underestimation, timing, Δ-performance, correlations, trade-offs.

Everything here is plot data.  No plotted values are hard-coded; tests
assert directions and properties on synthetic data built by the planted
generators below.
"""

from __future__ import annotations

import csv
import hashlib
import io
import math
import os
import statistics
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping, Sequence

import numpy as np

from . import group as G
from .data import Dataset, GroupPartition, PredictionSet, SensitiveAttribute, perturb, super_partition
from .errors import FairnessError, NotApplicableError, PreconditionError
from .hfm import hfm_all, hfm_approx, hfm_max, hfm_prev
from .individual import theil_index
from .learners import cross_validate, performance

UNDERESTIMATION_PROBES = ("DP", "EOpp", "FPRBalance", "PP")
DELTA_KEYS = ("d_accuracy", "d_f1", "d_gmean")
PERTURBATION_PROTOCOL = "one flip-all draw per (fold, model) using the global seed"


def worker_count(default: int = 1) -> int:
    """Upper bound on worker threads, from FAIRLENS_THREADS."""
    raw = os.environ.get("FAIRLENS_THREADS")
    if not raw:
        return default
    try:
        return max(1, int(raw))
    except ValueError:
        return default


def parallel_map(fn: Callable, items: Sequence, workers: int | None = None) -> list:
    """Order-preserving map over a thread pool; results never depend on scheduling."""
    workers = worker_count() if workers is None else workers
    if workers <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# --------------------------------------------------------------------------
# synthetic data


def synthetic_dataset(n: int, value_counts: Sequence[int] = (3,), label_rates=None,
                      privileged: Sequence[int] | None = None, n_features: int = 3,
                      signal: float = 0.6, seed: int = 0) -> Dataset:
    """Planted-disparity data.

    Attribute 0 splits the rows into equal-sized groups; further attributes
    are uniform.  ``label_rates[j]`` fixes P(y=1 | a_0=j) (default 0.5).
    Feature ``x0`` separates the labels (y=1 lands in [signal, 1], y=0 in
    [0, 1-signal]); the remaining features are uniform noise.
    """
    if n < 1 or not value_counts:
        raise PreconditionError("synthetic data needs rows and at least one attribute")
    rng = np.random.default_rng(seed)
    k0 = value_counts[0]
    sens = np.empty((n, len(value_counts)), dtype=np.int64)
    sens[:, 0] = rng.permutation(np.arange(n) % k0)
    for i, k in enumerate(value_counts[1:], start=1):
        sens[:, i] = rng.integers(0, k, size=n)
    rates = np.full(k0, 0.5) if label_rates is None else np.asarray(label_rates, dtype=float)
    if rates.shape != (k0,):
        raise PreconditionError("label_rates needs one rate per value of attribute 0")
    y = (rng.random(n) < rates[sens[:, 0]]).astype(np.int64)
    X = rng.random((n, max(n_features, 2)))
    X[:, 0] = y * signal + (1 - signal) * X[:, 0]
    privileged = privileged or [0] * len(value_counts)
    specs = tuple(
        SensitiveAttribute(f"a{i}", tuple(f"g{j}" for j in range(k)), f"g{privileged[i]}")
        for i, k in enumerate(value_counts)
    )
    return Dataset(X, sens, y, specs, tuple(f"x{j}" for j in range(X.shape[1])))


def random_predictions(n: int, seed: int, rate: float = 0.5) -> np.ndarray:
    return (np.random.default_rng(seed).random(n) < rate).astype(np.int64)


@dataclass(frozen=True)
class PlantedModel:
    """On rows whose gate feature is below ``strength``, predict membership of the
    privileged group; elsewhere predict ``x[rest_feature] >= 0.5``.

    ``strength`` grades how much the output depends on the attribute: 0 is
    attribute-blind, 1 is f(x, a) = [a = privileged].
    """

    strength: float
    attribute: int = 0
    gate_feature: int = 1
    rest_feature: int = 2
    learner_id: str = "planted"

    def scores(self, ds: Dataset, sensitive: np.ndarray | None = None) -> np.ndarray:
        s = ds.sensitive if sensitive is None else np.asarray(sensitive)
        spec = ds.specs[self.attribute]
        priv = s[:, self.attribute] == spec.privileged_code
        gate = (np.ones(ds.n, dtype=bool) if self.strength >= 1
                else ds.features[:, self.gate_feature] < self.strength)
        rest = ds.features[:, self.rest_feature] >= 0.5
        return np.where(gate, priv, rest).astype(float)

    def predict(self, ds: Dataset, sensitive: np.ndarray | None = None) -> np.ndarray:
        return (self.scores(ds, sensitive) >= 0.5).astype(np.int64)


def dependence_dataset(n: int = 2000, noise: float = 0.1, seed: int = 0) -> Dataset:
    """Binary attribute; y = [a = privileged] with each label flipped w.p. ``noise``."""
    rng = np.random.default_rng(seed)
    a = rng.integers(0, 2, size=n)
    y = np.where(rng.random(n) < noise, 1 - a, a)
    X = rng.random((n, 3))
    spec = SensitiveAttribute("a0", ("g0", "g1"), "g1")
    return Dataset(X, a, y, (spec,), ("x0", "x1", "x2"))


def dependence_family(strengths: Sequence[float] = tuple(np.linspace(0, 1, 11))) -> list[PlantedModel]:
    return [PlantedModel(float(s)) for s in strengths]


# --------------------------------------------------------------------------
# Δ-performance


@dataclass(frozen=True)
class DeltaPerformance:
    d_accuracy: float
    d_f1: float
    d_gmean: float
    dr: float
    seed: int
    policy: str
    flags: tuple[str, ...] = ()

    def as_dict(self) -> dict[str, float]:
        return {"d_accuracy": self.d_accuracy, "d_f1": self.d_f1, "d_gmean": self.d_gmean}


def delta_performance(model, ds: Dataset, seed: int = 0, policy: str = "flip-all",
                      rate: float = 1.0) -> DeltaPerformance:
    """Absolute change of accuracy, f1 and gmean when only sensitive inputs are perturbed.

    Uses the same perturbation as ``discriminative_risk`` with one draw, and
    returns that DR alongside.  Accuracy change is formed from integer
    counts, so |Δaccuracy| <= DR holds exactly.
    """
    if isinstance(model, PredictionSet):
        model = model.model
    if model is None or not hasattr(model, "predict"):
        raise NotApplicableError("delta_performance: needs a model that can re-predict")
    pert = perturb(ds, seed, policy, rate)
    if pert.unperturbable:
        raise PreconditionError(
            f"delta_performance: attribute(s) {', '.join(pert.unperturbable)} cannot be perturbed"
        )
    base = np.asarray(model.predict(ds))
    moved = np.asarray(model.predict(ds, pert.sensitive))
    y = ds.labels
    c1 = int(np.count_nonzero(base == y))
    c2 = int(np.count_nonzero(moved == y))
    changed = int(np.count_nonzero(base != moved))
    p1, p2 = performance(base, y), performance(moved, y)
    flags = tuple(dict.fromkeys(p1.flags + p2.flags))
    return DeltaPerformance(abs(c1 - c2) / ds.n, abs(p1.f1 - p2.f1), abs(p1.gmean - p2.gmean),
                            changed / ds.n, seed, policy, flags)


# --------------------------------------------------------------------------
# correlation


@dataclass(frozen=True)
class CorrelationRow:
    metric: str
    against: str
    r: float
    n: int
    flags: tuple[str, ...] = ()


def pearson(x, y) -> tuple[float, tuple[str, ...]]:
    """Pearson r, or NaN with a flag when fewer than 3 pairs or a variance is 0."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise PreconditionError("pearson: series differ in length")
    if len(x) < 3:
        return math.nan, ("too_few_samples",)
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        return math.nan, ("undefined_zero_variance",)
    return float(np.corrcoef(x, y)[0, 1]), ()


def correlation_table(metrics: Mapping[str, Sequence[float]],
                      series: Mapping[str, Sequence[float]]) -> list[CorrelationRow]:
    rows = []
    for m, xs in metrics.items():
        for s, ys in series.items():
            xa, ya = _paired(xs, ys)
            r, flags = pearson(xa, ya)
            if len(xa) < len(xs):
                flags = flags + (f"dropped_missing:{len(xs) - len(xa)}",)
            rows.append(CorrelationRow(m, s, r, len(xa), flags))
    return rows


def _paired(xs, ys):
    xs = np.asarray([math.nan if v is None else v for v in xs], dtype=float)
    ys = np.asarray([math.nan if v is None else v for v in ys], dtype=float)
    ok = np.isfinite(xs) & np.isfinite(ys)
    return xs[ok], ys[ok]


# --------------------------------------------------------------------------
# underestimation


@dataclass
class UnderestimationTable:
    rows: list[dict[str, Any]]
    summary: dict[str, dict[str, int]]


def form_values(yhat, y, part: GroupPartition, probes=UNDERESTIMATION_PROBES,
                forms=G.FORMS) -> dict[str, dict[str, float | None]]:
    """probe kind -> form -> value (None where the form is not evaluable)."""
    out = {}
    for kind in probes:
        got = G.probe_forms(kind, yhat, y, part, forms)
        out[kind] = {f: (got[f].value if f in got else None) for f in forms}
    return out


def underestimation_rows(learner: str, fold: int, attr: str, yhat, y,
                         part: GroupPartition) -> list[dict[str, Any]]:
    rows = []
    for kind, vals in form_values(yhat, y, part).items():
        rows.append({"learner": learner, "fold": fold, "attribute": attr, "metric": kind, **vals})
    return rows


def summarize_underestimation(rows: Iterable[Mapping[str, Any]]) -> dict[str, dict[str, int]]:
    summary: dict[str, dict[str, int]] = {}
    for r in rows:
        key = f"{r['learner']}/{r['attribute']}/{r['metric']}"
        s = summary.setdefault(key, {"folds": 0, "binarised_lt_alt": 0, "binarised_eq_alt": 0})
        b, a = r.get("binarised"), r.get("alt")
        if b is None or a is None:
            continue
        s["folds"] += 1
        s["binarised_lt_alt"] += int(b < a)
        s["binarised_eq_alt"] += int(b == a)
    return summary


def underestimation_table(ds: Dataset, learner_ids: Sequence[str], k: int = 5, seed: int = 0,
                          attribute: int | str = 0) -> UnderestimationTable:
    """Every form of DP/EOpp/PE/PP on each held-out fold of each learner."""
    i = ds.attribute_index(attribute)
    rows = []
    for lid in learner_ids:
        cv = cross_validate(ds, lid, k, seed)
        for f in cv.folds:
            test = ds.subset(f.test_rows)
            part = GroupPartition(test.sensitive[:, i], ds.specs[i].n_values,
                                  ds.specs[i].privileged_code, i, ds.specs[i].name)
            rows.extend(underestimation_rows(lid, f.fold, ds.specs[i].name, f.predictions.hard,
                                             test.labels, part))
    return UnderestimationTable(rows, summarize_underestimation(rows))


# --------------------------------------------------------------------------
# timing


@dataclass(frozen=True)
class TimingRecord:
    metric: str
    form: str
    fingerprint: str
    n: int
    profile: str
    repetitions: int
    median_ns: int
    min_ns: int
    n_groups: int
    n_terms: int

    def __post_init__(self):
        if self.repetitions < 5:
            raise PreconditionError("timing needs at least 5 repetitions")


def measure(fn: Callable[[], Any], repetitions: int = 5) -> tuple[int, int, Any]:
    """(median ns, min ns, last result) over ``repetitions`` runs after one warm-up run."""
    if repetitions < 5:
        raise PreconditionError("timing needs at least 5 repetitions")
    fn()
    times, res = [], None
    for _ in range(repetitions):
        t0 = time.perf_counter_ns()
        res = fn()
        times.append(time.perf_counter_ns() - t0)
    return int(statistics.median(times)), int(min(times)), res


def _profile(value_counts) -> str:
    return "x".join(str(k) for k in value_counts)


PROBE_TIMING_FORMS = ("binarised", "ext", "alt")
BASELINES = {"ext": "binarised", "alt": "binarised", "ext_avg": "binarised",
             "alt_avg": "binarised", "hfm.max": "hfm.prev", "hfm.approx": "hfm.max"}


def time_probe(ds: Dataset, yhat, kind: str, form: str, repetitions: int = 5,
               codes=None, n_values=None, privileged=None) -> TimingRecord:
    """Time one probe form; a fresh partition per run so group indexing is always paid."""
    if codes is None:
        codes, n_values, privileged = ds.sensitive[:, 0], ds.specs[0].n_values, ds.specs[0].privileged_code
    y = ds.labels

    def run():
        part = GroupPartition(codes, n_values, privileged)
        return G.probe_metric(kind, yhat, y, part, form)

    med, lo, res = measure(run, repetitions)
    return TimingRecord(f"{G.get_probe(kind).prefix}.{form}", form, ds.fingerprint, ds.n,
                        str(n_values), repetitions, med, lo, n_values, res.n_terms)


def _binary_view(ds: Dataset, i: int = 0) -> Dataset:
    spec = ds.specs[i]
    priv = (ds.sensitive[:, i] == spec.privileged_code).astype(np.int64)
    bspec = SensitiveAttribute(spec.name, ("other", spec.privileged), spec.privileged)
    return Dataset(ds.features, priv, ds.labels, (bspec,), ds.feature_names, ds.feature_sources)


def time_hfm(ds: Dataset, yhat, version: str, repetitions: int = 5,
             budget: int = 64, seed: int = 0) -> TimingRecord:
    """hfm.prev runs on the privileged-vs-rest view of attribute 0; the others on attribute 0."""
    if version == "prev":
        view = _binary_view(ds)
        fn = lambda: hfm_prev(view, yhat)  # noqa: E731
        groups = 2
    elif version == "max":
        fn = lambda: hfm_max(ds, yhat, [0])  # noqa: E731
        groups = ds.specs[0].n_values
    elif version == "approx":
        fn = lambda: hfm_approx(ds, yhat, [0], "max", budget, seed)  # noqa: E731
        groups = ds.specs[0].n_values
    else:
        raise PreconditionError(f"unknown hfm timing version {version!r}")
    med, lo, _ = measure(fn, repetitions)
    return TimingRecord(f"hfm.{version}", version, ds.fingerprint, ds.n,
                        str(ds.specs[0].n_values), repetitions, med, lo, groups,
                        groups if version != "prev" else 1)


def timing_bench(metrics: Sequence[str] = ("dp",), sizes: Sequence[int] = (30000,),
                 value_counts: Sequence[Sequence[int] | int] = ((5,),), repetitions: int = 5,
                 seed: int = 0, forms: Sequence[str] = PROBE_TIMING_FORMS,
                 hfm_sizes: Sequence[int] | None = None, approx_budget: int = 64) -> list[TimingRecord]:
    """Median-of-repetitions wall times over a (metric, form, n, profile) grid.

    A profile with several attribute sizes is timed on its super attribute.
    ``metrics`` mixes probe prefixes (dp, eopp, peq, ppar, npv) and
    hfm.prev / hfm.max / hfm.approx.  HFM is quadratic in n, so it runs on
    ``hfm_sizes`` (default: sizes capped at 2000).
    """
    records = []
    profiles = [(vc,) if isinstance(vc, int) else tuple(vc) for vc in value_counts]
    probes = [m for m in metrics if not m.startswith("hfm.")]
    hfms = [m.split(".", 1)[1] for m in metrics if m.startswith("hfm.")]
    for n in sizes:
        for prof in profiles:
            ds = synthetic_dataset(n, prof, seed=seed)
            yhat = random_predictions(n, seed + 1)
            if len(prof) > 1:
                part = super_partition(ds)
                codes, nv, pv = part.codes, part.n_values, part.privileged
            else:
                codes, nv, pv = ds.sensitive[:, 0], prof[0], ds.specs[0].privileged_code
            for m in probes:
                for form in forms:
                    rec = time_probe(ds, yhat, m, form, repetitions, codes, nv, pv)
                    records.append(_with_profile(rec, prof))
    hfm_grid = list(hfm_sizes) if hfm_sizes is not None else sorted({min(n, 2000) for n in sizes})
    for n in (hfm_grid if hfms else []):
        for prof in profiles:
            ds = synthetic_dataset(n, prof[:1], seed=seed)
            yhat = random_predictions(n, seed + 1)
            for v in hfms:
                rec = time_hfm(ds, yhat, v, repetitions, approx_budget, seed)
                records.append(_with_profile(rec, prof[:1]))
    return records


def _with_profile(rec: TimingRecord, prof) -> TimingRecord:
    return replace(rec, profile=_profile(prof))


def timing_ratios(records: Sequence[TimingRecord]) -> list[dict[str, Any]]:
    """Each record with its baseline (binarised, hfm.prev or exact) and the time ratio."""
    index = {}
    for r in records:
        index[(r.metric.split(".")[0], r.form, r.n, r.profile)] = r
        index[(r.metric, r.n, r.profile)] = r
    out = []
    for r in records:
        base = None
        if r.metric.startswith("hfm."):
            b = BASELINES.get(r.metric)
            base = index.get((b, r.n, r.profile)) if b else None
        elif r.form in BASELINES:
            base = index.get((r.metric.split(".")[0], BASELINES[r.form], r.n, r.profile))
        row = {
            "metric": r.metric, "form": r.form, "n": r.n, "profile": r.profile,
            "n_groups": r.n_groups, "n_terms": r.n_terms, "repetitions": r.repetitions,
            "median_ns": r.median_ns, "min_ns": r.min_ns, "fingerprint": r.fingerprint,
            "baseline": base.metric if base else "",
            "ratio": (r.median_ns / base.median_ns) if base and base.median_ns else None,
        }
        out.append(row)
    return out


# --------------------------------------------------------------------------
# per-fold experiment grid


GROUP_IDS = tuple(f"{p}.{f}" for p in ("dp", "eopp", "ppar") for f in G.FORMS)
INDIVIDUAL_IDS = ("theil", "dr", "hfm.prev", "hfm.max", "hfm.avg")


@dataclass
class Cell:
    """One (model, fold) cell of the experiment grid."""

    learner: str
    fold: int
    performance: dict[str, float]
    metrics: dict[str, float | None]
    delta: dict[str, float]
    underestimation: list[dict[str, Any]]
    flags: list[str] = field(default_factory=list)


def _safe(fn, flags: list[str], label: str):
    try:
        return fn()
    except FairnessError as exc:
        flags.append(f"{label}:{type(exc).__name__}")
        return None


def evaluate_cell(learner: str, fold: int, model, test: Dataset, hard: np.ndarray,
                  seed: int, attribute: int = 0) -> Cell:
    """All per-fold quantities the plot tables need, on the held-out rows."""
    flags: list[str] = []
    spec = test.specs[attribute]
    part = GroupPartition(test.sensitive[:, attribute], spec.n_values, spec.privileged_code,
                          attribute, spec.name)
    y = test.labels
    perf = performance(hard, y)
    flags.extend(perf.flags)
    metrics: dict[str, float | None] = {}
    for mid in GROUP_IDS:
        prefix, form = mid.split(".")
        res = _safe(lambda: G.probe_metric(prefix, hard, y, part, form), flags, mid)
        metrics[mid] = None if res is None else res.value
    res = _safe(lambda: theil_index(hard, y), flags, "theil")
    metrics["theil"] = None if res is None else res.value
    d = _safe(lambda: delta_performance(model, test, seed), flags, "delta")
    metrics["dr"] = None if d is None else d.dr
    if spec.n_values == 2:
        res = _safe(lambda: hfm_prev(test, hard, attribute), flags, "hfm.prev")
        metrics["hfm.prev"] = None if res is None else res.value
    else:
        metrics["hfm.prev"] = None
    both = _safe(lambda: hfm_all(test, hard, [attribute]), flags, "hfm")
    metrics["hfm.max"] = None if both is None else both["max"].value
    metrics["hfm.avg"] = None if both is None else both["avg"].value
    delta = d.as_dict() if d is not None else {k: None for k in DELTA_KEYS}
    under = underestimation_rows(learner, fold, spec.name, hard, y, part)
    return Cell(learner, fold, perf.as_dict(), metrics, delta, under, flags)


@dataclass
class ExperimentResult:
    cells: list[Cell]
    underestimation: UnderestimationTable
    correlation: list[CorrelationRow]
    relation: list[CorrelationRow]
    folds: dict[str, list[list[int]]]
    config: dict[str, Any]


def run_experiment(ds: Dataset, learner_ids: Sequence[str], k: int = 5, seed: int = 0,
                   attribute: int | str = 0, workers: int | None = None) -> ExperimentResult:
    """Cross-validate every learner, then evaluate each (model, fold) cell."""
    i = ds.attribute_index(attribute)
    cvs = [cross_validate(ds, lid, k, seed) for lid in learner_ids]
    jobs = [(cv, f) for cv in cvs for f in cv.folds]

    def job(item):
        cv, f = item
        try:
            return evaluate_cell(cv.learner_id, f.fold, f.model, ds.subset(f.test_rows),
                                 f.predictions.hard, seed, i)
        except FairnessError as exc:
            raise type(exc)(f"{cv.learner_id} fold {f.fold}: {exc}") from exc

    cells = parallel_map(job, jobs, workers)
    for (cv, f), c in zip(jobs, cells):
        c.flags.extend(f.flags)
    under_rows = [r for c in cells for r in c.underestimation]
    under = UnderestimationTable(under_rows, summarize_underestimation(under_rows))
    metric_ids = GROUP_IDS + INDIVIDUAL_IDS
    series = {m: [c.metrics[m] for c in cells] for m in metric_ids}
    deltas = {d: [c.delta[d] for c in cells] for d in DELTA_KEYS}
    corr = correlation_table(series, deltas)
    rel = correlation_table({m: series[m] for m in INDIVIDUAL_IDS},
                            {m: series[m] for m in GROUP_IDS})
    config = {"learners": list(learner_ids), "k": k, "seed": seed, "stratified": True,
              "attribute": ds.specs[i].name, "perturbation": PERTURBATION_PROTOCOL,
              "dataset": ds.fingerprint, "n": ds.n}
    folds = {cv.learner_id: [f.test_rows.tolist() for f in cv.folds] for cv in cvs}
    return ExperimentResult(cells, under, corr, rel, folds, config)


def tradeoff_table(cells: Sequence[Cell]) -> list[dict[str, Any]]:
    """One row per (model, fold): performance triple plus every fairness value."""
    return [{"learner": c.learner, "fold": c.fold, **c.performance, **c.metrics} for c in cells]


def relation_rows(cells: Sequence[Cell], individual=INDIVIDUAL_IDS,
                  group=GROUP_IDS) -> list[dict[str, Any]]:
    """Paired per-cell values for every (individual, group) metric pair."""
    return [{"learner": c.learner, "fold": c.fold, "individual": m, "group": g,
             "individual_value": c.metrics.get(m), "group_value": c.metrics.get(g)}
            for c in cells for m in individual for g in group]


def relation_table(cells: Sequence[Cell], individual=INDIVIDUAL_IDS,
                   group=GROUP_IDS) -> tuple[list[dict[str, Any]], list[CorrelationRow]]:
    series = {m: [c.metrics.get(m) for c in cells] for m in (*individual, *group)}
    corr = correlation_table({m: series[m] for m in individual}, {g: series[g] for g in group})
    return relation_rows(cells, individual, group), corr


# --------------------------------------------------------------------------
# output


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        f = float(v)
        return repr(f) if math.isfinite(f) else ""
    return str(v)


def csv_text(rows: Sequence[Mapping[str, Any]], columns: Sequence[str] | None = None) -> str:
    """CSV with shortest round-trip float text, so parse-and-re-emit is identical."""
    if columns is None:
        columns = list(dict.fromkeys(k for r in rows for k in r))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([_cell(r.get(c)) for c in columns])
    return buf.getvalue()


def write_csv(path: str | Path, rows, columns=None) -> Path:
    path = Path(path)
    path.write_text(csv_text(rows, columns), encoding="utf-8")
    return path


def correlation_rows(rows: Sequence[CorrelationRow]) -> list[dict[str, Any]]:
    return [{"metric": r.metric, "against": r.against, "r": r.r, "n": r.n,
             "flags": ";".join(r.flags)} for r in rows]


def delta_rows(cells: Sequence[Cell]) -> list[dict[str, Any]]:
    return [{"learner": c.learner, "fold": c.fold, "dr": c.metrics.get("dr"), **c.delta}
            for c in cells]


def folds_digest(folds: Mapping[str, list[list[int]]]) -> str:
    h = hashlib.blake2b(digest_size=8)
    h.update(repr(sorted(folds.items())).encode())
    return h.hexdigest()


EXPERIMENT_FILES = ("underestimation.csv", "delta.csv", "correlation.csv", "tradeoff.csv",
                    "relation.csv")


def write_experiment(res: ExperimentResult, out_dir: str | Path) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    forms_cols = ["learner", "fold", "attribute", "metric", *G.FORMS]
    paths = [
        write_csv(out / "underestimation.csv", res.underestimation.rows, forms_cols),
        write_csv(out / "delta.csv", delta_rows(res.cells)),
        write_csv(out / "correlation.csv", correlation_rows(res.correlation)),
        write_csv(out / "tradeoff.csv", tradeoff_table(res.cells)),
        write_csv(out / "relation.csv", relation_rows(res.cells)),
    ]
    return paths


def experiment_report(res: ExperimentResult) -> dict[str, Any]:
    return {
        "config": res.config,
        "folds_digest": folds_digest(res.folds),
        "underestimation_summary": res.underestimation.summary,
        "correlation": correlation_rows(res.correlation),
        "relation": correlation_rows(res.relation),
        "cell_flags": {f"{c.learner}/{c.fold}": c.flags for c in res.cells if c.flags},
    }
