"""Command-line entry point: validate, audit, bench, experiment, synth.

Exit codes: 0 success, 1 metric or validation failure, 2 I/O or config error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from . import group as G
from . import experiments as E
from .data import (Dataset, DatasetManifest, GroupPartition, PredictionSet, ingest,
                   load_predictions, partition, super_partition)
from .errors import (FairnessError, IngestError, NotApplicableError, PreconditionError,
                     ValidationError)
from .hfm import HfmResult, hfm_all, hfm_approx, hfm_prev
from .individual import discriminative_risk, general_entropy_index, lipschitz_audit, theil_index
from .intersectional import (calibration_by_group, empirical_differential_fairness,
                             intersectional_disparate_impact, minmax_ratio, multiaccuracy_check,
                             worst_group_log_loss)
from .learners import ber_audit, cross_validate, feature_ablation, parse_learner
from .procedural import JudgmentMatrix, pf_accuracy, pf_apriori, pf_disparity
from .results import MetricResult

EXIT_OK, EXIT_FAIL, EXIT_IO = 0, 1, 2

PROBE_PREFIXES = ("dp", "eopp", "peq", "ppar", "npv")
PER_ATTRIBUTE = ("di", "dt", "csp", "bgl", "gammasf", "minimax_gap", "hfm.prev", "edf.epsilon",
                 "dpr", "eoppr", "cspr", "gbr_int", "idi", "multiacc.max_residual",
                 "calib.max_gap", "worst_loss", "ber")
GLOBAL = ("gei", "theil", "dr", "lipschitz.constant", "hfm.max", "hfm.avg",
          "pf.apriori", "pf.accuracy", "pf.disparity")
OPTIONAL = ("ber", "pf.apriori", "pf.accuracy", "pf.disparity")


class ConfigError(Exception):
    """Bad flags or inputs detected before any metric work starts."""


@dataclass
class RunConfig:
    command: str
    manifest: str | None = None
    predictions: str | None = None
    metrics: tuple[str, ...] = ()
    forms: tuple[str, ...] = G.FORMS
    seed: int = 0
    k: int = 5
    learners: tuple[str, ...] = ("stump",)
    out: str = "fairlens-out"
    format: str = "json"
    approx_budget: int | None = None
    kappa: float = 0.5
    alpha: float = 2.0
    epsilon: float = 0.1
    tau: float = 0.8
    xi: float = 0.2
    multiacc_alpha: float = 0.05
    judgments: str | None = None
    timings: bool = False

    def public(self) -> dict[str, Any]:
        """The fields that shape results; the output location is left out."""
        d = dict(self.__dict__)
        d.pop("out")
        d.pop("timings")
        d["metrics"] = list(self.metrics)
        d["forms"] = list(self.forms)
        d["learners"] = list(self.learners)
        return d


def all_metric_ids(forms: Sequence[str] = G.FORMS) -> list[str]:
    ids = [f"{p}.{f}" for p in PROBE_PREFIXES for f in forms]
    ids += [f"eo.{f}" for f in forms]
    return ids + list(PER_ATTRIBUTE) + list(GLOBAL)


def default_metric_ids(forms: Sequence[str] = G.FORMS) -> list[str]:
    return [m for m in all_metric_ids(forms) if m not in OPTIONAL]


def resolve_metrics(spec: str | None, forms: Sequence[str]) -> tuple[str, ...]:
    known = all_metric_ids(G.FORMS)
    if not spec or spec == "default":
        return tuple(default_metric_ids(forms))
    if spec == "all":
        return tuple(all_metric_ids(forms))
    ids = [m.strip() for m in spec.split(",") if m.strip()]
    unknown = [m for m in ids if m not in known]
    if unknown:
        raise ConfigError(f"unknown metric id(s): {', '.join(unknown)}")
    return tuple(dict.fromkeys(ids))


def resolve_forms(spec: str | None) -> tuple[str, ...]:
    if not spec:
        return G.FORMS
    forms = tuple(f.strip() for f in spec.split(",") if f.strip())
    bad = [f for f in forms if f not in G.FORMS]
    if bad:
        raise ConfigError(f"unknown form(s): {', '.join(bad)}")
    return forms


# --------------------------------------------------------------------------
# audit


@dataclass
class AuditContext:
    ds: Dataset
    preds: PredictionSet
    cfg: RunConfig
    candidates: list[PredictionSet]


@dataclass(frozen=True)
class Scope:
    label: str
    part: GroupPartition
    spec_index: int | None  # None for the super attribute


def _needs_scores(ctx: AuditContext, name: str) -> np.ndarray:
    if ctx.preds.scores is None:
        raise NotApplicableError(f"{name}: predictions carry no scores")
    return ctx.preds.scores


def _hfm_metric(res: HfmResult) -> MetricResult:
    return MetricResult(res.name, res.value, "HFM", res.version,
                        detail={"g_f": res.g_f, "g_y": res.g_y, "exact": res.exact,
                                "budget": res.budget})


def _attribute_metric(mid: str, ctx: AuditContext, sc: Scope) -> MetricResult:
    ds, cfg = ctx.ds, ctx.cfg
    hard, y, part = ctx.preds.hard, ds.labels, sc.part
    prefix, _, form = mid.partition(".")
    if prefix in PROBE_PREFIXES or prefix == "eo":
        if form == "orig" and part.n_values != 2:
            raise NotApplicableError(f"{mid}: the orig form needs a two-valued attribute")
        if prefix == "eo":
            return G.equalized_odds(hard, y, part, form)
        return G.probe_metric(prefix, hard, y, part, form)
    if mid == "di":
        return G.disparate_impact(hard, part, cfg.tau)
    if mid == "dt":
        return G.disparate_treatment(hard, part)
    if mid == "csp":
        if ds.stratum is None:
            raise NotApplicableError("csp: manifest names no stratum column")
        return G.conditional_statistical_parity(hard, y, part, ds.stratum)
    if mid == "bgl":
        return G.bounded_group_loss(G.absolute_loss(_needs_scores(ctx, mid), y), part, cfg.xi)
    if mid == "gammasf":
        return G.gamma_subgroup_fairness(hard, y, part)
    if mid == "minimax_gap":
        res = G.minimax_gap(ctx.candidates, y, part)
        if len(ctx.candidates) == 1:
            res = replace(res, flags=res.flags + ("single_candidate",))
        return res
    if mid == "hfm.prev":
        if sc.spec_index is None or part.n_values != 2:
            raise NotApplicableError("hfm.prev: needs a two-valued attribute")
        return _hfm_metric(hfm_prev(ds, hard, sc.spec_index))
    if mid == "edf.epsilon":
        return empirical_differential_fairness(hard, part, cfg.kappa)
    if mid in ("dpr", "eoppr", "cspr", "gbr_int"):
        kind = {"dpr": "DPR", "eoppr": "EOppR", "cspr": "CSPR", "gbr_int": "GBR_INT"}[mid]
        strata = ds.stratum if kind == "CSPR" else None
        return minmax_ratio(kind, hard, y, part, strata, _stratum_value(ds) if strata is not None else 1)
    if mid == "idi":
        return intersectional_disparate_impact(hard, part)
    if mid == "multiacc.max_residual":
        return multiaccuracy_check(ctx.preds, y, part, cfg.multiacc_alpha)
    if mid == "calib.max_gap":
        return calibration_by_group(_needs_scores(ctx, mid), y, part)
    if mid == "worst_loss":
        return worst_group_log_loss(_needs_scores(ctx, mid), y, part)
    if mid == "ber":
        if sc.spec_index is None:
            raise NotApplicableError("ber: defined per sensitive attribute")
        audit = ber_audit(ds, sc.spec_index, cfg.learners, cfg.seed, cfg.epsilon, cfg.k)
        return MetricResult("ber", min(audit.ber.values()), "BER", None, (), audit.flags,
                            {"per_learner": audit.ber, "epsilon": audit.epsilon,
                             "epsilon_fair": audit.fair})
    raise ConfigError(f"unknown metric id {mid!r}")


def _stratum_value(ds: Dataset):
    # the most frequent stratum, ties to the smallest value
    vals, counts = np.unique(ds.stratum, return_counts=True)
    return vals[np.argmax(counts)]


def _global_metric(mid: str, ctx: AuditContext) -> MetricResult:
    ds, cfg, preds = ctx.ds, ctx.cfg, ctx.preds
    if mid == "gei":
        return general_entropy_index(preds.hard, ds.labels, cfg.alpha)
    if mid == "theil":
        return theil_index(preds.hard, ds.labels)
    if mid == "dr":
        return discriminative_risk(preds, ds, cfg.seed)
    if mid == "lipschitz.constant":
        return lipschitz_audit(_needs_scores(ctx, mid), ds.features, seed=cfg.seed)
    if mid in ("hfm.max", "hfm.avg"):
        version = mid.split(".")[1]
        if cfg.approx_budget:
            return _hfm_metric(hfm_approx(ds, preds.hard, None, version, cfg.approx_budget,
                                          cfg.seed))
        return _hfm_metric(hfm_all(ds, preds.hard)[version])
    if mid.startswith("pf."):
        return _procedural(mid, ctx)
    raise ConfigError(f"unknown metric id {mid!r}")


def _procedural(mid: str, ctx: AuditContext) -> MetricResult:
    if not ctx.cfg.judgments:
        raise NotApplicableError(f"{mid}: no --judgments tables given")
    j = JudgmentMatrix.load(ctx.cfg.judgments)
    ds = ctx.ds
    used = list(dict.fromkeys(ds.feature_sources)) + [s.name for s in ds.specs]
    if mid == "pf.apriori":
        value = pf_apriori(j, used)
        detail = {}
    else:
        if ctx.preds.model is None:
            raise NotApplicableError(f"{mid}: needs a built-in learner for feature ablation")
        abl = feature_ablation(ds, used, ctx.cfg.learners[0], ctx.cfg.seed, ctx.cfg.k)
        if mid == "pf.accuracy":
            value = pf_accuracy(j, used, abl["acc_full"], abl["acc_without"])
        else:
            value = pf_disparity(j, used, abl["disp_full"], abl["disp_without"])
        detail = abl
    return MetricResult(mid, value, "procedural", detail={"features": used, **detail},
                        n_terms=len(used))


def audit_jobs(ctx: AuditContext) -> list[tuple[str, str, Callable[[], MetricResult]]]:
    ds = ctx.ds
    scopes = [Scope(s.name, partition(ds, i), i) for i, s in enumerate(ds.specs)]
    if ds.n_a >= 2:
        sp = super_partition(ds)
        scopes.append(Scope(sp.name, sp, None))
    jobs = []
    for mid in ctx.cfg.metrics:
        if mid in GLOBAL:
            jobs.append((mid, "*", lambda mid=mid: _global_metric(mid, ctx)))
        else:
            for sc in scopes:
                jobs.append((mid, sc.label, lambda mid=mid, sc=sc: _attribute_metric(mid, ctx, sc)))
    return jobs


def _run_job(job):
    mid, attr, fn = job
    t0 = time.perf_counter_ns()
    try:
        res = fn()
        row = {"metric": mid, "attribute": attr, "status": "ok", "value": res.value,
               "result": res.to_dict()}
    except NotApplicableError as exc:
        row = {"metric": mid, "attribute": attr, "status": "skipped", "value": None,
               "reason": str(exc)}
    except FairnessError as exc:
        row = {"metric": mid, "attribute": attr, "status": "error", "value": None,
               "reason": f"{mid} [{attr}]: {type(exc).__name__}: {exc}"}
    return row, time.perf_counter_ns() - t0


def run_audit(ds: Dataset, preds: PredictionSet, cfg: RunConfig,
              candidates: list[PredictionSet] | None = None) -> tuple[dict[str, Any], list[dict]]:
    ctx = AuditContext(ds, preds, cfg, candidates or [preds])
    jobs = audit_jobs(ctx)
    done = E.parallel_map(_run_job, jobs)
    rows = [r for r, _ in done]
    timings = [{"metric": r["metric"], "attribute": r["attribute"], "wall_time_ns": t}
               for r, t in done]
    for r in rows:
        if r["status"] == "ok":
            r["value"] = r["result"]["value"]
    summary = {s: sum(r["status"] == s for r in rows) for s in ("ok", "skipped", "error")}
    report = {
        "dataset": {"name": ds.manifest.name if ds.manifest else "dataset", "n": ds.n,
                    "fingerprint": ds.fingerprint, "attributes": [s.name for s in ds.specs],
                    "flags": list(ds.flags)},
        "predictions": {"source": preds.source, "seed": preds.seed,
                        "has_scores": preds.has_scores},
        "config": cfg.public(),
        "summary": summary,
        "metrics": rows,
    }
    return report, timings


def _load_dataset(path: str | None) -> Dataset:
    if not path:
        raise ConfigError("--manifest is required")
    try:
        return ingest(DatasetManifest.load(path))
    except (FileNotFoundError, IsADirectoryError) as exc:
        raise ConfigError(f"cannot read {exc.filename}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc


def _predictions(ds: Dataset, cfg: RunConfig) -> tuple[PredictionSet, list[PredictionSet], dict]:
    if cfg.predictions:
        try:
            p = load_predictions(cfg.predictions, ds.n)
        except FileNotFoundError as exc:
            raise ConfigError(f"cannot read {exc.filename}") from exc
        return p, [p], {"mode": "external"}
    cvs = [cross_validate(ds, lid, cfg.k, cfg.seed) for lid in cfg.learners]
    info = {"mode": "cross_validated", "k": cfg.k, "stratified": True,
            "learners": list(cfg.learners),
            "fold_sizes": [len(f) for f in cvs[0].plan.folds]}
    return cvs[0].oof, [cv.oof for cv in cvs], info


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


def cmd_audit(cfg: RunConfig) -> int:
    ds = _load_dataset(cfg.manifest)
    preds, candidates, info = _predictions(ds, cfg)
    report, timings = run_audit(ds, preds, cfg, candidates)
    report["predictions"].update(info)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(_dump(report), encoding="utf-8")
    if cfg.format == "csv":
        E.write_csv(out / "report.csv", [
            {"metric": r["metric"], "attribute": r["attribute"], "status": r["status"],
             "value": r["value"], "flags": ";".join(r.get("result", {}).get("flags", [])),
             "reason": r.get("reason", "")} for r in report["metrics"]])
    if cfg.timings:
        (out / "timings.json").write_text(_dump(timings), encoding="utf-8")
    s = report["summary"]
    print(f"audit: {s['ok']} ok, {s['skipped']} skipped, {s['error']} error -> {out / 'report.json'}")
    for r in report["metrics"]:
        if r["status"] == "error":
            print(f"  error: {r['reason']}", file=sys.stderr)
    return EXIT_FAIL if s["error"] else EXIT_OK


# --------------------------------------------------------------------------
# validate, bench, experiment, synth


def cmd_validate(cfg: RunConfig) -> int:
    if not cfg.manifest:
        raise ConfigError("--manifest is required")
    try:
        manifest = DatasetManifest.load(cfg.manifest)
    except (FileNotFoundError, IsADirectoryError) as exc:
        raise ConfigError(f"cannot read {exc.filename}") from exc
    try:
        ds = ingest(manifest)
    except ValidationError as exc:
        print(_dump({"manifest": cfg.manifest, "status": "mismatch",
                     "mismatches": exc.mismatches}), end="")
        return EXIT_FAIL
    except FileNotFoundError as exc:
        raise ConfigError(f"cannot read {exc.filename}") from exc
    counts = {"n": ds.n, "n_raw_features": ds.n_raw_features,
              "n_prep_features": ds.n_prepared_features,
              "n_values": {s.name: s.n_values for s in ds.specs},
              "privileged": ds.privileged_counts()}
    status = "ok" if manifest.expected_counts else "no_expected_counts"
    print(_dump({"manifest": cfg.manifest, "status": status, "counts": counts,
                 "flags": list(ds.flags)}), end="")
    return EXIT_OK


def _parse_profiles(spec: str) -> list[tuple[int, ...]]:
    try:
        return [tuple(int(v) for v in p.split("x")) for p in spec.split(",") if p]
    except ValueError:
        raise ConfigError(f"bad --value-counts {spec!r}; use e.g. 5,2x3") from None


def _int_list(spec: str, flag: str) -> list[int]:
    try:
        return [int(v) for v in spec.split(",") if v]
    except ValueError:
        raise ConfigError(f"bad {flag} {spec!r}") from None


def cmd_bench(cfg: RunConfig, metric_spec: str, sizes: str, value_counts: str,
              repetitions: int, hfm_sizes: str | None) -> int:
    metrics = [m.strip() for m in metric_spec.split(",") if m.strip()]
    bad = [m for m in metrics if m not in PROBE_PREFIXES and m not in ("hfm.prev", "hfm.max", "hfm.approx")]
    if bad:
        raise ConfigError(f"unknown bench metric(s): {', '.join(bad)}")
    if repetitions < 5:
        raise ConfigError("--repetitions must be at least 5")
    records = E.timing_bench(metrics, _int_list(sizes, "--sizes"), _parse_profiles(value_counts),
                             repetitions, cfg.seed, cfg.forms,
                             _int_list(hfm_sizes, "--hfm-sizes") if hfm_sizes else None,
                             cfg.approx_budget or 64)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    path = E.write_csv(out / "timing.csv", E.timing_ratios(records))
    print(f"bench: {len(records)} rows -> {path}")
    return EXIT_OK


def cmd_experiment(cfg: RunConfig, n: int) -> int:
    if cfg.manifest:
        ds = _load_dataset(cfg.manifest)
    else:
        ds = E.synthetic_dataset(n, (3,), label_rates=(0.2, 0.5, 0.8), privileged=(1,),
                                 signal=0.3, seed=cfg.seed)
    res = E.run_experiment(ds, cfg.learners, cfg.k, cfg.seed)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    E.write_experiment(res, out)
    report = E.experiment_report(res)
    report["config"]["source"] = cfg.manifest or f"synthetic:{n}"
    (out / "report.json").write_text(_dump(_finite(report)), encoding="utf-8")
    print(f"experiment: {len(res.cells)} cells -> {out}")
    return EXIT_OK


def _finite(obj):
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_finite(v) for v in obj]
    if isinstance(obj, float) and not np.isfinite(obj):
        return None
    return obj


def cmd_synth(cfg: RunConfig, n: int, value_counts: str, rates: str | None) -> int:
    prof = _parse_profiles(value_counts)
    if len(prof) != 1:
        raise ConfigError("synth takes one value-count profile, e.g. 3x2")
    label_rates = [float(r) for r in rates.split(",")] if rates else None
    ds = E.synthetic_dataset(n, prof[0], label_rates=label_rates, seed=cfg.seed)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for r in range(ds.n):
        row = {f"x{j}": float(ds.features[r, j]) for j in range(ds.features.shape[1])}
        for i, s in enumerate(ds.specs):
            row[s.name] = s.values[ds.sensitive[r, i]]
        row["y"] = int(ds.labels[r])
        rows.append(row)
    E.write_csv(out / "data.csv", rows)
    manifest = {
        "name": "synthetic", "csv_path": "data.csv",
        "feature_columns": list(ds.feature_names),
        "sensitive": [{"name": s.name, "values": list(s.values), "privileged": s.privileged}
                      for s in ds.specs],
        "label_column": "y", "positive_label": "1",
        "expected_counts": {"n": ds.n, "n_prep_features": ds.n_prepared_features,
                            "privileged": ds.privileged_counts()},
    }
    (out / "manifest.json").write_text(_dump(manifest), encoding="utf-8")
    print(f"synth: {ds.n} rows -> {out / 'manifest.json'}")
    return EXIT_OK


# --------------------------------------------------------------------------
# argument parsing


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fairlens", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, out_default="fairlens-out"):
        sp.add_argument("--seed", type=int, default=0, help="single source of randomness")
        sp.add_argument("--out", default=out_default, help="output directory")
        return sp

    v = sub.add_parser("validate", help="ingest a manifest and check its expected counts")
    v.add_argument("--manifest", required=True)

    a = common(sub.add_parser("audit", help="compute fairness metrics, write report.json"))
    a.add_argument("--manifest", required=True)
    a.add_argument("--predictions", help="CSV with row_id,hard[,score]; default: cross-validate")
    a.add_argument("--metrics", default="default", help="comma list, 'default' or 'all'")
    a.add_argument("--forms", help="comma list of forms (default: all six)")
    a.add_argument("--k", type=int, default=5)
    a.add_argument("--learners", default="stump", help="comma list of learner ids")
    a.add_argument("--format", choices=("json", "csv"), default="json")
    a.add_argument("--approx-budget", type=int, help="anchor budget for approximate HFM")
    a.add_argument("--kappa", type=float, default=0.5, help="EDF smoothing")
    a.add_argument("--alpha", type=float, default=2.0, help="GEI alpha")
    a.add_argument("--multiacc-alpha", type=float, default=0.05)
    a.add_argument("--epsilon", type=float, default=0.1, help="BER threshold")
    a.add_argument("--tau", type=float, default=0.8, help="disparate impact threshold")
    a.add_argument("--xi", type=float, default=0.2, help="bounded group loss threshold")
    a.add_argument("--judgments", help="prefix of the .apr/.acc/.disp.csv judgment tables")
    a.add_argument("--timings", action="store_true", help="also write timings.json")

    b = common(sub.add_parser("bench", help="timing benchmark, writes timing.csv"))
    b.add_argument("--metrics", default="dp,hfm.prev,hfm.max,hfm.approx")
    b.add_argument("--forms", default="binarised,ext,alt")
    b.add_argument("--sizes", default="30000")
    b.add_argument("--value-counts", default="5", help="profiles, e.g. 5,2x3,2x3x6")
    b.add_argument("--hfm-sizes", help="sizes for HFM timing (default: sizes capped at 2000)")
    b.add_argument("--repetitions", type=int, default=5)
    b.add_argument("--approx-budget", type=int, default=64)

    e = common(sub.add_parser("experiment", help="run the cross-validated experiment grid"))
    e.add_argument("--manifest", help="dataset manifest (default: planted synthetic data)")
    e.add_argument("--n", type=int, default=600, help="synthetic rows when no manifest")
    e.add_argument("--k", type=int, default=5)
    e.add_argument("--learners", default="stump,bagging:5,adaboost:10,logreg")

    s = common(sub.add_parser("synth", help="write a synthetic CSV and manifest"))
    s.add_argument("--n", type=int, default=600)
    s.add_argument("--value-counts", default="3")
    s.add_argument("--rates", help="comma list of P(y=1) per value of the first attribute")
    return p


def _config(ns: argparse.Namespace) -> RunConfig:
    forms = resolve_forms(getattr(ns, "forms", None))
    learners = tuple(x.strip() for x in getattr(ns, "learners", "stump").split(",") if x.strip())
    try:
        for lid in learners:
            parse_learner(lid)
    except PreconditionError as exc:
        raise ConfigError(str(exc)) from None
    if getattr(ns, "k", 5) < 2:
        raise ConfigError("--k must be at least 2")
    cfg = RunConfig(
        command=ns.command, manifest=getattr(ns, "manifest", None),
        predictions=getattr(ns, "predictions", None), forms=forms,
        seed=getattr(ns, "seed", 0), k=getattr(ns, "k", 5), learners=learners,
        out=getattr(ns, "out", "fairlens-out"), format=getattr(ns, "format", "json"),
        approx_budget=getattr(ns, "approx_budget", None), kappa=getattr(ns, "kappa", 0.5),
        alpha=getattr(ns, "alpha", 2.0), epsilon=getattr(ns, "epsilon", 0.1),
        tau=getattr(ns, "tau", 0.8), xi=getattr(ns, "xi", 0.2),
        multiacc_alpha=getattr(ns, "multiacc_alpha", 0.05),
        judgments=getattr(ns, "judgments", None), timings=getattr(ns, "timings", False),
    )
    if ns.command == "audit":
        cfg.metrics = resolve_metrics(ns.metrics, forms)
    return cfg


def main(argv: Sequence[str] | None = None) -> int:
    ns = build_parser().parse_args(argv)
    try:
        cfg = _config(ns)
        if ns.command == "validate":
            return cmd_validate(cfg)
        if ns.command == "audit":
            return cmd_audit(cfg)
        if ns.command == "bench":
            return cmd_bench(cfg, ns.metrics, ns.sizes, ns.value_counts, ns.repetitions, ns.hfm_sizes)
        if ns.command == "experiment":
            return cmd_experiment(cfg, ns.n)
        return cmd_synth(cfg, ns.n, ns.value_counts, ns.rates)
    except ConfigError as exc:
        print(f"fairlens: {exc}", file=sys.stderr)
        return EXIT_IO
    except IngestError as exc:
        print(f"fairlens: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"fairlens: {exc}", file=sys.stderr)
        return EXIT_IO
    except FairnessError as exc:
        print(f"fairlens: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
