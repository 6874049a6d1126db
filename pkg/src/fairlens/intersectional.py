"""Intersectional measures: differential fairness, min-max ratios, multiaccuracy, calibration.

These are usually run on a super attribute (see ``data.super_partition``),
but any GroupPartition works.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import GroupPartition, PredictionSet
from .errors import EmptyCellError, NotApplicableError, PreconditionError
from .results import MetricResult, timed

RATIO_KINDS = ("DPR", "EOppR", "CSPR", "GBR_INT")


def _hard(yhat):
    return yhat.hard if isinstance(yhat, PredictionSet) else np.asarray(yhat)


@dataclass(frozen=True)
class CountTable:
    """N_{y,a} for y in {0, 1} and every group a, plus a smoothing constant."""

    counts: np.ndarray  # shape (2, n_groups)
    kappa: float = 0.0

    @classmethod
    def build(cls, yhat, part: GroupPartition, kappa: float = 0.0) -> "CountTable":
        yhat = _hard(yhat)
        pos = np.bincount(part.codes[yhat == 1], minlength=part.n_values)
        tot = np.bincount(part.codes, minlength=part.n_values)
        return cls(np.vstack([tot - pos, pos]), kappa)

    @property
    def group_sizes(self) -> np.ndarray:
        return self.counts.sum(axis=0)

    def rates(self) -> np.ndarray:
        return (self.counts + self.kappa) / (self.group_sizes + 2 * self.kappa)


@timed
def empirical_differential_fairness(yhat, part: GroupPartition, kappa: float = 0.5) -> MetricResult:
    """Smallest epsilon with e^-eps <= P(yhat=y|a')/P(yhat=y|a'') <= e^eps for all pairs.

    Groups without rows are left out.  Zero counts need ``kappa > 0``.
    """
    if kappa < 0:
        raise PreconditionError("edf: kappa must be non-negative")
    table = CountTable.build(yhat, part, kappa)
    present = np.flatnonzero(table.group_sizes > 0)
    skipped = tuple(int(j) for j in np.flatnonzero(table.group_sizes == 0))
    if len(present) < 2:
        raise EmptyCellError("edf: fewer than 2 nonempty groups")
    raw = table.counts[:, present]
    flags = list(("skipped_empty_groups",) if skipped else ())
    if (raw == 0).any():
        if kappa == 0:
            raise PreconditionError("edf: a zero count with kappa=0 makes epsilon infinite")
        flags.append("smoothing_applied")
    log_rates = np.log(table.rates()[:, present])
    eps = float((log_rates.max(axis=1) - log_rates.min(axis=1)).max())
    return MetricResult("edf.epsilon", eps, "EDF", None, skipped, tuple(flags),
                        {"kappa": kappa}, n_terms=2 * len(present) * (len(present) - 1) // 2)


def _per_group(kind, yhat, y, part, strata, stratum_value):
    yhat = _hard(yhat)
    y = np.asarray(y)
    vals, skipped = {}, []
    keep = np.ones(len(yhat), dtype=bool)
    if kind == "CSPR":
        if strata is None:
            raise NotApplicableError("cspr: needs a legitimate-factor stratum column")
        keep = np.asarray(strata) == stratum_value
    for j, idx in enumerate(part.groups):
        idx = idx[keep[idx]]
        if kind == "EOppR":
            idx = idx[y[idx] == 1]
        if len(idx) == 0:
            skipped.append(j)
            continue
        rate = np.count_nonzero(yhat[idx] == 1) / len(idx)
        if kind == "GBR_INT":
            base = np.count_nonzero(y[idx] == 1) / len(idx)
            if base == 0:
                skipped.append(j)
                continue
            rate = rate / base
        vals[j] = rate
    return vals, skipped


@timed
def minmax_ratio(kind: str, yhat, y, part: GroupPartition, strata=None,
                 stratum_value=1) -> MetricResult:
    """Worst group quantity over best group quantity (1 is fairest).

    DPR: P(yhat=1|a=j); EOppR: P(yhat=1|a=j,y=1); CSPR: P(yhat=1|a=j, stratum);
    GBR_INT: P(yhat=1|a=j) / P(y=1|a=j).
    """
    if kind not in RATIO_KINDS:
        raise PreconditionError(f"unknown ratio kind {kind!r}")
    if kind == "CSPR" and strata is not None:
        strata = np.asarray(strata)
        if strata.dtype.kind in "US" and not isinstance(stratum_value, str):
            stratum_value = str(stratum_value)
    vals, skipped = _per_group(kind, yhat, y, part, strata, stratum_value)
    if not vals:
        raise EmptyCellError(f"{kind.lower()}: no group has a defined quantity")
    hi, lo = max(vals.values()), min(vals.values())
    if hi == 0:
        raise PreconditionError(f"{kind.lower()}: every group quantity is 0")
    flags = ("skipped_undefined_groups",) if skipped else ()
    return MetricResult(kind.lower(), lo / hi, kind, None, tuple(skipped), flags,
                        {"per_group": vals}, n_terms=len(vals))


@timed
def intersectional_disparate_impact(yhat, part: GroupPartition) -> MetricResult:
    """Smallest ratio of positive rates over ordered pairs of groups."""
    yhat = _hard(yhat)
    rates, skipped = {}, []
    for j, idx in enumerate(part.groups):
        if len(idx) == 0:
            skipped.append(j)
            continue
        r = np.count_nonzero(yhat[idx] == 1) / len(idx)
        if r == 0:
            raise PreconditionError(f"idi: group {j} has positive rate 0")
        rates[j] = r
    if len(rates) < 2:
        raise EmptyCellError("idi: fewer than 2 nonempty groups")
    flags = ("skipped_empty_groups",) if skipped else ()
    return MetricResult("idi", min(rates.values()) / max(rates.values()), "IDI", None,
                        tuple(skipped), flags, {"rates": rates},
                        n_terms=len(rates) * (len(rates) - 1))


def _scores_or_hard(pred, name):
    if isinstance(pred, PredictionSet):
        if pred.scores is not None:
            return pred.scores, ()
        return pred.hard.astype(float), (f"{name}:hard_predictions_as_scores",)
    return np.asarray(pred, dtype=float), ()


@timed
def multiaccuracy_check(scores, y, part: GroupPartition, alpha: float = 0.05) -> MetricResult:
    """|E[c(x) (score - y)]| for c = +/- the indicator of each group.

    ``value`` is the largest residual; passes iff all residuals are <= alpha.
    """
    s, flags = _scores_or_hard(scores, "multiacc")
    resid = s - np.asarray(y, dtype=float)
    n = len(resid)
    per_group = {j: abs(math.fsum(resid[idx])) / n for j, idx in enumerate(part.groups)}
    worst = max(per_group.values())
    return MetricResult("multiacc.max_residual", worst, "multiaccuracy", None, (), flags,
                        {"residual": per_group, "alpha": alpha, "pass": worst <= alpha},
                        n_terms=len(per_group))


def score_bins(scores, bins: int) -> np.ndarray:
    s = np.asarray(scores, dtype=float)
    return np.minimum((s * bins).astype(np.int64), bins - 1)


@timed
def calibration_by_group(scores, y, part: GroupPartition, bins: int = 10) -> MetricResult:
    """Per score bin, P(y=1) within each group; the value is the largest between-group gap."""
    if isinstance(scores, PredictionSet):
        if scores.scores is None:
            raise NotApplicableError("calib: needs scores")
        scores = scores.scores
    if bins < 1:
        raise PreconditionError("calib: bins must be >= 1")
    y = np.asarray(y)
    b = score_bins(scores, bins)
    table: dict[int, dict[int, float]] = {}
    empty_cells = []
    for k in range(bins):
        in_bin = b == k
        row = {}
        for j, idx in enumerate(part.groups):
            sel = idx[in_bin[idx]]
            if len(sel) == 0:
                empty_cells.append((k, j))
                continue
            row[j] = np.count_nonzero(y[sel] == 1) / len(sel)
        if row:
            table[k] = row
    gaps = {k: (max(r.values()) - min(r.values())) for k, r in table.items() if len(r) >= 2}
    flags = []
    if not gaps:
        flags.append("single_group_bins_only")
    if empty_cells:
        flags.append("empty_cells")
    return MetricResult("calib.max_gap", max(gaps.values()) if gaps else 0.0, "calibration",
                        None, (), tuple(flags),
                        {"bins": bins, "positive_rate": table, "gap": gaps,
                         "empty_cells": len(empty_cells)}, n_terms=len(gaps))


@timed
def worst_group_log_loss(scores, y, part: GroupPartition, eps: float = 1e-12) -> MetricResult:
    """Largest per-group mean log-loss; a diagnostic, never a pass/fail measure."""
    if isinstance(scores, PredictionSet):
        if scores.scores is None:
            raise NotApplicableError("worst_loss: needs scores")
        scores = scores.scores
    p = np.clip(np.asarray(scores, dtype=float), eps, 1 - eps)
    y = np.asarray(y, dtype=float)
    ll = -(y * np.log(p) + (1 - y) * np.log(1 - p))
    per = {j: float(ll[idx].mean()) for j, idx in enumerate(part.groups) if len(idx)}
    return MetricResult("worst_loss", max(per.values()), "L_max", None, (), (),
                        {"group_log_loss": per}, n_terms=len(per))

