"""Group fairness: independence, separation and sufficiency measures.

Every rate-parity measure here is the same computation with a different
probe: the empirical frequency of an *event* among the rows of a group that
satisfy a *condition*.  Demographic parity looks at ``yhat=1`` among all
rows, equality of opportunity at ``yhat=1`` among ``y=1``, predictive
equality at ``yhat=1`` among ``y=0``, predictive parity at ``y=1`` among
``yhat=1``.  Each probe can be reduced over groups in six forms:

``orig``       |r_0 - r_priv|, two-valued attributes only
``binarised``  all non-privileged groups pooled against the privileged one
``ext``        largest deviation of a group from the overall rate
``alt``        largest gap between any two groups
``ext_avg``    mean deviation from the overall rate
``alt_avg``    mean gap over unordered pairs
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .data import GroupPartition, PredictionSet
from .errors import EmptyCellError, PreconditionError
from .results import MetricResult, capped_mean, timed

FORMS = ("orig", "binarised", "ext", "alt", "ext_avg", "alt_avg")


@dataclass(frozen=True)
class ProbeSpec:
    kind: str
    event: Callable[[np.ndarray, np.ndarray], np.ndarray]
    condition: Callable[[np.ndarray, np.ndarray], np.ndarray]
    prefix: str


def _all(yhat, y):
    return np.ones(yhat.shape[0], dtype=bool)


PROBES = {
    "DP": ProbeSpec("DP", lambda yh, y: yh == 1, _all, "dp"),
    "EOpp": ProbeSpec("EOpp", lambda yh, y: yh == 1, lambda yh, y: y == 1, "eopp"),
    "FPRBalance": ProbeSpec("FPRBalance", lambda yh, y: yh == 1, lambda yh, y: y == 0, "peq"),
    "PP": ProbeSpec("PP", lambda yh, y: y == 1, lambda yh, y: yh == 1, "ppar"),
    "NPVParity": ProbeSpec("NPVParity", lambda yh, y: y == 0, lambda yh, y: yh == 0, "npv"),
}
PREFIX_TO_PROBE = {p.prefix: p for p in PROBES.values()}


def get_probe(probe: str | ProbeSpec) -> ProbeSpec:
    if isinstance(probe, ProbeSpec):
        return probe
    if probe in PROBES:
        return PROBES[probe]
    if probe in PREFIX_TO_PROBE:
        return PREFIX_TO_PROBE[probe]
    raise PreconditionError(f"unknown probe {probe!r}")


def _hard(pred) -> np.ndarray:
    if isinstance(pred, PredictionSet):
        return pred.hard
    return np.asarray(pred)


def group_rate(probe, yhat, y, part: GroupPartition, j: int) -> float:
    """Frequency of the probe's event among group ``j`` rows meeting its condition."""
    p = get_probe(probe)
    yhat, y = _hard(yhat), np.asarray(y)
    idx = part.groups[j]
    cond = p.condition(yhat[idx], y[idx])
    n_cond = int(np.count_nonzero(cond))
    if n_cond == 0:
        raise EmptyCellError(f"empty cell: group {j} has no rows meeting the {p.kind} condition")
    return np.count_nonzero(p.event(yhat[idx], y[idx]) & cond) / n_cond


def group_rates(probe, yhat, y, part: GroupPartition) -> tuple[dict[int, float], list[int]]:
    """Rates for every group with a nonempty conditioning cell, plus the skipped groups."""
    p = get_probe(probe)
    yhat, y = _hard(yhat), np.asarray(y)
    event = p.event(yhat, y)
    cond = p.condition(yhat, y)
    rates: dict[int, float] = {}
    skipped: list[int] = []
    for j, idx in enumerate(part.groups):
        c = cond[idx]
        n_cond = int(np.count_nonzero(c))
        if n_cond == 0:
            skipped.append(j)
            continue
        rates[j] = np.count_nonzero(event[idx] & c) / n_cond
    return rates, skipped


def _pooled_rate(event, cond, mask) -> float | None:
    c = cond & mask
    n_cond = int(np.count_nonzero(c))
    if n_cond == 0:
        return None
    return np.count_nonzero(event & c) / n_cond


def _name(p: ProbeSpec, form: str) -> str:
    return f"{p.prefix}.{form}"


def _orig(p, event, cond, part):
    if part.n_values != 2:
        raise PreconditionError(
            f"form 'orig' needs a two-valued attribute, got {part.n_values} values"
        )
    priv = part.privileged_mask()
    r_priv = _pooled_rate(event, cond, priv)
    r_other = _pooled_rate(event, cond, ~priv)
    if r_priv is None or r_other is None:
        raise EmptyCellError(f"{_name(p, 'orig')}: a group has an empty conditioning cell")
    return MetricResult(_name(p, "orig"), abs(r_other - r_priv), p.kind, "orig",
                        detail={"rate_privileged": r_priv, "rate_other": r_other}, n_terms=1)


def _binarised(p, event, cond, part):
    # a single comparison against the privileged mask, no traversal of groups
    priv = part.privileged_mask()
    r_priv = _pooled_rate(event, cond, priv)
    r_marg = _pooled_rate(event, cond, ~priv)
    if r_priv is None or r_marg is None:
        raise EmptyCellError(
            f"{_name(p, 'binarised')}: privileged or pooled marginalised cell is empty"
        )
    return MetricResult(_name(p, "binarised"), abs(r_marg - r_priv), p.kind, "binarised",
                        detail={"rate_privileged": r_priv, "rate_marginalised": r_marg},
                        n_terms=1)


def _traversal(p, event, cond, part, form, strict):
    rates: dict[int, float] = {}
    skipped: list[int] = []
    hit = event & cond
    # one full pass over the rows per group value
    for j in range(part.n_values):
        mask = part.codes == j
        n_cond = int(np.count_nonzero(cond & mask))
        if n_cond == 0:
            skipped.append(j)
            continue
        rates[j] = np.count_nonzero(hit & mask) / n_cond
    if skipped and strict:
        raise EmptyCellError(f"{_name(p, form)}: empty conditioning cell in groups {skipped}")
    if len(rates) < 2:
        raise EmptyCellError(
            f"{_name(p, form)}: fewer than 2 evaluable groups (skipped {skipped})"
        )
    flags = ["skipped_empty_cells"] if skipped else []
    r = np.fromiter(rates.values(), dtype=float, count=len(rates))
    detail = {"rates": {int(k): v for k, v in rates.items()}}
    if form in ("ext", "ext_avg"):
        n_cond = int(np.count_nonzero(cond))
        overall = np.count_nonzero(event & cond) / n_cond
        dev = np.abs(r - overall)
        detail["rate_overall"] = overall
        value = float(dev.max())
        n_terms = len(dev)
        if form == "ext_avg":
            value = capped_mean(dev, value)
            if skipped:
                flags.append(f"avg_divisor:{len(dev)}/{part.n_values}")
    else:
        iu = np.triu_indices(len(r), k=1)
        gaps = np.abs(r[:, None] - r[None, :])[iu]
        value = float(gaps.max())
        n_terms = len(gaps)
        if form == "alt_avg":
            value = capped_mean(gaps, value)
            if skipped:
                full = part.n_values * (part.n_values - 1) // 2
                flags.append(f"avg_divisor:{len(gaps)}/{full}")
    return MetricResult(_name(p, form), value, p.kind, form, tuple(skipped), tuple(flags),
                        detail, n_terms)


@timed
def probe_metric(probe, yhat, y, part: GroupPartition, form: str = "alt",
                 strict: bool = False) -> MetricResult:
    """Reduce one probe over the groups of ``part`` in the requested form.

    Groups whose conditioning cell is empty are skipped and listed in
    ``skipped_groups`` (or raise EmptyCellError with ``strict=True``).
    """
    p = get_probe(probe)
    if form not in FORMS:
        raise PreconditionError(f"unknown form {form!r}")
    yhat, y = _hard(yhat), np.asarray(y)
    event = p.event(yhat, y)
    cond = p.condition(yhat, y)
    if form == "orig":
        return _orig(p, event, cond, part)
    if form == "binarised":
        return _binarised(p, event, cond, part)
    return _traversal(p, event, cond, part, form, strict)


def probe_forms(probe, yhat, y, part: GroupPartition,
                forms: Iterable[str] = FORMS, strict: bool = False) -> dict[str, MetricResult]:
    """All requested forms of one probe; forms that cannot be evaluated are left out."""
    out = {}
    for form in forms:
        try:
            out[form] = probe_metric(probe, yhat, y, part, form, strict)
        except (PreconditionError, EmptyCellError):
            continue
    return out


@timed
def equalized_odds(yhat, y, part: GroupPartition, form: str = "orig",
                   strict: bool = False) -> MetricResult:
    """Mean of the true-positive-rate and false-positive-rate disparities.

    When one of the two terms cannot be evaluated (no y=1 or no y=0 rows in
    some group) the other term alone is reported and the result is flagged.
    """
    terms, flags, skipped = {}, [], set()
    errors = {}
    for key in ("EOpp", "FPRBalance"):
        try:
            res = probe_metric(key, yhat, y, part, form, strict)
        except EmptyCellError as exc:
            errors[key] = str(exc)
            continue
        terms[key] = res.value
        skipped.update(res.skipped_groups)
        flags.extend(res.flags)
    if not terms:
        raise EmptyCellError(f"eo.{form}: neither term evaluable ({errors})")
    if len(terms) == 1:
        only = next(iter(terms))
        flags.append(f"single_term:{only}")
        value = terms[only]
    else:
        value = 0.5 * (terms["EOpp"] + terms["FPRBalance"])
    return MetricResult(f"eo.{form}", value, "EO", form, tuple(sorted(skipped)),
                        tuple(dict.fromkeys(flags)), {"terms": terms, "errors": errors},
                        n_terms=len(terms))


@timed
def disparate_impact(yhat, part: GroupPartition, tau: float = 0.8) -> MetricResult:
    """Positive-rate ratio of the pooled marginalised groups to the privileged group.

    ``detail['pass']`` is True iff the ratio is at least ``tau``.
    """
    yhat = _hard(yhat)
    priv = part.privileged_mask()
    if not priv.any() or priv.all():
        raise EmptyCellError("di: privileged or marginalised group is empty")
    r_priv = float(np.mean(yhat[priv] == 1))
    r_marg = float(np.mean(yhat[~priv] == 1))
    if r_priv == 0:
        raise PreconditionError("di: privileged positive rate is 0, ratio undefined")
    ratio = r_marg / r_priv
    return MetricResult("di", ratio, "DI", "binarised",
                        detail={"rate_privileged": r_priv, "rate_marginalised": r_marg,
                                "tau": tau, "pass": bool(ratio >= tau)}, n_terms=1)


@timed
def disparate_treatment(yhat, part: GroupPartition, strict: bool = False) -> MetricResult:
    """Largest deviation of a group's positive rate from the overall positive rate."""
    yhat = _hard(yhat)
    res = probe_metric("DP", yhat, np.zeros_like(yhat), part, "ext", strict)
    return MetricResult("dt", res.value, "DT", "ext", res.skipped_groups, res.flags,
                        res.detail, res.n_terms)


@timed
def conditional_statistical_parity(yhat, y, part: GroupPartition, strata,
                                   strict: bool = False) -> MetricResult:
    """Disparate treatment within each stratum of legitimate factors; worst stratum wins."""
    yhat, y, strata = _hard(yhat), np.asarray(y), np.asarray(strata)
    breakdown, flags = {}, []
    for s in np.unique(strata):
        rows = np.flatnonzero(strata == s)
        try:
            res = probe_metric("DP", yhat[rows], y[rows], part.subset(rows), "ext", strict)
        except EmptyCellError:
            flags.append(f"stratum_skipped:{s}")
            continue
        breakdown[str(s)] = res.value
    if not breakdown:
        raise EmptyCellError("csp: no stratum has 2 evaluable groups")
    return MetricResult("csp", max(breakdown.values()), "CSP", "ext", (), tuple(flags),
                        {"strata": breakdown}, n_terms=len(breakdown))


def absolute_loss(scores, y) -> np.ndarray:
    return np.abs(np.asarray(y, dtype=float) - np.asarray(scores, dtype=float))


@timed
def bounded_group_loss(losses, part: GroupPartition, xi: float) -> MetricResult:
    """Expected loss per group; passes iff every group stays at or below ``xi``.

    ``value`` is the largest group loss.
    """
    losses = np.asarray(losses, dtype=float)
    if losses.size and (losses.min() < 0 or losses.max() > 1):
        raise PreconditionError("bgl: per-row losses must lie in [0, 1]")
    per_group, skipped = {}, []
    for j, idx in enumerate(part.groups):
        if len(idx) == 0:
            skipped.append(j)
            continue
        per_group[j] = float(np.mean(losses[idx]))
    if not per_group:
        raise EmptyCellError("bgl: every group is empty")
    offending = [j for j, v in per_group.items() if v > xi]
    flags = ("skipped_empty_groups",) if skipped else ()
    return MetricResult("bgl", max(per_group.values()), "BGL", None, tuple(skipped), flags,
                        {"group_loss": per_group, "xi": xi, "pass": not offending,
                         "offending": offending}, n_terms=len(per_group))


@timed
def gamma_subgroup_fairness(yhat, y, part: GroupPartition) -> MetricResult:
    """False-positive subgroup fairness over every group.

    For group j: alpha = P(a=j, y=0), beta = |FPR - FPR_j|; the value is the
    largest alpha*beta, i.e. the smallest gamma the classifier satisfies.
    """
    yhat, y = _hard(yhat), np.asarray(y)
    neg = y == 0
    n_neg = int(np.count_nonzero(neg))
    if n_neg == 0:
        raise PreconditionError("gammasf: no y=0 rows")
    fpr = np.count_nonzero((yhat == 1) & neg) / n_neg
    n = len(y)
    alpha, beta, prod, skipped = {}, {}, {}, []
    for j, idx in enumerate(part.groups):
        neg_j = neg[idx]
        cnt = int(np.count_nonzero(neg_j))
        if cnt == 0:
            skipped.append(j)
            continue
        alpha[j] = cnt / n
        beta[j] = abs(fpr - np.count_nonzero((yhat[idx] == 1) & neg_j) / cnt)
        prod[j] = alpha[j] * beta[j]
    if not prod:
        raise EmptyCellError("gammasf: no group has y=0 rows")
    flags = ("skipped_empty_cells",) if skipped else ()
    return MetricResult("gammasf", max(prod.values()), "gammaSF", None, tuple(skipped), flags,
                        {"alpha": alpha, "beta": beta, "product": prod, "fpr": fpr},
                        n_terms=len(prod))


def group_error_rates(yhat, y, part: GroupPartition) -> tuple[dict[int, float], list[int]]:
    yhat, y = _hard(yhat), np.asarray(y)
    wrong = yhat != y
    rates, skipped = {}, []
    for j, idx in enumerate(part.groups):
        if len(idx) == 0:
            skipped.append(j)
            continue
        rates[j] = float(np.mean(wrong[idx]))
    return rates, skipped


@timed
def minimax_gap(candidates: Sequence, y, part: GroupPartition) -> MetricResult:
    """Max group error of each candidate and its distance to the best candidate.

    ``value`` is the gap of the first candidate (the model under audit).
    """
    if not candidates:
        raise PreconditionError("minimax_gap: need at least one candidate")
    max_err, per_group, skipped = [], [], set()
    for cand in candidates:
        rates, sk = group_error_rates(cand, y, part)
        if not rates:
            raise EmptyCellError("minimax_gap: every group is empty")
        skipped.update(sk)
        per_group.append(rates)
        max_err.append(max(rates.values()))
    best = min(max_err)
    gaps = [m - best for m in max_err]
    flags = ("skipped_empty_groups",) if skipped else ()
    return MetricResult("minimax_gap", gaps[0], "minimax", None, tuple(sorted(skipped)), flags,
                        {"max_group_error": max_err, "gap": gaps, "group_error": per_group},
                        n_terms=len(candidates))
