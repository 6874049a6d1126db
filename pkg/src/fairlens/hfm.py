"""Harmonic fairness via manifold (HFM).

Each row becomes a point ``(x, w * outcome)`` where ``x`` are the scaled
non-sensitive features and ``outcome`` is either the label or the
prediction.  For a group ``D_j`` and its complement, the directed max-min
distance ``max_{p in D_j} min_{q not in D_j} d(p, q)`` measures how far the
group sits from everyone else.  HFM compares that separation under
predictions (g_f) against the separation under labels (g_y):

* ``prev``: binary attribute, symmetric (Hausdorff) distance, g_f/g_y - 1
* ``max``:  worst group, worst attribute, ln(g_f/g_y)
* ``avg``:  mean nearest-other-group distance over all rows, averaged over
  attributes, ln(g_f/g_y)

Exact evaluation costs O(n^2) distance computations per attribute.
``hfm_approx`` evaluates only ``budget`` random anchor points per group;
it is our own anchor-subsampling scheme, not a published algorithm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.spatial.distance import cdist

from .data import Dataset, PredictionSet
from .errors import PreconditionError

BLOCK_ENTRIES = 1 << 22


@dataclass(frozen=True)
class HfmResult:
    version: str
    value: float
    g_f: float
    g_y: float
    exact: bool = True
    budget: int | None = None

    @property
    def name(self) -> str:
        return f"hfm.{self.version}"


def augment(features, outcome, weight: float = 1.0) -> np.ndarray:
    X = np.asarray(features, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    return np.hstack([X, weight * np.asarray(outcome, dtype=float)[:, None]])


def _nearest(X, A_idx, B_idx, outcomes, weight) -> list[np.ndarray]:
    """For each row in A_idx, distance to its nearest row in B_idx, once per outcome vector.

    The feature part of the squared distance is shared by all outcome vectors.
    """
    out = [np.empty(len(A_idx)) for _ in outcomes]
    if len(A_idx) == 0:
        return out
    XB = X[B_idx]
    oB = [o[B_idx] for o in outcomes]
    step = max(1, BLOCK_ENTRIES // max(len(B_idx), 1))
    w2 = weight * weight
    for start in range(0, len(A_idx), step):
        blk = A_idx[start:start + step]
        d2x = cdist(X[blk], XB, "sqeuclidean")
        for k, o in enumerate(outcomes):
            diff = o[blk][:, None] - oB[k][None, :]
            out[k][start:start + step] = np.sqrt((d2x + w2 * diff * diff).min(axis=1))
    return out


def directed_maxmin(A, B) -> float:
    """max over points of A of the distance to the nearest point of B."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.ndim == 1:
        A = A[:, None]
    if B.ndim == 1:
        B = B[:, None]
    if len(A) == 0 or len(B) == 0:
        raise PreconditionError("max-min distance needs two nonempty point sets")
    best = 0.0
    step = max(1, BLOCK_ENTRIES // len(B))
    for start in range(0, len(A), step):
        best = max(best, float(cdist(A[start:start + step], B).min(axis=1).max()))
    return best


def bidirectional_maxmin(A, B) -> float:
    """Hausdorff distance: the larger of the two directed max-min distances."""
    return max(directed_maxmin(A, B), directed_maxmin(B, A))


def _hard(yhat):
    return yhat.hard if isinstance(yhat, PredictionSet) else np.asarray(yhat)


def _anchors(idx: np.ndarray, budget: int | None, seed: int, attr: int, group: int) -> np.ndarray:
    if budget is None:
        return idx
    if budget < 1:
        raise PreconditionError("approximation budget must be at least 1")
    # one generator per (attribute, group): the order is fixed by the seed,
    # so a larger budget always extends a smaller one
    order = np.random.default_rng([seed, attr + 1, group]).permutation(len(idx))
    if budget >= len(idx):
        return idx
    return idx[np.sort(order[:budget])]


def _attribute_terms(X, codes, n_values, f, y, weight, budget, seed, attr):
    """(max_f, max_y, avg_f, avg_y) for one attribute."""
    n = len(codes)
    max_f = max_y = 0.0
    sum_f: list[float] = []
    sum_y: list[float] = []
    for j in range(n_values):
        members = np.flatnonzero(codes == j)
        if len(members) == 0:
            continue
        others = np.flatnonzero(codes != j)
        if len(others) == 0:
            raise PreconditionError(f"attribute {attr}: every row is in group {j}, no complement")
        anchors = _anchors(members, budget, seed, attr, j)
        nf, ny = _nearest(X, anchors, others, (f, y), weight)
        max_f = max(max_f, float(nf.max()))
        max_y = max(max_y, float(ny.max()))
        if len(anchors) == len(members):
            sum_f.append(math.fsum(nf))
            sum_y.append(math.fsum(ny))
        else:
            sum_f.append(len(members) * math.fsum(nf) / len(anchors))
            sum_y.append(len(members) * math.fsum(ny) / len(anchors))
    return max_f, max_y, math.fsum(sum_f) / n, math.fsum(sum_y) / n


def _check_outcomes(ds: Dataset, yhat):
    f = _hard(yhat).astype(float)
    if f.shape[0] != ds.n:
        raise PreconditionError("predictions and dataset differ in length")
    return f, ds.labels.astype(float)


def _ratio(version, g_f, g_y, exact, budget, what):
    if g_y == 0:
        raise PreconditionError(
            f"hfm.{version}: label-side distance is 0 ({what} coincide in augmented space)"
        )
    if version == "prev":
        value = g_f / g_y - 1.0
    else:
        if g_f == 0:
            raise PreconditionError(f"hfm.{version}: prediction-side distance is 0, log undefined")
        value = math.log(g_f / g_y)
    return HfmResult(version, value, g_f, g_y, exact, budget)


def _prev(ds, yhat, attribute, weight, budget, seed):
    i = ds.attribute_index(attribute)
    spec = ds.specs[i]
    if spec.n_values != 2:
        raise PreconditionError(
            f"hfm.prev needs a two-valued attribute; {spec.name!r} has {spec.n_values} values"
        )
    f, y = _check_outcomes(ds, yhat)
    codes = ds.sensitive[:, i]
    priv = codes == spec.privileged_code
    D1, D1c = np.flatnonzero(priv), np.flatnonzero(~priv)
    if len(D1) == 0 or len(D1c) == 0:
        raise PreconditionError(f"hfm.prev: one side of {spec.name!r} is empty")
    X = ds.features
    a_f, a_y = _nearest(X, _anchors(D1, budget, seed, i, 1), D1c, (f, y), weight)
    b_f, b_y = _nearest(X, _anchors(D1c, budget, seed, i, 0), D1, (f, y), weight)
    g_f = max(float(a_f.max()), float(b_f.max()))
    g_y = max(float(a_y.max()), float(b_y.max()))
    return _ratio("prev", g_f, g_y, budget is None, budget, f"groups of {spec.name!r}")


def _multi(ds, yhat, attributes, weight, budget, seed):
    attrs = [ds.attribute_index(a) for a in (range(ds.n_a) if attributes is None else attributes)]
    if not attrs:
        raise PreconditionError("hfm needs at least one attribute")
    f, y = _check_outcomes(ds, yhat)
    terms = [
        _attribute_terms(ds.features, ds.sensitive[:, i], ds.specs[i].n_values, f, y,
                         weight, budget, seed, i)
        for i in attrs
    ]
    gmax_f = max(t[0] for t in terms)
    gmax_y = max(t[1] for t in terms)
    gavg_f = math.fsum(t[2] for t in terms) / len(terms)
    gavg_y = math.fsum(t[3] for t in terms) / len(terms)
    return gmax_f, gmax_y, gavg_f, gavg_y


def hfm_prev(ds: Dataset, yhat, attribute: int | str = 0, weight: float = 1.0) -> HfmResult:
    return _prev(ds, yhat, attribute, weight, None, 0)


def hfm_max(ds: Dataset, yhat, attributes: Sequence[int | str] | None = None,
            weight: float = 1.0) -> HfmResult:
    gf, gy, _, _ = _multi(ds, yhat, attributes, weight, None, 0)
    return _ratio("max", gf, gy, True, None, "groups")


def hfm_avg(ds: Dataset, yhat, attributes: Sequence[int | str] | None = None,
            weight: float = 1.0) -> HfmResult:
    _, _, gf, gy = _multi(ds, yhat, attributes, weight, None, 0)
    return _ratio("avg", gf, gy, True, None, "groups")


def hfm_all(ds: Dataset, yhat, attributes=None, weight: float = 1.0,
            budget: int | None = None, seed: int = 0) -> dict[str, HfmResult]:
    """max and avg versions from a single distance pass."""
    gmf, gmy, gaf, gay = _multi(ds, yhat, attributes, weight, budget, seed)
    exact = budget is None
    return {"max": _ratio("max", gmf, gmy, exact, budget, "groups"),
            "avg": _ratio("avg", gaf, gay, exact, budget, "groups")}


def hfm_approx(ds: Dataset, yhat, attributes=None, version: str = "max", budget: int = 64,
               seed: int = 0, weight: float = 1.0) -> HfmResult:
    """Anchor-subsampled HFM: ``budget`` seeded anchors per group and direction.

    Nearest-neighbour minima still run over the full complement, so max
    terms can only grow as the budget grows, and reach the exact value once
    the budget covers every group.
    """
    if budget is None or budget < 1:
        raise PreconditionError("approximation budget must be at least 1")
    if version == "prev":
        attribute = 0 if attributes is None else (
            attributes if isinstance(attributes, (int, str)) else attributes[0])
        res = _prev(ds, yhat, attribute, weight, budget, seed)
    elif version in ("max", "avg"):
        res = hfm_all(ds, yhat, attributes, weight, budget, seed)[version]
    else:
        raise PreconditionError(f"unknown hfm version {version!r}")
    return HfmResult(res.version, res.value, res.g_f, res.g_y, False, budget)
