"""Individual fairness: benefit inequality indices, discriminative risk, Lipschitz audits."""

from __future__ import annotations

import math

import numpy as np
from scipy.spatial.distance import cdist, pdist

from .data import Dataset, PredictionSet, perturb
from .errors import NotApplicableError, PreconditionError
from .results import MetricResult, timed

FULL_PAIR_LIMIT = 2000


def benefits(yhat, y) -> np.ndarray:
    """b_i = yhat_i - y_i + 1, so 0 for a false negative, 2 for a false positive."""
    yhat = yhat.hard if isinstance(yhat, PredictionSet) else np.asarray(yhat)
    return yhat.astype(float) - np.asarray(y, dtype=float) + 1.0


def gei_from_benefits(b, alpha: float = 2.0) -> float:
    b = np.asarray(b, dtype=float)
    if alpha in (0, 1):
        raise PreconditionError("GEI is undefined for alpha in {0, 1}; use the Theil index for alpha=1")
    mu = b.mean()
    if mu <= 0:
        raise PreconditionError("GEI: mean benefit is 0")
    return float(np.sum((b / mu) ** alpha - 1.0) / (len(b) * alpha * (alpha - 1.0)))


def theil_from_benefits(b) -> float:
    b = np.asarray(b, dtype=float)
    mu = b.mean()
    if mu <= 0:
        raise PreconditionError("Theil: mean benefit is 0")
    r = b / mu
    # 0 * ln 0 = 0
    terms = np.zeros_like(r)
    pos = r > 0
    terms[pos] = r[pos] * np.log(r[pos])
    return float(terms.sum() / len(b))


@timed
def general_entropy_index(yhat, y, alpha: float = 2.0) -> MetricResult:
    return MetricResult(f"gei({alpha:g})", gei_from_benefits(benefits(yhat, y), alpha),
                        "GEI", detail={"alpha": alpha}, n_terms=len(np.asarray(y)))


@timed
def theil_index(yhat, y) -> MetricResult:
    return MetricResult("theil", theil_from_benefits(benefits(yhat, y)), "Theil",
                        n_terms=len(np.asarray(y)))


def _model_of(model):
    if isinstance(model, PredictionSet):
        if model.model is None:
            raise NotApplicableError(
                f"dr: predictions from {model.source!r} cannot be recomputed on perturbed inputs"
            )
        return model.model
    if model is None or not hasattr(model, "predict"):
        raise NotApplicableError("dr: needs a model that can re-predict")
    return model


def draw_seeds(seed: int, draws: int) -> list[int]:
    if draws == 1:
        return [seed]
    return [int(s.generate_state(1)[0]) for s in np.random.SeedSequence(seed).spawn(draws)]


@timed
def discriminative_risk(model, ds: Dataset, seed: int = 0, policy: str = "flip-all",
                        rate: float = 1.0, draws: int = 1) -> MetricResult:
    """Share of rows whose prediction changes when only sensitive values are perturbed.

    With ``draws > 1`` the estimate is averaged over independent perturbations.
    """
    m = _model_of(model)
    base = np.asarray(m.predict(ds))
    values = []
    for s in draw_seeds(seed, draws):
        pert = perturb(ds, s, policy, rate)
        if pert.unperturbable:
            raise PreconditionError(
                f"dr: attribute(s) {', '.join(pert.unperturbable)} have a single observed value"
            )
        values.append(np.count_nonzero(base != np.asarray(m.predict(ds, pert.sensitive))) / ds.n)
    value = values[0] if draws == 1 else math.fsum(values) / draws
    return MetricResult("dr", value, "DR", detail={"seed": seed, "policy": policy,
                                                  "draws": draws, "per_draw": values},
                        n_terms=ds.n * draws)


def _pair_sample(n: int, m: int, rng) -> tuple[np.ndarray, np.ndarray]:
    i = rng.integers(0, n, size=m)
    j = rng.integers(0, n - 1, size=m)
    j = j + (j >= i)
    return i, j


@timed
def lipschitz_audit(scores, features, lam: float | None = None, eps: float | None = None,
                    delta: float | None = None, max_pairs: int | None = None, seed: int = 0,
                    metric: str = "euclidean") -> MetricResult:
    """Empirical Lipschitz constant of ``scores`` with respect to feature distance.

    All pairs are enumerated when n <= 2000 and ``max_pairs`` does not ask for
    fewer; otherwise ``max_pairs`` (default 200000) random pairs are drawn.
    Pairs at feature distance 0 with different scores are hard violations.
    This is a diagnostic: ``value`` is the largest observed ratio.
    """
    scores = np.asarray(scores, dtype=float)
    X = np.asarray(features, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n = len(scores)
    if n < 2:
        raise PreconditionError("lipschitz: need at least 2 rows")
    total = n * (n - 1) // 2
    full = (max_pairs is None and n <= FULL_PAIR_LIMIT) or (max_pairs is not None and max_pairs >= total)
    if full:
        dx = pdist(X, metric=metric)
        dy = pdist(scores[:, None], metric="cityblock")
    else:
        rng = np.random.default_rng(seed)
        i, j = _pair_sample(n, max_pairs or 200_000, rng)
        if metric == "euclidean":
            dx = np.sqrt(((X[i] - X[j]) ** 2).sum(axis=1))
        else:
            dx = np.array([cdist(X[a:a + 1], X[b:b + 1], metric=metric)[0, 0]
                           for a, b in zip(i, j)])
        dy = np.abs(scores[i] - scores[j])
    hard = (dx == 0) & (dy > 0)
    soft = dx > 0
    ratios = np.zeros_like(dx)
    ratios[soft] = dy[soft] / dx[soft]
    constant = float(ratios.max()) if soft.any() else 0.0
    detail = {"pairs": int(len(dx)), "exhaustive": bool(full), "hard_violations": int(hard.sum())}
    if eps is not None:
        rate = float(np.count_nonzero(hard | (soft & (ratios >= eps))) / len(dx))
        detail["violation_rate"] = rate
        if delta is not None:
            detail["satisfies_probabilistic"] = rate <= delta
    if lam is not None:
        detail["lambda"] = lam
        detail["lambda_violations"] = int(np.count_nonzero(hard | (dy > lam * dx)))
    flags = ("hard_violations",) if hard.any() else ()
    return MetricResult("lipschitz.constant", constant, "Lipschitz", flags=flags,
                        detail=detail, n_terms=int(len(dx)))
