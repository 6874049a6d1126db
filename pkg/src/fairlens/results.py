from __future__ import annotations

import functools
import math
import time
from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np


@dataclass(frozen=True)
class MetricResult:
    """A named scalar plus everything needed to interpret it."""

    name: str
    value: float
    kind: str | None = None
    form: str | None = None
    skipped_groups: tuple[int, ...] = ()
    flags: tuple[str, ...] = ()
    detail: dict[str, Any] = field(default_factory=dict)
    n_terms: int = 0
    wall_time_ns: int = 0

    def to_dict(self, timing: bool = False) -> dict[str, Any]:
        out = {
            "name": self.name,
            "value": _jsonable(self.value),
            "kind": self.kind,
            "form": self.form,
            "skipped_groups": list(self.skipped_groups),
            "flags": list(self.flags),
            "n_terms": self.n_terms,
            "detail": _jsonable(self.detail),
        }
        if timing:
            out["wall_time_ns"] = self.wall_time_ns
        return out


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else None
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def timed(fn):
    """Stamp the monotonic wall time of the call onto the returned MetricResult."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        t0 = time.perf_counter_ns()
        res = fn(*args, **kwargs)
        return replace(res, wall_time_ns=time.perf_counter_ns() - t0)

    return wrapper


def capped_mean(terms: list[float] | np.ndarray, cap: float) -> float:
    """Correctly rounded mean, never above ``cap`` (the max of the same terms).

    Summation rounding can push a mean of identical values one ulp above them.
    """
    terms = list(map(float, terms))
    return min(math.fsum(terms) / len(terms), cap)
