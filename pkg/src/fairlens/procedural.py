"""Procedural fairness from member judgments about which features are fair to use.

Judgments come as three member-by-feature 0/1 tables:

* ``apr``  - fair to use with no knowledge of the effect on outcomes
* ``acc``  - fair to use if it increases accuracy
* ``disp`` - fair to use even if it increases disparity

Each measure is the fraction of members who approve every feature in use.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .errors import IngestError, PreconditionError

SUFFIXES = {"apr": ".apr.csv", "acc": ".acc.csv", "disp": ".disp.csv"}


@dataclass(frozen=True)
class JudgmentMatrix:
    members: tuple[str, ...]
    features: tuple[str, ...]
    apr: np.ndarray
    acc: np.ndarray
    disp: np.ndarray

    def __post_init__(self):
        shape = (len(self.members), len(self.features))
        for name in ("apr", "acc", "disp"):
            arr = np.array(getattr(self, name), dtype=bool)
            if arr.shape != shape:
                raise PreconditionError(f"judgment table {name!r} has shape {arr.shape}, expected {shape}")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if not self.members:
            raise PreconditionError("judgments need at least one member")

    def _col(self, table: str, feature: str) -> np.ndarray:
        try:
            k = self.features.index(feature)
        except ValueError:
            raise PreconditionError(f"unknown feature {feature!r}") from None
        return getattr(self, table)[:, k]

    @classmethod
    def from_sets(cls, members, features, apr: Mapping[str, Iterable[str]],
                  acc: Mapping[str, Iterable[str]] | None = None,
                  disp: Mapping[str, Iterable[str]] | None = None) -> "JudgmentMatrix":
        """Build from ``feature -> set of approving members`` mappings."""
        members, features = tuple(members), tuple(features)

        def table(m):
            m = m or {}
            return np.array([[mem in set(m.get(f, ())) for f in features] for mem in members],
                            dtype=bool)

        return cls(members, features, table(apr), table(acc), table(disp))

    @classmethod
    def load(cls, prefix: str | Path) -> "JudgmentMatrix":
        """Read ``<prefix>.apr.csv``, ``.acc.csv`` and ``.disp.csv``."""
        tables, members, features = {}, None, None
        for key, suffix in SUFFIXES.items():
            path = Path(f"{prefix}{suffix}")
            with open(path, encoding="utf-8", newline="") as fh:
                rows = [r for r in csv.reader(fh) if r]
            if not rows:
                raise IngestError(f"{path}: empty judgment table")
            head, body = [h.strip() for h in rows[0][1:]], rows[1:]
            mem = [r[0].strip() for r in body]
            if features is None:
                features, members = head, mem
            elif head != features or mem != members:
                raise IngestError(f"{path}: members or features differ from {SUFFIXES['apr']}")
            try:
                vals = [[int(c) for c in r[1:]] for r in body]
            except ValueError as exc:
                raise IngestError(f"{path}: cells must be 0 or 1") from exc
            arr = np.array(vals)
            if not np.isin(arr, (0, 1)).all():
                raise IngestError(f"{path}: cells must be 0 or 1")
            tables[key] = arr.astype(bool)
        return cls(tuple(members), tuple(features), tables["apr"], tables["acc"], tables["disp"])


def _fraction(j: JudgmentMatrix, sets: list[np.ndarray]) -> float:
    approve = np.ones(len(j.members), dtype=bool)
    for s in sets:
        approve &= s
    return np.count_nonzero(approve) / len(j.members)


def pf_apriori(j: JudgmentMatrix, used: Iterable[str]) -> float:
    return _fraction(j, [j._col("apr", s) for s in used])


def _need(values: Mapping[str, float], s: str, what: str) -> float:
    if s not in values:
        raise PreconditionError(f"missing ablation {what} for feature {s!r}")
    return values[s]


def pf_accuracy(j: JudgmentMatrix, used: Iterable[str], acc_full: float,
                acc_without: Mapping[str, float]) -> float:
    """A feature that improves accuracy also counts the members who accept it on those grounds."""
    sets = []
    for s in used:
        if acc_full <= _need(acc_without, s, "accuracy"):
            sets.append(j._col("apr", s))
        else:
            sets.append(j._col("apr", s) | j._col("acc", s))
    return _fraction(j, sets)


def pf_disparity(j: JudgmentMatrix, used: Iterable[str], disp_full: float,
                 disp_without: Mapping[str, float]) -> float:
    """A feature that increases disparity only counts members who accept it regardless."""
    sets = []
    for s in used:
        if disp_full > _need(disp_without, s, "disparity"):
            sets.append(j._col("disp", s))
        else:
            sets.append(j._col("apr", s))
    return _fraction(j, sets)
