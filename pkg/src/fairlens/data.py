"""Dataset representation, manifest-driven CSV ingestion and group handling.

A manifest is a small JSON document naming the CSV file, which columns are
features, which are sensitive attributes (with their privileged value) and
which column carries the label.  Ingestion drops rows with missing cells,
one-hot encodes categorical features, min-max scales numeric ones and maps
each sensitive attribute onto integer codes ``0..n_values-1``.
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .errors import IngestError, PreconditionError, ValidationError

DEFAULT_MISSING = ("", "?", "NA", "NaN", "nan")
SUPER_ATTRIBUTE_CAP = 4096


@dataclass(frozen=True)
class SensitiveAttribute:
    """One sensitive attribute: its ordered category values and the privileged one."""

    name: str
    values: tuple[str, ...]
    privileged: str
    column: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(str(v) for v in self.values))
        object.__setattr__(self, "privileged", str(self.privileged))
        if len(set(self.values)) != len(self.values):
            raise PreconditionError(f"attribute {self.name!r}: duplicate values")
        if len(self.values) < 2:
            raise PreconditionError(f"attribute {self.name!r}: needs at least 2 values")
        if self.privileged not in self.values:
            raise PreconditionError(
                f"attribute {self.name!r}: privileged value {self.privileged!r} not in values"
            )

    @property
    def n_values(self) -> int:
        return len(self.values)

    @property
    def privileged_code(self) -> int:
        return self.values.index(self.privileged)


@dataclass(frozen=True)
class DatasetManifest:
    csv_path: Path
    feature_columns: tuple[str, ...]
    sensitive: tuple[SensitiveAttribute, ...]
    label_column: str
    positive_label: str
    expected_counts: dict[str, Any] | None = None
    categorical_columns: tuple[str, ...] | None = None
    missing_values: tuple[str, ...] = DEFAULT_MISSING
    one_hot: str = "full"
    stratum_column: str | None = None
    name: str = "dataset"

    def __post_init__(self):
        if not self.sensitive:
            raise IngestError("manifest needs at least one sensitive attribute")
        if self.one_hot not in ("full", "drop_first"):
            raise IngestError(f"unknown one_hot scheme {self.one_hot!r}")
        used = list(self.feature_columns) + [s.column or s.name for s in self.sensitive]
        used.append(self.label_column)
        if len(set(used)) != len(used):
            raise IngestError("manifest columns must be disjoint")

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any], base_dir: Path | None = None) -> "DatasetManifest":
        try:
            csv_path = Path(raw["csv_path"])
            if base_dir is not None and not csv_path.is_absolute():
                csv_path = base_dir / csv_path
            sensitive = tuple(
                SensitiveAttribute(
                    name=s["name"],
                    values=tuple(s["values"]),
                    privileged=s["privileged"],
                    column=s.get("column", s["name"]),
                )
                for s in raw["sensitive"]
            )
            cats = raw.get("categorical_columns")
            return cls(
                csv_path=csv_path,
                feature_columns=tuple(raw["feature_columns"]),
                sensitive=sensitive,
                label_column=raw["label_column"],
                positive_label=str(raw["positive_label"]),
                expected_counts=raw.get("expected_counts"),
                categorical_columns=tuple(cats) if cats is not None else None,
                missing_values=tuple(raw.get("missing_values", DEFAULT_MISSING)),
                one_hot=raw.get("one_hot", "full"),
                stratum_column=raw.get("stratum_column"),
                name=raw.get("name", csv_path.stem),
            )
        except KeyError as exc:
            raise IngestError(f"manifest is missing field {exc.args[0]!r}") from None

    @classmethod
    def load(cls, path: str | Path) -> "DatasetManifest":
        path = Path(path)
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
        return cls.from_dict(raw, base_dir=path.parent)


@dataclass(frozen=True, eq=False)
class Dataset:
    """Preprocessed features, integer-coded sensitive attributes and binary labels.

    ``features`` holds only the non-sensitive part, scaled to [0, 1].
    ``sensitive[:, i]`` holds codes into ``specs[i].values``.
    """

    features: np.ndarray
    sensitive: np.ndarray
    labels: np.ndarray
    specs: tuple[SensitiveAttribute, ...]
    feature_names: tuple[str, ...] = ()
    feature_sources: tuple[str, ...] = ()
    stratum: np.ndarray | None = None
    manifest: DatasetManifest | None = None
    flags: tuple[str, ...] = ()
    n_raw_features: int | None = None

    def __post_init__(self):
        features = np.array(self.features, dtype=float)
        if features.ndim == 1:
            features = features.reshape(-1, 1)
        sensitive = np.array(self.sensitive, dtype=np.int64)
        if sensitive.ndim == 1:
            sensitive = sensitive.reshape(-1, 1)
        labels = np.array(self.labels, dtype=np.int64)
        n = labels.shape[0]
        if features.shape[0] != n or sensitive.shape[0] != n:
            raise PreconditionError("features, sensitive and labels must have equal row counts")
        if sensitive.shape[1] != len(self.specs):
            raise PreconditionError("one spec is required per sensitive column")
        if not np.isin(labels, (0, 1)).all():
            raise PreconditionError("labels must be binary")
        for i, spec in enumerate(self.specs):
            col = sensitive[:, i]
            if n and (col.min() < 0 or col.max() >= spec.n_values):
                raise PreconditionError(f"attribute {spec.name!r} has codes outside its values")
        names = tuple(self.feature_names) or tuple(f"x{j}" for j in range(features.shape[1]))
        sources = tuple(self.feature_sources) or names
        for arr in (features, sensitive, labels):
            arr.setflags(write=False)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "sensitive", sensitive)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "feature_names", names)
        object.__setattr__(self, "feature_sources", sources)
        if self.stratum is not None:
            stratum = np.array(self.stratum)
            stratum.setflags(write=False)
            object.__setattr__(self, "stratum", stratum)

    @property
    def n(self) -> int:
        return int(self.labels.shape[0])

    @property
    def n_a(self) -> int:
        return len(self.specs)

    @property
    def n_prepared_features(self) -> int:
        # sensitive attributes stay as one coded column each
        return int(self.features.shape[1]) + self.n_a

    def privileged_counts(self) -> dict[str, int]:
        return {
            spec.name: int(np.count_nonzero(self.sensitive[:, i] == spec.privileged_code))
            for i, spec in enumerate(self.specs)
        }

    @cached_property
    def fingerprint(self) -> str:
        h = hashlib.blake2b(digest_size=8)
        h.update(json.dumps([self.feature_names, [s.name for s in self.specs],
                             [s.values for s in self.specs],
                             [s.privileged for s in self.specs]]).encode())
        for arr in (self.features.astype("<f8"), self.sensitive.astype("<i8"), self.labels.astype("<i8")):
            h.update(str(arr.shape).encode())
            h.update(np.ascontiguousarray(arr).tobytes())
        return h.hexdigest()

    def coded_sensitive(self, sensitive: np.ndarray | None = None) -> np.ndarray:
        """Sensitive codes scaled to [0, 1], one column per attribute."""
        s = self.sensitive if sensitive is None else np.asarray(sensitive)
        scale = np.array([max(spec.n_values - 1, 1) for spec in self.specs], dtype=float)
        return s.astype(float) / scale

    def design_matrix(self, sensitive: np.ndarray | None = None,
                      exclude: Iterable[str] = ()) -> np.ndarray:
        """Model input: scaled features followed by scaled sensitive codes.

        ``exclude`` drops every prepared column derived from the named raw
        columns (a feature source or a sensitive attribute name).
        """
        exclude = set(exclude)
        keep = [j for j, src in enumerate(self.feature_sources) if src not in exclude]
        parts = [self.features[:, keep]]
        coded = self.coded_sensitive(sensitive)
        keep_s = [i for i, spec in enumerate(self.specs) if spec.name not in exclude]
        parts.append(coded[:, keep_s])
        return np.hstack(parts)

    def subset(self, rows: np.ndarray) -> "Dataset":
        rows = np.asarray(rows)
        return Dataset(
            features=self.features[rows],
            sensitive=self.sensitive[rows],
            labels=self.labels[rows],
            specs=self.specs,
            feature_names=self.feature_names,
            feature_sources=self.feature_sources,
            stratum=None if self.stratum is None else self.stratum[rows],
            manifest=self.manifest,
            flags=self.flags,
            n_raw_features=self.n_raw_features,
        )

    def attribute_index(self, name_or_index: str | int) -> int:
        if isinstance(name_or_index, (int, np.integer)):
            if not 0 <= name_or_index < self.n_a:
                raise PreconditionError(f"attribute index {name_or_index} out of range")
            return int(name_or_index)
        for i, spec in enumerate(self.specs):
            if spec.name == name_or_index:
                return i
        raise PreconditionError(f"unknown sensitive attribute {name_or_index!r}")


# --------------------------------------------------------------------------
# preprocessing and ingestion


def _is_numeric(cells: Sequence[str]) -> bool:
    try:
        for c in cells:
            float(c)
    except ValueError:
        return False
    return True


def preprocess(columns: Mapping[str, Sequence[str]],
               categorical: Iterable[str] | None = None,
               one_hot: str = "full") -> tuple[np.ndarray, list[str], list[str], list[str]]:
    """Turn raw string columns into a [0, 1] feature matrix.

    Columns are visited in mapping order.  Categorical columns (declared, or
    any column that does not parse as numbers) become indicator columns in
    sorted category order; numeric columns are min-max scaled, with constant
    columns mapped to 0 and flagged.

    Returns ``(matrix, names, sources, flags)``.
    """
    declared = set(categorical) if categorical is not None else None
    blocks: list[np.ndarray] = []
    names: list[str] = []
    sources: list[str] = []
    flags: list[str] = []
    n = None
    for col, cells in columns.items():
        cells = list(cells)
        if n is None:
            n = len(cells)
        elif len(cells) != n:
            raise IngestError(f"column {col!r} has {len(cells)} rows, expected {n}")
        is_cat = (col in declared) if declared is not None else not _is_numeric(cells)
        if declared is not None and not is_cat and not _is_numeric(cells):
            is_cat = True
        if is_cat:
            cats = sorted(set(cells))
            if one_hot == "drop_first" and len(cats) > 1:
                cats = cats[1:]
            arr = np.asarray(cells)
            for c in cats:
                blocks.append((arr == c).astype(float)[:, None])
                names.append(f"{col}={c}")
                sources.append(col)
        else:
            vals = np.asarray([float(c) for c in cells], dtype=float)
            lo, hi = (vals.min(), vals.max()) if vals.size else (0.0, 0.0)
            if hi > lo:
                scaled = (vals - lo) / (hi - lo)
            else:
                scaled = np.zeros_like(vals)
                flags.append(f"constant_column:{col}")
            blocks.append(scaled[:, None])
            names.append(col)
            sources.append(col)
    if not blocks:
        return np.zeros((n or 0, 0)), names, sources, flags
    return np.hstack(blocks), names, sources, flags


def _read_csv(path: Path) -> tuple[list[str], list[list[str]]]:
    try:
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            rows = [[c.strip() for c in r] for r in reader if r]
    except FileNotFoundError:
        raise
    except (OSError, UnicodeDecodeError, csv.Error) as exc:
        raise IngestError(f"cannot read {path}: {exc}") from exc
    if header is None:
        raise IngestError("no rows")
    return [h.strip() for h in header], rows


def ingest(manifest: DatasetManifest) -> Dataset:
    """Read ``manifest.csv_path`` and build a validated Dataset.

    Raises FileNotFoundError when the CSV is absent and IngestError (or its
    subclass ValidationError for count mismatches) for everything else.
    """
    header, rows = _read_csv(manifest.csv_path)
    if not rows:
        raise IngestError("no rows")
    index = {h: i for i, h in enumerate(header)}
    needed = list(manifest.feature_columns) + [s.column or s.name for s in manifest.sensitive]
    needed.append(manifest.label_column)
    if manifest.stratum_column:
        needed.append(manifest.stratum_column)
    missing_cols = [c for c in needed if c not in index]
    if missing_cols:
        raise IngestError(f"missing column(s): {', '.join(missing_cols)}")

    missing = set(manifest.missing_values)
    pos = [index[c] for c in needed]
    kept = []
    for r_i, row in enumerate(rows):
        if len(row) != len(header):
            raise IngestError(f"row {r_i + 2} has {len(row)} cells, header has {len(header)}")
        if any(row[p] in missing for p in pos):
            continue
        kept.append(row)
    flags = []
    if len(kept) < len(rows):
        flags.append(f"rows_rejected_missing:{len(rows) - len(kept)}")
    if not kept:
        raise IngestError("no rows")

    def column(name):
        return [r[index[name]] for r in kept]

    feats, names, sources, pre_flags = preprocess(
        {c: column(c) for c in manifest.feature_columns},
        categorical=manifest.categorical_columns,
        one_hot=manifest.one_hot,
    )
    flags.extend(pre_flags)

    sens = np.empty((len(kept), len(manifest.sensitive)), dtype=np.int64)
    for i, spec in enumerate(manifest.sensitive):
        lookup = {v: k for k, v in enumerate(spec.values)}
        for r, cell in enumerate(column(spec.column or spec.name)):
            code = lookup.get(cell)
            if code is None:
                raise IngestError(f"unknown category code {cell!r} for attribute {spec.name!r}")
            sens[r, i] = code

    raw_labels = column(manifest.label_column)
    distinct = set(raw_labels)
    if len(distinct) > 2:
        raise IngestError(
            f"label not binary: column {manifest.label_column!r} has {len(distinct)} distinct values"
        )
    labels = np.array([c == manifest.positive_label for c in raw_labels], dtype=np.int64)

    stratum = None
    if manifest.stratum_column:
        stratum = np.asarray(column(manifest.stratum_column))

    ds = Dataset(
        features=feats, sensitive=sens, labels=labels, specs=manifest.sensitive,
        feature_names=tuple(names), feature_sources=tuple(sources), stratum=stratum,
        manifest=manifest, flags=tuple(flags),
        n_raw_features=len(manifest.feature_columns) + len(manifest.sensitive),
    )
    if manifest.expected_counts:
        mismatches = check_counts(ds, manifest.expected_counts)
        if mismatches:
            detail = "; ".join(f"{k}: expected {v['expected']}, got {v['actual']}"
                               for k, v in mismatches.items())
            raise ValidationError(f"count mismatch vs manifest: {detail}", mismatches)
    return ds


def check_counts(ds: Dataset, expected: Mapping[str, Any]) -> dict[str, dict[str, Any]]:
    """Compare a dataset against expected counts; return only the mismatching fields."""
    actual: dict[str, Any] = {
        "n": ds.n,
        "n_raw_features": ds.n_raw_features,
        "n_prep_features": ds.n_prepared_features,
    }
    for spec in ds.specs:
        actual[f"n_values.{spec.name}"] = spec.n_values
    for name, count in ds.privileged_counts().items():
        actual[f"privileged.{name}"] = count
    out = {}
    for key, want in expected.items():
        if key == "privileged" and isinstance(want, Mapping):
            for attr, cnt in want.items():
                got = actual.get(f"privileged.{attr}")
                if got != cnt:
                    out[f"privileged.{attr}"] = {"expected": cnt, "actual": got}
            continue
        if key == "n_values" and isinstance(want, Mapping):
            for attr, cnt in want.items():
                got = actual.get(f"n_values.{attr}")
                if got != cnt:
                    out[f"n_values.{attr}"] = {"expected": cnt, "actual": got}
            continue
        got = actual.get(key)
        if got != want:
            out[key] = {"expected": want, "actual": got}
    return out


# --------------------------------------------------------------------------
# groups


class GroupPartition:
    """Rows split by the values of one sensitive attribute.

    Per-value index lists are built on first access, one pass over the code
    column per value.
    """

    def __init__(self, codes: np.ndarray, n_values: int, privileged: int,
                 attribute: int = 0, name: str = ""):
        self.codes = np.asarray(codes)
        self.n_values = int(n_values)
        self.privileged = int(privileged)
        self.attribute = attribute
        self.name = name
        if not 0 <= self.privileged < self.n_values:
            raise PreconditionError("privileged code out of range")

    @property
    def n(self) -> int:
        return int(self.codes.shape[0])

    @cached_property
    def groups(self) -> list[np.ndarray]:
        return [np.flatnonzero(self.codes == j) for j in range(self.n_values)]

    @cached_property
    def complements(self) -> list[np.ndarray]:
        return [np.flatnonzero(self.codes != j) for j in range(self.n_values)]

    @property
    def sizes(self) -> list[int]:
        return [len(g) for g in self.groups]

    @property
    def empty(self) -> list[int]:
        return [j for j, g in enumerate(self.groups) if len(g) == 0]

    def privileged_mask(self) -> np.ndarray:
        return self.codes == self.privileged

    def subset(self, rows: np.ndarray) -> "GroupPartition":
        return GroupPartition(self.codes[rows], self.n_values, self.privileged,
                              self.attribute, self.name)

    def binarised(self) -> "GroupPartition":
        """Privileged vs everyone else, privileged coded 1."""
        return GroupPartition(self.privileged_mask().astype(np.int64), 2, 1,
                              self.attribute, f"{self.name}:bin")


def partition(ds: Dataset, i: int | str = 0) -> GroupPartition:
    i = ds.attribute_index(i)
    spec = ds.specs[i]
    return GroupPartition(ds.sensitive[:, i], spec.n_values, spec.privileged_code, i, spec.name)


def degenerate_super_attribute(ds: Dataset, indices: Sequence[int | str],
                               cap: int = SUPER_ATTRIBUTE_CAP) -> tuple[SensitiveAttribute, np.ndarray]:
    """Cartesian-product attribute over several sensitive attributes.

    The new code is the mixed-radix number of the input codes, first
    attribute most significant.
    """
    idx = [ds.attribute_index(i) for i in indices]
    if len(idx) < 2:
        raise PreconditionError("a super attribute needs at least two attributes")
    sizes = [ds.specs[i].n_values for i in idx]
    total = math.prod(sizes)
    if total > cap:
        raise PreconditionError(
            f"super attribute would have {total} values (cap {cap}); "
            "the cost of group traversal grows with the product of value counts"
        )
    codes = np.zeros(ds.n, dtype=np.int64)
    for i, k in zip(idx, sizes):
        codes = codes * k + ds.sensitive[:, i]
    value_lists = [ds.specs[i].values for i in idx]
    values = [""]
    for vl in value_lists:
        values = [f"{a}&{b}" if a else b for a in values for b in vl]
    privileged = "&".join(ds.specs[i].privileged for i in idx)
    spec = SensitiveAttribute(
        name="&".join(ds.specs[i].name for i in idx), values=tuple(values),
        privileged=privileged, column=None,
    )
    return spec, codes


def super_partition(ds: Dataset, indices: Sequence[int | str] | None = None,
                    cap: int = SUPER_ATTRIBUTE_CAP) -> GroupPartition:
    indices = list(range(ds.n_a)) if indices is None else indices
    if len(indices) == 1:
        return partition(ds, indices[0])
    spec, codes = degenerate_super_attribute(ds, indices, cap)
    return GroupPartition(codes, spec.n_values, spec.privileged_code, -1, spec.name)


# --------------------------------------------------------------------------
# perturbation


@dataclass(frozen=True)
class Perturbation:
    sensitive: np.ndarray
    changed: np.ndarray  # rows whose sensitive values were altered
    unperturbable: tuple[str, ...] = field(default=())


def perturb(ds: Dataset, seed: int, policy: str = "flip-all", rate: float = 1.0) -> Perturbation:
    """Replace sensitive values with different ones.

    Binary attributes are flipped; attributes with more values resample
    uniformly among the other values.  ``policy="flip-all"`` perturbs every
    row, ``policy="rate"`` perturbs each row with probability ``rate``.
    Attributes with fewer than two observed values are left alone and named
    in ``unperturbable``.
    """
    if policy not in ("flip-all", "rate"):
        raise PreconditionError(f"unknown perturbation policy {policy!r}")
    rng = np.random.default_rng(seed)
    n = ds.n
    if policy == "rate":
        if not 0.0 <= rate <= 1.0:
            raise PreconditionError("perturbation rate must lie in [0, 1]")
        rows = rng.random(n) < rate
    else:
        rows = np.ones(n, dtype=bool)
    out = ds.sensitive.copy()
    bad = []
    for i, spec in enumerate(ds.specs):
        col = ds.sensitive[:, i]
        if np.unique(col).size < 2:
            bad.append(spec.name)
            continue
        k = spec.n_values
        if k == 2:
            offset = np.ones(n, dtype=np.int64)
        else:
            offset = rng.integers(1, k, size=n)
        out[:, i] = np.where(rows, (col + offset) % k, col)
    changed = (out != ds.sensitive).any(axis=1)
    return Perturbation(out, changed, tuple(bad))


# --------------------------------------------------------------------------
# predictions


@dataclass(frozen=True, eq=False)
class PredictionSet:
    """Hard predictions with optional scores, aligned row-for-row with a Dataset."""

    hard: np.ndarray
    scores: np.ndarray | None = None
    source: str = "external"
    seed: int | None = None
    threshold: float = 0.5
    model: Any = None  # set when the source can re-predict (built-in learners)

    def __post_init__(self):
        hard = np.array(self.hard, dtype=np.int64)
        if not np.isin(hard, (0, 1)).all():
            raise PreconditionError("hard predictions must be binary")
        hard.setflags(write=False)
        object.__setattr__(self, "hard", hard)
        if self.scores is not None:
            scores = np.array(self.scores, dtype=float)
            if scores.shape != hard.shape:
                raise PreconditionError("scores and hard predictions differ in length")
            if scores.size and (scores.min() < 0 or scores.max() > 1):
                raise PreconditionError("scores must lie in [0, 1]")
            if not np.array_equal(hard, (scores >= self.threshold).astype(np.int64)):
                raise PreconditionError("hard predictions disagree with thresholded scores")
            scores.setflags(write=False)
            object.__setattr__(self, "scores", scores)

    @classmethod
    def from_scores(cls, scores, threshold: float = 0.5, **kw) -> "PredictionSet":
        scores = np.asarray(scores, dtype=float)
        return cls(hard=(scores >= threshold).astype(np.int64), scores=scores,
                   threshold=threshold, **kw)

    def __len__(self) -> int:
        return int(self.hard.shape[0])

    @property
    def has_scores(self) -> bool:
        return self.scores is not None

    def subset(self, rows) -> "PredictionSet":
        return PredictionSet(self.hard[rows], None if self.scores is None else self.scores[rows],
                             self.source, self.seed, self.threshold)


def load_predictions(path: str | Path, n: int, threshold: float = 0.5) -> PredictionSet:
    """Read an external prediction file with columns ``row_id, hard[, score]``.

    The file must name every dataset row exactly once.
    """
    path = Path(path)
    header, rows = _read_csv(path)
    cols = {h: i for i, h in enumerate(header)}
    if "row_id" not in cols or "hard" not in cols:
        raise IngestError(f"{path}: prediction file needs row_id and hard columns")
    has_score = "score" in cols and all(r[cols["score"]] != "" for r in rows)
    hard = np.full(n, -1, dtype=np.int64)
    scores = np.full(n, np.nan)
    seen = set()
    for r in rows:
        try:
            rid = int(r[cols["row_id"]])
            h = int(r[cols["hard"]])
        except ValueError as exc:
            raise IngestError(f"{path}: bad prediction row {r}") from exc
        if rid in seen or not 0 <= rid < n:
            raise IngestError(f"{path}: row_id {rid} duplicated or out of range")
        seen.add(rid)
        hard[rid] = h
        if has_score:
            scores[rid] = float(r[cols["score"]])
    if len(seen) != n:
        raise IngestError(f"{path}: covers {len(seen)} rows, dataset has {n}")
    try:
        return PredictionSet(hard, scores if has_score else None, source=f"file:{path.name}",
                             threshold=threshold)
    except PreconditionError as exc:
        raise IngestError(f"{path}: {exc}") from exc
