import json

import numpy as np
import pytest

from fairlens.data import (Dataset, DatasetManifest, GroupPartition, PredictionSet,
                           SensitiveAttribute, check_counts, degenerate_super_attribute, ingest,
                           load_predictions, partition, perturb, preprocess, super_partition)
from fairlens.errors import IngestError, PreconditionError, ValidationError

from conftest import make_dataset


def write_csv(path, header, rows):
    path.write_text("\n".join([",".join(header)] + [",".join(map(str, r)) for r in rows]) + "\n")


def manifest_dict(csv_name="d.csv", **extra):
    raw = {
        "csv_path": csv_name,
        "feature_columns": ["num", "color"],
        "sensitive": [{"name": "sex", "values": ["M", "F"], "privileged": "M"},
                      {"name": "race", "values": ["w", "b", "o"], "privileged": "w"}],
        "label_column": "y",
        "positive_label": "yes",
    }
    raw.update(extra)
    return raw


@pytest.fixture
def toy(tmp_path):
    rows = [
        (2, "red", "M", "w", "yes"),
        (4, "blue", "F", "b", "no"),
        (6, "red", "F", "o", "yes"),
        (8, "?", "M", "w", "no"),
        (4, "blue", "M", "b", "no"),
    ]
    write_csv(tmp_path / "d.csv", ["num", "color", "sex", "race", "y"], rows)
    return tmp_path


def load(tmp_path, **extra):
    (tmp_path / "m.json").write_text(json.dumps(manifest_dict(**extra)))
    return DatasetManifest.load(tmp_path / "m.json")


def test_preprocess_minmax_and_onehot():
    X, names, sources, flags = preprocess({"n": ["2", "4", "6"], "c": ["red", "blue", "red"]})
    assert X[:, 0].tolist() == [0.0, 0.5, 1.0]
    assert names == ["n", "c=blue", "c=red"]
    assert sources == ["n", "c", "c"]
    assert X[:, 1:].tolist() == [[0, 1], [1, 0], [0, 1]]
    assert flags == []


def test_preprocess_constant_column_flagged():
    X, _, _, flags = preprocess({"n": ["3", "3"]})
    assert X[:, 0].tolist() == [0.0, 0.0]
    assert flags == ["constant_column:n"]


def test_preprocess_drop_first():
    X, names, _, _ = preprocess({"c": ["a", "b", "c"]}, one_hot="drop_first")
    assert names == ["c=b", "c=c"]


def test_ingest_toy(toy):
    ds = ingest(load(toy))
    assert ds.n == 4
    assert "rows_rejected_missing:1" in ds.flags
    assert ds.features.min() >= 0 and ds.features.max() <= 1
    assert ds.sensitive[:, 0].tolist() == [0, 1, 1, 0]
    assert ds.sensitive[:, 1].tolist() == [0, 1, 2, 1]
    assert ds.labels.tolist() == [1, 0, 1, 0]
    # num + color={blue,red} + one coded column per sensitive attribute
    assert ds.n_prepared_features == 5
    assert ds.n_raw_features == 4
    assert ds.privileged_counts() == {"sex": 2, "race": 1}


def test_ingest_is_deterministic(toy):
    assert ingest(load(toy)).fingerprint == ingest(load(toy)).fingerprint


def test_ingest_count_validation(toy):
    ok = load(toy, expected_counts={"n": 4, "privileged": {"race": 1}, "n_values": {"race": 3}})
    ingest(ok)
    bad = load(toy, expected_counts={"n": 5, "privileged": {"sex": 3}})
    with pytest.raises(ValidationError) as err:
        ingest(bad)
    assert set(err.value.mismatches) == {"n", "privileged.sex"}
    assert err.value.mismatches["n"] == {"expected": 5, "actual": 4}


def test_ingest_errors(tmp_path):
    write_csv(tmp_path / "d.csv", ["num", "color", "sex", "race", "y"], [(1, "r", "M", "zz", "yes")])
    with pytest.raises(IngestError, match="unknown category"):
        ingest(load(tmp_path))
    write_csv(tmp_path / "d.csv", ["num", "sex", "race", "y"], [(1, "M", "w", "yes")])
    with pytest.raises(IngestError, match="missing column"):
        ingest(load(tmp_path))
    write_csv(tmp_path / "d.csv", ["num", "color", "sex", "race", "y"],
              [(1, "r", "M", "w", "a"), (1, "r", "M", "w", "b"), (1, "r", "M", "w", "c")])
    with pytest.raises(IngestError, match="label not binary"):
        ingest(load(tmp_path))
    (tmp_path / "d.csv").write_text("")
    with pytest.raises(IngestError, match="no rows"):
        ingest(load(tmp_path))
    (tmp_path / "d.csv").write_text("num,color,sex,race,y\n")
    with pytest.raises(IngestError, match="no rows"):
        ingest(load(tmp_path))


def test_ingest_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        ingest(load(tmp_path))


def test_manifest_rejects_overlap():
    with pytest.raises(IngestError):
        DatasetManifest.from_dict(manifest_dict(feature_columns=["num", "sex"]))


def test_sensitive_attribute_validation():
    with pytest.raises(PreconditionError):
        SensitiveAttribute("a", ("x",), "x")
    with pytest.raises(PreconditionError):
        SensitiveAttribute("a", ("x", "y"), "z")
    with pytest.raises(PreconditionError):
        SensitiveAttribute("a", ("x", "x"), "x")


def test_dataset_does_not_alias_inputs():
    X = np.zeros((2, 1))
    Dataset(X, [0, 1], [0, 1], (SensitiveAttribute("a", ("0", "1"), "1"),))
    X[0, 0] = 1.0  # caller's array stays writable
    assert X.flags.writeable


def test_partition_definition():
    part = GroupPartition(np.array([0, 1, 0, 1]), 2, 1)
    assert [g.tolist() for g in part.groups] == [[0, 2], [1, 3]]
    assert [c.tolist() for c in part.complements] == [[1, 3], [0, 2]]


def test_partition_empty_groups_flagged():
    part = GroupPartition(np.zeros(5, dtype=int), 3, 0)
    assert part.sizes == [5, 0, 0]
    assert part.empty == [1, 2]


def test_partition_covers_rows():
    ds = make_dataset(200, (4, 3), seed=3)
    for i in range(ds.n_a):
        part = partition(ds, i)
        rows = np.sort(np.concatenate(part.groups))
        assert rows.tolist() == list(range(ds.n))


@pytest.mark.parametrize("sizes,expected", [((2, 6), 12), ((2, 6, 3), 36), ((2, 2), 4)])
def test_super_attribute_value_count(sizes, expected):
    ds = make_dataset(50, sizes, seed=1)
    spec, codes = degenerate_super_attribute(ds, list(range(len(sizes))))
    assert spec.n_values == expected
    assert codes.max() < expected
    assert spec.privileged == "&".join("0" for _ in sizes)


def test_super_attribute_codes_are_mixed_radix():
    ds = make_dataset(60, (2, 3), seed=2)
    _, codes = degenerate_super_attribute(ds, [0, 1])
    assert np.array_equal(codes, ds.sensitive[:, 0] * 3 + ds.sensitive[:, 1])
    part = super_partition(ds)
    assert part.n_values == 6


def test_super_attribute_cap():
    ds = make_dataset(10, (6, 6), seed=0)
    with pytest.raises(PreconditionError):
        degenerate_super_attribute(ds, [0, 1], cap=30)


def test_perturb_flip_binary():
    ds = Dataset(np.zeros((3, 1)), [0, 1, 1], [0, 1, 0], (SensitiveAttribute("a", ("0", "1"), "1"),))
    assert perturb(ds, 0).sensitive[:, 0].tolist() == [1, 0, 0]


def test_perturb_multivalued_always_changes():
    ds = make_dataset(500, (3, 5, 2), seed=4)
    p = perturb(ds, 9)
    assert (p.sensitive != ds.sensitive).all()
    assert p.changed.all()
    assert p.sensitive.max(axis=0).tolist() <= [2, 4, 1]
    assert np.array_equal(perturb(ds, 9).sensitive, p.sensitive)


def test_perturb_rate_policy():
    ds = make_dataset(2000, (3,), seed=4)
    p = perturb(ds, 1, policy="rate", rate=0.25)
    assert 0.2 < p.changed.mean() < 0.3
    assert np.array_equal(perturb(ds, 1, "rate", 0.0).sensitive, ds.sensitive)


def test_perturb_unperturbable():
    ds = Dataset(np.zeros((3, 1)), np.zeros(3, dtype=int), [0, 1, 0],
                 (SensitiveAttribute("a", ("0", "1"), "1"),))
    assert perturb(ds, 0).unperturbable == ("a",)


def test_prediction_set_threshold_invariant():
    PredictionSet([0, 1], [0.2, 0.5])
    with pytest.raises(PreconditionError):
        PredictionSet([1, 1], [0.2, 0.5])
    p = PredictionSet.from_scores([0.1, 0.9, 0.5])
    assert p.hard.tolist() == [0, 1, 1]


def test_load_predictions(tmp_path):
    write_csv(tmp_path / "p.csv", ["row_id", "hard", "score"], [(1, 1, 0.7), (0, 0, 0.2)])
    p = load_predictions(tmp_path / "p.csv", 2)
    assert p.hard.tolist() == [0, 1] and p.scores.tolist() == [0.2, 0.7]
    write_csv(tmp_path / "q.csv", ["row_id", "hard"], [(0, 1)])
    with pytest.raises(IngestError, match="covers 1 rows"):
        load_predictions(tmp_path / "q.csv", 2)
    assert load_predictions(tmp_path / "q.csv", 1).scores is None


def test_check_counts_reports_only_mismatches():
    ds = make_dataset(30, (2,), seed=0)
    assert check_counts(ds, {"n": 30, "n_prep_features": 4}) == {}
    assert "n" in check_counts(ds, {"n": 31})
