import csv
import json

import numpy as np
import pytest

from shiftcut.costs import min_cut_cost, regularizer_decomposition, shifted_min_cut_cost
from shiftcut.errors import ValidationError
from shiftcut.matrix import ShiftSpec, constant_shift
from shiftcut.optimizer import SearchConfig, enumerate_partitions, local_search
from shiftcut.workbench import (
    SCHEMA_VERSION,
    Dataset,
    ExperimentSpec,
    MethodOutcome,
    emit_report,
    generate_blobs,
    generate_line_dataset,
    load_csv,
    load_report,
    report_rows,
    run_experiment,
    save_csv,
    summarize,
)

from conftest import random_symmetric


def write(tmp_path, text, name="data.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


# loading

def test_load_features_with_labels(tmp_path):
    p = write(tmp_path, "x,y,label\n1,2,a\n3,4,b\n5,6,a\n7,8,c\n")
    ds = load_csv(p, "features", has_labels=True)
    assert ds.n == 4 and ds.features.shape == (4, 2) and ds.kind == "features"
    np.testing.assert_array_equal(ds.true_labels, [0, 1, 0, 2])
    assert ds.label_names == ["a", "b", "c"]


def test_load_without_header(tmp_path):
    ds = load_csv(write(tmp_path, "1,2\n3,4\n"), "features")
    np.testing.assert_array_equal(ds.features, [[1, 2], [3, 4]])
    assert ds.true_labels is None


def test_missing_values_take_column_median(tmp_path):
    ds = load_csv(write(tmp_path, "1,10\n,20\n3,\n8,40\n"), "features")
    np.testing.assert_array_equal(ds.features[:, 0], [1, 3, 3, 8])
    np.testing.assert_array_equal(ds.features[:, 1], [10, 20, 20, 40])


def test_all_missing_column_rejected(tmp_path):
    with pytest.raises(ValidationError):
        load_csv(write(tmp_path, "1,\n2,?\n"), "features")


def test_ragged_rows_rejected(tmp_path):
    with pytest.raises(ValidationError, match="row 2"):
        load_csv(write(tmp_path, "1,2\n3\n"), "features")


def test_non_numeric_cell_rejected(tmp_path):
    with pytest.raises(ValidationError):
        load_csv(write(tmp_path, "1,2\n3,abc\n"), "features")


def test_distance_matrix(tmp_path):
    ds = load_csv(write(tmp_path, "0,1,4\n1,0,2\n4,2,0\n"), "distances")
    assert ds.kind == "distances" and ds.n == 3
    np.testing.assert_array_equal(ds.similarity_matrix(), 4 - ds.distances)


def test_asymmetric_distance_rejected(tmp_path):
    with pytest.raises(ValidationError, match="symmetric"):
        load_csv(write(tmp_path, "0,1\n1.5,0\n"), "distances")


def test_non_square_matrix_rejected(tmp_path):
    with pytest.raises(ValidationError, match="square"):
        load_csv(write(tmp_path, "0,1,2\n1,0,2\n"), "similarities")


def test_unknown_kind_rejected(tmp_path):
    with pytest.raises(ValidationError):
        load_csv(write(tmp_path, "0\n"), "graph")


def test_missing_file():
    with pytest.raises(OSError):
        load_csv("/nonexistent/file.csv")


def test_save_load_round_trip(tmp_path):
    ds = generate_blobs(k=3, per_cluster=4, dims=3, seed=2)
    save_csv(ds, tmp_path / "b.csv")
    back = load_csv(tmp_path / "b.csv", "features", has_labels=True)
    np.testing.assert_array_equal(back.features, ds.features)
    np.testing.assert_array_equal(back.true_labels, ds.true_labels)


def test_dataset_invariants():
    with pytest.raises(ValidationError):
        Dataset("x", features=np.zeros((2, 1)), distances=np.zeros((2, 2)))
    with pytest.raises(ValidationError):
        Dataset("x", features=np.zeros((3, 1)), true_labels=np.zeros(2))


# generators

def test_line_defaults():
    ds = generate_line_dataset()
    assert ds.n == 60 and ds.features.shape == (60, 1)
    np.testing.assert_array_equal(np.bincount(ds.true_labels), [30, 30])
    x = ds.features[:, 0]
    assert np.all(np.diff(x) > 0)
    assert x[30] - x[29] == pytest.approx(5.0)


def test_line_equal_gaps_gives_two_alike_groups():
    ds = generate_line_dataset(dense_gap=1.0, sparse_gap=1.0, seed=3)
    x = ds.features[:, 0]
    w_left, w_right = x[29] - x[0], x[59] - x[30]
    assert 0.5 * 29 <= w_left <= 1.5 * 29 and 0.5 * 29 <= w_right <= 1.5 * 29


def test_generators_reproducible():
    a, b = generate_line_dataset(seed=4), generate_line_dataset(seed=4)
    np.testing.assert_array_equal(a.features, b.features)
    a, b = generate_blobs(seed=4), generate_blobs(seed=4)
    np.testing.assert_array_equal(a.features, b.features)
    assert not np.array_equal(generate_blobs(seed=5).features, a.features)


def test_blobs_separable():
    ds = generate_blobs(k=2, per_cluster=10, dims=2, spread=0.5, separation=50.0, seed=0)
    x, y = ds.features, ds.true_labels
    w = x[y == 1].mean(0) - x[y == 0].mean(0)
    proj = x @ w
    assert proj[y == 0].max() < proj[y == 1].min()


def test_blobs_zero_spread():
    ds = generate_blobs(k=3, per_cluster=5, spread=0.0)
    for l in range(3):
        pts = ds.features[ds.true_labels == l]
        assert np.all(pts == pts[0])


def test_generator_validation():
    with pytest.raises(ValidationError):
        generate_blobs(k=1)
    with pytest.raises(ValidationError):
        generate_line_dataset(dense_gap=0)


# protocol

def test_best_of_cost_ignores_scores():
    truth = np.array([0, 0, 1, 1])
    # restart 1 has the lowest cost but the worst agreement with the truth
    outcome = MethodOutcome(
        costs=np.array([-5.0, -9.0, -7.0]),
        labelings=[truth.copy(), np.array([0, 1, 0, 1]), np.array([0, 0, 0, 1])],
        converged=[True, True, False],
        seconds=0.0,
    )
    out = summarize(outcome, truth)
    assert out["best_restart"] == 1 and out["best_cost"] == -9.0
    assert out["best_of_cost"]["ari"] == -0.5
    assert out["non_converged_restarts"] == [2]
    assert out["mean"]["ari"] == pytest.approx(np.mean([1.0, -0.5, 0.0]))


def test_summarize_without_truth():
    outcome = MethodOutcome(np.array([1.0, 0.5]), [np.array([0, 1]), np.array([1, 0])], [True, True], 0.1)
    out = summarize(outcome)
    assert "best_of_cost" not in out and out["best_cluster_sizes"] == [1, 1]


@pytest.mark.parametrize("alpha", [-1.0, 0.3, 2.0])
def test_shifted_pipeline_matches_regularized_objective(alpha):
    rng = np.random.default_rng(int(alpha * 10) + 50)
    x = random_symmetric(rng, 8, 0, 1)
    for k in (2, 3):
        parts = enumerate_partitions(8, k, surjective=True)
        via_shift = np.array([shifted_min_cut_cost(constant_shift(x, alpha), p, k) for p in parts])
        regular = np.array([regularizer_decomposition(x, p, alpha, k).total for p in parts])
        np.testing.assert_allclose(via_shift + x.sum(), regular, rtol=0, atol=1e-10 * np.abs(regular).max())
        assert np.argmin(via_shift) == np.argmin(regular)


def test_line_dataset_balance_behaviour():
    ds = generate_line_dataset()
    spec = ExperimentSpec(ds, k=2, restarts=30, seed=0, methods=("shifted_min_cut", "min_cut"))
    rep = run_experiment(spec)
    assert min(rep["methods"]["min_cut"]["best_cluster_sizes"]) <= 2
    assert min(rep["methods"]["shifted_min_cut"]["best_cluster_sizes"]) >= 0.4 * ds.n


def test_blobs_recovered():
    ds = generate_blobs(k=3, per_cluster=20, dims=2, seed=1)
    rep = run_experiment(ExperimentSpec(ds, k=3, restarts=20, seed=3,
                                        methods=("shifted_min_cut", "kmeans")))
    assert rep["methods"]["shifted_min_cut"]["best_of_cost"]["ari"] >= 0.95
    assert rep["methods"]["kmeans"]["best_of_cost"]["ari"] >= 0.95


def test_min_cut_cost_is_plain_min_cut():
    ds = generate_blobs(k=2, per_cluster=5, seed=0)
    rep = run_experiment(ExperimentSpec(ds, k=2, restarts=3, seed=2, methods=("min_cut",)))
    x = ds.similarity_matrix()
    search = local_search(x, SearchConfig(k=2, restarts=3, seed=2))
    expected = min_cut_cost(x, search.best_labels)
    assert rep["methods"]["min_cut"]["best_cost"] == pytest.approx(expected, rel=1e-12)


def _strip(report):
    report = dict(report)
    report.pop("created")
    report.pop("timing_seconds")
    for res in report["methods"].values():
        res.pop("seconds", None)
    return report


def test_experiment_deterministic(tmp_path):
    ds = generate_blobs(k=3, per_cluster=8, seed=6)
    spec = ExperimentSpec(ds, k=3, restarts=5, seed=9, methods=("shifted_min_cut", "min_cut", "kmeans"))
    a, b = run_experiment(spec), run_experiment(spec)
    assert json.dumps(_strip(a)) == json.dumps(_strip(b))


def test_spec_validation():
    ds = generate_blobs(k=2, per_cluster=3)
    unlabeled = Dataset("u", features=ds.features)
    with pytest.raises(ValidationError):
        ExperimentSpec(unlabeled, k=2)
    with pytest.raises(ValidationError):
        ExperimentSpec(ds, k=1)
    with pytest.raises(ValidationError):
        ExperimentSpec(ds, k=2, restarts=0)
    with pytest.raises(ValidationError):
        ExperimentSpec(ds, k=2, methods=("spectral",))
    with pytest.raises(ValidationError):
        ExperimentSpec(Dataset("m", similarities=np.eye(4), true_labels=np.arange(4)), k=2,
                       methods=("kmeans",))
    ExperimentSpec(unlabeled, k=2, score=False)


# reports

@pytest.fixture(scope="module")
def report():
    ds = generate_blobs(k=2, per_cluster=6, seed=1)
    return run_experiment(ExperimentSpec(ds, k=2, restarts=4, shift=ShiftSpec.parse("const:1.5"),
                                         methods=("shifted_min_cut", "kmeans")))


def test_report_fields(report):
    assert report["schema_version"] == SCHEMA_VERSION
    assert report["config"]["shift"] == "const:1.5"
    assert report["config"]["n"] == 12 and report["seed"] == 0
    assert list(report["methods"]) == ["shifted_min_cut", "kmeans"]


def test_json_round_trip(report, tmp_path):
    path = emit_report(report, tmp_path / "r.json")
    back = load_report(path)
    assert back["config"] == report["config"]
    ours = report["methods"]["kmeans"]["best_of_cost"]["ari"]
    assert back["methods"]["kmeans"]["best_of_cost"]["ari"] == pytest.approx(ours, rel=1e-5)
    assert emit_report(back, tmp_path / "again.json").read_text() == path.read_text()


def test_json_six_significant_digits(tmp_path):
    rep = {"x": 1.23456789, "y": [2.0 / 3.0], "z": {"w": 123456789.0}}
    back = load_report(emit_report(rep, tmp_path / "r.json"))
    assert back == {"x": 1.23457, "y": [0.666667], "z": {"w": 123457000.0}}


def test_csv_rows(report, tmp_path):
    path = emit_report(report, tmp_path / "r.csv", "csv")
    lines = path.read_text().splitlines()
    assert lines[0] == f"# schema_version={SCHEMA_VERSION}"
    rows = list(csv.DictReader(lines[1:]))
    assert [(r["method"], r["view"]) for r in rows] == [
        (m, v) for m in ("shifted_min_cut", "kmeans") for v in ("best_of_cost", "mean", "std")]
    assert set(rows[0]) == {"method", "view", "best_cost", "ami", "ari", "v_measure", "seconds"}


def test_unscored_report_omits_scores(tmp_path):
    ds = Dataset("plain", features=generate_blobs(k=2, per_cluster=4).features)
    rep = run_experiment(ExperimentSpec(ds, k=2, restarts=2, score=False))
    rows = report_rows(rep)
    assert [r["view"] for r in rows] == ["best_of_cost", "best_of_cost"]
    header = emit_report(rep, tmp_path / "u.csv", "csv").read_text().splitlines()[1]
    assert header == "method,view,best_cost,seconds"


def test_unknown_format(report, tmp_path):
    with pytest.raises(ValidationError):
        emit_report(report, tmp_path / "r.xml", "xml")


def test_unwritable_path(report, tmp_path):
    with pytest.raises(OSError):
        emit_report(report, tmp_path / "missing" / "r.json")
