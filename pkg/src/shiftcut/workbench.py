"""Datasets, the restart-based evaluation protocol, and report files.

The protocol runs every method ``restarts`` times from seeded random
starts and reports two views of the external scores:

* ``best_of_cost``: scores of the single restart with the lowest cost
  (chosen before any score is computed);
* ``mean`` / ``std``: scores averaged over all restarts.
"""
from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ValidationError
from .invariance import kmeans
from .matrix import (
    ShiftSpec,
    as_distance,
    as_similarity,
    distances_to_similarities,
    squared_euclidean_distances,
)
from .metrics import scores
from .optimizer import SearchConfig, local_search

SCHEMA_VERSION = 1
METHODS = ("shifted_min_cut", "min_cut", "kmeans")
PAYLOAD_KINDS = ("features", "distances", "similarities")
SCORE_KEYS = ("ami", "ari", "v_measure")


@dataclass
class Dataset:
    name: str
    features: np.ndarray | None = None
    distances: np.ndarray | None = None
    similarities: np.ndarray | None = None
    true_labels: np.ndarray | None = None
    label_names: list[str] | None = None

    def __post_init__(self):
        given = [p for p in (self.features, self.distances, self.similarities) if p is not None]
        if len(given) != 1:
            raise ValidationError("a dataset carries exactly one of features, distances, similarities")
        if self.true_labels is not None and len(self.true_labels) != self.n:
            raise ValidationError(f"{len(self.true_labels)} labels for {self.n} objects")

    @property
    def kind(self) -> str:
        if self.features is not None:
            return "features"
        return "distances" if self.distances is not None else "similarities"

    @property
    def n(self) -> int:
        payload = next(p for p in (self.features, self.distances, self.similarities) if p is not None)
        return int(np.shape(payload)[0])

    def similarity_matrix(self) -> np.ndarray:
        """Unshifted similarities: features -> squared distances -> reversed distances."""
        if self.similarities is not None:
            return as_similarity(self.similarities)
        d = self.distances if self.distances is not None else squared_euclidean_distances(self.features)
        return distances_to_similarities(d)


def _parse_float(cell: str) -> float:
    cell = cell.strip()
    if cell == "" or cell.lower() in ("nan", "na", "?"):
        return math.nan
    return float(cell)


def _is_numeric_row(row: list[str]) -> bool:
    for cell in row:
        try:
            _parse_float(cell)
        except ValueError:
            return False
    return True


def load_csv(path, payload_kind: str = "features", has_labels: bool = False,
             name: str | None = None) -> Dataset:
    """Read a comma-separated numeric table.

    A first row with any non-numeric cell is taken as a header. With
    ``has_labels`` the last column holds ground-truth labels (any strings).
    Missing feature values (empty, ``nan``, ``?``) are replaced by their
    column median; matrix payloads must be complete, square and symmetric.
    """
    if payload_kind not in PAYLOAD_KINDS:
        raise ValidationError(f"kind must be one of {PAYLOAD_KINDS}, got {payload_kind!r}")
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise ValidationError(f"{path}: no data")
    body = rows[1:] if not _is_numeric_row(rows[0][:-1] if has_labels else rows[0]) else rows
    if not body:
        raise ValidationError(f"{path}: header but no data rows")
    width = len(body[0])
    for lineno, r in enumerate(body, start=1):
        if len(r) != width:
            raise ValidationError(f"{path}: row {lineno} has {len(r)} cells, expected {width}")

    labels = names = None
    if has_labels:
        if width < 2:
            raise ValidationError(f"{path}: label column requested but only {width} column(s)")
        raw = [r[-1].strip() for r in body]
        names, labels = np.unique(np.array(raw), return_inverse=True)
        names = names.tolist()
        body = [r[:-1] for r in body]
    try:
        values = np.array([[_parse_float(c) for c in r] for r in body], dtype=np.float64)
    except ValueError as exc:
        raise ValidationError(f"{path}: non-numeric cell ({exc})") from None

    name = name or path.stem
    if payload_kind == "features":
        if np.isinf(values).any():
            raise ValidationError(f"{path}: infinite feature value")
        missing = np.isnan(values)
        if missing.any():
            if np.any(missing.all(axis=0)):
                raise ValidationError(f"{path}: a feature column has no values")
            values = np.where(missing, np.nanmedian(values, axis=0)[None, :], values)
        return Dataset(name, features=values, true_labels=labels, label_names=names)

    if values.shape[0] != values.shape[1]:
        raise ValidationError(f"{path}: {payload_kind} matrix is {values.shape[0]}x{values.shape[1]}, not square")
    if np.isnan(values).any():
        raise ValidationError(f"{path}: missing entries in {payload_kind} matrix")
    if payload_kind == "distances":
        m = as_distance(values)
        return Dataset(name, distances=0.5 * (m + m.T), true_labels=labels, label_names=names)
    m = as_similarity(values)
    return Dataset(name, similarities=0.5 * (m + m.T), true_labels=labels, label_names=names)


def save_csv(dataset: Dataset, path) -> None:
    """Write a dataset in the format :func:`load_csv` reads (labels last, no header)."""
    payload = {"features": dataset.features, "distances": dataset.distances,
               "similarities": dataset.similarities}[dataset.kind]
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        for i, row in enumerate(np.atleast_2d(payload)):
            cells = [repr(float(v)) for v in row]
            if dataset.true_labels is not None:
                cells.append(str(int(dataset.true_labels[i])))
            w.writerow(cells)


def generate_line_dataset(n_dense: int = 30, n_sparse: int = 30, dense_gap: float = 0.1,
                          sparse_gap: float = 1.0, separation: float = 5.0,
                          seed: int = 0) -> Dataset:
    """Points on a line: a tight group on the left, a loose group to the right.

    Consecutive gaps inside each group are drawn uniformly from
    ``[0.5, 1.5] * gap``; ``separation`` is the gap between the groups.
    """
    if min(n_dense, n_sparse) < 1 or min(dense_gap, sparse_gap, separation) <= 0:
        raise ValidationError("counts and gaps must be positive")
    rng = np.random.default_rng(seed)
    left = np.concatenate([[0.0], np.cumsum(dense_gap * rng.uniform(0.5, 1.5, n_dense - 1))])
    right = np.concatenate([[0.0], np.cumsum(sparse_gap * rng.uniform(0.5, 1.5, n_sparse - 1))])
    right += left[-1] + separation
    x = np.concatenate([left, right])[:, None]
    labels = np.repeat([0, 1], [n_dense, n_sparse])
    return Dataset("line", features=x, true_labels=labels)


def generate_blobs(k: int = 3, per_cluster: int = 20, dims: int = 2, spread: float = 1.0,
                   separation: float = 10.0, seed: int = 0) -> Dataset:
    """Isotropic Gaussian blobs.

    Centers sit on a regular ``k``-gon in the first two coordinates with
    neighbouring centers ``separation`` apart (on a line when ``dims == 1``).
    """
    if k < 2:
        raise ValidationError("need k >= 2")
    if per_cluster < 1 or dims < 1 or spread < 0:
        raise ValidationError("per_cluster and dims must be positive, spread non-negative")
    rng = np.random.default_rng(seed)
    centers = np.zeros((k, dims))
    if dims == 1:
        centers[:, 0] = separation * np.arange(k)
    else:
        radius = separation / (2 * np.sin(np.pi / k))
        angle = 2 * np.pi * np.arange(k) / k
        centers[:, 0] = radius * np.cos(angle)
        centers[:, 1] = radius * np.sin(angle)
    x = np.repeat(centers, per_cluster, axis=0) + spread * rng.standard_normal((k * per_cluster, dims))
    labels = np.repeat(np.arange(k), per_cluster)
    return Dataset("blobs", features=x, true_labels=labels)


@dataclass
class ExperimentSpec:
    dataset: Dataset
    k: int
    shift: ShiftSpec = field(default_factory=ShiftSpec)
    restarts: int = 100
    seed: int = 0
    methods: tuple[str, ...] = ("shifted_min_cut", "min_cut")
    max_sweeps: int = 1000
    score: bool = True

    def __post_init__(self):
        if self.k < 2:
            raise ValidationError("k must be >= 2")
        if self.restarts < 1:
            raise ValidationError("restarts must be >= 1")
        if self.k > self.dataset.n:
            raise ValidationError(f"k={self.k} exceeds n={self.dataset.n}")
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise ValidationError(f"unknown method(s) {bad}; choose from {METHODS}")
        if "kmeans" in self.methods and self.dataset.features is None:
            raise ValidationError("kmeans needs a feature payload")
        if self.score and self.dataset.true_labels is None:
            raise ValidationError("scoring requested but the dataset has no labels")


@dataclass
class MethodOutcome:
    """One method's restarts, with the best one chosen by cost alone."""

    costs: np.ndarray
    labelings: list[np.ndarray]
    converged: list[bool]
    seconds: float

    @property
    def best_restart(self) -> int:
        return int(np.argmin(self.costs))

    @property
    def best_labels(self) -> np.ndarray:
        return self.labelings[self.best_restart]


def summarize(outcome: MethodOutcome, true_labels=None) -> dict:
    best = outcome.best_restart
    out = {
        "best_cost": float(outcome.costs[best]),
        "best_restart": best,
        "best_cluster_sizes": np.bincount(outcome.best_labels).tolist(),
        "non_converged_restarts": [i for i, ok in enumerate(outcome.converged) if not ok],
    }
    if true_labels is not None:
        per = [scores(true_labels, lab) for lab in outcome.labelings]
        out["best_of_cost"] = per[best]
        out["mean"] = {key: float(np.mean([p[key] for p in per])) for key in SCORE_KEYS}
        out["std"] = {key: float(np.std([p[key] for p in per])) for key in SCORE_KEYS}
    return out


def _run_graph(s: np.ndarray, spec: ExperimentSpec, offset: float) -> MethodOutcome:
    t0 = time.perf_counter()
    rep = local_search(s, SearchConfig(k=spec.k, restarts=spec.restarts, seed=spec.seed,
                                       max_sweeps=spec.max_sweeps))
    return MethodOutcome(
        costs=rep.per_restart_final_costs + offset,
        labelings=[r.labels for r in rep.runs],
        converged=[r.converged for r in rep.runs],
        seconds=time.perf_counter() - t0,
    )


def _run_kmeans(x: np.ndarray, spec: ExperimentSpec) -> MethodOutcome:
    t0 = time.perf_counter()
    seeds = np.random.SeedSequence(spec.seed).spawn(spec.restarts)
    costs, labs = [], []
    for child in seeds:
        labels, _, inertia = kmeans(x, spec.k, seed=np.random.default_rng(child))
        costs.append(inertia)
        labs.append(labels)
    return MethodOutcome(np.array(costs), labs, [True] * len(labs), time.perf_counter() - t0)


def run_experiment(spec: ExperimentSpec) -> dict:
    """Run every requested method and assemble the report dictionary.

    Costs reported per method: Shifted Min Cut on the shifted matrix, plain
    Min Cut (inter-cluster weight) on the unshifted matrix, and within-cluster
    sum of squares for K-means.
    """
    ds = spec.dataset
    x = ds.similarity_matrix()
    truth = ds.true_labels if spec.score else None
    results, timing = {}, {}
    for method in spec.methods:
        if method == "shifted_min_cut":
            outcome = _run_graph(spec.shift.apply(x), spec, 0.0)
        elif method == "min_cut":
            # local search minimizes -intra, which is Min Cut minus the total weight
            outcome = _run_graph(x, spec, float(x.sum()))
        else:
            outcome = _run_kmeans(ds.features, spec)
        results[method] = summarize(outcome, truth)
        timing[method] = outcome.seconds
    return {
        "schema_version": SCHEMA_VERSION,
        "toolkit_version": __version__,
        "seed": spec.seed,
        "config": {
            "dataset": ds.name,
            "kind": ds.kind,
            "n": ds.n,
            "k": spec.k,
            "shift": str(spec.shift),
            "restarts": spec.restarts,
            "max_sweeps": spec.max_sweeps,
            "methods": list(spec.methods),
            "scored": truth is not None,
        },
        "methods": results,
        "timing_seconds": timing,
        "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }


def _round(obj, digits: int = 6):
    if isinstance(obj, float):
        return obj if not math.isfinite(obj) else float(f"{obj:.{digits}g}")
    if isinstance(obj, dict):
        return {k: _round(v, digits) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round(v, digits) for v in obj]
    return obj


CSV_COLUMNS = ("method", "view", "best_cost", *SCORE_KEYS, "seconds")


def report_rows(report: dict) -> list[dict]:
    """Flatten a report into one row per (method, view)."""
    rows = []
    scored = report["config"]["scored"]
    for method, res in report["methods"].items():
        views = ("best_of_cost", "mean", "std") if scored else ("best_of_cost",)
        for view in views:
            row = {"method": method, "view": view, "best_cost": res["best_cost"],
                   "seconds": report["timing_seconds"][method]}
            if scored:
                row.update(res[view])
            rows.append(row)
    return rows


def emit_report(report: dict, path, fmt: str = "json") -> Path:
    """Write ``report`` as JSON or CSV with floats cut to 6 significant digits."""
    path = Path(path)
    rounded = _round(report)
    if fmt == "json":
        text = json.dumps(rounded, indent=2) + "\n"
    elif fmt == "csv":
        rows = report_rows(rounded)
        cols = [c for c in CSV_COLUMNS if c not in SCORE_KEYS or report["config"]["scored"]]
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
        text = f"# schema_version={SCHEMA_VERSION}\n" + buf.getvalue()
    else:
        raise ValidationError(f"format must be json or csv, got {fmt!r}")
    path.write_text(text, encoding="utf-8")
    return path


def load_report(path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))
