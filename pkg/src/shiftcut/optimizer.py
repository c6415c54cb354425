"""Local search for the Shifted Min Cut cost, plus an exhaustive oracle.

The search keeps ``K`` fixed. Each sweep visits every object once and moves
it to the cluster with the most negative cost change, computed in O(n) from
one row of the shifted similarity matrix::

    delta(o -> l') = sum_{i in O_l, i != o} (S_io + S_oi) - sum_{i in O_l'} (S_io + S_oi)

where ``l`` is the current cluster of ``o``. A sweep therefore costs
O(n^2 + nK) regardless of how many moves it makes.
"""
from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numba
import numpy as np

from .costs import ClusteringSolution, as_solution, shifted_min_cut_cost
from .errors import ValidationError
from .matrix import as_similarity

BRUTE_FORCE_MAX_N = 12
#: moves must improve the cost by more than this fraction of sum|S|
ACCEPT_RTOL = 1e-12


@dataclass(frozen=True)
class SearchConfig:
    k: int
    restarts: int = 100
    max_sweeps: int = 1000
    seed: int = 0
    sweep_order: str = "shuffled"  # or "fixed"
    forbid_empty: bool = True
    workers: int = 1

    def __post_init__(self):
        if self.k < 1:
            raise ValidationError(f"k must be positive, got {self.k}")
        if self.restarts < 1:
            raise ValidationError("restarts must be >= 1")
        if self.max_sweeps < 1:
            raise ValidationError("max_sweeps must be >= 1")
        if self.sweep_order not in ("shuffled", "fixed"):
            raise ValidationError(f"sweep_order must be 'shuffled' or 'fixed', got {self.sweep_order!r}")
        if self.workers < 1:
            raise ValidationError("workers must be >= 1")


@dataclass
class RunResult:
    """Outcome of one descent from one initial solution."""

    initial_labels: np.ndarray
    labels: np.ndarray
    cost: float
    trajectory: np.ndarray  # cost after the start and after every accepted move
    sweeps: int
    moves: int
    converged: bool
    sweep_times: list[float] = field(default_factory=list)


@dataclass
class SearchReport:
    best_labels: ClusteringSolution
    best_cost: float
    best_restart: int
    cost_trajectory: np.ndarray
    sweeps_used: int
    moves_accepted: int
    converged: bool
    per_restart_final_costs: np.ndarray
    sweep_wall_times: list[float]
    runs: list[RunResult]


@numba.njit(cache=True, nogil=True)
def _sweep(s, labels, sizes, order, forbid_empty, tol, deltas):
    n = s.shape[0]
    k = sizes.shape[0]
    acc = np.empty(k)
    moved = 0
    for t in range(order.shape[0]):
        o = order[t]
        cur = labels[o]
        if forbid_empty and sizes[cur] == 1:
            continue
        for l in range(k):
            acc[l] = 0.0
        for i in range(n):
            acc[labels[i]] += s[o, i]
        acc[cur] -= s[o, o]
        best = 0.0
        best_l = cur
        for l in range(k):
            if l != cur:
                d = 2.0 * (acc[cur] - acc[l])
                if d < best:
                    best = d
                    best_l = l
        if best_l != cur and best < -tol:
            labels[o] = best_l
            sizes[cur] -= 1
            sizes[best_l] += 1
            deltas[moved] = best
            moved += 1
    return moved


def initial_random_solution(n: int, k: int, rng: np.random.Generator,
                            forbid_empty: bool = True) -> np.ndarray:
    """Independent uniform labels; empty clusters get one object each if forbidden.

    Each empty cluster takes an object drawn uniformly from clusters that can
    spare one, so the repair never empties another cluster.
    """
    if k < 1 or k > n:
        raise ValidationError(f"need 1 <= k <= n, got k={k}, n={n}")
    labels = rng.integers(0, k, size=n)
    if forbid_empty:
        sizes = np.bincount(labels, minlength=k)
        for l in np.flatnonzero(sizes == 0):
            donors = np.flatnonzero(sizes[labels] > 1)
            o = donors[rng.integers(donors.size)]
            sizes[labels[o]] -= 1
            labels[o] = l
            sizes[l] = 1
    return labels.astype(np.int64)


def move_delta(s, c, o: int, l_to: int, k: int | None = None) -> float:
    """Change in Shifted Min Cut cost when object ``o`` moves to ``l_to``."""
    a = as_similarity(s)
    sol = as_solution(c, k)
    if not 0 <= l_to < sol.k:
        raise ValidationError(f"target cluster {l_to} outside [0, {sol.k})")
    if not 0 <= o < sol.n:
        raise ValidationError(f"object {o} outside [0, {sol.n})")
    l = sol.labels[o]
    if l_to == l:
        return 0.0
    w = a[o] + a[:, o]
    src = sol.labels == l
    src[o] = False
    return float(w[src].sum() - w[sol.labels == l_to].sum())


def _accept_tol(a: np.ndarray) -> float:
    return ACCEPT_RTOL * float(np.abs(a).sum())


def _symmetric_part(s) -> np.ndarray:
    # intra-cluster sums over ordered pairs only see (S + S^T) / 2
    a = as_similarity(s)
    return np.ascontiguousarray(0.5 * (a + a.T))


def descend(s, labels, k: int, *, max_sweeps: int = 1000, sweep_order="fixed",
            rng: np.random.Generator | None = None, forbid_empty: bool = True) -> RunResult:
    """Run local search from ``labels`` until a sweep makes no move.

    ``sweep_order`` is ``"fixed"`` (objects in index order), ``"shuffled"``
    (fresh permutation from ``rng`` each sweep) or an explicit permutation
    used for every sweep.
    """
    a = _symmetric_part(s)
    return _descend(a, as_solution(labels, k).labels.copy(), k, max_sweeps, sweep_order,
                    rng, forbid_empty, _accept_tol(a))


def _descend(a, labels, k, max_sweeps, sweep_order, rng, forbid_empty, tol) -> RunResult:
    n = a.shape[0]
    initial = labels.copy()
    labels = np.ascontiguousarray(labels, dtype=np.int64)
    sizes = np.bincount(labels, minlength=k).astype(np.int64)
    if isinstance(sweep_order, str):
        if sweep_order == "shuffled" and rng is None:
            raise ValidationError("shuffled sweeps need an rng")
        if sweep_order not in ("fixed", "shuffled"):
            raise ValidationError(f"unknown sweep order {sweep_order!r}")
        fixed = np.arange(n, dtype=np.int64) if sweep_order == "fixed" else None
    else:
        fixed = np.asarray(sweep_order, dtype=np.int64)
        if fixed.shape != (n,) or not np.array_equal(np.sort(fixed), np.arange(n)):
            raise ValidationError("explicit sweep order must be a permutation of 0..n-1")

    cost0 = shifted_min_cut_cost(a, labels, k)
    deltas = np.empty(n)
    steps = []
    times = []
    converged = False
    sweeps = 0
    while sweeps < max_sweeps:
        order = fixed if fixed is not None else rng.permutation(n).astype(np.int64)
        t0 = time.perf_counter()
        m = _sweep(a, labels, sizes, order, forbid_empty, tol, deltas)
        times.append(time.perf_counter() - t0)
        sweeps += 1
        if m == 0:
            converged = True
            break
        steps.append(deltas[:m].copy())
    moves = int(sum(len(d) for d in steps))
    traj = cost0 + np.concatenate([[0.0], *steps]).cumsum()
    return RunResult(
        initial_labels=initial,
        labels=labels,
        cost=shifted_min_cut_cost(a, labels, k),
        trajectory=traj,
        sweeps=sweeps,
        moves=moves,
        converged=converged,
        sweep_times=times,
    )


def local_search(s, config: SearchConfig) -> SearchReport:
    """Multi-restart local search; the lowest final cost wins (earliest restart on ties)."""
    a = _symmetric_part(s)
    n = a.shape[0]
    if config.k > n:
        raise ValidationError(f"k={config.k} exceeds n={n}")
    tol = _accept_tol(a)
    seeds = np.random.SeedSequence(config.seed).spawn(config.restarts)

    def one(child):
        rng = np.random.default_rng(child)
        init = initial_random_solution(n, config.k, rng, config.forbid_empty)
        return _descend(a, init, config.k, config.max_sweeps, config.sweep_order,
                        rng, config.forbid_empty, tol)

    if config.workers > 1:
        with ThreadPoolExecutor(config.workers) as pool:
            runs = list(pool.map(one, seeds))
    else:
        runs = [one(child) for child in seeds]

    finals = np.array([r.cost for r in runs])
    best = int(np.argmin(finals))
    run = runs[best]
    return SearchReport(
        best_labels=ClusteringSolution(run.labels, config.k),
        best_cost=float(finals[best]),
        best_restart=best,
        cost_trajectory=run.trajectory,
        sweeps_used=run.sweeps,
        moves_accepted=run.moves,
        converged=run.converged,
        per_restart_final_costs=finals,
        sweep_wall_times=[t for r in runs for t in r.sweep_times],
        runs=runs,
    )


def is_local_optimum(s, labels, k: int, forbid_empty: bool = True) -> bool:
    """True if no allowed single-object move lowers the cost beyond the acceptance tolerance."""
    a = as_similarity(s)
    sol = as_solution(labels, k)
    tol = _accept_tol(a)
    sizes = sol.sizes
    for o in range(sol.n):
        if forbid_empty and sizes[sol.labels[o]] == 1:
            continue
        for l in range(k):
            if move_delta(a, sol, o, l) < -tol:
                return False
    return True


def enumerate_partitions(n: int, k: int, surjective: bool = False) -> np.ndarray:
    """All labelings of ``n`` objects into at most ``k`` blocks, one per set partition.

    Rows are restricted growth strings (object 0 in cluster 0, each new
    cluster id one above the running maximum), so label permutations are not
    repeated. ``surjective=True`` keeps exactly-``k``-block partitions.
    """
    if n < 1 or k < 1:
        raise ValidationError("n and k must be positive")
    rows = np.zeros((1, 1), dtype=np.int8)
    top = np.zeros(1, dtype=np.int8)
    for _ in range(1, n):
        new_rows, new_top = [], []
        for v in range(k):
            ok = top + 1 >= v
            if not ok.any():
                continue
            r = rows[ok]
            new_rows.append(np.hstack([r, np.full((r.shape[0], 1), v, dtype=np.int8)]))
            new_top.append(np.maximum(top[ok], v))
        rows = np.vstack(new_rows)
        top = np.concatenate(new_top)
    order = np.lexsort(rows.T[::-1])
    rows, top = rows[order], top[order]
    if surjective:
        rows = rows[top == k - 1]
    return rows.astype(np.int64)


def batch_shifted_min_cut(s: np.ndarray, labelings: np.ndarray, k: int) -> np.ndarray:
    """Shifted Min Cut cost for each row of ``labelings``, computed via one-hot products."""
    costs = np.zeros(labelings.shape[0])
    for l in range(k):
        z = (labelings == l).astype(np.float64)
        costs -= np.einsum("mi,mi->m", z @ s, z)
    return costs


def brute_force_optimum(s, k: int, surjective: bool = True) -> tuple[np.ndarray, float]:
    """Exact minimum of the Shifted Min Cut cost by enumerating set partitions.

    ``surjective=True`` restricts to partitions with exactly ``k`` non-empty
    clusters (what the local search with ``forbid_empty`` explores);
    ``False`` allows fewer.
    """
    a = as_similarity(s)
    n = a.shape[0]
    if n > BRUTE_FORCE_MAX_N:
        raise ValidationError(f"brute force is limited to n <= {BRUTE_FORCE_MAX_N}, got {n}")
    if surjective and k > n:
        raise ValidationError(f"cannot split {n} objects into {k} non-empty clusters")
    labelings = enumerate_partitions(n, k, surjective)
    costs = batch_shifted_min_cut(a, labelings, k)
    i = int(np.argmin(costs))
    return labelings[i].copy(), shifted_min_cut_cost(a, labelings[i], k)


def sweep_timing_probe(n_list, k: int, seed: int = 0, repeats: int = 5,
                       max_n: int = 8000) -> list[dict]:
    """Time one sweep from a random start on random symmetric matrices.

    Each row holds ``n``, ``k``, the best-of-``repeats`` sweep time in
    seconds and the ratio to the previous row's time.
    """
    rng = np.random.default_rng(seed)
    # compile outside the timed region
    _sweep(np.zeros((2, 2)), np.zeros(2, np.int64), np.array([2] + [0] * (k - 1), np.int64),
           np.arange(2, dtype=np.int64), True, 0.0, np.empty(2))
    rows = []
    prev = None
    for n in n_list:
        if n > max_n:
            raise ValidationError(f"n={n} exceeds probe cap {max_n}")
        g = rng.standard_normal((n, n))
        s = np.ascontiguousarray((g + g.T) / 2)
        init = initial_random_solution(n, k, rng)
        order = rng.permutation(n).astype(np.int64)
        deltas = np.empty(n)
        best = np.inf
        for _ in range(repeats):
            labels = init.copy()
            sizes = np.bincount(labels, minlength=k).astype(np.int64)
            t0 = time.perf_counter()
            _sweep(s, labels, sizes, order, True, 0.0, deltas)
            best = min(best, time.perf_counter() - t0)
        rows.append({"n": n, "k": k, "seconds": best,
                     "ratio": None if prev is None else best / prev})
        prev = best
    return rows
