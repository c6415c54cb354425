"""How other clustering methods react to shifting similarities or features.

Hosts small reference implementations (agglomerative linkage, Lloyd's
K-means, one replicator-dynamics step) and checkers that run a method on
original and shifted input and compare the outcomes.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .costs import ratio_assoc_cost, ratio_cut_cost, as_solution
from .errors import DegenerateStateError, ValidationError
from .matrix import as_similarity, constant_shift

LINKAGES = ("single", "complete", "average")
FEATURE_LINKAGES = ("centroid", "ward")


@dataclass(frozen=True)
class Dendrogram:
    """Merge history of an agglomerative clustering.

    Cluster ids follow the usual convention: leaves are ``0..n-1`` and the
    cluster created by merge ``t`` gets id ``n + t``. Within each merge
    ``a < b``.
    """

    n: int
    merges: tuple[tuple[int, int, float], ...]

    @property
    def pairs(self) -> list[tuple[int, int]]:
        return [(a, b) for a, b, _ in self.merges]

    @property
    def heights(self) -> np.ndarray:
        return np.array([h for _, _, h in self.merges])


def _agglomerate(n, pair_dist, merge_update) -> Dendrogram:
    """Generic agglomeration over a cluster-distance matrix.

    ``pair_dist`` is an ``n x n`` matrix of singleton distances, consumed in
    place. ``merge_update(d, i, j, live)`` returns the new row of distances
    from the merged cluster (stored at slot ``i``) to every slot.

    The closest live pair wins; exact ties go to the pair with the smallest
    (min member, then second min member) slot indices. Slot ``i`` always holds
    the cluster whose smallest member is ``i``, so the tie-break depends on
    membership only, never on heights.
    """
    d = pair_dist
    live = np.ones(n, dtype=bool)
    ids = np.arange(n)
    merges = []
    big = np.inf
    np.fill_diagonal(d, big)
    for t in range(n - 1):
        masked = np.where(live[:, None] & live[None, :], d, big)
        flat = int(np.argmin(masked))  # first minimum in row-major order
        i, j = divmod(flat, n)
        if i > j:
            i, j = j, i
        h = float(d[i, j])
        row = merge_update(d, i, j, live)
        a, b = sorted((int(ids[i]), int(ids[j])))
        merges.append((a, b, h))
        live[j] = False
        d[i, :] = row
        d[:, i] = row
        d[i, i] = big
        d[j, :] = big
        d[:, j] = big
        ids[i] = n + t
    return Dendrogram(n, tuple(merges))


def linkage_cluster(d, criterion: str = "single") -> Dendrogram:
    """Agglomerative clustering on a dissimilarity matrix.

    ``criterion`` is ``single`` (nearest members), ``complete`` (farthest
    members) or ``average`` (mean over member pairs). Negative or shifted
    dissimilarities are accepted; only symmetry and finiteness are checked.
    """
    if criterion not in LINKAGES:
        raise ValidationError(f"criterion must be one of {LINKAGES}, got {criterion!r}")
    a = as_similarity(d, "dissimilarity matrix")
    n = a.shape[0]
    if n < 2:
        raise ValidationError("need at least 2 objects")
    work = a.copy()
    size = np.ones(n)
    # average linkage keeps raw sums of member-pair dissimilarities
    total = a.copy()

    def update(m, i, j, live):
        if criterion == "single":
            return np.minimum(m[i], m[j])
        if criterion == "complete":
            return np.maximum(m[i], m[j])
        total[i] += total[j]
        total[:, i] = total[i]
        size[i] += size[j]
        return total[i] / (size[i] * size)

    return _agglomerate(n, work, update)


def feature_linkage(features, criterion: str = "ward") -> Dendrogram:
    """Centroid or Ward agglomeration computed directly from feature vectors.

    Centroid: Euclidean distance between cluster means. Ward:
    ``|u||v| / (|u| + |v|) * ||g_u - g_v||^2``.
    """
    if criterion not in FEATURE_LINKAGES:
        raise ValidationError(f"criterion must be one of {FEATURE_LINKAGES}, got {criterion!r}")
    x = np.asarray(features, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2 or x.shape[0] < 2 or not np.all(np.isfinite(x)):
        raise ValidationError("features must be a finite 2-D array with at least 2 rows")
    n = x.shape[0]
    cent = x.copy()
    size = np.ones(n)

    def dist_from(i):
        diff = cent - cent[i]
        sq = np.einsum("ij,ij->i", diff, diff)
        if criterion == "ward":
            return size * size[i] / (size + size[i]) * sq
        return np.sqrt(sq)

    pair = np.vstack([dist_from(i) for i in range(n)])

    def update(m, i, j, live):
        cent[i] = (size[i] * cent[i] + size[j] * cent[j]) / (size[i] + size[j])
        size[i] += size[j]
        return dist_from(i)

    return _agglomerate(n, pair, update)


@dataclass(frozen=True)
class LinkageVerdict:
    same_merges: bool
    max_height_error: float  # max |h_shifted - h - alpha| (or - 0 for feature shifts)

    def holds(self, tol: float = 1e-10) -> bool:
        return self.same_merges and self.max_height_error <= tol


def check_linkage_shift_invariance(d, alpha: float, criterion: str) -> LinkageVerdict:
    """Compare linkage on ``d`` and on ``d + alpha`` (every off-diagonal entry shifted)."""
    a = as_similarity(d, "dissimilarity matrix")
    shifted = a + alpha
    np.fill_diagonal(shifted, np.diag(a))
    t0 = linkage_cluster(a, criterion)
    t1 = linkage_cluster(shifted, criterion)
    err = float(np.max(np.abs(t1.heights - t0.heights - alpha)))
    return LinkageVerdict(t0.pairs == t1.pairs, err)


def kmeans(features, k: int, seed: int = 0, max_iters: int = 300):
    """Lloyd's algorithm from ``k`` distinct data points chosen at random.

    An empty cluster is re-seeded at the point farthest from its current
    centroid. Returns ``(labels, centroids, inertia)``.
    """
    x = np.asarray(features, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    n = x.shape[0]
    if not 1 <= k <= n:
        raise ValidationError(f"need 1 <= k <= n, got k={k}, n={n}")
    rng = np.random.default_rng(seed)
    cent = x[rng.choice(n, size=k, replace=False)].copy()
    labels = None
    for _ in range(max_iters):
        diff = x[:, None, :] - cent[None, :, :]
        sq = np.einsum("ikj,ikj->ik", diff, diff)
        new = np.argmin(sq, axis=1)
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        counts = np.bincount(labels, minlength=k)
        for l in range(k):
            if counts[l]:
                cent[l] = x[labels == l].mean(axis=0)
        for l in np.flatnonzero(counts == 0):
            resid = np.einsum("ij,ij->i", x - cent[labels], x - cent[labels])
            far = int(np.argmax(resid))
            cent[l] = x[far]
            labels[far] = l
    diff = x - cent[labels]
    return labels, cent, float(np.einsum("ij,ij->", diff, diff))


@dataclass(frozen=True)
class FeatureShiftVerdict:
    same: bool
    detail: str = ""


def check_feature_shift_invariance(features, alpha_vector, method: str,
                                   k: int = 2, seed: int = 0) -> FeatureShiftVerdict:
    """Run ``method`` on ``features`` and ``features + alpha_vector`` and compare.

    ``kmeans`` compares label vectors under a shared seed (centroids must
    move by exactly the shift, up to rounding); ``centroid`` and ``ward``
    compare merge sequences and heights.
    """
    x = np.asarray(features, dtype=np.float64)
    shift = np.asarray(alpha_vector, dtype=np.float64)
    if x.ndim != 2 or shift.shape != (x.shape[1],):
        raise ValidationError("alpha_vector must have one entry per feature")
    if not np.all(np.isfinite(shift)):
        raise ValidationError("alpha_vector must be finite")
    moved = x + shift
    if method == "kmeans":
        l0, c0, _ = kmeans(x, k, seed)
        l1, c1, _ = kmeans(moved, k, seed)
        scale = max(1.0, float(np.abs(moved).max()))
        cent_err = float(np.max(np.abs(c1 - c0 - shift)))
        same = np.array_equal(l0, l1) and cent_err <= 1e-9 * scale
        return FeatureShiftVerdict(bool(same), f"centroid error {cent_err:.3g}")
    if method in FEATURE_LINKAGES:
        t0 = feature_linkage(x, method)
        t1 = feature_linkage(moved, method)
        err = float(np.max(np.abs(t1.heights - t0.heights)))
        scale = max(1.0, float(np.abs(t0.heights).max()))
        same = t0.pairs == t1.pairs and err <= 1e-8 * scale
        return FeatureShiftVerdict(bool(same), f"height error {err:.3g}")
    raise ValidationError(f"unknown method {method!r}")


def _as_simplex(v, n: int) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (n,):
        raise ValidationError(f"characteristic vector must have length {n}")
    if np.any(v < 0) or not np.all(np.isfinite(v)):
        raise ValidationError("characteristic vector must be finite and non-negative")
    if abs(v.sum() - 1.0) > 1e-12:
        raise ValidationError(f"characteristic vector must sum to 1, sums to {v.sum()!r}")
    return v


def quadratic_objective(x, v, alpha: float) -> tuple[float, float]:
    """``(v^T X v, v^T (X + alpha * ones) v)`` for a simplex vector ``v``."""
    a = as_similarity(x)
    v = _as_simplex(v, a.shape[0])
    return float(v @ a @ v), float(v @ (a + alpha) @ v)


def replicator_step(x, v) -> np.ndarray:
    """One discrete replicator update ``v_i <- v_i (Xv)_i / (v^T X v)``."""
    a = as_similarity(x)
    v = _as_simplex(v, a.shape[0])
    xv = a @ v
    f = float(v @ xv)
    if f == 0.0:
        raise DegenerateStateError("v^T X v is zero")
    out = v * xv / f
    return out / out.sum()


@dataclass(frozen=True)
class ShiftConstants:
    ratio_assoc_residual: float
    ratio_cut_residual: float


def analytic_shift_constants(x, c, alpha: float, k: int | None = None) -> ShiftConstants:
    """Residuals of the closed-form shift constants of Ratio Assoc and Ratio Cut.

    With every similarity raised by ``alpha`` (diagonal included), Ratio
    Assoc drops by exactly ``alpha * n`` and Ratio Cut rises by exactly
    ``alpha * n * (K - 1)``. Returned residuals are measured minus predicted.
    """
    a = as_similarity(x)
    sol = as_solution(c, k)
    n = sol.n
    up = constant_shift(a, -alpha)
    ra = ratio_assoc_cost(up, sol) - ratio_assoc_cost(a, sol) - (-alpha * n)
    rc = ratio_cut_cost(up, sol) - ratio_cut_cost(a, sol) - alpha * n * (sol.k - 1)
    return ShiftConstants(float(ra), float(rc))
