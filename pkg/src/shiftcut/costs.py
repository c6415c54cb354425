"""Clustering cost functions on a (possibly shifted) similarity matrix.

Conventions shared by every function here:

* intra-cluster sums run over all *ordered* pairs ``(i, j)`` with both
  objects in the cluster, the diagonal ``i == j`` included;
* inter-cluster sums are ordered too, so each undirected cut edge of a
  symmetric matrix is counted twice.

With those conventions the balance term ``alpha * sum_k |O_k|^2`` and the
Min Cut / Correlation Clustering constants close exactly.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConsistencyError, DegeneratePartitionError, ValidationError
from .matrix import adaptive_shift, as_similarity, constant_shift


@dataclass(frozen=True)
class ClusteringSolution:
    """Hard assignment of ``n`` objects to ``k`` clusters labelled ``0..k-1``."""

    labels: np.ndarray
    k: int

    def __post_init__(self):
        labels = np.asarray(self.labels)
        if labels.ndim != 1 or labels.size == 0:
            raise ValidationError("labels must be a non-empty 1-D vector")
        if not np.issubdtype(labels.dtype, np.integer):
            if not np.all(np.equal(np.mod(labels, 1), 0)):
                raise ValidationError("labels must be integers")
        labels = labels.astype(np.int64)
        if self.k < 1:
            raise ValidationError(f"k must be positive, got {self.k}")
        if labels.min() < 0 or labels.max() >= self.k:
            raise ValidationError(f"labels must lie in [0, {self.k}), got range "
                                  f"[{labels.min()}, {labels.max()}]")
        labels.setflags(write=False)
        object.__setattr__(self, "labels", labels)

    @property
    def n(self) -> int:
        return self.labels.size

    @property
    def sizes(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.k)

    def indicator(self) -> np.ndarray:
        """One-hot ``n x k`` membership matrix."""
        z = np.zeros((self.n, self.k))
        z[np.arange(self.n), self.labels] = 1.0
        return z

    def coclustering(self) -> np.ndarray:
        """``H_ij = 1`` iff objects ``i`` and ``j`` share a cluster."""
        return (self.labels[:, None] == self.labels[None, :]).astype(np.int8)


def as_solution(c, k: int | None = None) -> ClusteringSolution:
    if isinstance(c, ClusteringSolution):
        if k is not None and k != c.k:
            return ClusteringSolution(c.labels, k)
        return c
    labels = np.asarray(c)
    if k is None:
        k = int(labels.max()) + 1 if labels.size else 0
    return ClusteringSolution(labels, k)


def _prepare(x, c, k):
    a = as_similarity(x)
    sol = as_solution(c, k)
    if sol.n != a.shape[0]:
        raise ValidationError(f"{sol.n} labels for a {a.shape[0]}-object matrix")
    return a, sol


def block_sums(x, c, k: int | None = None) -> np.ndarray:
    """``B[k, l] = sum_{i in O_k, j in O_l} X_ij`` as a ``k x k`` matrix."""
    a, sol = _prepare(x, c, k)
    z = sol.indicator()
    return z.T @ a @ z


def _intra(a: np.ndarray, sol: ClusteringSolution) -> np.ndarray:
    """Per-cluster intra sums; touches each intra pair once, so O(n^2) for any k."""
    out = np.zeros(sol.k)
    for l in range(sol.k):
        idx = np.flatnonzero(sol.labels == l)
        if idx.size:
            out[l] = a[np.ix_(idx, idx)].sum()
    return out


def min_cut_cost(x, c, k: int | None = None) -> float:
    """Sum of similarities over ordered pairs in different clusters."""
    a, sol = _prepare(x, c, k)
    return float(a.sum() - _intra(a, sol).sum())


def shifted_min_cut_cost(s, c, k: int | None = None) -> float:
    """Negative sum of the (already shifted) similarities inside clusters.

    Differs from :func:`min_cut_cost` on the same matrix by the constant
    ``-s.sum()``.
    """
    a, sol = _prepare(s, c, k)
    return float(-_intra(a, sol).sum())


def correlation_clustering_cost(s, c, k: int | None = None) -> float:
    """Disagreements: negative weight inside clusters plus positive weight across."""
    a, sol = _prepare(s, c, k)
    same = sol.labels[:, None] == sol.labels[None, :]
    absa = np.abs(a)
    inside = 0.5 * float(np.sum((absa - a)[same]))
    across = 0.5 * float(np.sum((absa + a)[~same]))
    return inside + across


def _sizes_nonempty(sol: ClusteringSolution) -> np.ndarray:
    sizes = sol.sizes
    if np.any(sizes == 0):
        raise DegeneratePartitionError(f"empty cluster(s) {np.flatnonzero(sizes == 0).tolist()}")
    return sizes


def ratio_assoc_cost(x, c, k: int | None = None) -> float:
    a, sol = _prepare(x, c, k)
    sizes = _sizes_nonempty(sol)
    return float(-np.sum(_intra(a, sol) / sizes))


def ratio_cut_cost(x, c, k: int | None = None) -> float:
    a, sol = _prepare(x, c, k)
    sizes = _sizes_nonempty(sol)
    b = block_sums(a, sol)
    cut = b.sum(axis=1) - np.diag(b)
    return float(np.sum(cut / sizes))


def normalized_cut_cost(x, c, k: int | None = None) -> float:
    """Sum over clusters of cut weight divided by cluster degree."""
    a, sol = _prepare(x, c, k)
    b = block_sums(a, sol)
    degree = b.sum(axis=1)
    if np.any(degree == 0):
        raise DegeneratePartitionError("cluster with zero degree")
    cut = degree - np.diag(b)
    return float(np.sum(cut / degree))


def adaptive_ratio_cut_cost(x, c, p: float, k: int | None = None) -> float:
    """K-way p-Laplacian ratio cut, summed over unordered cluster pairs.

    At ``p = 2`` this equals :func:`ratio_cut_cost` exactly: the unordered
    pair weight ``1/|O_k| + 1/|O_l|`` splits into one ordered term per side.
    """
    if not p > 1:
        raise ValidationError(f"p must exceed 1, got {p}")
    a, sol = _prepare(x, c, k)
    sizes = _sizes_nonempty(sol).astype(np.float64)
    b = block_sums(a, sol)
    q = 1.0 / (p - 1.0)
    inv = sizes ** -q
    w = (inv[:, None] + inv[None, :]) ** (p - 1.0)
    iu = np.triu_indices(sol.k, 1)
    return float(np.sum(b[iu] * w[iu]))


@dataclass(frozen=True)
class RegularizedCost:
    min_cut: float
    balance: float
    total: float


def regularizer_decomposition(x, c, alpha: float, k: int | None = None,
                              rtol: float = 1e-9) -> RegularizedCost:
    """Min Cut plus ``alpha * sum_k |O_k|^2``, cross-checked against the shifted form.

    The total must equal ``shifted_min_cut_cost(x - alpha) + x.sum()``;
    :class:`ConsistencyError` is raised if it does not.
    """
    a, sol = _prepare(x, c, k)
    mc = min_cut_cost(a, sol)
    balance = float(alpha) * float(np.sum(sol.sizes.astype(np.float64) ** 2))
    total = mc + balance
    via_shift = shifted_min_cut_cost(constant_shift(a, alpha), sol) + float(a.sum())
    scale = max(abs(total), abs(via_shift), float(np.abs(a).sum()), abs(balance), 1.0)
    if abs(total - via_shift) > rtol * scale:
        raise ConsistencyError(f"decomposition mismatch: {total!r} vs {via_shift!r}")
    return RegularizedCost(mc, balance, total)


@dataclass(frozen=True)
class AdaptiveRegularizer:
    from_shifts: float
    closed_form: float


def adaptive_regularizer_value(x, c, k: int | None = None,
                               rtol: float = 1e-8) -> AdaptiveRegularizer:
    """Total adaptive shift absorbed inside clusters, computed two ways.

    ``from_shifts`` sums ``X - adaptive_shift(X)`` over intra-cluster pairs.
    ``closed_form`` is ``(2/n) sum_k |O_k| deg(k) - (beta/n^2) sum_k |O_k|^2``
    with ``deg(k)`` the summed row weight of cluster ``k`` and ``beta`` the
    total weight.
    """
    a, sol = _prepare(x, c, k)
    n = a.shape[0]
    if n < 2:
        raise ValidationError("need at least 2 objects")
    shifts = a - adaptive_shift(a)
    from_shifts = float(_intra(shifts, sol).sum())

    sizes = sol.sizes.astype(np.float64)
    deg = np.bincount(sol.labels, weights=a.sum(axis=1), minlength=sol.k)
    beta = float(a.sum())
    closed = 2.0 / n * float(np.sum(sizes * deg)) - beta / n**2 * float(np.sum(sizes**2))

    scale = max(abs(from_shifts), abs(closed), float(np.abs(a).sum()) / n, 1e-300)
    if abs(from_shifts - closed) > rtol * scale:
        raise ConsistencyError(f"adaptive regularizer mismatch: {from_shifts!r} vs {closed!r}")
    return AdaptiveRegularizer(from_shifts, closed)
