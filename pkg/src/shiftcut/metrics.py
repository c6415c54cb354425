"""External clustering scores: adjusted Rand, adjusted mutual information, V-measure.

All scores take either a :class:`ContingencyTable` or a pair of label
vectors. Label values may be arbitrary hashables; only the induced
partitions matter. Entropies use natural logarithms.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .errors import ValidationError


@dataclass(frozen=True)
class ContingencyTable:
    """``counts[a, b]`` objects with true class ``a`` and predicted cluster ``b``."""

    counts: np.ndarray

    @property
    def n(self) -> int:
        return int(self.counts.sum())

    @property
    def row_sums(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    @property
    def col_sums(self) -> np.ndarray:
        return self.counts.sum(axis=0)


def contingency(true_labels, pred_labels) -> ContingencyTable:
    t = np.asarray(true_labels)
    p = np.asarray(pred_labels)
    if t.ndim != 1 or p.ndim != 1:
        raise ValidationError("label vectors must be 1-D")
    if t.shape != p.shape:
        raise ValidationError(f"length mismatch: {t.size} true vs {p.size} predicted labels")
    _, ti = np.unique(t, return_inverse=True)
    _, pi = np.unique(p, return_inverse=True)
    counts = np.zeros((ti.max() + 1 if t.size else 0, pi.max() + 1 if p.size else 0), dtype=np.int64)
    np.add.at(counts, (ti.ravel(), pi.ravel()), 1)
    return ContingencyTable(counts)


def _table(t, pred=None) -> ContingencyTable:
    table = t if isinstance(t, ContingencyTable) else contingency(t, pred)
    if table.n < 2:
        raise ValidationError("scores need at least 2 objects")
    return table


def _identical(table: ContingencyTable) -> bool:
    # same partition iff each row and each column has exactly one nonzero cell
    nz = table.counts > 0
    return bool(np.all(nz.sum(axis=0) == 1) and np.all(nz.sum(axis=1) == 1))


def _pairs(x) -> int:
    # exact integer pair counts; Python ints cannot overflow
    return sum(int(v) * (int(v) - 1) // 2 for v in np.ravel(x))


def adjusted_rand(t, pred=None) -> float:
    """Hubert-Arabie adjusted Rand index over object pairs.

    Pair counts are exact integers and the index is formed with a single
    division, so rational values such as -1/2 come out exactly. When the
    expected and maximal index coincide (for example both partitions all
    singletons) the score is 1.0 for identical partitions and 0.0 otherwise.
    """
    table = _table(t, pred)
    index = _pairs(table.counts)
    a = _pairs(table.row_sums)
    b = _pairs(table.col_sums)
    total = _pairs([table.n])
    # (index - a b / total) / ((a + b) / 2 - a b / total), scaled by 2 * total
    num = 2 * (total * index - a * b)
    den = total * (a + b) - 2 * a * b
    if den == 0:
        return 1.0 if _identical(table) else 0.0
    return num / den


def _entropy(counts) -> float:
    c = np.asarray(counts, dtype=np.float64)
    c = c[c > 0]
    p = c / c.sum()
    return float(-np.sum(p * np.log(p)))


def mutual_info(t, pred=None) -> float:
    table = _table(t, pred)
    n = table.n
    c = table.counts.astype(np.float64)
    a = table.row_sums.astype(np.float64)
    b = table.col_sums.astype(np.float64)
    i, j = np.nonzero(c)
    nij = c[i, j]
    return float(max(0.0, np.sum(nij / n * (np.log(nij * n) - np.log(a[i] * b[j])))))


def expected_mutual_info(t, pred=None) -> float:
    """Expected MI between random partitions with the observed cluster sizes.

    Exact sum over the hypergeometric distribution of each cell count.
    """
    table = _table(t, pred)
    n = table.n
    a = table.row_sums.astype(np.int64)
    b = table.col_sums.astype(np.int64)

    def log_fact(m):
        return gammaln(np.asarray(m, dtype=np.float64) + 1.0)

    total = 0.0
    for ai in a:
        for bj in b:
            lo = max(1, ai + bj - n)
            hi = min(ai, bj)
            if lo > hi:
                continue
            nij = np.arange(lo, hi + 1, dtype=np.float64)
            term = nij / n * (np.log(n * nij) - np.log(float(ai) * float(bj)))
            logp = (log_fact(ai) + log_fact(bj) + log_fact(n - ai) + log_fact(n - bj)
                    - log_fact(n) - log_fact(nij) - log_fact(ai - nij)
                    - log_fact(bj - nij) - log_fact(n - ai - bj + nij))
            total += float(np.sum(term * np.exp(logp)))
    return total


_NORMALIZERS = {
    "arithmetic": lambda h1, h2: (h1 + h2) / 2,
    "geometric": lambda h1, h2: np.sqrt(h1 * h2),
    "max": max,
    "min": min,
}


def adjusted_mutual_info(t, pred=None, normalization: str = "arithmetic") -> float:
    """Chance-adjusted MI: ``(MI - E[MI]) / (norm(H_true, H_pred) - E[MI])``.

    Identical partitions score exactly 1.0; any other zero denominator
    gives 0.0, as for the adjusted Rand index.
    """
    if normalization not in _NORMALIZERS:
        raise ValidationError(f"normalization must be one of {sorted(_NORMALIZERS)}")
    table = _table(t, pred)
    if _identical(table):
        return 1.0
    mi = mutual_info(table)
    emi = expected_mutual_info(table)
    norm = _NORMALIZERS[normalization](_entropy(table.row_sums), _entropy(table.col_sums))
    denom = norm - emi
    if abs(denom) < np.finfo(float).eps * max(1.0, norm):
        return 1.0 if _identical(table) else 0.0
    return float((mi - emi) / denom)


@dataclass(frozen=True)
class VMeasure:
    homogeneity: float
    completeness: float
    v: float


def homogeneity_completeness_v(t, pred=None) -> VMeasure:
    table = _table(t, pred)
    if _identical(table):
        return VMeasure(1.0, 1.0, 1.0)
    h_true = _entropy(table.row_sums)
    h_pred = _entropy(table.col_sums)
    mi = mutual_info(table)
    # H(true|pred) = H(true) - MI
    hom = 1.0 if h_true == 0 else 1.0 - (h_true - mi) / h_true
    com = 1.0 if h_pred == 0 else 1.0 - (h_pred - mi) / h_pred
    hom = min(max(hom, 0.0), 1.0)
    com = min(max(com, 0.0), 1.0)
    v = 0.0 if hom + com == 0 else 2 * hom * com / (hom + com)
    return VMeasure(hom, com, v)


def v_measure(t, pred=None) -> float:
    return homogeneity_completeness_v(t, pred).v


def scores(true_labels, pred_labels) -> dict[str, float]:
    """All three scores for one predicted labelling, keyed ``ami``, ``ari``, ``v_measure``."""
    table = contingency(true_labels, pred_labels)
    return {
        "ami": adjusted_mutual_info(table),
        "ari": adjusted_rand(table),
        "v_measure": v_measure(table),
    }
