"""Pairwise distance / similarity matrices and the similarity shifts.

Matrices are plain dense ``float64`` ndarrays of shape ``(n, n)``. The
functions here validate on the way in and never modify their arguments.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

#: symmetry tolerance, relative to ``max|X|``
SYMMETRY_RTOL = 1e-9


def _as_square(x, name: str = "matrix") -> np.ndarray:
    a = np.asarray(x, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValidationError(f"{name} must be square, got shape {a.shape}")
    if a.shape[0] < 1:
        raise ValidationError(f"{name} is empty")
    if not np.all(np.isfinite(a)):
        raise ValidationError(f"{name} contains non-finite entries")
    return a


def _check_symmetric(a: np.ndarray, name: str = "matrix") -> None:
    scale = float(np.max(np.abs(a))) if a.size else 0.0
    asym = float(np.max(np.abs(a - a.T))) if a.size else 0.0
    if asym > SYMMETRY_RTOL * max(scale, 1.0):
        raise ValidationError(f"{name} is not symmetric (max |a_ij - a_ji| = {asym:.3g})")


def as_similarity(x, name: str = "similarity matrix") -> np.ndarray:
    """Validate ``x`` as a finite symmetric square matrix and return it as float64."""
    a = _as_square(x, name)
    _check_symmetric(a, name)
    return a


def as_distance(d, name: str = "distance matrix") -> np.ndarray:
    a = as_similarity(d, name)
    if np.any(a < 0):
        raise ValidationError(f"{name} has negative entries")
    if np.any(np.diag(a) != 0):
        raise ValidationError(f"{name} must have a zero diagonal")
    return a


def squared_euclidean_distances(features) -> np.ndarray:
    """Pairwise squared Euclidean distances between the rows of ``features``.

    Computed from explicit differences rather than the ``|a|^2 - 2ab + |b|^2``
    expansion, so the diagonal is exactly zero and the result exactly
    symmetric.
    """
    x = np.asarray(features, dtype=np.float64)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise ValidationError(f"features must be 2-D, got shape {x.shape}")
    if x.shape[0] < 2:
        raise ValidationError("need at least 2 objects")
    if not np.all(np.isfinite(x)):
        raise ValidationError("features contain non-finite values")
    n = x.shape[0]
    d = np.empty((n, n))
    for i in range(n):
        diff = x - x[i]
        d[i] = np.einsum("ij,ij->i", diff, diff)
    return d


def distances_to_similarities(d) -> np.ndarray:
    """Reverse a distance matrix into a similarity matrix.

    ``X_ij = max(D) - D_ij + min(D)`` with max and min taken over every entry
    of ``D``, the zero diagonal included.
    """
    a = as_distance(d)
    if a.shape[0] < 2:
        raise ValidationError("need at least 2 objects")
    return a.max() - a + a.min()


def constant_shift(x, alpha: float) -> np.ndarray:
    """Subtract ``alpha`` from every entry, diagonal included."""
    if not np.isfinite(alpha):
        raise ValidationError(f"alpha must be finite, got {alpha!r}")
    return as_similarity(x) - float(alpha)


def adaptive_shift(x) -> np.ndarray:
    """Double-center ``x`` so that every row and column sums to zero.

    ``S_ij = X_ij - mean_p X_ip - mean_p X_pj + mean_pq X_pq``, i.e.
    ``S = T X T`` with ``T = I - U/n``.
    """
    a = as_similarity(x)
    row = a.mean(axis=1)
    col = a.mean(axis=0)
    s = a - row[:, None] - col[None, :] + a.mean()
    # exact symmetry; the two mean vectors can differ in the last bit
    return 0.5 * (s + s.T)


@dataclass(frozen=True)
class ShiftSpec:
    """Which shift to apply to a similarity matrix.

    ``kind`` is ``"none"``, ``"constant"`` (subtract ``alpha``) or
    ``"adaptive"`` (double centering).
    """

    kind: str = "adaptive"
    alpha: float = 0.0

    def __post_init__(self):
        if self.kind not in ("none", "constant", "adaptive"):
            raise ValidationError(f"unknown shift kind {self.kind!r}")
        if self.kind == "constant" and not np.isfinite(self.alpha):
            raise ValidationError("constant shift requires a finite alpha")

    @classmethod
    def parse(cls, text: str) -> "ShiftSpec":
        """Parse ``none``, ``adaptive`` or ``const:<alpha>``."""
        text = text.strip().lower()
        if text in ("none", "adaptive"):
            return cls(text)
        if text.startswith("const:"):
            try:
                alpha = float(text[6:])
            except ValueError:
                raise ValidationError(f"bad constant shift {text!r}") from None
            return cls("constant", alpha)
        raise ValidationError(f"bad shift spec {text!r}; use none, adaptive or const:<alpha>")

    def apply(self, x) -> np.ndarray:
        if self.kind == "adaptive":
            return adaptive_shift(x)
        if self.kind == "constant":
            return constant_shift(x, self.alpha)
        return as_similarity(x).copy()

    def __str__(self) -> str:
        return f"const:{self.alpha:g}" if self.kind == "constant" else self.kind


@dataclass(frozen=True)
class MatrixDiagnostics:
    n: int
    max_asymmetry: float
    non_finite: int
    min_entry: float
    max_entry: float

    @property
    def ok(self) -> bool:
        scale = max(abs(self.min_entry), abs(self.max_entry), 1.0)
        return self.non_finite == 0 and self.max_asymmetry <= SYMMETRY_RTOL * scale


def validate(x) -> MatrixDiagnostics:
    """Report on a candidate similarity matrix without raising."""
    a = np.asarray(x, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValidationError(f"matrix must be square, got shape {a.shape}")
    finite = np.isfinite(a)
    with np.errstate(invalid="ignore"):
        both = finite & finite.T
        asym = np.abs(a - a.T)[both]
    vals = a[finite]
    return MatrixDiagnostics(
        n=a.shape[0],
        max_asymmetry=float(asym.max()) if asym.size else 0.0,
        non_finite=int(a.size - finite.sum()),
        min_entry=float(vals.min()) if vals.size else float("nan"),
        max_entry=float(vals.max()) if vals.size else float("nan"),
    )
