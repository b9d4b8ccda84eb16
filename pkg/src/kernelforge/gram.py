"""Gram-matrix type, Gaussian base kernels, and the entrywise kernel algebra.

Combined kernels are built from base kernels with entrywise sum and entrywise
(Schur) product only: both operations keep a matrix symmetric positive
semidefinite, so anything assembled from PSD inputs stays a legal kernel.
Matrix multiplication would not, which is why it is absent here.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError, ParameterError, ShapeError

SYMMETRY_TOL = 1e-10
PSD_TOL = 1e-8


def validate_features(features) -> np.ndarray:
    """Check an (items x dims) feature matrix and return it as float64."""
    x = np.asarray(features, dtype=float)
    if x.ndim != 2:
        raise ShapeError(f"feature matrix must be 2-d, got shape {x.shape}")
    m, d = x.shape
    if m < 2:
        raise DataError(f"feature matrix needs at least 2 rows, got {m}")
    if d < 1:
        raise DataError("feature matrix needs at least 1 column")
    if not np.isfinite(x).all():
        raise DataError("feature matrix contains non-finite values")
    return x


@dataclass(frozen=True, eq=False)
class GramMatrix:
    """Symmetric m x m similarity matrix plus a provenance tag.

    Instances are immutable: the array is copied on construction and marked
    read-only, so they are safe to share across parallel workers.
    """

    values: np.ndarray
    source_tag: str = ""

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ShapeError(f"gram matrix must be square, got shape {v.shape}")
        if not np.isfinite(v).all():
            raise DataError("gram matrix contains non-finite entries")
        if v.size and np.max(np.abs(v - v.T)) > SYMMETRY_TOL:
            raise ShapeError(f"gram matrix asymmetric beyond {SYMMETRY_TOL}")
        v = v.copy()
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def size(self) -> int:
        return self.values.shape[0]

    def with_tag(self, tag: str) -> "GramMatrix":
        return GramMatrix(self.values, tag)


@dataclass(frozen=True, eq=False)
class KernelBank:
    """Ordered collection of same-sized base kernels, one per descriptor."""

    kernels: tuple[GramMatrix, ...]
    names: tuple[str, ...]

    def __post_init__(self):
        kernels = tuple(self.kernels)
        names = tuple(self.names)
        if len(kernels) < 1:
            raise DataError("kernel bank must hold at least one kernel")
        if len(names) != len(kernels):
            raise DataError("kernel bank needs one name per kernel")
        sizes = {k.size for k in kernels}
        if len(sizes) != 1:
            raise ShapeError(f"kernel bank members disagree on size: {sorted(sizes)}")
        object.__setattr__(self, "kernels", kernels)
        object.__setattr__(self, "names", names)

    @property
    def size(self) -> int:
        return self.kernels[0].size

    def __len__(self) -> int:
        return len(self.kernels)

    def __getitem__(self, i: int) -> GramMatrix:
        return self.kernels[i]


def _pairwise_sq_dists(x: np.ndarray) -> np.ndarray:
    n = np.einsum("ij,ij->i", x, x)
    sq = n[:, None] + n[None, :] - 2.0 * (x @ x.T)
    np.clip(sq, 0.0, None, out=sq)
    return sq


def gaussian_gram(features, gamma: float, name: str = "") -> GramMatrix:
    """G[i,j] = exp(-gamma * ||x_i - x_j||^2), unit diagonal, PSD."""
    x = validate_features(features)
    if not np.isfinite(gamma) or gamma <= 0:
        raise ParameterError(f"gamma must be positive and finite, got {gamma}")
    g = np.exp(-gamma * _pairwise_sq_dists(x))
    g = 0.5 * (g + g.T)
    np.fill_diagonal(g, 1.0)
    return GramMatrix(g, name)


def median_heuristic_gamma(features) -> float:
    """Bandwidth 1 / median of the nonzero pairwise squared distances."""
    x = validate_features(features)
    sq = _pairwise_sq_dists(x)
    pair = sq[np.triu_indices(x.shape[0], k=1)]
    nonzero = pair[pair > 0.0]
    if nonzero.size == 0:
        raise DataError("all pairwise distances are zero; no usable bandwidth")
    return float(1.0 / np.median(nonzero))


def _require_same_size(a: GramMatrix, b: GramMatrix) -> None:
    if a.size != b.size:
        raise ShapeError(f"gram size mismatch: {a.size} vs {b.size}")


def add(a: GramMatrix, b: GramMatrix) -> GramMatrix:
    """Entrywise sum; symmetry and PSD are preserved."""
    _require_same_size(a, b)
    return GramMatrix(a.values + b.values)


def multiply(a: GramMatrix, b: GramMatrix) -> GramMatrix:
    """Entrywise (Schur) product; PSD by the Schur product theorem."""
    _require_same_size(a, b)
    return GramMatrix(a.values * b.values)


def normalize(g: GramMatrix) -> GramMatrix:
    """Rescale to unit diagonal: G[i,j] / sqrt(G[i,i] * G[j,j])."""
    d = np.diag(g.values)
    if np.any(d <= 0):
        raise DataError("cannot normalize a kernel with a nonpositive diagonal entry")
    s = np.sqrt(d)
    v = g.values / np.outer(s, s)
    np.fill_diagonal(v, 1.0)
    return GramMatrix(v, g.source_tag)


def check_psd(g, tol: float = PSD_TOL) -> bool:
    """True iff the smallest eigenvalue is >= -tol.

    Accepts a GramMatrix or a raw square array; raw input asymmetric beyond
    1e-8 is rejected.
    """
    v = g.values if isinstance(g, GramMatrix) else np.asarray(g, dtype=float)
    if v.ndim != 2 or v.shape[0] != v.shape[1]:
        raise ShapeError(f"expected a square matrix, got shape {v.shape}")
    if v.size and np.max(np.abs(v - v.T)) > 1e-8:
        raise ShapeError("matrix asymmetric beyond 1e-8")
    w = np.linalg.eigvalsh(0.5 * (v + v.T))
    return bool(w[0] >= -tol)


def submatrix(g, row_idx, col_idx) -> np.ndarray:
    """G[row_idx x col_idx] as a plain array (train x train, test x train blocks)."""
    v = g.values if isinstance(g, GramMatrix) else np.asarray(g, dtype=float)
    m = v.shape[0]
    rows = np.asarray(row_idx, dtype=int)
    cols = np.asarray(col_idx, dtype=int)
    for name, idx in (("row", rows), ("column", cols)):
        if idx.size and (idx.min() < 0 or idx.max() >= m):
            raise IndexError(f"{name} index out of range for size {m}")
    return v[np.ix_(rows, cols)]


def build_bank(feature_sets, names=None, gammas=None) -> tuple[KernelBank, list[float]]:
    """Gaussian kernel per descriptor matrix, normalized, plus the gammas used.

    gammas may be None (median heuristic per descriptor), a scalar applied to
    all descriptors, or a sequence with one entry per descriptor where None
    entries again fall back to the median heuristic.
    """
    feature_sets = list(feature_sets)
    if names is None:
        names = [f"K{i + 1}" for i in range(len(feature_sets))]
    names = list(names)
    if len(names) != len(feature_sets):
        raise ParameterError("need one name per descriptor matrix")
    if gammas is None or np.isscalar(gammas):
        gammas = [gammas] * len(feature_sets)
    gammas = list(gammas)
    if len(gammas) != len(feature_sets):
        raise ParameterError("need one gamma per descriptor matrix")

    kernels, used = [], []
    for x, name, gamma in zip(feature_sets, names, gammas):
        g = median_heuristic_gamma(x) if gamma is None else float(gamma)
        kernels.append(normalize(gaussian_gram(x, g, name)))
        used.append(g)
    return KernelBank(tuple(kernels), tuple(names)), used
