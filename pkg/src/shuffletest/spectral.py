"""Spectral embedding of adjacency-like matrices and related alignments."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg

from .graphs import Graph

# Full symmetric eigendecomposition up to this size; implicitly restarted
# Lanczos above it.  Both paths agree to solver tolerance on the top pairs.
DENSE_EIG_LIMIT = 2048

# Relative gap below which the trailing retained subspace is flagged as
# rotationally ambiguous.
GAP_TOLERANCE = 1e-8


@dataclass(frozen=True)
class Embedding:
    """Scaled spectral embedding, columns ordered by decreasing singular value."""

    positions: np.ndarray
    singular_values: np.ndarray
    gap_ambiguous: bool = False

    @property
    def n(self) -> int:
        return self.positions.shape[0]

    @property
    def d(self) -> int:
        return self.positions.shape[1]


@dataclass(frozen=True)
class ScreeProfile:
    """Leading singular values of a symmetric matrix, nonincreasing."""

    values: np.ndarray

    def __post_init__(self):
        v = np.ascontiguousarray(np.asarray(self.values, dtype=float))
        if v.ndim != 1 or v.size == 0:
            raise ValueError("a scree profile needs at least one value")
        if v.min() < 0:
            raise ValueError("singular values are nonnegative")
        if np.any(np.diff(v) > 1e-12 * max(1.0, v[0])):
            raise ValueError("scree values must be nonincreasing")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_matrix(cls, m, n_values: int | None = None) -> "ScreeProfile":
        m = _as_symmetric(m)
        n = m.shape[0]
        if n_values is None:
            if n > DENSE_EIG_LIMIT:
                raise ValueError("pass n_values explicitly for large matrices")
            n_values = n
        vals, _ = _top_magnitude_eigs(m, min(n_values, n))
        return cls(np.sort(np.abs(vals))[::-1])


def _as_symmetric(m) -> np.ndarray:
    if isinstance(m, Graph):
        return m.dense()
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("expected a square matrix")
    if not np.allclose(m, m.T, atol=1e-10):
        raise ValueError("expected a symmetric matrix")
    return m


def _top_magnitude_eigs(m: np.ndarray, k: int, method: str = "auto"):
    """Top-k eigenpairs of a symmetric matrix ordered by |eigenvalue|."""
    n = m.shape[0]
    use_dense = method == "dense" or (method == "auto" and (n <= DENSE_EIG_LIMIT or k >= n - 1))
    if method == "iterative" and k >= n - 1:
        use_dense = True
    if use_dense:
        w, v = np.linalg.eigh(m)
    else:
        # fixed start vector keeps the Lanczos iteration reproducible
        v0 = np.full(n, 1.0 / np.sqrt(n))
        w, v = scipy.sparse.linalg.eigsh(m, k=k, which="LM", v0=v0)
    order = np.argsort(-np.abs(w), kind="stable")[:k]
    return w[order], v[:, order]


def _fix_signs(vecs: np.ndarray) -> np.ndarray:
    """Deterministic sign convention: largest-magnitude entry positive."""
    vecs = vecs.copy()
    for j in range(vecs.shape[1]):
        lead = np.argmax(np.abs(vecs[:, j]))
        if vecs[lead, j] < 0:
            vecs[:, j] = -vecs[:, j]
    return vecs


def ase(m, d: int, method: str = "auto") -> Embedding:
    """Adjacency spectral embedding into d dimensions.

    Takes the d largest-magnitude eigenpairs of the symmetric input and
    scales the eigenvectors by the square roots of the absolute eigenvalues
    (the singular values of the matrix).  A near-tie between the d-th and
    (d+1)-th singular values leaves the trailing directions rotationally
    ambiguous; that condition sets ``gap_ambiguous`` and emits a warning
    rather than failing.
    """
    m = _as_symmetric(m)
    n = m.shape[0]
    if not 1 <= d <= n:
        raise ValueError(f"embedding dimension must satisfy 1 <= d <= {n}")
    k = min(d + 1, n)
    vals, vecs = _top_magnitude_eigs(m, k, method=method)
    svals = np.abs(vals)
    ambiguous = False
    if k > d:
        scale = max(svals[0], 1.0)
        if svals[d - 1] - svals[d] <= GAP_TOLERANCE * scale:
            ambiguous = True
            warnings.warn(
                "singular values d and d+1 coincide within tolerance; "
                "the trailing embedding directions are rotationally ambiguous",
                RuntimeWarning,
                stacklevel=2,
            )
    vecs = _fix_signs(vecs[:, :d])
    positions = vecs * np.sqrt(svals[:d])
    return Embedding(positions, svals[:d], ambiguous)


def select_dimension(scree: ScreeProfile, d_max: int | None = None) -> int:
    """Profile-likelihood elbow of a scree profile.

    Each candidate split d models the leading d values and the remainder as
    two Gaussians with a common variance; the returned dimension maximizes
    the profile log-likelihood, which reduces to minimizing the pooled
    within-group sum of squares.  Ties break toward the smaller dimension.
    """
    vals = scree.values
    p = vals.size
    if p < 2:
        raise ValueError("dimension selection needs at least two scree values")
    if d_max is None:
        d_max = int(np.ceil(p / 2))
    top = min(int(d_max), p - 1)
    if top < 1:
        raise ValueError("d_max must allow at least one dimension")
    best_d, best_ss = None, np.inf
    for d in range(1, top + 1):
        head, tail = vals[:d], vals[d:]
        ss = float(((head - head.mean()) ** 2).sum() + ((tail - tail.mean()) ** 2).sum())
        tie = 1e-12 * max(1.0, best_ss) if np.isfinite(best_ss) else 0.0
        if best_d is None or ss < best_ss - tie:
            best_d, best_ss = d, ss
    return best_d


def probability_estimate(g, d: int, method: str = "auto") -> np.ndarray:
    """Low-rank edge-probability estimate X̂X̂ᵀ from the spectral embedding.

    Entries are deliberately not clipped to [0, 1]: the test statistics are
    Frobenius differences of the raw estimate and clipping would bias them.
    """
    emb = ase(g, d, method=method)
    return emb.positions @ emb.positions.T


def omnibus_matrix(a, b) -> np.ndarray:
    """2n x 2n joint matrix with the two inputs on the diagonal blocks and
    their elementwise mean off the diagonal."""
    ma, mb = _as_symmetric(a), _as_symmetric(b)
    if ma.shape != mb.shape:
        raise ValueError("omnibus inputs must share a vertex set")
    avg = (ma + mb) / 2.0
    return np.block([[ma, avg], [avg, mb]])


def omnibus_embed(a, b, d: int, method: str = "auto"):
    """Joint spectral embedding of two graphs; returns the two row blocks.

    The joint construction aligns the embeddings by structure, so the blocks
    are directly comparable without a Procrustes step.
    """
    m = omnibus_matrix(a, b)
    emb = ase(m, d, method=method)
    n = m.shape[0] // 2
    return emb.positions[:n], emb.positions[n:]


def procrustes_align(x: np.ndarray, y: np.ndarray):
    """Best orthogonal map W of x onto y and the residual ‖xW − y‖_F.

    W is the polar factor of xᵀy; any valid polar factor is accepted in the
    degenerate (rank-deficient) case.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ValueError("procrustes inputs must have matching shapes")
    u, _, vt = np.linalg.svd(x.T @ y)
    w = u @ vt
    residual = float(np.linalg.norm(x @ w - y))
    return w, residual
