"""Graph containers, edge-independent random-graph models, and label shuffles."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .rng import StreamKey


@dataclass(frozen=True)
class Graph:
    """Simple undirected graph stored as a dense symmetric 0/1 matrix.

    The adjacency matrix is validated to be square, symmetric, binary and
    hollow (zero diagonal), then frozen read-only so instances can be shared
    across concurrent workers.
    """

    adjacency: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.adjacency)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("adjacency must be a square matrix")
        if not np.array_equal(a, a.T):
            raise ValueError("adjacency must be symmetric")
        if a.size and np.diag(a).any():
            raise ValueError("adjacency must be hollow (zero diagonal)")
        if not np.isin(a, (0, 1)).all():
            raise ValueError("adjacency entries must be 0 or 1")
        a = np.ascontiguousarray(a, dtype=np.uint8)
        a.setflags(write=False)
        object.__setattr__(self, "adjacency", a)

    @property
    def n(self) -> int:
        return self.adjacency.shape[0]

    def dense(self) -> np.ndarray:
        """Writable float copy, for linear algebra."""
        return self.adjacency.astype(float)

    def edge_count(self) -> int:
        return int(self.adjacency.sum()) // 2


@dataclass(frozen=True)
class Permutation:
    """Bijection on vertex labels, ``mapping[i]`` = new label of vertex ``i``."""

    mapping: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.mapping, dtype=np.intp)
        if m.ndim != 1:
            raise ValueError("mapping must be one-dimensional")
        n = m.shape[0]
        if n and (m.min() < 0 or m.max() >= n or np.bincount(m, minlength=n).max() != 1):
            raise ValueError("mapping is not a bijection on [0, n)")
        m = np.ascontiguousarray(m)
        m.setflags(write=False)
        object.__setattr__(self, "mapping", m)

    @classmethod
    def identity(cls, n: int) -> "Permutation":
        return cls(np.arange(n))

    @property
    def n(self) -> int:
        return self.mapping.shape[0]

    @property
    def support(self) -> frozenset[int]:
        """Set of moved vertices."""
        moved = np.nonzero(self.mapping != np.arange(self.n))[0]
        return frozenset(int(i) for i in moved)

    def inverse(self) -> "Permutation":
        return Permutation(np.argsort(self.mapping))

    def compose(self, other: "Permutation") -> "Permutation":
        """Composition self∘other: apply ``other`` first, then ``self``."""
        if self.n != other.n:
            raise ValueError("size mismatch in composition")
        return Permutation(self.mapping[other.mapping])

    def matrix(self) -> np.ndarray:
        """Permutation matrix Q with Q[mapping[i], i] = 1."""
        q = np.zeros((self.n, self.n))
        q[self.mapping, np.arange(self.n)] = 1.0
        return q

    def conjugate(self, m: np.ndarray) -> np.ndarray:
        """Q M Qᵀ: relabel both axes of a square matrix by this permutation."""
        if m.shape != (self.n, self.n):
            raise ValueError("matrix size does not match permutation size")
        inv = np.argsort(self.mapping)
        return m[np.ix_(inv, inv)]

    def permute_rows(self, x: np.ndarray) -> np.ndarray:
        """Q X: row ``mapping[i]`` of the result is row ``i`` of ``x``."""
        if x.shape[0] != self.n:
            raise ValueError("row count does not match permutation size")
        return x[np.argsort(self.mapping)]


def shuffle_graph(g: Graph, q: Permutation) -> Graph:
    """Relabel the vertices of ``g``: output[q(i), q(j)] equals g[i, j]."""
    if q.n != g.n:
        raise ValueError(f"permutation size {q.n} does not match graph size {g.n}")
    return Graph(q.conjugate(g.adjacency))


@dataclass(frozen=True)
class SbmSpec:
    """Stochastic block model with contiguous block membership.

    Vertices 0..sizes[0]-1 form block 0, the next sizes[1] block 1, and so
    on.  Arbitrary membership vectors go through :meth:`from_memberships`,
    which returns the relabeling needed to map back to the original labels.
    """

    block_probs: np.ndarray
    sizes: tuple[int, ...]
    sparsity: float = 1.0

    def __post_init__(self):
        lam = np.asarray(self.block_probs, dtype=float)
        sizes = tuple(int(s) for s in self.sizes)
        if lam.ndim != 2 or lam.shape[0] != lam.shape[1]:
            raise ValueError("block probability matrix must be square")
        if lam.shape[0] != len(sizes):
            raise ValueError("one size per block is required")
        if not np.allclose(lam, lam.T):
            raise ValueError("block probability matrix must be symmetric")
        if lam.min() < 0 or lam.max() > 1:
            raise ValueError("block probabilities must lie in [0, 1]")
        if any(s <= 0 for s in sizes):
            raise ValueError("block sizes must be positive")
        if not 0 <= self.sparsity <= 1:
            raise ValueError("sparsity must lie in [0, 1]")
        lam = np.ascontiguousarray(lam)
        lam.setflags(write=False)
        object.__setattr__(self, "block_probs", lam)
        object.__setattr__(self, "sizes", sizes)
        object.__setattr__(self, "sparsity", float(self.sparsity))

    @property
    def n_blocks(self) -> int:
        return len(self.sizes)

    @property
    def n(self) -> int:
        return sum(self.sizes)

    def memberships(self) -> np.ndarray:
        """Block index of each vertex."""
        return np.repeat(np.arange(self.n_blocks), self.sizes)

    @classmethod
    def from_memberships(cls, block_probs, memberships, sparsity: float = 1.0):
        """Adapt an arbitrary membership vector to the contiguous layout.

        Returns ``(spec, relabel)`` where ``relabel.mapping[i]`` is the
        contiguous index assigned to original vertex ``i``; apply
        ``relabel.inverse()`` to a graph sampled from ``spec`` to recover the
        original labels.
        """
        memberships = np.asarray(memberships, dtype=np.intp)
        k = np.asarray(block_probs).shape[0]
        if memberships.min(initial=0) < 0 or memberships.max(initial=-1) >= k:
            raise ValueError("membership labels must index blocks")
        order = np.argsort(memberships, kind="stable")
        relabel = np.empty(memberships.shape[0], dtype=np.intp)
        relabel[order] = np.arange(memberships.shape[0])
        sizes = tuple(int(c) for c in np.bincount(memberships, minlength=k))
        if any(s == 0 for s in sizes):
            raise ValueError("every block must contain at least one vertex")
        return cls(block_probs, sizes, sparsity), Permutation(relabel)


@dataclass(frozen=True)
class LatentPositions:
    """Latent position matrix for a random dot product graph."""

    positions: np.ndarray
    sparsity: float = 1.0

    def __post_init__(self):
        x = np.ascontiguousarray(np.asarray(self.positions, dtype=float))
        if x.ndim != 2:
            raise ValueError("positions must be an n x d matrix")
        if not 0 <= self.sparsity <= 1:
            raise ValueError("sparsity must lie in [0, 1]")
        gram = self.sparsity * (x @ x.T)
        bad = (gram < -1e-9) | (gram > 1 + 1e-9)
        if bad.any():
            i, j = np.argwhere(bad)[0]
            raise ValueError(
                f"edge probability {gram[i, j]:.6g} at pair ({i}, {j}) lies outside [0, 1]"
            )
        x.setflags(write=False)
        object.__setattr__(self, "positions", x)
        object.__setattr__(self, "sparsity", float(self.sparsity))

    @property
    def n(self) -> int:
        return self.positions.shape[0]

    @property
    def d(self) -> int:
        return self.positions.shape[1]


@dataclass(frozen=True)
class DirichletLatentModel:
    """Latent-position model with i.i.d. Dirichlet rows and pinned rows.

    ``fixed`` lists ``(row_index, row_value)`` pairs that override the
    Dirichlet draw; all remaining rows are i.i.d. Dirichlet(concentration).
    """

    n: int
    concentration: tuple[float, ...]
    fixed: tuple[tuple[int, tuple[float, ...]], ...] = ()
    sparsity: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "concentration", tuple(float(a) for a in self.concentration))
        fixed = tuple(
            (int(i), tuple(float(v) for v in row)) for i, row in self.fixed
        )
        object.__setattr__(self, "fixed", fixed)
        if any(not 0 <= i < self.n for i, _ in fixed):
            raise ValueError("fixed row index out of range")
        if len({i for i, _ in fixed}) != len(fixed):
            raise ValueError("duplicate fixed row index")

    @property
    def d(self) -> int:
        return len(self.concentration)

    def sample_latents(self, stream: StreamKey) -> LatentPositions:
        fixed = [(i, np.asarray(row)) for i, row in self.fixed]
        return sample_dirichlet_latents(self.n, self.concentration, fixed, stream,
                                        sparsity=self.sparsity)


@dataclass(frozen=True)
class ErrorSpec:
    """Perturbation added to an edge-probability matrix under the alternative.

    Two kinds are supported: a constant shift of every entry, and a bordered
    block touching only the first ``rows`` vertices, whose entries have
    magnitude between ``lower * magnitude`` and ``upper * magnitude``.
    """

    kind: str
    magnitude: float
    rows: int | None = None
    lower: float | None = None
    upper: float | None = None

    def __post_init__(self):
        if self.kind not in ("constant", "block"):
            raise ValueError("kind must be 'constant' or 'block'")
        if self.kind == "block":
            if self.rows is None or self.rows < 1:
                raise ValueError("block kind requires a positive row count")
            if self.lower is None or self.upper is None or not 0 < self.lower < self.upper:
                raise ValueError("block kind requires magnitude bounds 0 < lower < upper")

    @classmethod
    def constant(cls, magnitude: float) -> "ErrorSpec":
        return cls("constant", float(magnitude))

    @classmethod
    def block_bordered(cls, rows: int, magnitude: float, lower: float, upper: float) -> "ErrorSpec":
        return cls("block", float(magnitude), int(rows), float(lower), float(upper))


def error_matrix(err: ErrorSpec, n: int, stream: StreamKey | None = None) -> np.ndarray:
    """Materialize the symmetric n x n perturbation described by ``err``."""
    if err.kind == "constant":
        return np.full((n, n), err.magnitude)
    if stream is None:
        raise ValueError("block-bordered errors require a stream to draw entries")
    r = err.rows
    if r > n:
        raise ValueError("perturbed row count exceeds matrix size")
    rng = stream.generator()
    scale = abs(err.magnitude)
    mags = rng.uniform(err.lower * scale, err.upper * scale, size=(n, n))
    signs = np.where(rng.random((n, n)) < 0.5, -1.0, 1.0)
    e = np.triu(mags * signs)
    e = e + np.triu(e, 1).T
    e[r:, r:] = 0.0
    return e


def _probability_surface(model, err: ErrorSpec | None, stream: StreamKey | None):
    if isinstance(model, SbmSpec):
        b = model.memberships()
        base = model.block_probs[np.ix_(b, b)]
        nu = model.sparsity
    elif isinstance(model, LatentPositions):
        base = model.positions @ model.positions.T
        nu = model.sparsity
    else:
        raise TypeError(f"unsupported model type {type(model).__name__}")
    if err is not None:
        base = base + error_matrix(err, base.shape[0], stream)
    return nu * base


def expectation_matrix(model, err: ErrorSpec | None = None,
                       stream: StreamKey | None = None) -> np.ndarray:
    """Edge-probability matrix of a model, optionally shifted by ``err``.

    The diagonal is retained as computed; it is an expectation surface only
    and never drives sampling.  Any entry outside [0, 1] raises, naming the
    offending pair.
    """
    p = _probability_surface(model, err, stream)
    bad = (p < -1e-12) | (p > 1 + 1e-12)
    if bad.any():
        i, j = np.argwhere(bad)[0]
        raise ValueError(
            f"edge probability {p[i, j]:.6g} at pair ({i}, {j}) lies outside [0, 1]"
        )
    return np.clip(p, 0.0, 1.0)


def sample_bernoulli_graph(probs: np.ndarray, stream: StreamKey) -> Graph:
    """Independent-edge graph: each unordered pair {i, j} appears w.p. probs[i, j]."""
    p = np.asarray(probs, dtype=float)
    n = p.shape[0]
    if p.shape != (n, n):
        raise ValueError("probability matrix must be square")
    iu = np.triu_indices(n, k=1)
    off = p[iu]
    if off.size and (off.min() < 0 or off.max() > 1):
        raise ValueError("edge probabilities must lie in [0, 1]")
    rng = stream.generator()
    a = np.zeros((n, n), dtype=np.uint8)
    a[iu] = rng.random(iu[0].size) < off
    a |= a.T
    return Graph(a)


def sample_sbm(spec: SbmSpec, stream: StreamKey) -> Graph:
    """Draw one stochastic block model graph."""
    return sample_bernoulli_graph(expectation_matrix(spec), stream)


def sample_rdpg(lat: LatentPositions, stream: StreamKey) -> Graph:
    """Draw one random dot product graph."""
    return sample_bernoulli_graph(expectation_matrix(lat), stream)


def sample_dirichlet_latents(n: int, alpha, fixed, stream: StreamKey, *,
                             sparsity: float = 1.0) -> LatentPositions:
    """Latent positions with i.i.d. Dirichlet(alpha) rows and pinned rows.

    ``fixed`` is a sequence of ``(row_index, row_value)`` pairs; each pinned
    row must lie on the probability simplex.
    """
    alpha = np.asarray(alpha, dtype=float)
    rng = stream.generator()
    x = rng.dirichlet(alpha, size=n)
    for idx, row in fixed:
        row = np.asarray(row, dtype=float)
        if row.shape != (alpha.size,):
            raise ValueError(f"fixed row {idx} has wrong dimension")
        if row.min() < 0 or abs(row.sum() - 1.0) > 1e-9:
            raise ValueError(f"fixed row {idx} does not lie on the simplex")
        x[idx] = row
    return LatentPositions(x, sparsity)


def block_shuffle_permutation(n1: int, n2: int, rest: int, k: int) -> Permutation:
    """Swap the first k/2 vertices of block 1 with the first k/2 of block 2.

    Vertex i and vertex n1+i trade labels for i = 0..k/2-1; everything else
    is fixed.  The result is an involution.
    """
    if k % 2 != 0 or k < 0:
        raise ValueError("swap budget k must be a nonnegative even integer")
    half = k // 2
    if half > min(n1, n2):
        raise ValueError(f"k/2 = {half} exceeds a block size (n1={n1}, n2={n2})")
    mapping = np.arange(n1 + n2 + rest)
    mapping[:half] = np.arange(n1, n1 + half)
    mapping[n1:n1 + half] = np.arange(half)
    return Permutation(mapping)


def canonical_block_shuffle(spec: SbmSpec, k: int) -> Permutation:
    """Block shuffle between the first two blocks of an SBM."""
    if spec.n_blocks < 2:
        raise ValueError("block shuffles require at least two blocks")
    n1, n2 = spec.sizes[0], spec.sizes[1]
    return block_shuffle_permutation(n1, n2, spec.n - n1 - n2, k)


def random_derangement(n: int, unknown, stream: StreamKey) -> Permutation:
    """Uniform derangement of ``unknown``, fixing every other vertex.

    Sampling is by rejection from uniform permutations of the unknown set,
    which preserves uniformity at an expected cost of about e retries.
    """
    unknown = np.asarray(sorted(int(u) for u in unknown), dtype=np.intp)
    if unknown.size == 1:
        raise ValueError("no derangement exists for a single unknown vertex")
    mapping = np.arange(n)
    if unknown.size == 0:
        return Permutation(mapping)
    if unknown.size and (unknown.min() < 0 or unknown.max() >= n):
        raise ValueError("unknown vertices must lie in [0, n)")
    rng = stream.generator()
    while True:
        perm = rng.permutation(unknown.size)
        if not np.any(perm == np.arange(unknown.size)):
            break
    mapping[unknown] = unknown[perm]
    return Permutation(mapping)


def nested_permutation_sequence(n: int, u_order, k_list, stream: StreamKey) -> list[Permutation]:
    """One shuffle per budget k, deranging the first k vertices of ``u_order``.

    The moved sets are nested across the sequence because each budget
    deranges a prefix of the same fixed ordering; the derangements
    themselves are drawn independently per budget.
    """
    u_order = np.asarray([int(u) for u in u_order], dtype=np.intp)
    k_list = [int(k) for k in k_list]
    if any(b > a for a, b in zip(k_list[1:], k_list)):
        raise ValueError("budgets must be nondecreasing")
    if any(k == 1 for k in k_list):
        raise ValueError("a budget of one admits no derangement")
    if k_list and max(k_list) > u_order.size:
        raise ValueError("budget exceeds the number of unknown vertices")
    rng = stream.generator()
    out = []
    for k in k_list:
        mapping = np.arange(n)
        if k > 0:
            prefix = u_order[:k]
            while True:
                perm = rng.permutation(k)
                if not np.any(perm == np.arange(k)):
                    break
            mapping[prefix] = prefix[perm]
        out.append(Permutation(mapping))
    return out
