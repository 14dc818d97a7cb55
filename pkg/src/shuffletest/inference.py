"""Critical values, Monte Carlo power estimation, and bootstrap harnesses."""

from __future__ import annotations

from dataclasses import dataclass
from math import ceil, sqrt

import numpy as np

from .graphs import (
    DirichletLatentModel,
    Graph,
    LatentPositions,
    Permutation,
    SbmSpec,
    canonical_block_shuffle,
    expectation_matrix,
    nested_permutation_sequence,
    sample_bernoulli_graph,
    shuffle_graph,
)
from .rng import StreamKey
from .spectral import (
    ScreeProfile,
    ase,
    probability_estimate,
    procrustes_align,
    select_dimension,
)
from .stats import resolve_statistic, t_normalized, t_omni


@dataclass(frozen=True)
class NullDistribution:
    """Sorted sample of a statistic's null distribution."""

    samples: np.ndarray
    provenance: str = "direct-mc"

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float)
        if s.ndim != 1 or s.size == 0:
            raise ValueError("a null distribution needs at least one sample")
        if not np.isfinite(s).all():
            raise ValueError("null samples must be finite")
        s = np.sort(s)
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)
        if self.provenance not in ("direct-mc", "bootstrap"):
            raise ValueError("provenance must be 'direct-mc' or 'bootstrap'")

    @property
    def size(self) -> int:
        return self.samples.size


def empirical_critical_value(null: NullDistribution, alpha: float) -> float:
    """Conservative finite-sample critical value.

    Returns the ceil((1-alpha)(B+1))-th order statistic of the B null
    samples, or the maximum sample when that index exceeds B.  Rejection is
    by strict inequality.
    """
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    b = null.size
    idx = ceil((1.0 - alpha) * (b + 1))
    if idx > b:
        return float(null.samples[-1])
    return float(null.samples[idx - 1])


@dataclass(frozen=True)
class PowerEstimate:
    """Rejection proportion with its binomial standard error."""

    power: float
    se: float
    n_reps: int

    def __post_init__(self):
        if not 0.0 <= self.power <= 1.0:
            raise ValueError("power must lie in [0, 1]")
        if self.n_reps < 1:
            raise ValueError("n_reps must be positive")
        expected = sqrt(self.power * (1.0 - self.power) / self.n_reps)
        if abs(self.se - expected) > 1e-12:
            raise ValueError("se must equal sqrt(power*(1-power)/n_reps)")

    @classmethod
    def from_rejections(cls, n_reject: int, n_reps: int) -> "PowerEstimate":
        p = n_reject / n_reps
        return cls(p, sqrt(p * (1.0 - p) / n_reps), n_reps)


@dataclass(frozen=True)
class ShuffleGrid:
    """Shuffle budgets: for each null budget k, the alternative budgets l <= k."""

    rows: tuple[tuple[int, tuple[int, ...]], ...]

    def __post_init__(self):
        rows = tuple(
            (int(k), tuple(int(l) for l in ells)) for k, ells in self.rows
        )
        for k, ells in rows:
            if k < 0:
                raise ValueError("budgets must be nonnegative")
            if any(l > k or l < 0 for l in ells):
                raise ValueError(f"every l must satisfy 0 <= l <= k (k={k})")
        object.__setattr__(self, "rows", rows)

    @classmethod
    def from_budgets(cls, k_values, ell_values=None) -> "ShuffleGrid":
        """Grid with the given k budgets; by default l ranges over
        {0} ∪ k_values restricted to l <= k."""
        k_values = sorted(int(k) for k in k_values)
        if ell_values is None:
            candidates = sorted({0, *k_values})
        else:
            candidates = sorted(int(l) for l in ell_values)
        rows = tuple((k, tuple(l for l in candidates if l <= k)) for k in k_values)
        return cls(rows)

    def items(self):
        return self.rows

    def budgets(self) -> list[int]:
        """Sorted union of all k and l budgets."""
        out = set()
        for k, ells in self.rows:
            out.add(k)
            out.update(ells)
        return sorted(out)


@dataclass(frozen=True)
class ExperimentConfig:
    """Declarative description of one power experiment."""

    null_model: object
    statistics: tuple[str, ...]
    grid: ShuffleGrid
    alt_model: object | None = None
    error: ErrorSpec | None = None
    alpha: float = 0.05
    d: int | None = None
    d_mode: str = "fixed"
    n_mc: int = 200
    n_boot: int = 200
    n_mc_outer: int = 50
    n_mc_inner: int = 100
    shuffle_mode: str = "auto"
    measure_level: bool = True
    master_seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "statistics", tuple(self.statistics))
        if not self.statistics:
            raise ValueError("at least one statistic is required")
        for name in self.statistics:
            resolve_statistic(name)
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        for label, count in (("n_mc", self.n_mc), ("n_boot", self.n_boot),
                             ("n_mc_outer", self.n_mc_outer),
                             ("n_mc_inner", self.n_mc_inner)):
            if count < 1:
                raise ValueError(f"{label} must be positive")
        if self.d_mode not in ("fixed", "elbow"):
            raise ValueError("d_mode must be 'fixed' or 'elbow'")
        if self.shuffle_mode not in ("auto", "block", "derangement"):
            raise ValueError("shuffle_mode must be 'auto', 'block' or 'derangement'")
        needs_d = any(s in ("phat", "semipar", "omni") for s in self.statistics)
        if needs_d and self.d_mode == "fixed" and self.d is None:
            raise ValueError("embedding statistics need d in fixed d_mode")


@dataclass(frozen=True)
class CellEstimate:
    """Power (and optionally achieved level) of one grid cell."""

    power: PowerEstimate
    level: PowerEstimate | None = None


def _needs_embedding(names) -> bool:
    return any(s in ("phat", "semipar") for s in names)


def shuffled_statistic_values(names, a: Graph, b: Graph, d: int | None,
                              shuffles) -> np.ndarray:
    """Evaluate statistics on (a, Q b Qᵀ) for every shuffle Q, sharing work.

    The probability-estimate and alignment statistics commute with vertex
    relabeling, so the embeddings of ``a`` and ``b`` are computed once and
    conjugated per shuffle; the joint-embedding statistic has no such
    shortcut and is recomputed per shuffle.
    """
    names = tuple(names)
    out = np.empty((len(shuffles), len(names)))
    emb_a = emb_b = phat_a = phat_b = None
    if _needs_embedding(names):
        emb_a = ase(a, d).positions
        emb_b = ase(b, d).positions
        if "phat" in names:
            phat_a = emb_a @ emb_a.T
            phat_b = emb_b @ emb_b.T
    for i, q in enumerate(shuffles):
        b_shuffled = None
        for j, name in enumerate(names):
            if name == "adjacency":
                out[i, j] = np.count_nonzero(a.adjacency != q.conjugate(b.adjacency)) / 2.0
            elif name == "normalized":
                if b_shuffled is None:
                    b_shuffled = shuffle_graph(b, q)
                out[i, j] = t_normalized(a, b_shuffled)
            elif name == "phat":
                out[i, j] = np.linalg.norm(phat_a - q.conjugate(phat_b))
            elif name == "semipar":
                _, res = procrustes_align(emb_a, q.permute_rows(emb_b))
                out[i, j] = res
            elif name == "omni":
                if b_shuffled is None:
                    b_shuffled = shuffle_graph(b, q)
                out[i, j] = t_omni(a, b_shuffled, d)
            else:  # pragma: no cover - guarded by config validation
                raise ValueError(f"unknown statistic {name!r}")
    return out


def _fixed_probability(model) -> np.ndarray:
    if isinstance(model, (SbmSpec, LatentPositions)):
        return expectation_matrix(model)
    raise TypeError(
        "direct Monte Carlo needs a model with fixed parameters "
        "(an SBM spec or explicit latent positions)"
    )


def _alt_probability(config: ExperimentConfig, stream: StreamKey) -> np.ndarray:
    if config.alt_model is not None:
        return _fixed_probability(config.alt_model)
    if config.error is not None:
        return expectation_matrix(config.null_model, config.error, stream)
    return _fixed_probability(config.null_model)


def _resolve_shuffle_mode(config: ExperimentConfig) -> str:
    if config.shuffle_mode != "auto":
        return config.shuffle_mode
    return "block" if isinstance(config.null_model, SbmSpec) else "derangement"


def _elbow_dimension(a: Graph, b: Graph) -> int:
    """Common embedding dimension: the max of the per-graph elbows."""
    da = select_dimension(ScreeProfile.from_matrix(a))
    db = select_dimension(ScreeProfile.from_matrix(b))
    return max(da, db)


def direct_mc_cell(config: ExperimentConfig, k: int, ell: int,
                   stream: StreamKey) -> dict[str, CellEstimate]:
    """Direct-simulation power (and level) at one (k, l) shuffle cell.

    Per replicate, the null arm draws two graphs from the null model and
    shuffles the second by the budget-k shuffle; the alternative arm draws a
    null graph and an alternative graph shuffled by the budget-l shuffle.
    The critical value is the conservative empirical quantile of the null
    arm.  When ``measure_level`` is set, a third arm of fresh null pairs at
    budget l estimates the achieved level against the same critical value.
    """
    if ell > k:
        raise ValueError("the alternative budget l must not exceed k")
    names = config.statistics
    p_null = _fixed_probability(config.null_model)
    p_alt = _alt_probability(config, stream.child(8))
    if p_alt.shape != p_null.shape:
        raise ValueError("null and alternative models must share a vertex set")
    n = p_null.shape[0]
    mode = _resolve_shuffle_mode(config)
    if mode == "block":
        if not isinstance(config.null_model, SbmSpec):
            raise ValueError("block shuffles need an SBM null model")
        fixed_qk = canonical_block_shuffle(config.null_model, k)
        fixed_ql = canonical_block_shuffle(config.null_model, ell)

    n_mc = config.n_mc
    null_vals = np.empty((n_mc, len(names)))
    alt_vals = np.empty((n_mc, len(names)))
    level_vals = np.empty((n_mc, len(names))) if config.measure_level else None

    for r in range(n_mc):
        if mode == "block":
            qk, ql = fixed_qk, fixed_ql
        else:
            u_order = stream.child(6, r).generator().permutation(n)
            ql, qk = nested_permutation_sequence(n, u_order, [ell, k], stream.child(7, r))
        a1 = sample_bernoulli_graph(p_null, stream.child(0, r))
        a2 = sample_bernoulli_graph(p_null, stream.child(1, r))
        d = config.d if config.d_mode == "fixed" else _elbow_dimension(a1, a2)
        null_vals[r] = shuffled_statistic_values(names, a1, a2, d, [qk])[0]
        g1 = sample_bernoulli_graph(p_null, stream.child(2, r))
        a3 = sample_bernoulli_graph(p_alt, stream.child(3, r))
        d = config.d if config.d_mode == "fixed" else _elbow_dimension(g1, a3)
        alt_vals[r] = shuffled_statistic_values(names, g1, a3, d, [ql])[0]
        if level_vals is not None:
            h1 = sample_bernoulli_graph(p_null, stream.child(4, r))
            h2 = sample_bernoulli_graph(p_null, stream.child(5, r))
            d = config.d if config.d_mode == "fixed" else _elbow_dimension(h1, h2)
            level_vals[r] = shuffled_statistic_values(names, h1, h2, d, [ql])[0]

    out = {}
    for j, name in enumerate(names):
        crit = empirical_critical_value(NullDistribution(null_vals[:, j]), config.alpha)
        power = PowerEstimate.from_rejections(int((alt_vals[:, j] > crit).sum()), n_mc)
        level = None
        if level_vals is not None:
            level = PowerEstimate.from_rejections(int((level_vals[:, j] > crit).sum()), n_mc)
        out[name] = CellEstimate(power, level)
    return out


def direct_mc_power(config: ExperimentConfig, k: int, ell: int,
                    stream: StreamKey) -> dict[str, PowerEstimate]:
    """Rejection-rate estimates per statistic at one shuffle cell."""
    return {name: cell.power for name, cell in direct_mc_cell(config, k, ell, stream).items()}


def _clipped_probability_estimate(g: Graph, d: int) -> np.ndarray:
    """Resampling surface for the parametric bootstrap.

    The raw spectral estimate can leave [0, 1]; entries are clipped before
    Bernoulli resampling because the bootstrap needs valid probabilities.
    """
    return np.clip(probability_estimate(g, d), 0.0, 1.0)


def _bootstrap_pair_values(a1: Graph, a2: Graph, d: int, shuffles, b_count: int,
                           stream: StreamKey) -> np.ndarray:
    """B bootstrap values of the probability-estimate statistic per shuffle."""
    p1 = _clipped_probability_estimate(a1, d)
    p2 = _clipped_probability_estimate(a2, d)
    out = np.empty((b_count, len(shuffles)))
    for b in range(b_count):
        g1 = sample_bernoulli_graph(p1, stream.child(b, 0))
        g2 = sample_bernoulli_graph(p2, stream.child(b, 1))
        ph1 = probability_estimate(g1, d)
        ph2 = probability_estimate(g2, d)
        for j, q in enumerate(shuffles):
            out[b, j] = np.linalg.norm(ph1 - q.conjugate(ph2))
    return out


def parametric_bootstrap_null(a1: Graph, a2: Graph, qk: Permutation, d: int,
                              b_count: int, stream: StreamKey) -> NullDistribution:
    """Bootstrap null distribution of the shuffled probability-estimate statistic.

    Each bootstrap replicate resamples both graphs from their fitted
    edge-probability estimates, re-embeds at the common dimension d, and
    evaluates the statistic with the second estimate conjugated by ``qk``.
    """
    if b_count < 1:
        raise ValueError("the bootstrap needs at least one replicate")
    if a1.n != a2.n or qk.n != a1.n:
        raise ValueError("graphs and shuffle must share a vertex set")
    vals = _bootstrap_pair_values(a1, a2, d, [qk], b_count, stream)[:, 0]
    return NullDistribution(vals, provenance="bootstrap")


@dataclass(frozen=True)
class GridCell:
    """One (k, l) row of a bootstrap power grid."""

    k: int
    ell: int
    level: PowerEstimate
    power: PowerEstimate


def bootstrap_power_grid(a1: Graph, a2: Graph, a3: Graph, grid: ShuffleGrid,
                         alpha: float, d: int, b_count: int,
                         stream: StreamKey) -> list[GridCell]:
    """Bootstrap level and power over a shuffle grid for three observed graphs.

    One fixed nested shuffle sequence covers every budget.  For each k the
    critical value comes from a fresh bootstrap of the (a1, a2) pair at the
    budget-k shuffle; levels and powers at each l <= k are the proportions
    of independently bootstrapped (a1, a2) and (a1, a3) statistics at the
    budget-l shuffle exceeding it.
    """
    if not (a1.n == a2.n == a3.n):
        raise ValueError("all three graphs must share a vertex set")
    n = a1.n
    budgets = grid.budgets()
    u_order = stream.child(0).generator().permutation(n)
    perms = dict(zip(budgets, nested_permutation_sequence(n, u_order, budgets,
                                                          stream.child(1))))
    k_list = [k for k, _ in grid.items()]
    crit_vals = _bootstrap_pair_values(a1, a2, d, [perms[k] for k in k_list],
                                       b_count, stream.child(2))
    level_vals = _bootstrap_pair_values(a1, a2, d, [perms[b] for b in budgets],
                                        b_count, stream.child(3))
    power_vals = _bootstrap_pair_values(a1, a3, d, [perms[b] for b in budgets],
                                        b_count, stream.child(4))
    col = {b: i for i, b in enumerate(budgets)}
    rows = []
    for i, (k, ells) in enumerate(grid.items()):
        crit = empirical_critical_value(
            NullDistribution(crit_vals[:, i], provenance="bootstrap"), alpha)
        for ell in ells:
            level = PowerEstimate.from_rejections(
                int((level_vals[:, col[ell]] > crit).sum()), b_count)
            power = PowerEstimate.from_rejections(
                int((power_vals[:, col[ell]] > crit).sum()), b_count)
            rows.append(GridCell(k, ell, level, power))
    return rows


@dataclass(frozen=True)
class TwoTierCell:
    """One (statistic, k, l) row of a two-tier power table."""

    statistic: str
    k: int
    ell: int
    power: PowerEstimate
    level: PowerEstimate


def _alt_latents(null_model: DirichletLatentModel, alt_model: DirichletLatentModel,
                 x: LatentPositions) -> LatentPositions:
    """Alternative latents: the null draw with the pinned rows overridden."""
    y = x.positions.copy()
    for idx, row in alt_model.fixed:
        y[idx] = row
    return LatentPositions(y, alt_model.sparsity)


def two_tier_rdpg_power(config: ExperimentConfig, stream: StreamKey) -> list[TwoTierCell]:
    """Two-tier Monte Carlo power for latent-position alternatives.

    The outer loop redraws the latent positions (the alternative shares the
    null's random rows, overriding only the pinned rows).  Each inner
    replicate draws a fresh nested shuffle sequence, samples two null graphs
    and one alternative graph, and evaluates every statistic at every
    budget.  Per outer iterate, each k's critical value is the empirical
    quantile of the inner null statistics, and power at (k, l) is the
    proportion of inner alternative statistics at budget l exceeding it;
    powers are averaged over outer iterates.
    """
    null_m = config.null_model
    alt_m = config.alt_model if config.alt_model is not None else null_m
    if not isinstance(null_m, DirichletLatentModel) or not isinstance(alt_m, DirichletLatentModel):
        raise ValueError("the two-tier harness needs Dirichlet latent models")
    if (null_m.n, null_m.concentration) != (alt_m.n, alt_m.concentration):
        raise ValueError("null and alternative models must share n and concentration")
    if {i for i, _ in null_m.fixed} != {i for i, _ in alt_m.fixed}:
        raise ValueError("null and alternative models must pin the same rows")
    if config.d_mode != "fixed" or config.d is None:
        raise ValueError("the two-tier harness uses a fixed embedding dimension")
    names = config.statistics
    grid = config.grid
    budgets = grid.budgets()
    col = {b: i for i, b in enumerate(budgets)}
    n = null_m.n
    n_outer, n_inner = config.n_mc_outer, config.n_mc_inner

    cells = [(k, ell) for k, ells in grid.items() for ell in ells]
    reject_alt = np.zeros((len(cells), len(names)), dtype=int)
    reject_lvl = np.zeros((len(cells), len(names)), dtype=int)

    for i in range(n_outer):
        x = null_m.sample_latents(stream.child(0, i))
        y = _alt_latents(null_m, alt_m, x)
        null_vals = np.empty((n_inner, len(budgets), len(names)))
        alt_vals = np.empty((n_inner, len(budgets), len(names)))
        for j in range(n_inner):
            sub = stream.child(1, i, j)
            u_order = sub.child(0).generator().permutation(n)
            perms = nested_permutation_sequence(n, u_order, budgets, sub.child(1))
            a1 = sample_bernoulli_graph(expectation_matrix(x), sub.child(2))
            a2 = sample_bernoulli_graph(expectation_matrix(x), sub.child(3))
            a3 = sample_bernoulli_graph(expectation_matrix(y), sub.child(4))
            null_vals[j] = shuffled_statistic_values(names, a1, a2, config.d, perms)
            alt_vals[j] = shuffled_statistic_values(names, a1, a3, config.d, perms)
        for c, (k, ell) in enumerate(cells):
            for s in range(len(names)):
                crit = empirical_critical_value(
                    NullDistribution(null_vals[:, col[k], s]), config.alpha)
                reject_alt[c, s] += int((alt_vals[:, col[ell], s] > crit).sum())
                reject_lvl[c, s] += int((null_vals[:, col[ell], s] > crit).sum())

    total = n_outer * n_inner
    rows = []
    for c, (k, ell) in enumerate(cells):
        for s, name in enumerate(names):
            rows.append(TwoTierCell(
                name, k, ell,
                PowerEstimate.from_rejections(int(reject_alt[c, s]), total),
                PowerEstimate.from_rejections(int(reject_lvl[c, s]), total),
            ))
    return rows
