"""Two-sample network hypothesis testing under shuffled vertex labels.

The package provides graph-model sampling, spectral estimation, the five
shuffle-aware test statistics, Monte Carlo / bootstrap power estimation,
exact moments and analytic power for the adjacency test, and seeded graph
matching to recover power lost to label shuffling.
"""

from .rng import StreamKey
from .graphs import (
    DirichletLatentModel,
    ErrorSpec,
    Graph,
    LatentPositions,
    Permutation,
    SbmSpec,
    block_shuffle_permutation,
    canonical_block_shuffle,
    error_matrix,
    expectation_matrix,
    nested_permutation_sequence,
    random_derangement,
    sample_bernoulli_graph,
    sample_dirichlet_latents,
    sample_rdpg,
    sample_sbm,
    shuffle_graph,
)
from .spectral import (
    Embedding,
    ScreeProfile,
    ase,
    omnibus_embed,
    omnibus_matrix,
    probability_estimate,
    procrustes_align,
    select_dimension,
)
from .stats import (
    DegenerateDensityError,
    MomentPair,
    STATISTICS,
    adjacency_moments,
    analytic_power_adjacency,
    population_shuffle_gap,
    sbm_shuffle_distance_sq,
    t_adjacency,
    t_normalized,
    t_omni,
    t_phat,
    t_semipar,
)
from .inference import (
    CellEstimate,
    ExperimentConfig,
    GridCell,
    NullDistribution,
    PowerEstimate,
    ShuffleGrid,
    TwoTierCell,
    bootstrap_power_grid,
    direct_mc_cell,
    direct_mc_power,
    empirical_critical_value,
    parametric_bootstrap_null,
    shuffled_statistic_values,
    two_tier_rdpg_power,
)
from .matching import (
    MatchResult,
    MatchTestResult,
    SeedSet,
    match_then_test,
    sgm,
    solve_lap,
)
from .datasets import (
    EdgeListDataset,
    load_edge_list,
    prepare_multilayer,
    write_edge_list,
)
from .experiments import (
    ConfigError,
    PowerRow,
    PowerTable,
    load_config,
    match_shuffle_power,
    run_experiment,
    validate_config,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
