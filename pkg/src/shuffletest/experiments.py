"""Declarative experiment configs, deterministic batch execution, tables."""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .datasets import load_edge_list
from .graphs import (
    DirichletLatentModel,
    ErrorSpec,
    SbmSpec,
    canonical_block_shuffle,
    expectation_matrix,
    sample_bernoulli_graph,
    shuffle_graph,
)
from .inference import (
    ExperimentConfig,
    NullDistribution,
    PowerEstimate,
    ShuffleGrid,
    bootstrap_power_grid,
    direct_mc_cell,
    empirical_critical_value,
    two_tier_rdpg_power,
)
from .matching import SeedSet, sgm
from .rng import StreamKey
from .stats import STATISTICS, resolve_statistic

SCHEMA_VERSION = 1

CSV_COLUMNS = (
    "experiment", "statistic", "k", "ell", "effect", "alpha",
    "power", "power_se", "level", "level_se", "n_mc", "seed",
)


class ConfigError(ValueError):
    """Configuration problem, reported with the offending field path."""


@dataclass(frozen=True)
class PowerRow:
    experiment: str
    statistic: str
    k: int
    ell: int
    effect: float
    alpha: float
    power: float
    power_se: float
    level: float
    level_se: float
    n_mc: int
    seed: int

    def as_tuple(self):
        return (self.experiment, self.statistic, self.k, self.ell, self.effect,
                self.alpha, self.power, self.power_se, self.level, self.level_se,
                self.n_mc, self.seed)


def _format_value(x) -> str:
    if isinstance(x, str):
        return x
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


@dataclass(frozen=True)
class PowerTable:
    """Rows of power/level estimates; the CSV bytes are schema-stable."""

    rows: tuple[PowerRow, ...]

    def to_csv_bytes(self) -> bytes:
        lines = [",".join(CSV_COLUMNS)]
        for row in self.rows:
            lines.append(",".join(_format_value(v) for v in row.as_tuple()))
        return ("\n".join(lines) + "\n").encode("utf-8")

    def write_csv(self, path) -> None:
        Path(path).write_bytes(self.to_csv_bytes())

    def to_json_obj(self):
        return {
            "schema_version": SCHEMA_VERSION,
            "columns": list(CSV_COLUMNS),
            "rows": [list(row.as_tuple()) for row in self.rows],
        }

    def write_json(self, path) -> None:
        text = json.dumps(self.to_json_obj(), indent=2) + "\n"
        Path(path).write_text(text, encoding="utf-8")


# --- config schema -----------------------------------------------------------

_KIND_KEYS = {
    "simulate": {
        "required": {"model", "statistics", "k_values", "n_mc", "d"},
        "optional": {"effect_kind", "effect_values", "ell_values", "alpha",
                     "measure_level", "shuffle_mode"},
    },
    "bootstrap": {
        "required": {"k_values", "n_boot", "d"},
        "optional": {"model", "graphs", "effect_kind", "effect_values",
                     "ell_values", "alpha", "n_mc", "d_mode"},
    },
    "two-tier": {
        "required": {"model", "statistics", "k_values", "n_mc_outer",
                     "n_mc_inner", "d", "effect_values"},
        "optional": {"ell_values", "alpha"},
    },
    "match": {
        "required": {"model", "statistics", "k_values", "n_mc", "n_boot", "d"},
        "optional": {"effect_kind", "effect_values", "ell_values", "alpha",
                     "restarts"},
    },
}

_COMMON_KEYS = {"schema_version", "experiment", "kind", "seed"}

_MODEL_KEYS = {
    "sbm": {"required": {"type", "block_probs", "sizes"}, "optional": {"sparsity"}},
    "dirichlet": {
        "required": {"type", "n", "concentration", "fixed_indices", "null_row",
                     "alt_row"},
        "optional": {"sparsity"},
    },
}


def _check_keys(obj: dict, required: set, optional: set, prefix: str = "") -> None:
    for key in obj:
        if key not in required and key not in optional:
            raise ConfigError(f"unknown key '{prefix}{key}'")
    for key in required:
        if key not in obj:
            raise ConfigError(f"missing required key '{prefix}{key}'")


def validate_config(cfg: dict) -> dict:
    """Validate a raw config mapping; returns it unchanged on success.

    Every violation is reported with the path of the offending field and no
    computation starts until the whole document has been checked.
    """
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    if cfg.get("schema_version") != SCHEMA_VERSION:
        raise ConfigError(f"'schema_version' must be {SCHEMA_VERSION}")
    kind = cfg.get("kind")
    if kind not in _KIND_KEYS:
        raise ConfigError(f"'kind' must be one of {sorted(_KIND_KEYS)}")
    spec = _KIND_KEYS[kind]
    _check_keys(cfg, _COMMON_KEYS | spec["required"], spec["optional"])
    if not isinstance(cfg.get("experiment"), str) or not cfg["experiment"]:
        raise ConfigError("'experiment' must be a nonempty string")
    if not isinstance(cfg.get("seed"), int) or cfg["seed"] < 0:
        raise ConfigError("'seed' must be a nonnegative integer")
    if "model" in cfg:
        model = cfg["model"]
        if not isinstance(model, dict) or model.get("type") not in _MODEL_KEYS:
            raise ConfigError(f"'model.type' must be one of {sorted(_MODEL_KEYS)}")
        mspec = _MODEL_KEYS[model["type"]]
        _check_keys(model, mspec["required"], mspec["optional"], prefix="model.")
    if "graphs" in cfg:
        graphs = cfg["graphs"]
        if not isinstance(graphs, dict) or set(graphs) != {"a1", "a2", "a3"}:
            raise ConfigError("'graphs' must map exactly a1, a2, a3 to paths")
    if kind == "bootstrap" and ("model" in cfg) == ("graphs" in cfg):
        raise ConfigError("bootstrap needs exactly one of 'model' or 'graphs'")
    if "statistics" in cfg:
        stats = cfg["statistics"]
        if not isinstance(stats, list) or not stats:
            raise ConfigError("'statistics' must be a nonempty list")
        for s in stats:
            if s not in STATISTICS:
                raise ConfigError(f"'statistics' entry {s!r} is not a known statistic")
    alpha = cfg.get("alpha", 0.05)
    if not isinstance(alpha, (int, float)) or not 0 < alpha < 1:
        raise ConfigError("'alpha' must lie in (0, 1)")
    for key in ("k_values", "ell_values", "effect_values"):
        if key in cfg:
            vals = cfg[key]
            if not isinstance(vals, list) or not vals:
                raise ConfigError(f"'{key}' must be a nonempty list")
    for key in ("n_mc", "n_boot", "n_mc_outer", "n_mc_inner", "d", "restarts"):
        if key in cfg and (not isinstance(cfg[key], int) or cfg[key] < 0):
            raise ConfigError(f"'{key}' must be a nonnegative integer")
    return cfg


def load_config(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        try:
            cfg = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    return validate_config(cfg)


def _build_model(model_cfg: dict):
    if model_cfg["type"] == "sbm":
        return SbmSpec(
            np.asarray(model_cfg["block_probs"], dtype=float),
            tuple(model_cfg["sizes"]),
            float(model_cfg.get("sparsity", 1.0)),
        )
    fixed = tuple(
        (int(i), tuple(float(x) for x in model_cfg["null_row"]))
        for i in model_cfg["fixed_indices"]
    )
    return DirichletLatentModel(
        int(model_cfg["n"]),
        tuple(float(a) for a in model_cfg["concentration"]),
        fixed,
        float(model_cfg.get("sparsity", 1.0)),
    )


def _grid_from(cfg: dict) -> ShuffleGrid:
    return ShuffleGrid.from_budgets(cfg["k_values"], cfg.get("ell_values"))


def _run_tasks(tasks, threads: int):
    """Evaluate independent tasks, folding results in index order."""
    if threads <= 1:
        return [task() for task in tasks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda t: t(), tasks))


# --- experiment kinds --------------------------------------------------------

def _effects(cfg: dict) -> list[float]:
    return [float(e) for e in cfg.get("effect_values", [0.0])]


def _error_for(cfg: dict, effect: float) -> ErrorSpec | None:
    if effect == 0.0:
        return None
    kind = cfg.get("effect_kind", "constant")
    if kind != "constant":
        raise ConfigError("only 'constant' effect_kind is supported in configs")
    return ErrorSpec.constant(effect)


def _run_simulate(cfg: dict, seed: int, threads: int) -> list[PowerRow]:
    model = _build_model(cfg["model"])
    grid = _grid_from(cfg)
    alpha = float(cfg.get("alpha", 0.05))
    root = StreamKey(seed)
    cells = [(ei, effect, ci, k, ell)
             for ei, effect in enumerate(_effects(cfg))
             for ci, (k, ell) in enumerate((k, ell) for k, ells in grid.items()
                                           for ell in ells)]

    def make_task(ei, effect, ci, k, ell):
        def task():
            config = ExperimentConfig(
                null_model=model,
                statistics=tuple(cfg["statistics"]),
                grid=grid,
                error=_error_for(cfg, effect),
                alpha=alpha,
                d=int(cfg["d"]),
                n_mc=int(cfg["n_mc"]),
                shuffle_mode=cfg.get("shuffle_mode", "auto"),
                measure_level=bool(cfg.get("measure_level", True)),
                master_seed=seed,
            )
            out = direct_mc_cell(config, k, ell, root.child(0, ei, ci))
            rows = []
            for name in cfg["statistics"]:
                est = out[name]
                level = est.level if est.level is not None else est.power
                rows.append(PowerRow(
                    cfg["experiment"], name, k, ell, effect, alpha,
                    est.power.power, est.power.se, level.power, level.se,
                    est.power.n_reps, seed,
                ))
            return rows
        return task

    results = _run_tasks([make_task(*c) for c in cells], threads)
    return [row for rows in results for row in rows]


def _bootstrap_inputs(cfg: dict, seed: int):
    root = StreamKey(seed)
    if "graphs" in cfg:
        a1, _ = load_edge_list(cfg["graphs"]["a1"])
        a2, _ = load_edge_list(cfg["graphs"]["a2"])
        a3, _ = load_edge_list(cfg["graphs"]["a3"])
        return a1, a2, a3
    model = _build_model(cfg["model"])
    if not isinstance(model, SbmSpec):
        raise ConfigError("model-based bootstrap configs need an SBM model")
    effect = _effects(cfg)
    if len(effect) != 1:
        raise ConfigError("bootstrap configs take exactly one effect value")
    err = _error_for(cfg, effect[0])
    p_null = expectation_matrix(model)
    p_alt = expectation_matrix(model, err) if err is not None else p_null
    a1 = sample_bernoulli_graph(p_null, root.child(1))
    a2 = sample_bernoulli_graph(p_null, root.child(2))
    a3 = sample_bernoulli_graph(p_alt, root.child(3))
    return a1, a2, a3


def _run_bootstrap(cfg: dict, seed: int, threads: int) -> list[PowerRow]:
    a1, a2, a3 = _bootstrap_inputs(cfg, seed)
    grid = _grid_from(cfg)
    alpha = float(cfg.get("alpha", 0.05))
    b_count = int(cfg["n_boot"])
    repeats = int(cfg.get("n_mc", 1))
    root = StreamKey(seed)
    if cfg.get("d_mode", "fixed") == "elbow":
        from .spectral import ScreeProfile, select_dimension
        d = max(select_dimension(ScreeProfile.from_matrix(g)) for g in (a1, a2, a3))
    else:
        d = int(cfg["d"])

    def make_task(rep):
        def task():
            return bootstrap_power_grid(a1, a2, a3, grid, alpha, d, b_count,
                                        root.child(0, rep))
        return task

    repeats_rows = _run_tasks([make_task(r) for r in range(repeats)], threads)
    effect = _effects(cfg)[0] if "model" in cfg else 0.0
    rows = []
    first = repeats_rows[0]
    n_reps = repeats * b_count
    for idx, cell in enumerate(first):
        power_hits = sum(int(round(rr[idx].power.power * b_count)) for rr in repeats_rows)
        level_hits = sum(int(round(rr[idx].level.power * b_count)) for rr in repeats_rows)
        power = PowerEstimate.from_rejections(power_hits, n_reps)
        level = PowerEstimate.from_rejections(level_hits, n_reps)
        rows.append(PowerRow(
            cfg["experiment"], "phat", cell.k, cell.ell, effect, alpha,
            power.power, power.se, level.power, level.se, n_reps, seed,
        ))
    return rows


def _run_two_tier(cfg: dict, seed: int, threads: int) -> list[PowerRow]:
    model_cfg = cfg["model"]
    if model_cfg["type"] != "dirichlet":
        raise ConfigError("two-tier configs need a dirichlet model")
    null_model = _build_model(model_cfg)
    grid = _grid_from(cfg)
    alpha = float(cfg.get("alpha", 0.05))
    root = StreamKey(seed)
    null_row = np.asarray(model_cfg["null_row"], dtype=float)
    alt_row = np.asarray(model_cfg["alt_row"], dtype=float)

    def make_task(ei, lam):
        def task():
            mix = tuple(float(v) for v in ((1.0 - lam) * null_row + lam * alt_row))
            alt_model = DirichletLatentModel(
                null_model.n, null_model.concentration,
                tuple((i, mix) for i, _ in null_model.fixed),
                null_model.sparsity,
            )
            config = ExperimentConfig(
                null_model=null_model,
                alt_model=alt_model,
                statistics=tuple(cfg["statistics"]),
                grid=grid,
                alpha=alpha,
                d=int(cfg["d"]),
                n_mc_outer=int(cfg["n_mc_outer"]),
                n_mc_inner=int(cfg["n_mc_inner"]),
                master_seed=seed,
            )
            cells = two_tier_rdpg_power(config, root.child(0, ei))
            return [PowerRow(
                cfg["experiment"], cell.statistic, cell.k, cell.ell, lam, alpha,
                cell.power.power, cell.power.se, cell.level.power, cell.level.se,
                cell.power.n_reps, seed,
            ) for cell in cells]
        return task

    results = _run_tasks(
        [make_task(ei, float(lam)) for ei, lam in enumerate(cfg["effect_values"])],
        threads,
    )
    return [row for rows in results for row in rows]


def match_shuffle_power(model: SbmSpec, error: ErrorSpec | None, k: int, ell: int,
                        statistic: str, d: int, alpha: float, n_mc: int,
                        b_count: int, stream: StreamKey, restarts: int = 0):
    """Power and achieved level of the match-then-test protocol at one cell.

    The critical value comes from ``b_count`` null replicate pairs whose
    second graph is shuffled by the canonical budget-k block swap and then
    re-matched over all k uncertain vertices (the practical protocol).  The
    power arm shuffles the alternative by the budget-l swap and matches over
    only those l truly shuffled vertices; the level arm does the same with
    null data.  A budget of zero means no shuffle and no matching.
    """
    if ell > k:
        raise ValueError("the alternative budget l must not exceed k")
    stat_fn = resolve_statistic(statistic)
    qk = canonical_block_shuffle(model, k)
    ql = canonical_block_shuffle(model, ell)
    n = model.n
    seeds_k = SeedSet.identity(sorted(set(range(n)) - qk.support))
    seeds_l = SeedSet.identity(sorted(set(range(n)) - ql.support))
    p_null = expectation_matrix(model)
    p_alt = expectation_matrix(model, error) if error is not None else p_null

    def matched_stat(g1, g2, q, seeds, key):
        shuffled = shuffle_graph(g2, q)
        if len(seeds) == n:
            return float(stat_fn(g1, shuffled, d))
        res = sgm(g1, shuffled, seeds, stream=key.child(0), restarts=restarts)
        return float(stat_fn(g1, shuffle_graph(shuffled, res.permutation), d))

    null_vals = np.empty(b_count)
    for b in range(b_count):
        g1 = sample_bernoulli_graph(p_null, stream.child(0, b))
        g2 = sample_bernoulli_graph(p_null, stream.child(1, b))
        null_vals[b] = matched_stat(g1, g2, qk, seeds_k, stream.child(2, b))
    crit = empirical_critical_value(NullDistribution(null_vals), alpha)

    power_hits = level_hits = 0
    for r in range(n_mc):
        g1 = sample_bernoulli_graph(p_null, stream.child(3, r))
        g3 = sample_bernoulli_graph(p_alt, stream.child(4, r))
        if matched_stat(g1, g3, ql, seeds_l, stream.child(5, r)) > crit:
            power_hits += 1
        h1 = sample_bernoulli_graph(p_null, stream.child(6, r))
        h2 = sample_bernoulli_graph(p_null, stream.child(7, r))
        if matched_stat(h1, h2, ql, seeds_l, stream.child(8, r)) > crit:
            level_hits += 1
    return (PowerEstimate.from_rejections(power_hits, n_mc),
            PowerEstimate.from_rejections(level_hits, n_mc))


def _run_match(cfg: dict, seed: int, threads: int) -> list[PowerRow]:
    model = _build_model(cfg["model"])
    if not isinstance(model, SbmSpec):
        raise ConfigError("match configs need an SBM model")
    grid = _grid_from(cfg)
    alpha = float(cfg.get("alpha", 0.05))
    root = StreamKey(seed)
    cells = [(ei, effect, ci, k, ell)
             for ei, effect in enumerate(_effects(cfg))
             for ci, (k, ell) in enumerate((k, ell) for k, ells in grid.items()
                                           for ell in ells)]

    def make_task(ei, effect, ci, k, ell):
        def task():
            rows = []
            for si, name in enumerate(cfg["statistics"]):
                power, level = match_shuffle_power(
                    model, _error_for(cfg, effect), k, ell, name, int(cfg["d"]),
                    alpha, int(cfg["n_mc"]), int(cfg["n_boot"]),
                    root.child(0, ei, ci, si), restarts=int(cfg.get("restarts", 0)),
                )
                rows.append(PowerRow(
                    cfg["experiment"], name, k, ell, effect, alpha,
                    power.power, power.se, level.power, level.se,
                    power.n_reps, seed,
                ))
            return rows
        return task

    results = _run_tasks([make_task(*c) for c in cells], threads)
    return [row for rows in results for row in rows]


_RUNNERS = {
    "simulate": _run_simulate,
    "bootstrap": _run_bootstrap,
    "two-tier": _run_two_tier,
    "match": _run_match,
}


def run_experiment(config, seed: int | None = None, threads: int = 1) -> PowerTable:
    """Run a declarative experiment config; the table is a pure function of
    (config, seed), independent of the worker count."""
    if isinstance(config, (str, Path)):
        cfg = load_config(config)
    else:
        cfg = validate_config(dict(config))
    effective_seed = int(cfg["seed"] if seed is None else seed)
    rows = _RUNNERS[cfg["kind"]](cfg, effective_seed, max(1, int(threads)))
    return PowerTable(tuple(rows))
