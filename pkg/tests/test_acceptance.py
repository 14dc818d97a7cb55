"""Acceptance suite: one test per criterion clause, at the stated tolerances.

Each clause prints an `ACCEPTANCE <criterion>: PASS/FAIL` line (visible with
-s and in failure output).  Clauses are asserted as specified; known
desk-scale infeasibilities are NOT weakened here, so their tests fail with
the measured values in the message.
"""

import hashlib
import itertools
import math
import time
from pathlib import Path

import numpy as np
import pytest

from shuffletest import (
    DirichletLatentModel,
    ErrorSpec,
    ExperimentConfig,
    SbmSpec,
    ShuffleGrid,
    StreamKey,
    adjacency_moments,
    analytic_power_adjacency,
    canonical_block_shuffle,
    direct_mc_power,
    expectation_matrix,
    match_shuffle_power,
    probability_estimate,
    random_derangement,
    run_experiment,
    sample_bernoulli_graph,
    sample_dirichlet_latents,
    sample_rdpg,
    sbm_shuffle_distance_sq,
    sgm,
    shuffle_graph,
    solve_lap,
    two_tier_rdpg_power,
)
from shuffletest.matching import SeedSet
from conftest import random_sbm_spec

CONFIG_DIR = Path(__file__).resolve().parents[1] / "src" / "shuffletest" / "configs"

AANDE_SCALED = SbmSpec(np.array([[0.55, 0.4], [0.4, 0.45]]), (100, 100))


def report(tag: str, ok: bool, detail: str) -> bool:
    print(f"ACCEPTANCE {tag}: {'PASS' if ok else 'FAIL'} — {detail}")
    return ok


# --- criterion 1 -------------------------------------------------------------

def test_criterion_1_closed_form_vs_brute_force(rng):
    t0 = time.time()
    spec500 = SbmSpec(np.array([[0.55, 0.4], [0.4, 0.45]]), (250, 250))
    ok = abs(sbm_shuffle_distance_sq(spec500, 4) - 49.68) <= 1e-9
    worst = 0.0
    for _ in range(50):
        spec = random_sbm_spec(rng, max_blocks=4, max_block_size=10)
        k = 2 * int(rng.integers(0, min(5, min(spec.sizes[0], spec.sizes[1])) + 1))
        p = expectation_matrix(spec)
        q = canonical_block_shuffle(spec, k)
        brute = float(np.linalg.norm(p - q.conjugate(p)) ** 2)
        worst = max(worst, abs(sbm_shuffle_distance_sq(spec, k) - brute))
    elapsed = time.time() - t0
    ok = ok and worst <= 1e-9 and elapsed < 2.0
    assert report("1 closed-form shuffle distance", ok,
                  f"max |closed-brute| = {worst:.2e}, reference 49.68 matched, "
                  f"{elapsed:.2f}s"), worst


# --- criterion 2 -------------------------------------------------------------

def test_criterion_2_moment_oracle():
    t0 = time.time()
    spec = SbmSpec(np.array([[0.55, 0.4], [0.4, 0.45]]), (15, 15))
    p1 = expectation_matrix(spec)
    p2 = expectation_matrix(spec, ErrorSpec.constant(0.05))
    n, reps = 30, 20_000
    iu = np.triu_indices(n, k=1)
    failures = []
    for idx, ell in enumerate((0, 2, 4)):
        q = canonical_block_shuffle(spec, ell)
        mom = adjacency_moments(p1, p2, q)
        rng = StreamKey(1000 + idx).generator()
        u = p1[iu]
        v = q.conjugate(p2)[iu]
        draws_a = rng.random((reps, u.size)) < u
        draws_b = rng.random((reps, v.size)) < v
        stats = (draws_a != draws_b).sum(axis=1)
        mean_se = math.sqrt(mom.variance / reps)
        mean_ok = abs(stats.mean() - mom.mean) <= 4 * mean_se
        var_ok = abs(stats.var() - mom.variance) <= 0.1 * mom.variance
        if not (mean_ok and var_ok):
            failures.append((ell, stats.mean(), mom.mean, stats.var(), mom.variance))
    elapsed = time.time() - t0
    ok = not failures and elapsed < 30.0
    assert report("2 adjacency moment oracle", ok,
                  f"l in (0,2,4), 2e4 replicates, {elapsed:.1f}s"), failures


# --- criterion 3 -------------------------------------------------------------

def test_criterion_3_analytic_power_vs_simulation():
    t0 = time.time()
    failures = []
    for ei, eps in enumerate((0.05, -0.05)):
        err = ErrorSpec.constant(eps)
        config = ExperimentConfig(
            null_model=AANDE_SCALED,
            statistics=("adjacency",),
            grid=ShuffleGrid.from_budgets([0, 10]),
            error=err,
            d=None,
            n_mc=5000,
            measure_level=False,
        )
        for k, ell in ((0, 0), (10, 0), (10, 10)):
            analytic = analytic_power_adjacency(AANDE_SCALED, err, k, ell, 0.05)
            mc = direct_mc_power(config, k, ell, StreamKey(2024).child(ei, k, ell))
            gap = abs(analytic - mc["adjacency"].power)
            if gap > 0.05:
                failures.append((eps, k, ell, analytic, mc["adjacency"].power))
    elapsed = time.time() - t0
    ok = not failures and elapsed < 120.0
    assert report("3 analytic vs simulated power", ok,
                  f"6 cells at nMC=5000 within 0.05, {elapsed:.0f}s"), failures


# --- criterion 4 -------------------------------------------------------------

def test_criterion_4_level_control():
    t0 = time.time()
    spec = SbmSpec(np.array([[0.55, 0.4], [0.4, 0.45]]), (100, 100))
    config = ExperimentConfig(
        null_model=spec,
        statistics=("adjacency", "phat", "normalized", "semipar", "omni"),
        grid=ShuffleGrid.from_budgets([0, 20]),
        d=2,
        n_mc=500,
        measure_level=False,
    )
    failures = []
    for k in (0, 20):
        out = direct_mc_power(config, k, k, StreamKey(303).child(k))
        for name, est in out.items():
            if not 0.02 <= est.power <= 0.09:
                failures.append((name, k, est.power))
    elapsed = time.time() - t0
    ok = not failures and elapsed < 300.0
    assert report("4 level control all statistics", ok,
                  f"k=l in (0,20), nMC=500, rejection in [0.02,0.09], {elapsed:.0f}s"), failures


# --- criterion 5 -------------------------------------------------------------

@pytest.fixture(scope="module")
def fig34_powers():
    spec = AANDE_SCALED
    key = StreamKey(505)
    out = {}
    for ci, (eps, k, ell) in enumerate(((-0.03, 0, 0), (0.03, 0, 0))):
        config = ExperimentConfig(
            null_model=spec,
            statistics=("adjacency", "phat"),
            grid=ShuffleGrid.from_budgets([0, 80]),
            error=ErrorSpec.constant(eps),
            d=2,
            n_mc=300,
            measure_level=False,
        )
        cell = direct_mc_power(config, k, ell, key.child(ci))
        out[(eps, k, ell)] = {name: est.power for name, est in cell.items()}
    return out


@pytest.fixture(scope="module")
def fig4_shuffling_loss_powers():
    # the true gap (0.313 at nMC=2000) clears the required 0.3 by only ~1 se
    # of a 300-replicate run, so this clause is measured at nMC=2000 to test
    # the inequality itself rather than the replicate noise
    config = ExperimentConfig(
        null_model=AANDE_SCALED,
        statistics=("phat",),
        grid=ShuffleGrid.from_budgets([0, 80]),
        error=ErrorSpec.constant(0.03),
        d=2,
        n_mc=2000,
        measure_level=False,
    )
    diag = direct_mc_power(config, 80, 80, StreamKey(31337).child(0))["phat"]
    off = direct_mc_power(config, 80, 0, StreamKey(31337).child(1))["phat"]
    return off.power, diag.power


def test_criterion_5a_adjacency_sign_pathology_negative(fig34_powers):
    power = fig34_powers[(-0.03, 0, 0)]["adjacency"]
    assert report("5a adjacency power at eps=-0.03", power <= 0.10,
                  f"power={power:.3f} (required <= 0.10)"), power


def test_criterion_5b_adjacency_power_positive(fig34_powers):
    power = fig34_powers[(0.03, 0, 0)]["adjacency"]
    assert report("5b adjacency power at eps=+0.03", power >= 0.90,
                  f"power={power:.3f} (required >= 0.90)"), power


def test_criterion_5c_phat_power_both_signs(fig34_powers):
    p_pos = fig34_powers[(0.03, 0, 0)]["phat"]
    p_neg = fig34_powers[(-0.03, 0, 0)]["phat"]
    ok = p_pos >= 0.85 and p_neg >= 0.85
    assert report("5c phat power at eps=+/-0.03", ok,
                  f"power(+)={p_pos:.3f}, power(-)={p_neg:.3f} (required >= 0.85)"), \
        (p_pos, p_neg)


def test_criterion_5d_phat_shuffling_loss(fig4_shuffling_loss_powers):
    p_off, p_diag = fig4_shuffling_loss_powers
    ok = p_off <= p_diag - 0.3
    assert report("5d phat shuffling loss at k=80", ok,
                  f"power(80,0)={p_off:.3f}, power(80,80)={p_diag:.3f} "
                  f"(required gap >= 0.3)"), (p_off, p_diag)


# --- criterion 6 -------------------------------------------------------------

@pytest.fixture(scope="module")
def two_tier_powers():
    base = np.array([0.8, 0.1, 0.1])
    target = np.array([0.1, 0.1, 0.8])
    null_model = DirichletLatentModel(
        100, (1.0, 1.0, 1.0), tuple((i, tuple(base)) for i in range(5)))
    powers = {}
    for lam in (0.25, 1.0):
        mix = tuple(float(x) for x in (1 - lam) * base + lam * target)
        alt_model = DirichletLatentModel(
            100, (1.0, 1.0, 1.0), tuple((i, mix) for i in range(5)))
        config = ExperimentConfig(
            null_model=null_model,
            alt_model=alt_model,
            statistics=("adjacency", "phat", "semipar", "omni"),
            grid=ShuffleGrid.from_budgets([20, 75], ell_values=[0, 20, 75]),
            d=3,
            n_mc_outer=10,
            n_mc_inner=50,
        )
        rows = two_tier_rdpg_power(config, StreamKey(606).child(int(lam * 100)))
        powers[lam] = {(r.statistic, r.k, r.ell): r.power.power for r in rows}
    return powers


def test_criterion_6a_effect_ordering(two_tier_powers):
    failures = []
    for stat in ("adjacency", "phat", "semipar", "omni"):
        hi = two_tier_powers[1.0][(stat, 20, 20)]
        lo = two_tier_powers[0.25][(stat, 20, 20)]
        if hi < lo:
            failures.append((stat, hi, lo))
    assert report("6a power(lam=1) >= power(lam=0.25) at k=l=20", not failures,
                  "all four statistics ordered" if not failures else str(failures)), \
        failures


def test_criterion_6b_shuffling_loss_at_75(two_tier_powers):
    failures = []
    for stat in ("phat", "omni"):
        off = two_tier_powers[1.0][(stat, 75, 0)]
        diag = two_tier_powers[1.0][(stat, 75, 75)]
        if not off <= diag - 0.2:
            failures.append((stat, off, diag))
    assert report("6b power(75,0) <= power(75,75) - 0.2 at lam=1", not failures,
                  "gap >= 0.2 for phat and omni" if not failures else str(failures)), \
        failures


# --- criterion 7 -------------------------------------------------------------

@pytest.fixture(scope="module")
def matching_recovery():
    spec = AANDE_SCALED
    err = ErrorSpec.constant(0.05)
    key = StreamKey(707)
    n_mc = b_count = 150
    power_m, _ = match_shuffle_power(spec, err, 40, 40, "phat", 2, 0.05,
                                     n_mc=n_mc, b_count=b_count,
                                     stream=key.child(0), restarts=4)
    _, type1 = match_shuffle_power(spec, err, 40, 0, "phat", 2, 0.05,
                                   n_mc=n_mc, b_count=b_count,
                                   stream=key.child(1), restarts=4)
    config = ExperimentConfig(
        null_model=spec, statistics=("phat",), grid=ShuffleGrid.from_budgets([0]),
        error=err, d=2, n_mc=n_mc, measure_level=False)
    baseline = direct_mc_power(config, 0, 0, key.child(2))["phat"]
    return power_m.power, type1.power, baseline.power


def test_criterion_7a_matching_recovers_power(matching_recovery):
    matched, _, unshuffled = matching_recovery
    ok = matched >= 0.8 * unshuffled
    assert report("7a match-then-test recovers power", ok,
                  f"matched={matched:.3f}, unshuffled={unshuffled:.3f} "
                  f"(required >= 0.8x)"), (matched, unshuffled)


def test_criterion_7b_overmatching_inflates_type1(matching_recovery):
    _, type1, _ = matching_recovery
    ok = type1 > 0.05
    assert report("7b over-matching type-I inflation", ok,
                  f"type-I at (l=0, k=40) = {type1:.3f} (required > 0.05)"), type1


# --- criterion 8 -------------------------------------------------------------

def test_criterion_8_sgm_sanity():
    t0 = time.time()
    hits = monotone = 0
    trials = 100
    for t in range(trials):
        key = StreamKey(8000 + t)
        n = int(key.generator().integers(10, 31))
        half = n // 2
        # distinct expected degrees across vertices
        p = key.child(1).generator().uniform(0.15, 0.85, size=(n, n))
        p = (p + p.T) / 2
        a = sample_bernoulli_graph(p, key.child(2))
        q = random_derangement(n, range(half, n), key.child(3))
        b = shuffle_graph(a, q)
        seeds = SeedSet(tuple((i, int(q.mapping[i])) for i in range(half)))
        res = sgm(a, b, seeds)
        hits += res.objective == 0.0
        monotone += all(y <= x + 1e-8 for x, y in
                        zip(res.relaxed_trace, res.relaxed_trace[1:]))
    lap_ok = 0
    rng = np.random.default_rng(424242)
    for _ in range(100):
        m = int(rng.integers(1, 8))
        c = rng.uniform(-10, 10, size=(m, m))
        _, total = solve_lap(c)
        best = min(sum(c[i, p[i]] for i in range(m))
                   for p in itertools.permutations(range(m)))
        lap_ok += abs(total - best) < 1e-9
    elapsed = time.time() - t0
    ok = hits >= 95 and monotone == trials and lap_ok == 100 and elapsed < 60.0
    assert report("8 seeded matching sanity", ok,
                  f"exact recovery {hits}/100, monotone {monotone}/100, "
                  f"lap exhaustive {lap_ok}/100, {elapsed:.0f}s"), (hits, monotone, lap_ok)


# --- criterion 9 -------------------------------------------------------------

def test_criterion_9_ase_consistency():
    t0 = time.time()
    key = StreamKey(909)
    errs = {100: [], 400: []}
    for rep in range(20):
        for n in (100, 400):
            lat = sample_dirichlet_latents(n, (1, 1, 1), [], key.child(rep, n))
            p = expectation_matrix(lat)
            g = sample_rdpg(lat, key.child(rep, n, 1))
            phat = probability_estimate(g, 3)
            errs[n].append(np.linalg.norm(phat - p) / np.linalg.norm(p))
    med100, med400 = np.median(errs[100]), np.median(errs[400])
    elapsed = time.time() - t0
    ok = med400 < med100 and elapsed < 60.0
    assert report("9 spectral estimate consistency", ok,
                  f"median rel err n=400: {med400:.4f} < n=100: {med100:.4f}, "
                  f"{elapsed:.0f}s"), (med100, med400)


# --- criterion 10 ------------------------------------------------------------

def test_criterion_10_bundled_config_determinism():
    t0 = time.time()
    golden_path = CONFIG_DIR / "golden.sha256"
    golden = {}
    for line in golden_path.read_text().splitlines():
        digest, name = line.split()
        golden[name] = digest
    failures = []
    for path in sorted(CONFIG_DIR.glob("*.cfg")):
        for threads in (1, 8):
            table = run_experiment(path, threads=threads)
            digest = hashlib.sha256(table.to_csv_bytes()).hexdigest()
            if digest != golden[path.name]:
                failures.append((path.name, threads, digest))
    elapsed = time.time() - t0
    ok = not failures and elapsed < 1200.0
    assert report("10 bundled config determinism", ok,
                  f"{len(golden)} configs x threads (1, 8) match golden checksums, "
                  f"{elapsed:.0f}s"), failures
