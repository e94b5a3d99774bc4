"""Acceptance criteria, each run at its stated tolerance.

A one-line PASS/FAIL verdict per criterion is printed in the terminal
summary. Seeds are fixed up front (master seed 0, repetitions 0..9).
"""
import math
import time

import numpy as np
import pytest

from iscore.bench import BenchmarkConfig, run_benchmark, run_sweep
from iscore.cli import main
from iscore.data import MaskedDataset, compute_pattern_index
from iscore.energy import discrete, expected_energy_score
from iscore.imputers import make_imputer
from iscore.score import NothingScorable, energy_i_score, training_table
from iscore.score_star import StarConfig, energy_i_score_star
from iscore.synth import (
    UNIFORM_PATTERNS,
    gen_gauss_mixture,
    gen_strict_propriety,
    gen_uniform,
)

import naive
from test_score import METHODS, candidate, random_instance

REPS = 10
SEED = 0
UNIFORM_METHODS = ["oracle_uniform", "oracle_uniform_sq", "fcs_gaussian",
                   "fcs_regression_predict", "marginal_sample"]
MIXTURE_METHODS = ["fcs_gaussian", "fcs_regression_predict", "marginal_sample", "knn"]


def _close(a, b, tol=1e-12):
    if a is None or b is None:
        return a is None and b is None
    return abs(a - b) <= tol


def test_c1_brute_force_equivalence(record):
    start = time.perf_counter()
    worst, mismatches, scored = 0.0, 0, 0
    for seed in range(50):
        masked = random_instance(1000 + seed, n_max=20, d_max=4)
        imp, imputed = candidate(masked, METHODS[seed % len(METHODS)], seed)
        N = 1 + seed % 3
        want_agg, want = naive.naive_energy_i_score(masked, imputed, imp, N=N, min_rows=2, seed=seed)
        want_star, want_s = naive.naive_energy_i_score_star(masked, imp, N=N, min_rows=2, seed=seed)
        try:
            got = energy_i_score(masked, imputed, imp, N=N, min_rows=2, seed=seed)
            got_agg, got_per = got.aggregate, got.scores
        except NothingScorable:
            got_agg, got_per = None, {k: None for k in want}
        try:
            star = energy_i_score_star(masked, imp, StarConfig(N=N, min_rows=2, seed=seed))
            star_agg, star_per = star.aggregate, star.scores
        except NothingScorable:
            star_agg, star_per = None, {k: None for k in want_s}
        pairs = [(got_agg, want_agg), (star_agg, want_star)]
        pairs += [(got_per.get(k), v) for k, v in want.items()]
        pairs += [(star_per.get(k), v) for k, v in want_s.items()]
        for a, b in pairs:
            if not _close(a, b):
                mismatches += 1
            elif a is not None:
                worst = max(worst, abs(a - b))
        scored += got_agg is not None
    elapsed = time.perf_counter() - start
    ok = mismatches == 0 and elapsed < 10
    record(1, ok, f"50 instances ({scored} scorable), max |diff| {worst:.1e}, "
                  f"{mismatches} mismatches, {elapsed:.1f} s")
    assert ok


def test_c2_point_imputer_identity(record):
    worst, checked = 0.0, 0
    for seed in range(20):
        rng = np.random.default_rng(500 + seed)
        n, d = int(rng.integers(30, 61)), int(rng.integers(2, 5))
        x = rng.normal(size=(n, d))
        x[:, 1:] += x[:, [0]]
        x[rng.random((n, d)) < 0.25] = np.nan
        x[np.isnan(x).all(axis=1), 0] = 0.0
        masked = MaskedDataset(x)
        imp = make_imputer("fcs_regression_predict")
        imputed = imp.fit_impute(masked, 1, seed=seed)[0]
        rep = energy_i_score(masked, imputed, imp, N=5, min_rows=5, seed=seed)
        idx = compute_pattern_index(masked)
        for j in idx.scored_set:
            v = rep.per_variable[masked.names[j]]
            if v.is_skipped:
                continue
            comps = tuple(masked.column_index(c) for c in v.companions)
            table, pos = training_table(masked, imputed, idx, j, comps)
            point = imp.fit(table).impute(1)[0].values[idx.rows_observed[j], pos]
            mae = np.mean(np.abs(point - x[idx.rows_observed[j], j]))
            worst = max(worst, abs(v.score + mae))
            checked += 1
    ok = worst <= 1e-12 and checked > 0
    record(2, ok, f"{checked} variables over 20 instances, max |score + MAE| {worst:.1e}")
    assert ok


def _canonical(atoms, weights):
    """Support and merged weights; weights equal to 12 decimals count as equal."""
    merged = {}
    for a, w in zip(atoms, weights):
        merged[float(a)] = merged.get(float(a), 0.0) + w
    return sorted((a, round(w, 12)) for a, w in merged.items())


def test_c3_energy_score_propriety(record):
    rng = np.random.default_rng(2024)
    pairs, violations = 0, 0
    while pairs < 200:
        kp, kq = int(rng.integers(1, 6)), int(rng.integers(1, 6))
        p_atoms = rng.integers(-4, 5, size=kp).astype(float)
        q_atoms = rng.integers(-4, 5, size=kq).astype(float)
        if pairs % 4 == 0:  # same support, different weights
            q_atoms, kq = p_atoms.copy(), kp
        p_w, q_w = rng.dirichlet(np.ones(kp)), rng.dirichlet(np.ones(kq))
        if _canonical(p_atoms, p_w) == _canonical(q_atoms, q_w):
            continue
        P, Q = discrete(p_atoms, p_w), discrete(q_atoms, q_w)
        if not expected_energy_score(P, P) > expected_energy_score(Q, P):
            violations += 1
        pairs += 1
    record(3, violations == 0, f"{pairs} pairs P != Q, {violations} violations")
    assert violations == 0


@pytest.fixture(scope="module")
def uniform_report():
    start = time.perf_counter()
    cfg = BenchmarkConfig(generator="uniform", methods={m: m for m in UNIFORM_METHODS},
                          repetitions=REPS, N=50, seed=SEED, full_information=False)
    return run_benchmark(cfg), time.perf_counter() - start


def test_c4_uniform_ranking(record, uniform_report):
    report, elapsed = uniform_report
    top = report.scores["energy_i_score"]["top_per_repetition"]
    wins = sum(t == "oracle_uniform" for t in top)
    sq_first = sum(t == "oracle_uniform_sq" for t in top)
    ok = wins >= 8 and sq_first == 0 and elapsed <= 600
    others = {m: top.count(m) for m in sorted(set(top)) if m != "oracle_uniform"}
    record(4, ok, f"oracle_uniform top in {wins}/10 (need 8), oracle_uniform_sq top in "
                  f"{sq_first}/10, other winners {others}, {elapsed:.0f} s")
    assert ok


@pytest.fixture(scope="module")
def mixture_report():
    start = time.perf_counter()
    cfg = BenchmarkConfig(generator="gauss_mixture", generator_params={"n_per_pattern": 500},
                          methods={m: m for m in MIXTURE_METHODS}, repetitions=REPS, N=50,
                          seed=SEED)
    return run_benchmark(cfg), time.perf_counter() - start


def test_c5_mixture_ranking(record, mixture_report):
    report, elapsed = mixture_report
    top = report.scores["energy_i_score"]["top_per_repetition"]
    wins = sum(t == "fcs_gaussian" for t in top)
    full_rank = report.ranking("full_information")
    predict_above = full_rank.index("fcs_regression_predict") < full_rank.index("marginal_sample")
    ok = wins >= 8 and predict_above and elapsed <= 600
    record(5, ok, f"fcs_gaussian top in {wins}/10; full-information order "
                  f"{' > '.join(full_rank)}; {elapsed:.0f} s")
    assert ok


def test_c6_full_information_consistency(record, mixture_report):
    report, _ = mixture_report
    top = report.scores["full_information"]["top_per_repetition"]
    wins = sum(t == "fcs_gaussian" for t in top)
    record(6, wins >= 8, f"full-information ranks fcs_gaussian first in {wins}/10")
    assert wins >= 8


def test_c7_strict_propriety_separation(record):
    cfg = BenchmarkConfig(generator="strict_propriety",
                          methods={"oracle_gaussian": "oracle_gaussian",
                                   "oracle_independent_gaussian": "oracle_independent_gaussian"},
                          repetitions=REPS, N=50, seed=SEED, star=True, full_information=False)
    report = run_benchmark(cfg)
    raw = report.scores["energy_i_score"]["raw"]
    c, i = np.array(raw["oracle_gaussian"]), np.array(raw["oracle_independent_gaussian"])
    se = math.sqrt(c.var(ddof=1) / REPS + i.var(ddof=1) / REPS)
    gap = c.mean() - i.mean()
    within = abs(gap) <= 2 * se
    star_top = report.scores["energy_i_score_star"]["top_per_repetition"]
    star_raw = report.scores["energy_i_score_star"]["raw"]
    strict = sum(a > b for a, b in zip(star_raw["oracle_gaussian"],
                                       star_raw["oracle_independent_gaussian"]))
    ok = within and strict >= 8
    record(7, ok, f"energy-I-Score gap {gap:.2e} vs 2 SE {2 * se:.2e}; energy-I-Score* "
                  f"conditional strictly first in {strict}/10 (top list {star_top.count('oracle_gaussian')}/10)")
    assert ok


def test_c8_n_sensitivity(record):
    cfg = BenchmarkConfig(generator="uniform", methods={m: m for m in UNIFORM_METHODS},
                          repetitions=REPS, seed=SEED, full_information=False)
    sweep = run_sweep(cfg, [20, 50])
    top20 = sweep["per_N"]["20"]["top_per_repetition"]
    top50 = sweep["per_N"]["50"]["top_per_repetition"]
    agree = sum(a == b for a, b in zip(top20, top50))
    record(8, agree >= 9, f"top method at N=20 equals N=50 in {agree}/10 (need 9); "
                          f"N=20 {top20}; N=50 {top50}")
    assert agree >= 9


def test_c9_generator_calibration(record):
    n = 100_000
    _, masked = gen_uniform(n, seed=SEED)
    shares = np.array([np.mean((masked.mask == p).all(axis=1)) for p in UNIFORM_PATTERNS])
    target = np.array([1 / 6, 1 / 2, 1 / 3])
    z = np.abs(shares - target) / np.sqrt(target * (1 - target) / n)
    _, mix = gen_gauss_mixture(500, seed=SEED)
    mix_frac = np.isnan(mix.values).mean()
    complete, strict = gen_strict_propriety(n, seed=SEED)
    strict_frac = np.isnan(strict.values).mean()
    corr = np.corrcoef(complete.values[:, 0], complete.values[:, 1])[0, 1]
    checks = [bool((z <= 3).all()), abs(mix_frac - 1 / 6) <= 0.001,
              abs(strict_frac - 1 / 9) <= 0.005, abs(corr - 0.7) <= 0.02]
    ok = all(checks)
    record(9, ok, f"uniform pattern z-scores {np.round(z, 2).tolist()}; mixture missing "
                  f"{100 * mix_frac:.2f}%; strict missing {100 * strict_frac:.2f}%; corr {corr:.4f}")
    assert ok


def test_c10_determinism_across_threads(record, tmp_path, monkeypatch):
    args = ["benchmark", "--generator", "uniform", "--param", "n=400", "--repetitions", "3",
            "-N", "10", "--star", "--seed", "5"]
    monkeypatch.setenv("ISCORE_THREADS", "1")
    assert main(args + ["--out", str(tmp_path / "one")]) == 0
    monkeypatch.setenv("ISCORE_THREADS", "4")
    assert main(args + ["--out", str(tmp_path / "four")]) == 0
    a = (tmp_path / "one" / "report.json").read_bytes()
    b = (tmp_path / "four" / "report.json").read_bytes()
    record(10, a == b, f"report.json with 1 and 4 threads: {'byte-identical' if a == b else 'DIFFERENT'} "
                       f"({len(a)} bytes)")
    assert a == b
