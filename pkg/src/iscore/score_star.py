"""Energy-I-Score*: score each variable conditionally on whole patterns.

Instead of the companion set ``O_j``, a test row with pattern ``M`` is
scored given every other variable observed under ``M``. A random test
split of the rows observing ``j`` is held out; the remaining rows are
imputed once and stacked with the test rows of one pattern at a time.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .data import MaskedDataset, PatternIndex, compute_pattern_index
from .energy import stable_mean
from .imputers import Imputer
from .rng import derive_rng, derive_seed
from .score import NothingScorable, ScoreReport, VariableScore, _score_draws, default_threads

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class StarConfig:
    """Settings of the pattern-wise score.

    ``pattern_draws=None`` uses five draws per distinct pattern in the
    test set.
    """

    test_fraction: float = 0.2
    pattern_draws: int | None = None
    N: int = 50
    min_rows: int = 10
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.test_fraction < 1:
            raise ValueError("test_fraction must lie in (0, 1)")
        if self.pattern_draws is not None and self.pattern_draws < 1:
            raise ValueError("pattern_draws must be >= 1")
        if self.N < 1:
            raise ValueError("N must be >= 1")


def split_test_rows(idx: PatternIndex, j: int, cfg: StarConfig) -> np.ndarray:
    """Sorted test rows drawn from the rows observing ``j``."""
    obs = idx.rows_observed[j]
    size = math.ceil(cfg.test_fraction * len(obs))
    rng = derive_rng(cfg.seed, "star-split", j)
    return np.sort(rng.choice(obs, size=size, replace=False))


def draw_patterns(idx: PatternIndex, test: np.ndarray, j: int, cfg: StarConfig) -> np.ndarray:
    """Pattern ids of the test rows, resampled with replacement (frequency-weighted)."""
    present = idx.row_pattern[test]
    n_distinct = len(np.unique(present))
    r = cfg.pattern_draws if cfg.pattern_draws is not None else 5 * n_distinct
    rng = derive_rng(cfg.seed, "star-patterns", j)
    return present[rng.integers(0, len(present), size=r)]


def score_variable_star(data: MaskedDataset, imputer: Imputer, j: int, cfg: StarConfig,
                        idx: PatternIndex | None = None) -> VariableScore:
    idx = compute_pattern_index(data) if idx is None else idx
    obs, mis = idx.rows_observed[j], idx.rows_missing[j]
    base = dict(name=data.names[j], weight=len(mis) * len(obs) / data.n ** 2,
                n_test=0, n_missing=len(mis))
    if len(obs) < cfg.min_rows:
        return VariableScore(score=None, skipped=f"fewer than {cfg.min_rows} observed cells", **base)
    test = split_test_rows(idx, j, cfg)
    base["n_test"] = len(test)
    train_rows = np.setdiff1d(np.arange(data.n), test)
    try:
        train = imputer.fit(data.take_rows(train_rows), seed=derive_seed(cfg.seed, "star-fit", j))
        train_imp = train.impute(1, seed=derive_seed(cfg.seed, "star-train", j))[0]
    except Exception as exc:
        log.warning("imputer %s failed on training rows for %s: %s", imputer.label(),
                    data.names[j], exc)
        return VariableScore(score=None, skipped=f"imputer failed: {exc}", **base)

    draws = draw_patterns(idx, test, j, cfg)
    per_draw = []
    for r, pid in enumerate(draws):
        rows = test[idx.row_pattern[test] == pid]
        pattern = idx.patterns[pid]
        cols = [c for c in range(data.d) if c == j or pattern[c] == 0]
        pos = cols.index(j)
        test_vals = np.array(data.values[np.ix_(rows, cols)])
        test_vals[:, pos] = np.nan
        vals = np.vstack([train_imp.values[:, cols], test_vals])
        table = data.take_columns(cols).replace_values(vals)
        try:
            fitted = imputer.fit(table, seed=derive_seed(cfg.seed, "star-fit", j, r))
            reps = fitted.impute(cfg.N, seed=derive_seed(cfg.seed, "star-draws", j, r))
        except Exception as exc:
            log.warning("pattern draw %d for %s skipped: %s", r, data.names[j], exc)
            continue
        n_train = len(train_rows)
        codes = np.stack([d.values[n_train:, pos] for d in reps], axis=1)
        per_draw.append(stable_mean(_score_draws(codes, data.values[rows, j], data.kinds[j])))
    if not per_draw:
        return VariableScore(score=None, skipped="imputer failed on every pattern draw", **base)
    comps = tuple(data.names[c] for c in range(data.d) if c != j)
    return VariableScore(score=math.fsum(per_draw) / len(per_draw), companions=comps, **base)


def energy_i_score_star(data: MaskedDataset, imputer: Imputer, cfg: StarConfig | None = None,
                        n_jobs: int | None = None) -> ScoreReport:
    """Energy-I-Score* of ``imputer`` on ``data``; the aggregate is the plain
    mean over scored variables."""
    cfg = StarConfig() if cfg is None else cfg
    idx = compute_pattern_index(data)
    todo = list(idx.scored_set)
    if not todo:
        raise NothingScorable("no scorable variables")
    n_jobs = default_threads() if n_jobs is None else n_jobs

    def run(j):
        return score_variable_star(data, imputer, j, cfg, idx)

    if n_jobs > 1 and len(todo) > 1:
        with ThreadPoolExecutor(n_jobs) as pool:
            results = list(pool.map(run, todo))
    else:
        results = [run(j) for j in todo]
    kept = [v.score for v in results if not v.is_skipped]
    if not kept:
        raise NothingScorable("no scorable variables")
    config = {"scorer": "energy_i_score_star", "N": cfg.N, "min_rows": cfg.min_rows,
              "weighted": False, "seed": cfg.seed, "test_fraction": cfg.test_fraction,
              "pattern_draws": cfg.pattern_draws, "imputer": imputer.label()}
    return ScoreReport({v.name: v for v in results}, math.fsum(kept) / len(kept), config)
