"""The energy-I-Score: rank imputations without access to the complete data.

For every variable ``j`` that has missing cells, the rows where ``j`` is
observed become test points. A training table is built from the
candidate imputation, restricted to ``j`` and the columns ``O_j`` that are
observed whenever ``j`` is; the test rows get ``j`` blanked out. The
candidate imputer refills those blanks ``N`` times and each test value is
scored against its ``N`` draws with the energy score.
"""
from __future__ import annotations

import json
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .data import MaskedDataset, PatternIndex, compute_pattern_index, fallback_companion, one_hot_codes
from .energy import energy_scores, stable_mean
from .imputers import Imputer
from .rng import derive_seed

log = logging.getLogger(__name__)

THREADS_ENV = "ISCORE_THREADS"


class NothingScorable(ValueError):
    """No variable could be scored."""


@dataclass
class VariableScore:
    name: str
    score: float | None
    weight: float
    n_test: int
    n_missing: int
    companions: tuple[str, ...] = ()
    fallback: bool = False
    skipped: str | None = None

    @property
    def is_skipped(self) -> bool:
        return self.skipped is not None


@dataclass
class ScoreReport:
    per_variable: dict[str, VariableScore]
    aggregate: float
    config: dict = field(default_factory=dict)

    @property
    def scores(self) -> dict[str, float | None]:
        return {k: v.score for k, v in self.per_variable.items()}

    def to_dict(self) -> dict:
        return {
            "aggregate": self.aggregate,
            "config": dict(self.config),
            "per_variable": {k: {**asdict(v), "companions": list(v.companions)}
                             for k, v in self.per_variable.items()},
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    def table(self) -> str:
        lines = [f"{'variable':<16}{'score':>14}{'weight':>10}{'n_test':>8}  note"]
        for v in self.per_variable.values():
            score = "NA" if v.score is None else f"{v.score:.6f}"
            note = v.skipped or ("fallback companion" if v.fallback else "")
            lines.append(f"{v.name:<16}{score:>14}{v.weight:>10.4f}{v.n_test:>8}  {note}")
        lines.append(f"{'aggregate':<16}{self.aggregate:>14.6f}")
        return "\n".join(lines)


def default_threads() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def _check_pair(data: MaskedDataset, imputed: MaskedDataset):
    if data.shape != imputed.shape or data.names != imputed.names or data.kinds != imputed.kinds:
        raise ValueError("imputed table does not match the incomplete table (shape, names or kinds)")


def companion_set(data: MaskedDataset, idx: PatternIndex, j: int) -> tuple[tuple[int, ...], bool]:
    """``O_j``, or the single best fallback column when ``O_j`` is empty."""
    comp = idx.companions[j]
    if comp:
        return comp, False
    return (fallback_companion(data, idx, j),), True


def training_table(data: MaskedDataset, imputed: MaskedDataset, idx: PatternIndex,
                   j: int, companions: Sequence[int]) -> tuple[MaskedDataset, int]:
    """Imputed values on ``{j} + companions`` with ``j`` blanked on its observed rows.

    Returns the table and the position of ``j`` within it.
    """
    cols = sorted({j, *companions})
    vals = np.array(imputed.values[:, cols])
    pos = cols.index(j)
    needed = np.isnan(vals)
    needed[idx.rows_observed[j], pos] = False
    if needed.any():
        rows, cc = np.nonzero(needed)
        raise ValueError(f"imputed table is missing {rows.size} cells needed for "
                         f"{data.names[j]!r}, e.g. row {rows[0]} column {data.names[cols[cc[0]]]!r}")
    vals[idx.rows_observed[j], pos] = np.nan
    return imputed.take_columns(cols).replace_values(vals), pos


def _score_draws(draw_codes: np.ndarray, test: np.ndarray, kind) -> np.ndarray:
    """Per-row energy scores; ``draw_codes`` is (n_test, N)."""
    if kind.is_categorical:
        p = len(kind.levels)
        return energy_scores(one_hot_codes(draw_codes, p), one_hot_codes(test, p))
    return energy_scores(draw_codes, test)


def score_variable(data: MaskedDataset, imputed: MaskedDataset, imputer: Imputer, j: int,
                   N: int = 50, min_rows: int = 10, seed: int = 0,
                   idx: PatternIndex | None = None) -> VariableScore:
    """Energy-I-Score of a single variable.

    Returns a skipped :class:`VariableScore` (``score is None``) when the
    variable has fewer than ``min_rows`` missing or observed cells, no
    usable companion column, or the imputer fails on the training table.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    idx = compute_pattern_index(data) if idx is None else idx
    name = data.names[j]
    obs, mis = idx.rows_observed[j], idx.rows_missing[j]
    weight = len(mis) * len(obs) / data.n ** 2
    base = dict(name=name, weight=weight, n_test=len(obs), n_missing=len(mis))
    if len(mis) < min_rows or len(obs) < min_rows:
        return VariableScore(score=None, skipped=f"fewer than {min_rows} missing or observed cells",
                             **base)
    try:
        comps, fallback = companion_set(data, idx, j)
    except ValueError as exc:
        return VariableScore(score=None, skipped=str(exc), **base)
    base.update(companions=tuple(data.names[c] for c in comps), fallback=fallback)
    table, pos = training_table(data, imputed, idx, j, comps)
    try:
        fitted = imputer.fit(table, seed=derive_seed(seed, "fit", j))
        draws = fitted.impute(N, seed=derive_seed(seed, "draws", j))
    except Exception as exc:  # imputer failures skip the variable, not the run
        log.warning("imputer %s failed on %s: %s", imputer.label(), name, exc)
        return VariableScore(score=None, skipped=f"imputer failed: {exc}", **base)
    draw_codes = np.stack([d.values[obs, pos] for d in draws], axis=1)
    rows = _score_draws(draw_codes, data.values[obs, j], data.kinds[j])
    return VariableScore(score=stable_mean(rows), **base)


def aggregate_scores(per_variable: Sequence[VariableScore], weighted: bool = True) -> float:
    kept = [v for v in per_variable if not v.is_skipped]
    if not kept:
        raise NothingScorable("no scorable variables")
    terms = [v.weight * v.score if weighted else v.score for v in kept]
    return math.fsum(terms) / len(kept)


def energy_i_score(data: MaskedDataset, imputed: MaskedDataset, imputer: Imputer, N: int = 50,
                   min_rows: int = 10, weighted: bool = True, seed: int = 0,
                   variables: Sequence[int] | None = None,
                   n_jobs: int | None = None) -> ScoreReport:
    """Energy-I-Score of one imputation of ``data``.

    Parameters
    ----------
    data : MaskedDataset
        The incomplete table.
    imputed : MaskedDataset
        The candidate completion of ``data`` produced by ``imputer``.
    imputer : Imputer
        The method, re-run ``N`` times per variable on the training tables.
    N : int
        Draws per test point.
    min_rows : int
        Variables with fewer missing or observed cells are skipped.
    weighted : bool
        Weight each variable by ``|missing| * |observed| / n**2`` before
        averaging over the scored variables; ``False`` gives the plain mean.
    seed : int
        Master seed; variable ``j`` and replicate ``r`` use derived streams.
    variables : sequence of int, optional
        Restrict scoring to these columns.
    n_jobs : int, optional
        Worker threads; defaults to ``$ISCORE_THREADS`` or 1. Results do not
        depend on it.
    """
    _check_pair(data, imputed)
    idx = compute_pattern_index(data)
    todo = list(idx.scored_set)
    if variables is not None:
        wanted = set(variables)
        todo = [j for j in todo if j in wanted]
    if not todo:
        raise NothingScorable("no scorable variables")
    n_jobs = default_threads() if n_jobs is None else n_jobs

    def run(j):
        return score_variable(data, imputed, imputer, j, N, min_rows, seed, idx)

    if n_jobs > 1 and len(todo) > 1:
        with ThreadPoolExecutor(n_jobs) as pool:
            results = list(pool.map(run, todo))
    else:
        results = [run(j) for j in todo]
    agg = aggregate_scores(results, weighted)
    config = {"scorer": "energy_i_score", "N": N, "min_rows": min_rows, "weighted": weighted,
              "seed": seed, "imputer": imputer.label()}
    return ScoreReport({v.name: v for v in results}, agg, config)


def standardize_scores(raw: Mapping) -> dict:
    """Affinely map a batch of scores onto [-1, 0].

    ``s -> (s - max) / (max - min)`` over the finite entries; a constant
    batch maps to 0. Missing entries (``None`` or NaN) stay ``None``. With
    fewer than two finite entries the scores are returned unchanged.
    """
    finite = {k: float(v) for k, v in raw.items()
              if v is not None and math.isfinite(float(v))}
    out = {k: None for k in raw}
    if len(finite) < 2:
        log.warning("standardize_scores: fewer than two finite scores, returning them unchanged")
        out.update(finite)
        return out
    hi, lo = max(finite.values()), min(finite.values())
    span = hi - lo
    for k, v in finite.items():
        out[k] = 0.0 if span == 0 else (v - hi) / span
    return out
