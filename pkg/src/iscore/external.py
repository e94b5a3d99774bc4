"""Scoring imputations produced outside this package.

The score needs ``N`` re-imputations of each variable's training table.
``export_tables`` writes those tables as ``<dir>/<variable>.csv``; any
tool can then fill each one ``N`` times into ``<draws>/<variable>/*.csv``
and :class:`FileDraws` replays the files in sorted order.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .data import CompleteDataset, MaskedDataset, align_kinds, compute_pattern_index, read_csv, write_csv
from .imputers import ImputationError, Imputer
from .score import companion_set, training_table


def scorable_tables(data: MaskedDataset, imputed: MaskedDataset, min_rows: int = 10):
    """Yield ``(name, table)`` for every variable the score would visit."""
    idx = compute_pattern_index(data)
    for j in idx.scored_set:
        if len(idx.rows_missing[j]) < min_rows or len(idx.rows_observed[j]) < min_rows:
            continue
        try:
            comps, _ = companion_set(data, idx, j)
        except ValueError:
            continue
        table, _ = training_table(data, imputed, idx, j, comps)
        yield data.names[j], table


def export_tables(data: MaskedDataset, imputed: MaskedDataset, out_dir, min_rows: int = 10) -> dict:
    """Write training tables and an index ``tables.json``; returns the index."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    index = {}
    for name, table in scorable_tables(data, imputed, min_rows):
        write_csv(table, out / f"{name}.csv")
        index[name] = {"file": f"{name}.csv", "columns": list(table.names)}
    (out / "tables.json").write_text(json.dumps(index, indent=2, sort_keys=True) + "\n")
    return index


def draw_files(draws_dir, name: str) -> list[Path]:
    return sorted((Path(draws_dir) / name).glob("*.csv"))


class FileDraws(Imputer):
    """Replays externally produced completions of the training tables.

    ``fit`` identifies the variable as the single column with missing
    cells and checks every file against the table. Only ``impute`` with
    ``k`` up to the number of files is supported.
    """

    name = "file_draws"

    def __init__(self, draws_dir):
        self.draws_dir = Path(draws_dir)

    def params(self):
        return {"dir": str(self.draws_dir)}

    def _prepare(self, data, seed):
        blank = [j for j in range(data.d) if np.isnan(data.values[:, j]).any()]
        if len(blank) != 1:
            raise ImputationError("file draws expect exactly one incomplete column")
        name = data.names[blank[0]]
        files = draw_files(self.draws_dir, name)
        if not files:
            raise ImputationError(f"no draw files under {self.draws_dir / name}")
        tables = []
        observed = ~np.isnan(data.values)
        for path in files:
            filled = align_kinds(read_csv(path), data)
            if filled.shape != data.shape or filled.names != data.names:
                raise ImputationError(f"{path} does not match the training table of {name!r}")
            if np.isnan(filled.values).any():
                raise ImputationError(f"{path} is not complete")
            if (filled.values[observed] != data.values[observed]).any():
                raise ImputationError(f"{path} changes observed cells of the training table")
            tables.append(CompleteDataset(filled.values, data.kinds, data.names))
        return tables

    def fit(self, data, seed=0):
        return _FittedFiles(self._prepare(data, seed))

    def _impute_once(self, data, state, rng):
        raise ImputationError("file draws are replayed through fit(...).impute(k)")


class _FittedFiles:
    def __init__(self, tables):
        self.tables = tables

    def impute(self, k=1, seed=0):
        if k > len(self.tables):
            raise ImputationError(f"{k} draws requested but only {len(self.tables)} files exist")
        return self.tables[:k]
