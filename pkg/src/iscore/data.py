"""Incomplete tables, missingness masks and pattern-derived index sets.

Cells are held in a single float matrix. Missing cells are ``NaN``;
categorical cells store the integer code of their label in
``ColumnKind.levels``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

MISSING_MARKERS = frozenset({"", "na", "nan"})


@dataclass(frozen=True)
class ColumnKind:
    """Continuous column (``levels is None``) or categorical with ordered levels."""

    levels: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.levels is not None:
            if len(self.levels) == 0:
                raise ValueError("categorical column needs at least one level")
            if len(set(self.levels)) != len(self.levels):
                raise ValueError(f"duplicate categorical levels: {self.levels}")

    @property
    def is_categorical(self) -> bool:
        return self.levels is not None

    @classmethod
    def categorical(cls, levels: Iterable[str]) -> "ColumnKind":
        return cls(tuple(str(lv) for lv in levels))


CONTINUOUS = ColumnKind()


class MaskedDataset:
    """An ``n x d`` table with missing cells.

    Parameters
    ----------
    values : array_like, shape (n, d)
        Cell values; ``NaN`` marks a missing cell. Categorical columns hold
        integer level codes.
    kinds : sequence of ColumnKind, optional
        Defaults to all continuous.
    names : sequence of str, optional
        Defaults to ``X1 .. Xd``.
    """

    def __init__(self, values, kinds: Sequence[ColumnKind] | None = None,
                 names: Sequence[str] | None = None):
        values = np.array(values, dtype=float)
        if values.ndim != 2:
            raise ValueError("values must be a 2-D array")
        n, d = values.shape
        if kinds is None:
            kinds = [CONTINUOUS] * d
        if names is None:
            names = [f"X{j + 1}" for j in range(d)]
        if len(kinds) != d or len(names) != d:
            raise ValueError("kinds and names must have one entry per column")
        if len(set(names)) != d:
            raise ValueError("column names must be unique")
        observed = ~np.isnan(values)
        if np.isinf(values[observed]).any():
            raise ValueError("observed cells must be finite")
        for j, kind in enumerate(kinds):
            if kind.is_categorical:
                codes = values[observed[:, j], j]
                bad = (codes < 0) | (codes >= len(kind.levels)) | (codes != np.round(codes))
                if bad.any():
                    raise ValueError(f"column {names[j]!r} has codes outside its levels")
        values.setflags(write=False)
        self._values = values
        self.kinds = tuple(kinds)
        self.names = tuple(str(nm) for nm in names)

    @property
    def values(self) -> np.ndarray:
        return self._values

    @property
    def n(self) -> int:
        return self._values.shape[0]

    @property
    def d(self) -> int:
        return self._values.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self._values.shape

    @property
    def mask(self) -> np.ndarray:
        """0/1 matrix, 1 where the cell is missing."""
        return np.isnan(self._values).astype(np.int8)

    @property
    def n_missing(self) -> int:
        return int(np.isnan(self._values).sum())

    def is_complete(self) -> bool:
        return self.n_missing == 0

    def column_index(self, name: str) -> int:
        return self.names.index(name)

    def replace_values(self, values) -> "MaskedDataset":
        return MaskedDataset(values, self.kinds, self.names)

    def take_rows(self, rows) -> "MaskedDataset":
        return MaskedDataset(self._values[np.asarray(rows, dtype=int)], self.kinds, self.names)

    def take_columns(self, cols: Sequence[int]) -> "MaskedDataset":
        cols = list(cols)
        return MaskedDataset(self._values[:, cols], [self.kinds[c] for c in cols],
                             [self.names[c] for c in cols])

    def labels(self, j: int) -> list:
        """Column ``j`` decoded to Python values (``None`` when missing)."""
        kind = self.kinds[j]
        out = []
        for v in self._values[:, j]:
            if math.isnan(v):
                out.append(None)
            elif kind.is_categorical:
                out.append(kind.levels[int(v)])
            else:
                out.append(float(v))
        return out

    def __eq__(self, other):
        if not isinstance(other, MaskedDataset):
            return NotImplemented
        return (self.kinds == other.kinds and self.names == other.names
                and np.array_equal(self._values, other._values, equal_nan=True))

    def __repr__(self):
        return (f"{type(self).__name__}(n={self.n}, d={self.d}, "
                f"missing={self.n_missing})")


class CompleteDataset(MaskedDataset):
    """A ``MaskedDataset`` without missing cells."""

    def __init__(self, values, kinds=None, names=None):
        super().__init__(values, kinds, names)
        if np.isnan(self._values).any():
            raise ValueError("CompleteDataset cannot contain missing cells")

    @classmethod
    def from_masked(cls, data: MaskedDataset) -> "CompleteDataset":
        return cls(data.values, data.kinds, data.names)


def apply_mask(complete: MaskedDataset, mask) -> MaskedDataset:
    """Blank the cells of ``complete`` where ``mask`` is 1."""
    mask = np.asarray(mask).astype(bool)
    if mask.shape != complete.shape:
        raise ValueError("mask shape does not match data")
    values = np.array(complete.values)
    values[mask] = np.nan
    return MaskedDataset(values, complete.kinds, complete.names)


def encode_labels(labels: Sequence, kind: ColumnKind) -> np.ndarray:
    """Map labels to level codes; ``None`` maps to ``NaN``."""
    if not kind.is_categorical:
        raise ValueError("encode_labels needs a categorical column")
    lookup = {lv: i for i, lv in enumerate(kind.levels)}
    out = np.empty(len(labels))
    for i, lab in enumerate(labels):
        if lab is None:
            out[i] = np.nan
            continue
        try:
            out[i] = lookup[str(lab)]
        except KeyError:
            raise ValueError(f"unseen label {lab!r}; levels are {kind.levels}") from None
    return out


def one_hot(data: MaskedDataset, j: int) -> np.ndarray:
    """One-hot indicators of categorical column ``j``.

    Returns an ``n x p`` float matrix; rows of missing cells are all ``NaN``.
    """
    kind = data.kinds[j]
    if not kind.is_categorical:
        raise ValueError(f"column {data.names[j]!r} is not categorical")
    return one_hot_codes(data.values[:, j], len(kind.levels))


def one_hot_codes(codes: np.ndarray, p: int) -> np.ndarray:
    codes = np.asarray(codes, dtype=float)
    out = np.zeros(codes.shape + (p,))
    missing = np.isnan(codes)
    idx = np.where(missing, 0, codes).astype(int)
    if ((idx < 0) | (idx >= p)).any():
        raise ValueError("category code outside levels")
    np.put_along_axis(out, idx[..., None], 1.0, axis=-1)
    out[missing] = np.nan
    return out


def encode_matrix(data: MaskedDataset) -> np.ndarray:
    """Numeric design: continuous columns as-is, categoricals one-hot."""
    blocks = []
    for j, kind in enumerate(data.kinds):
        if kind.is_categorical:
            blocks.append(one_hot(data, j))
        else:
            blocks.append(data.values[:, [j]])
    return np.hstack(blocks)


@dataclass(frozen=True)
class PatternIndex:
    """Distinct missingness patterns and the per-variable index sets.

    ``rows_observed[j]`` holds the rows whose pattern lies in L_j (variable
    ``j`` observed), ``rows_missing[j]`` those in its complement, and
    ``companions[j]`` the columns observed in every pattern of L_j.
    """

    patterns: np.ndarray
    row_pattern: np.ndarray
    rows_observed: tuple[np.ndarray, ...]
    rows_missing: tuple[np.ndarray, ...]
    companions: tuple[tuple[int, ...], ...]
    scored_set: tuple[int, ...]
    pattern_counts: np.ndarray = field(repr=False)

    @property
    def n_patterns(self) -> int:
        return self.patterns.shape[0]

    def patterns_observing(self, j: int) -> np.ndarray:
        """Ids of patterns in L_j."""
        return np.flatnonzero(self.patterns[:, j] == 0)


def compute_pattern_index(data: MaskedDataset) -> PatternIndex:
    if data.n == 0:
        raise ValueError("no rows")
    if data.d < 2:
        raise ValueError("need at least two columns")
    mask = data.mask
    patterns, row_pattern, counts = np.unique(mask, axis=0, return_inverse=True,
                                              return_counts=True)
    row_pattern = row_pattern.reshape(-1)
    rows_observed, rows_missing, companions = [], [], []
    for j in range(data.d):
        obs = np.flatnonzero(mask[:, j] == 0)
        rows_observed.append(obs)
        rows_missing.append(np.flatnonzero(mask[:, j] == 1))
        in_lj = patterns[patterns[:, j] == 0]
        if len(in_lj) == 0:
            companions.append(())
        else:
            always = np.flatnonzero((in_lj == 0).all(axis=0))
            companions.append(tuple(int(c) for c in always if c != j))
    scored = tuple(j for j in range(data.d) if len(rows_missing[j]) > 0)
    return PatternIndex(patterns=patterns.astype(np.int8), row_pattern=row_pattern,
                        rows_observed=tuple(rows_observed), rows_missing=tuple(rows_missing),
                        companions=tuple(companions), scored_set=scored,
                        pattern_counts=counts)


def fallback_companion(data: MaskedDataset, idx: PatternIndex, j: int) -> int:
    """Column sharing the most jointly observed rows with column ``j``.

    Ties go to the smallest column index.
    """
    observed = data.mask == 0
    counts = (observed & observed[:, [j]]).sum(axis=0)
    counts[j] = -1
    best = int(np.argmax(counts))
    if counts[best] <= 0:
        raise ValueError("no usable companion column")
    return best


# ---------------------------------------------------------------- CSV


def _is_missing(cell: str) -> bool:
    return cell.strip().lower() in MISSING_MARKERS


def _parse_float(cell: str) -> float | None:
    try:
        v = float(cell)
    except ValueError:
        return None
    return v if math.isfinite(v) else None


def read_csv(path, delimiter: str = ",",
             kinds: Mapping[str, str | Sequence[str]] | None = None) -> MaskedDataset:
    """Read a CSV with a header row.

    Empty fields, ``NA`` and ``NaN`` (any case) are missing. A column is
    categorical when any observed cell is not a number, unless ``kinds``
    maps its name to ``"continuous"``, ``"categorical"`` or an explicit
    list of levels.
    """
    kinds = dict(kinds or {})
    with open(path, newline="") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: missing header row") from None
        rows = [r for r in reader if r]
    d = len(header)
    for r_i, row in enumerate(rows):
        if len(row) != d:
            raise ValueError(f"{path}: row {r_i + 2} has {len(row)} fields, expected {d}")
    unknown = set(kinds) - set(header)
    if unknown:
        raise ValueError(f"kind override for unknown columns: {sorted(unknown)}")
    values = np.full((len(rows), d), np.nan)
    col_kinds = []
    for j, name in enumerate(header):
        cells = [row[j] for row in rows]
        observed = [(i, c.strip()) for i, c in enumerate(cells) if not _is_missing(c)]
        override = kinds.get(name)
        if override is None:
            categorical = any(_parse_float(c) is None for _, c in observed)
            levels = None
        elif isinstance(override, str):
            if override not in ("continuous", "categorical"):
                raise ValueError(f"unknown column kind {override!r}")
            categorical = override == "categorical"
            levels = None
        else:
            categorical = True
            levels = tuple(str(v) for v in override)
        if categorical:
            if levels is None:
                levels = tuple(sorted({c for _, c in observed}))
            kind = ColumnKind.categorical(levels)
            codes = encode_labels([c for _, c in observed], kind)
            for (i, _), code in zip(observed, codes):
                values[i, j] = code
        else:
            kind = CONTINUOUS
            for i, c in observed:
                v = _parse_float(c)
                if v is None:
                    raise ValueError(f"{path}: column {name!r} row {i + 2}: "
                                     f"not a finite number: {c!r}")
                values[i, j] = v
        col_kinds.append(kind)
    return MaskedDataset(values, col_kinds, header)


def _format_cell(v: float, kind: ColumnKind) -> str:
    if math.isnan(v):
        return "NA"
    if kind.is_categorical:
        return kind.levels[int(v)]
    return repr(float(v))


def write_csv(data: MaskedDataset, path, delimiter: str = ",") -> None:
    """Write ``data``; missing cells become ``NA``. Floats round-trip exactly."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        w.writerow(data.names)
        for row in data.values:
            w.writerow([_format_cell(v, k) for v, k in zip(row, data.kinds)])


def write_mask_csv(data: MaskedDataset, path, delimiter: str = ",") -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        w.writerow(data.names)
        w.writerows(data.mask.tolist())


def align_kinds(data: MaskedDataset, reference: MaskedDataset) -> MaskedDataset:
    """Re-express ``data`` with the column kinds of ``reference``.

    Used when a completed file was read separately from its incomplete
    source, so that level codes agree. Raises on unseen labels.
    """
    if data.names != reference.names:
        raise ValueError("column names differ")
    values = np.array(data.values)
    for j, (k_ref, k_dat) in enumerate(zip(reference.kinds, data.kinds)):
        if k_ref == k_dat:
            continue
        if k_ref.is_categorical:
            labels = data.labels(j)
            if not k_dat.is_categorical:
                labels = [None if v is None else _number_label(v) for v in labels]
            values[:, j] = encode_labels(labels, k_ref)
        else:
            raise ValueError(f"column {data.names[j]!r} is not numeric")
    return MaskedDataset(values, reference.kinds, reference.names)


def _number_label(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(v)


def load_pair(masked_path, imputed_path, delimiter: str = ",",
              kinds=None) -> tuple[MaskedDataset, MaskedDataset]:
    masked = read_csv(masked_path, delimiter, kinds)
    imputed = align_kinds(read_csv(imputed_path, delimiter, kinds), masked)
    return masked, imputed


def disagreeing_cells(masked: MaskedDataset, imputed: MaskedDataset) -> list[tuple[int, str]]:
    """Observed cells of ``masked`` whose value differs in ``imputed``."""
    if masked.shape != imputed.shape:
        raise ValueError(f"shape mismatch: {masked.shape} vs {imputed.shape}")
    obs = ~np.isnan(masked.values)
    bad = obs & (masked.values != imputed.values)
    return [(int(i), masked.names[j]) for i, j in zip(*np.nonzero(bad))]


def ensure_dir(path) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p
