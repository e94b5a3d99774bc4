"""Energy scores and energy distances.

All norms are Euclidean; scalar samples are treated as 1-vectors, so the
norm reduces to the absolute difference.
"""
from __future__ import annotations

import math
from typing import Sequence

import numpy as np
from scipy.spatial.distance import cdist

from .data import MaskedDataset, encode_matrix

_COMPENSATE_ABOVE = 10**5
_ROW_BLOCK = 256


def _as_draw_matrix(draws) -> np.ndarray:
    arr = np.asarray(draws, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2 or arr.shape[0] < 1:
        raise ValueError("draws must be a non-empty (N,) or (N, p) array")
    return arr


def empirical_energy_score(draws, test) -> float:
    """Energy score of an ``N``-point sample against one observed value.

    ``1/(2N^2) sum_{l,l'} |x_l - x_l'| - 1/N sum_l |x_l - y|``; the double
    sum includes the zero diagonal. Higher is better; the maximum for a
    point mass is 0.
    """
    x = _as_draw_matrix(draws)
    y = np.atleast_1d(np.asarray(test, dtype=float))
    if y.shape != (x.shape[1],):
        raise ValueError(f"test arity {y.shape} does not match draws {x.shape}")
    if not (np.isfinite(x).all() and np.isfinite(y).all()):
        raise ValueError("non-finite values in energy score")
    return float(energy_scores(x[None], y[None])[0])


def energy_scores(draws, tests) -> np.ndarray:
    """Row-wise empirical energy scores.

    Parameters
    ----------
    draws : array, shape (n, N) or (n, N, p)
    tests : array, shape (n,) or (n, p)

    Returns
    -------
    ndarray, shape (n,)
    """
    x = np.asarray(draws, dtype=float)
    y = np.asarray(tests, dtype=float)
    if x.ndim == 2:
        x = x[..., None]
    if y.ndim == 1:
        y = y[:, None]
    if x.ndim != 3 or y.shape != (x.shape[0], x.shape[2]):
        raise ValueError(f"incompatible shapes: draws {np.shape(draws)}, tests {np.shape(tests)}")
    if not (np.isfinite(x).all() and np.isfinite(y).all()):
        raise ValueError("non-finite values in energy score")
    n, big_n, p = x.shape
    out = np.empty(n)
    for start in range(0, n, _ROW_BLOCK):
        xb = x[start:start + _ROW_BLOCK]
        yb = y[start:start + _ROW_BLOCK]
        if p == 1:
            spread = np.abs(xb[:, :, None, 0] - xb[:, None, :, 0]).sum(axis=(1, 2))
            dist = np.abs(xb[:, :, 0] - yb).sum(axis=1)
        else:
            diff = xb[:, :, None, :] - xb[:, None, :, :]
            spread = np.sqrt((diff ** 2).sum(axis=-1)).sum(axis=(1, 2))
            dist = np.sqrt(((xb - yb[:, None, :]) ** 2).sum(axis=-1)).sum(axis=1)
        out[start:start + _ROW_BLOCK] = spread / (2.0 * big_n ** 2) - dist / big_n
    return out


def stable_mean(values) -> float:
    """Mean with exactly rounded summation for long inputs."""
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        raise ValueError("mean of empty sequence")
    if v.size > _COMPENSATE_ABOVE:
        return math.fsum(v) / v.size
    return float(v.sum() / v.size)


def _normalise_discrete(dist):
    atoms, weights = dist
    atoms = _as_draw_matrix(atoms)
    w = np.asarray(weights, dtype=float).ravel()
    if w.shape[0] != atoms.shape[0]:
        raise ValueError("one weight per atom required")
    if (w < 0).any() or abs(math.fsum(w) - 1.0) > 1e-12:
        raise ValueError("weights must be non-negative and sum to 1")
    return atoms, w


def expected_energy_score(predictive, truth) -> float:
    """Exact expected energy score for finite-support distributions.

    Both arguments are ``(atoms, weights)`` pairs. Returns
    ``E_{Y~truth}[ 1/2 E|X - X'| - E|X - Y| ]`` with ``X, X' ~ predictive``.
    """
    xa, xw = _normalise_discrete(predictive)
    ya, yw = _normalise_discrete(truth)
    if xa.shape[1] != ya.shape[1]:
        raise ValueError("atoms of both distributions need the same arity")
    spread = xw @ cdist(xa, xa) @ xw
    cross = xw @ cdist(xa, ya) @ yw
    return float(0.5 * spread - cross)


def _mean_pairwise(a: np.ndarray, b: np.ndarray) -> float:
    n_terms = a.shape[0] * b.shape[0]
    if n_terms <= _COMPENSATE_ABOVE:
        return float(cdist(a, b).sum() / n_terms)
    partial = []
    for start in range(0, a.shape[0], _ROW_BLOCK):
        partial.append(math.fsum(cdist(a[start:start + _ROW_BLOCK], b).ravel()))
    return math.fsum(partial) / n_terms


def energy_distance(sample_a, sample_b) -> float:
    """V-statistic energy distance ``2E|X-Y| - E|X-X'| - E|Y-Y'|``."""
    a = _as_draw_matrix(sample_a)
    b = _as_draw_matrix(sample_b)
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"column mismatch: {a.shape[1]} vs {b.shape[1]}")
    if not (np.isfinite(a).all() and np.isfinite(b).all()):
        raise ValueError("energy distance needs complete numeric samples")
    if a is b or (a.shape == b.shape and np.array_equal(a, b)):
        return 0.0
    # canonical argument order makes the result exactly symmetric
    if (b.shape, b.tobytes()) < (a.shape, a.tobytes()):
        a, b = b, a
    return 2.0 * _mean_pairwise(a, b) - _mean_pairwise(a, a) - _mean_pairwise(b, b)


def full_information_score(complete: MaskedDataset, imputed: MaskedDataset) -> float:
    """Negative energy distance between the complete and an imputed table."""
    if complete.shape != imputed.shape:
        raise ValueError(f"shape mismatch: {complete.shape} vs {imputed.shape}")
    if complete.kinds != imputed.kinds:
        raise ValueError("column kinds differ")
    if not (complete.is_complete() and imputed.is_complete()):
        raise ValueError("full-information score needs two complete tables")
    return -energy_distance(encode_matrix(complete), encode_matrix(imputed))


def discrete(atoms: Sequence, weights: Sequence | None = None):
    """Convenience constructor for ``expected_energy_score`` arguments."""
    atoms = np.asarray(atoms, dtype=float)
    if weights is None:
        weights = np.full(atoms.shape[0], 1.0 / atoms.shape[0])
    return atoms, np.asarray(weights, dtype=float)
