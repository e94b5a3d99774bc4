"""Synthetic benchmarks with known imputation laws.

Each generator returns ``(complete, masked)`` where ``masked`` is
``complete`` with the pattern's cells blanked. Random numbers come from
``derive_rng(seed, <generator name>)``.
"""
from __future__ import annotations

import inspect

import numpy as np
from scipy.special import ndtr

from .data import CompleteDataset, MaskedDataset, apply_mask
from .imputers import strict_propriety_cov, toeplitz_corr
from .rng import derive_rng

UNIFORM_PATTERNS = np.array([
    [0, 0, 0, 0, 0, 0],
    [0, 1, 0, 0, 0, 0],
    [1, 0, 0, 0, 0, 0],
], dtype=np.int8)

MIXTURE_PATTERNS = np.array([
    [1, 0, 0, 0, 0, 0],
    [0, 1, 0, 0, 0, 0],
    [0, 0, 1, 0, 0, 0],
], dtype=np.int8)

MIXTURE_MEANS = np.array([[5.0] * 3, [0.0] * 3, [-5.0] * 3])
MIXTURE_B = np.tile([0.5, 1.0, 1.5], (3, 1))
MIXTURE_NOISE_VAR = 4.0

STRICT_PATTERNS = np.array([
    [1, 0, 0, 0, 0, 0],
    [0, 1, 0, 0, 0, 0],
    [0, 0, 0, 0, 0, 0],
], dtype=np.int8)


def _pair(values, mask):
    complete = CompleteDataset(values)
    return complete, apply_mask(complete, mask)


def _correlated_normals(rng, n, cov):
    chol = np.linalg.cholesky(cov)
    return rng.standard_normal((n, cov.shape[0])) @ chol.T


def uniform_pattern_probs(x1) -> np.ndarray:
    """Rows of ``P(M = m_k | x1)`` for the three uniform-example patterns."""
    x1 = np.asarray(x1, dtype=float)
    return np.stack([x1 / 3, 2 / 3 - x1 / 3, np.full_like(x1, 1 / 3)], axis=-1)


def gen_uniform(n: int = 2000, rho: float = 0.0, seed: int = 0):
    """Six U(0, 1) columns; X1 or X2 go missing depending on x1.

    With ``rho != 0`` the first three columns are ``Phi(Y)`` with ``Y``
    Gaussian, correlation ``rho**|i-j|``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if not -1 < rho < 1:
        raise ValueError("rho must lie in (-1, 1)")
    rng = derive_rng(seed, "uniform")
    x = rng.random((n, 6))
    if rho != 0:
        x[:, :3] = ndtr(_correlated_normals(rng, n, toeplitz_corr(rho, 3)))
    cum = np.cumsum(uniform_pattern_probs(x[:, 0]), axis=1)
    u = rng.random(n)
    pattern = (u[:, None] >= cum[:, :-1]).sum(axis=1)
    return _pair(x, UNIFORM_PATTERNS[pattern])


def _mixture(n_per_pattern, seed, tag, link):
    if n_per_pattern < 1:
        raise ValueError("n_per_pattern must be >= 1")
    rng = derive_rng(seed, tag)
    cov = toeplitz_corr(0.5, 3)
    blocks, masks = [], []
    for k, mean in enumerate(MIXTURE_MEANS):
        x_obs = mean + _correlated_normals(rng, n_per_pattern, cov)
        eps = np.sqrt(MIXTURE_NOISE_VAR) * rng.standard_normal((n_per_pattern, 3))
        blocks.append(np.hstack([link(x_obs) + eps, x_obs]))
        masks.append(np.tile(MIXTURE_PATTERNS[k], (n_per_pattern, 1)))
    return _pair(np.vstack(blocks), np.vstack(masks))


def gen_gauss_mixture(n_per_pattern: int = 500, seed: int = 0):
    """Gaussian ``X4..X6`` with pattern-specific means; ``X1..X3`` linear in them."""
    return _mixture(n_per_pattern, seed, "gauss_mixture", lambda xo: xo @ MIXTURE_B.T)


def nonlinear_link(x_obs) -> np.ndarray:
    x_obs = np.asarray(x_obs, dtype=float)
    x1, x2, x3 = x_obs[..., 0], x_obs[..., 1], x_obs[..., 2]
    return np.stack([x3 * np.sin(x1 * x2), x2 * (x2 > 0), np.arctan(x1) * np.arctan(x2)], axis=-1)


def gen_nonlinear_mixture(n_per_pattern: int = 500, seed: int = 0):
    """As :func:`gen_gauss_mixture` with a nonlinear link."""
    return _mixture(n_per_pattern, seed, "nonlinear_mixture", nonlinear_link)


def gen_strict_propriety(n: int = 2000, corr: float = 0.7, seed: int = 0):
    """Standard normals with ``cov(X1, X2) = corr``; X1 or X2 missing, each w.p. 1/3."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = derive_rng(seed, "strict_propriety")
    x = _correlated_normals(rng, n, strict_propriety_cov(corr))
    pattern = rng.integers(0, 3, size=n)
    return _pair(x, STRICT_PATTERNS[pattern])


def cell_probability(prop: float, d: int, n_always_observed: int) -> float:
    """Per-cell missing probability giving overall fraction ``prop``."""
    return prop * d / (d - n_always_observed)


def mcar_amputate(complete: MaskedDataset, prop: float, n_always_observed: int = 0,
                  seed: int = 0) -> MaskedDataset:
    """MCAR cell-wise amputation.

    ``n_always_observed`` columns, chosen at random, stay complete; other
    cells go missing independently with a probability chosen so that the
    expected overall missing fraction is ``prop``. Rows that would lose
    every amputable cell are redrawn, which lowers the realised fraction
    slightly when few columns are amputable.
    """
    if not 0 <= prop < 1:
        raise ValueError("prop must lie in [0, 1)")
    d = complete.d
    if not 0 <= n_always_observed < d:
        raise ValueError("n_always_observed must lie in [0, d)")
    if not complete.is_complete():
        raise ValueError("mcar_amputate needs a complete table")
    q = cell_probability(prop, d, n_always_observed)
    if q >= 1:
        raise ValueError(f"prop={prop} is unreachable with {n_always_observed} complete columns")
    rng = derive_rng(seed, "mcar")
    keep = rng.choice(d, size=n_always_observed, replace=False)
    amputable = np.setdiff1d(np.arange(d), keep)
    mask = np.zeros(complete.shape, dtype=np.int8)
    if q == 0:
        return apply_mask(complete, mask)
    sub = rng.random((complete.n, amputable.size)) < q
    while True:
        full = sub.all(axis=1)
        if not full.any():
            break
        sub[full] = rng.random((int(full.sum()), amputable.size)) < q
    mask[:, amputable] = sub
    return apply_mask(complete, mask)


GENERATORS = {
    "uniform": gen_uniform,
    "uniform_dep": lambda n=2000, rho=0.7, seed=0: gen_uniform(n, rho, seed),
    "gauss_mixture": gen_gauss_mixture,
    "nonlinear_mixture": gen_nonlinear_mixture,
    "strict_propriety": gen_strict_propriety,
}


def generate(which: str, seed: int = 0, **params):
    """Run a named generator; see ``GENERATORS``."""
    try:
        gen = GENERATORS[which]
    except KeyError:
        raise ValueError(f"unknown generator {which!r}; choose from {sorted(GENERATORS)}") from None
    check_params(gen, params)
    return gen(seed=seed, **params)


def check_params(func, params: dict) -> None:
    """Raise ValueError for keyword arguments ``func`` does not accept."""
    accepted = set(inspect.signature(func).parameters) - {"seed", "complete"}
    unknown = sorted(set(params) - accepted)
    if unknown:
        raise ValueError(f"unknown parameter(s) {unknown}; accepted {sorted(accepted)}")
