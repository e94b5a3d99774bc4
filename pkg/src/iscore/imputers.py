"""Imputation distributions.

An :class:`Imputer` is a configuration. ``fit`` binds it to an incomplete
table and returns an immutable :class:`FittedImputer`, whose ``impute``
draws ``k`` completed tables. Replicate ``r`` draws from its own stream
``derive_rng(seed, "replicate", r)``, so a replicate does not depend on
how many others are requested. Observed cells are always returned
unchanged.

Oracle imputers know the data-generating process of the synthetic
benchmarks and identify columns by name (``X1`` .. ``X6``).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable, Sequence

import numpy as np
from scipy.special import ndtr, ndtri

from .data import CompleteDataset, MaskedDataset
from .rng import derive_rng


class ImputationError(RuntimeError):
    """The imputer cannot complete the given table."""


class Imputer:
    """Base class. Subclasses implement ``_impute_once``."""

    name = "imputer"
    multiple_capable = True

    def params(self) -> dict[str, Any]:
        return {}

    def label(self) -> str:
        p = self.params()
        if not p:
            return self.name
        args = ",".join(f"{k}={v}" for k, v in p.items())
        return f"{self.name}({args})"

    def _prepare(self, data: MaskedDataset, seed: int) -> Any:
        return None

    def _impute_once(self, data: MaskedDataset, state: Any,
                     rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def fit(self, data: MaskedDataset, seed: int = 0) -> "FittedImputer":
        return FittedImputer(self, data, self._prepare(data, seed))

    def fit_impute(self, data: MaskedDataset, k: int = 1, seed: int = 0) -> list[CompleteDataset]:
        return self.fit(data, seed).impute(k, seed)

    def __repr__(self):
        return self.label()


@dataclass(frozen=True)
class FittedImputer:
    imputer: Imputer
    data: MaskedDataset
    state: Any = None

    def impute(self, k: int = 1, seed: int = 0) -> list[CompleteDataset]:
        if k < 1:
            raise ValueError("k must be >= 1")
        data = self.data
        if data.is_complete():
            done = CompleteDataset.from_masked(data)
            return [done] * k
        n_distinct = k if self.imputer.multiple_capable else 1
        out = [self._one(derive_rng(seed, "replicate", r)) for r in range(n_distinct)]
        return out * k if n_distinct == 1 else out

    def _one(self, rng) -> CompleteDataset:
        vals = np.array(self.imputer._impute_once(self.data, self.state, rng), dtype=float)
        observed = ~np.isnan(self.data.values)
        vals[observed] = self.data.values[observed]
        if np.isnan(vals).any():
            raise ImputationError(f"{self.imputer.label()} left cells missing")
        return CompleteDataset(vals, self.data.kinds, self.data.names)


def _observed_pool(data: MaskedDataset, j: int) -> np.ndarray:
    col = data.values[:, j]
    pool = col[~np.isnan(col)]
    if pool.size == 0:
        raise ImputationError(f"column {data.names[j]!r} has no observed values")
    return pool


def _incomplete_columns(data: MaskedDataset) -> list[int]:
    """Columns with missing cells, ascending by missing count then index."""
    counts = np.isnan(data.values).sum(axis=0)
    return sorted((j for j in range(data.d) if counts[j] > 0), key=lambda j: (counts[j], j))


class MarginalSample(Imputer):
    """Draw each missing cell uniformly from its column's observed values."""

    name = "marginal_sample"

    def _prepare(self, data, seed):
        return {j: _observed_pool(data, j) for j in _incomplete_columns(data)}

    def _impute_once(self, data, pools, rng):
        vals = np.array(data.values)
        for j, pool in pools.items():
            miss = np.isnan(vals[:, j])
            vals[miss, j] = rng.choice(pool, size=int(miss.sum()))
        return vals


class FCSImputer(Imputer):
    """Chained-equations imputation with linear regressions.

    Missing cells start as marginal draws. Each sweep regresses every
    incomplete continuous column on all other columns (intercept,
    continuous values, drop-first one-hot categoricals) using the rows
    where it is observed, then refills it with the fitted value, plus
    Gaussian noise at the residual standard deviation when ``noise`` is
    set. Categorical targets are refilled by marginal draws.

    Rank-deficient designs are solved with a ridge penalty ``ridge``.
    """

    def __init__(self, iterations: int = 5, noise: bool = True, ridge: float = 1e-6):
        if iterations < 1:
            raise ValueError("iterations must be >= 1")
        self.iterations = iterations
        self.noise = noise
        self.ridge = ridge
        self.name = "fcs_gaussian" if noise else "fcs_regression_predict"
        self.multiple_capable = noise

    def params(self):
        return {"iterations": self.iterations}

    def _prepare(self, data, seed):
        order = _incomplete_columns(data)
        pools = {j: _observed_pool(data, j) for j in order}
        return order, pools

    def _design(self, vals, kinds, exclude):
        blocks = [np.ones((vals.shape[0], 1))]
        for c, kind in enumerate(kinds):
            if c == exclude:
                continue
            if kind.is_categorical:
                codes = vals[:, c].astype(int)
                blocks.append((codes[:, None] == np.arange(1, len(kind.levels))).astype(float))
            else:
                blocks.append(vals[:, [c]])
        return np.hstack(blocks)

    def _solve(self, a, y):
        beta, _, rank, _ = np.linalg.lstsq(a, y, rcond=None)
        if rank < a.shape[1]:
            gram = a.T @ a + self.ridge * np.eye(a.shape[1])
            beta = np.linalg.solve(gram, a.T @ y)
        return beta

    def _impute_once(self, data, state, rng):
        order, pools = state
        vals = np.array(data.values)
        missing = np.isnan(vals)
        for j in order:
            vals[missing[:, j], j] = rng.choice(pools[j], size=int(missing[:, j].sum()))
        for _ in range(self.iterations):
            for j in order:
                miss = missing[:, j]
                if data.kinds[j].is_categorical:
                    vals[miss, j] = rng.choice(pools[j], size=int(miss.sum()))
                    continue
                design = self._design(vals, data.kinds, j)
                a, y = design[~miss], vals[~miss, j]
                if a.shape[0] <= a.shape[1]:
                    raise ImputationError(
                        f"column {data.names[j]!r}: {a.shape[0]} observed rows for "
                        f"{a.shape[1]} regression coefficients")
                beta = self._solve(a, y)
                pred = design[miss] @ beta
                if self.noise:
                    resid = y - a @ beta
                    sigma = np.sqrt(resid @ resid / (a.shape[0] - a.shape[1]))
                    pred = pred + sigma * rng.standard_normal(pred.shape[0])
                vals[miss, j] = pred
        return vals


def fcs_gaussian(iterations: int = 5) -> FCSImputer:
    return FCSImputer(iterations, noise=True)


def fcs_regression_predict(iterations: int = 5) -> FCSImputer:
    return FCSImputer(iterations, noise=False)


class KNNImputer(Imputer):
    """Hot-deck from one of the ``k_neighbors`` nearest donor rows.

    Distances use z-scored continuous columns (observed mean and standard
    deviation), restricted to the columns observed in both rows and rescaled
    by the fraction of such columns. Ties are broken by row order. The donor
    is drawn uniformly among the neighbours.
    """

    name = "knn"
    _BLOCK = 512

    def __init__(self, k_neighbors: int = 5):
        if k_neighbors < 1:
            raise ValueError("k_neighbors must be >= 1")
        self.k_neighbors = k_neighbors

    def params(self):
        return {"k_neighbors": self.k_neighbors}

    def _prepare(self, data, seed):
        numeric = [c for c, k in enumerate(data.kinds) if not k.is_categorical]
        z = np.full((data.n, data.d), np.nan)
        for c in numeric:
            col = data.values[:, c]
            obs = col[~np.isnan(col)]
            if obs.size == 0:
                continue
            sd = obs.std()
            z[:, c] = (col - obs.mean()) / (sd if sd > 0 else 1.0)
        neighbours = {}
        for j in _incomplete_columns(data):
            donors = np.flatnonzero(~np.isnan(data.values[:, j]))
            if donors.size == 0:
                raise ImputationError(f"column {data.names[j]!r} has no observed values")
            recipients = np.flatnonzero(np.isnan(data.values[:, j]))
            cols = [c for c in numeric if c != j]
            neighbours[j] = (recipients, donors[self._nearest(z, recipients, donors, cols)])
        return neighbours

    def _nearest(self, z, recipients, donors, cols):
        k = min(self.k_neighbors, donors.size)
        if not cols:
            return np.tile(np.arange(k), (recipients.size, 1))
        zd = z[np.ix_(donors, cols)]
        out = np.empty((recipients.size, k), dtype=int)
        for start in range(0, recipients.size, self._BLOCK):
            zr = z[np.ix_(recipients[start:start + self._BLOCK], cols)]
            diff = zr[:, None, :] - zd[None, :, :]
            present = ~np.isnan(diff)
            n_present = present.sum(axis=-1)
            sq = np.where(present, diff, 0.0) ** 2
            with np.errstate(divide="ignore", invalid="ignore"):
                dist = np.sqrt(sq.sum(axis=-1) * len(cols) / n_present)
            dist[n_present == 0] = np.inf
            out[start:start + self._BLOCK] = np.argsort(dist, axis=1, kind="stable")[:, :k]
        return out

    def neighbour_rows(self, data: MaskedDataset, j: int) -> tuple[np.ndarray, np.ndarray]:
        """Recipient rows of column ``j`` and their candidate donor rows."""
        return self._prepare(data, 0)[j]

    def _impute_once(self, data, neighbours, rng):
        vals = np.array(data.values)
        for j, (recipients, donor_rows) in neighbours.items():
            pick = rng.integers(0, donor_rows.shape[1], size=recipients.size)
            vals[recipients, j] = data.values[donor_rows[np.arange(recipients.size), pick], j]
        return vals


def knn_imputer(k_neighbors: int = 5) -> KNNImputer:
    return KNNImputer(k_neighbors)


# ------------------------------------------------------------------ oracles


def _fill_numeric(data, rng, draw: Callable[[np.random.Generator, int], np.ndarray],
                  skip: Sequence[int] = ()):
    vals = np.array(data.values)
    for j in range(data.d):
        if j in skip:
            continue
        miss = np.isnan(vals[:, j])
        if not miss.any():
            continue
        if data.kinds[j].is_categorical:
            raise ImputationError("oracle imputers only handle continuous columns")
        vals[miss, j] = draw(rng, int(miss.sum()))
    return vals


class OracleUniform(Imputer):
    """Independent U(0, 1) draws."""

    name = "oracle_uniform"

    def _impute_once(self, data, state, rng):
        return _fill_numeric(data, rng, lambda g, m: g.random(m))


class OracleUniformSq(Imputer):
    """Independent draws from density ``2x`` on [0, 1] (inverse CDF ``sqrt(U)``)."""

    name = "oracle_uniform_sq"

    def _impute_once(self, data, state, rng):
        return _fill_numeric(data, rng, lambda g, m: np.sqrt(g.random(m)))


def toeplitz_corr(rho: float, d: int) -> np.ndarray:
    idx = np.arange(d)
    return rho ** np.abs(idx[:, None] - idx[None, :])


def _conditional_gaussian_fill(vals, cols, mean, cov, rng, independent=False):
    """Fill missing entries of ``vals[:, cols]`` from the Gaussian conditional.

    ``mean``/``cov`` describe the joint law of the columns ``cols``; each row
    conditions on the entries of ``cols`` it has observed.
    """
    sub = vals[:, cols]
    miss = np.isnan(sub)
    patterns, inverse = np.unique(miss, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    for p_id, pat in enumerate(patterns):
        if not pat.any():
            continue
        rows = np.flatnonzero(inverse == p_id)
        m_idx, o_idx = np.flatnonzero(pat), np.flatnonzero(~pat)
        s_mm = cov[np.ix_(m_idx, m_idx)]
        if independent or o_idx.size == 0:
            cond_mean = np.broadcast_to(mean[m_idx], (rows.size, m_idx.size))
            cond_cov = np.diag(np.diag(s_mm)) if independent else s_mm
        else:
            s_mo = cov[np.ix_(m_idx, o_idx)]
            gain = np.linalg.solve(cov[np.ix_(o_idx, o_idx)], s_mo.T).T
            resid = sub[np.ix_(rows, o_idx)] - mean[o_idx]
            cond_mean = mean[m_idx] + resid @ gain.T
            cond_cov = s_mm - gain @ s_mo.T
        chol = np.linalg.cholesky(cond_cov + 1e-12 * np.eye(m_idx.size))
        draws = cond_mean + rng.standard_normal((rows.size, m_idx.size)) @ chol.T
        sub[np.ix_(rows, m_idx)] = draws
    vals[:, cols] = sub
    return vals


class OracleDepUniform(Imputer):
    """True imputation law of the dependent-uniform example.

    Columns ``linked`` are ``Phi(Y)`` with ``Y`` Gaussian, Toeplitz
    correlation ``rho**|i-j|``; a missing linked cell is drawn from the
    Gaussian-copula conditional given the linked cells observed in the same
    row. Other columns get independent U(0, 1) draws. With ``rho = 0`` this
    is exactly :class:`OracleUniform`.
    """

    name = "oracle_dep_uniform"

    def __init__(self, rho: float = 0.7, linked: Sequence[str] = ("X1", "X2", "X3")):
        if not -1 < rho < 1:
            raise ValueError("rho must lie in (-1, 1)")
        self.rho = float(rho)
        self.linked = tuple(linked)

    def params(self):
        return {"rho": self.rho}

    def _impute_once(self, data, state, rng):
        if self.rho == 0:
            return _fill_numeric(data, rng, lambda g, m: g.random(m))
        cols = [data.names.index(nm) for nm in self.linked if nm in data.names]
        positions = [self.linked.index(data.names[c]) for c in cols]
        linked_vals = data.values[:, cols]
        obs = linked_vals[~np.isnan(linked_vals)]
        if ((obs < 0) | (obs > 1)).any():
            raise ImputationError("linked columns must lie in [0, 1]")
        vals = _fill_numeric(data, rng, lambda g, m: g.random(m), skip=cols)
        if cols:
            eps = np.finfo(float).eps
            z = np.array(vals)
            z[:, cols] = ndtri(np.clip(vals[:, cols], eps, 1 - eps))
            corr = toeplitz_corr(self.rho, len(self.linked))[np.ix_(positions, positions)]
            z = _conditional_gaussian_fill(z, cols, np.zeros(len(cols)), corr, rng)
            miss = np.isnan(vals[:, cols])
            block = vals[:, cols]
            block[miss] = ndtr(z[:, cols][miss])
            vals[:, cols] = block
        return vals


class OracleGaussian(Imputer):
    """Draws from a known multivariate normal law over named columns.

    With ``independent=False`` each missing cell follows the conditional
    law given the cells of ``names`` observed in its row; with
    ``independent=True`` it follows its marginal, ignoring dependence.
    """

    def __init__(self, cov, mean=None, names: Sequence[str] | None = None,
                 independent: bool = False):
        self.cov = np.array(cov, dtype=float)
        d = self.cov.shape[0]
        self.mean = np.zeros(d) if mean is None else np.array(mean, dtype=float)
        self.names = tuple(names) if names is not None else tuple(f"X{i + 1}" for i in range(d))
        self.independent = independent
        self.name = "oracle_independent_gaussian" if independent else "oracle_gaussian"

    def _impute_once(self, data, state, rng):
        cols = [c for c, nm in enumerate(data.names) if nm in self.names]
        pos = [self.names.index(data.names[c]) for c in cols]
        vals = np.array(data.values)
        others = np.isnan(vals).any(axis=0)
        others[cols] = False
        if others.any():
            raise ImputationError("missing cells outside the oracle's columns")
        return _conditional_gaussian_fill(vals, cols, self.mean[pos],
                                          self.cov[np.ix_(pos, pos)], rng, self.independent)


def strict_propriety_cov(corr: float = 0.7) -> np.ndarray:
    cov = np.eye(6)
    cov[0, 1] = cov[1, 0] = corr
    return cov


def oracle_uniform() -> OracleUniform:
    return OracleUniform()


def oracle_uniform_sq() -> OracleUniformSq:
    return OracleUniformSq()


def oracle_dep_uniform(rho: float = 0.7) -> OracleDepUniform:
    return OracleDepUniform(rho)


def marginal_sample() -> MarginalSample:
    return MarginalSample()


REGISTRY: dict[str, Callable[..., Imputer]] = {
    "fcs_gaussian": fcs_gaussian,
    "fcs_regression_predict": fcs_regression_predict,
    "marginal_sample": marginal_sample,
    "knn": knn_imputer,
    "oracle_uniform": oracle_uniform,
    "oracle_uniform_sq": oracle_uniform_sq,
    "oracle_dep_uniform": oracle_dep_uniform,
    "oracle_gaussian": lambda corr=0.7: OracleGaussian(strict_propriety_cov(corr)),
    "oracle_independent_gaussian":
        lambda corr=0.7: OracleGaussian(strict_propriety_cov(corr), independent=True),
}


def make_imputer(name: str, **params) -> Imputer:
    """Build a registered imputer, e.g. ``make_imputer("knn", k_neighbors=3)``."""
    try:
        factory = REGISTRY[name]
    except KeyError:
        raise ValueError(f"unknown imputer {name!r}; choose from {sorted(REGISTRY)}") from None
    return factory(**params)


def parse_imputer(spec: str) -> Imputer:
    """Parse ``"name"`` or ``"name(key=value,...)"``."""
    spec = spec.strip()
    if "(" not in spec:
        return make_imputer(spec)
    if not spec.endswith(")"):
        raise ValueError(f"malformed imputer spec {spec!r}")
    name, arg_str = spec[:-1].split("(", 1)
    params = {}
    for item in filter(None, (a.strip() for a in arg_str.split(","))):
        key, _, raw = item.partition("=")
        if not _:
            raise ValueError(f"malformed argument {item!r} in {spec!r}")
        params[key.strip()] = _literal(raw.strip())
    return make_imputer(name.strip(), **params)


def _literal(raw: str):
    for cast in (int, float):
        try:
            return cast(raw)
        except ValueError:
            pass
    if raw.lower() in ("true", "false"):
        return raw.lower() == "true"
    return raw
