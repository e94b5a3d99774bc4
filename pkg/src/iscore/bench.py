"""Repeated benchmarks: simulate, impute, score, standardize, rank.

Every (repetition, method) task derives its seeds from the master seed,
the repetition index and the method label, so reports do not depend on
the number of worker threads.
"""
from __future__ import annotations

import configparser
import csv
import json
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .data import MaskedDataset, read_csv
from .energy import full_information_score
from .imputers import parse_imputer
from .rng import derive_seed
from .score import NothingScorable, default_threads, energy_i_score, standardize_scores
from .score_star import StarConfig, energy_i_score_star
from .synth import GENERATORS, check_params, generate, mcar_amputate

log = logging.getLogger(__name__)

SCORE_TYPES = ("energy_i_score", "energy_i_score_star", "full_information")

DEFAULT_METHODS = {
    "uniform": ["oracle_uniform", "oracle_uniform_sq", "fcs_gaussian",
                "fcs_regression_predict", "marginal_sample"],
    "uniform_dep": ["oracle_dep_uniform", "oracle_uniform", "fcs_gaussian",
                    "fcs_regression_predict", "marginal_sample"],
    "gauss_mixture": ["fcs_gaussian", "fcs_regression_predict", "marginal_sample", "knn"],
    "nonlinear_mixture": ["fcs_gaussian", "fcs_regression_predict", "marginal_sample", "knn"],
    "strict_propriety": ["oracle_gaussian", "oracle_independent_gaussian"],
    "mcar_amputation": ["fcs_gaussian", "fcs_regression_predict", "marginal_sample", "knn"],
}


@dataclass
class BenchmarkConfig:
    generator: str = "uniform"
    generator_params: dict = field(default_factory=dict)
    methods: dict = field(default_factory=dict)
    repetitions: int = 10
    N: int = 50
    min_rows: int = 10
    weighted: bool = True
    star: bool = False
    star_test_fraction: float = 0.2
    star_pattern_draws: int | None = None
    full_information: bool = True
    seed: int = 0
    threads: int | None = None

    def __post_init__(self):
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if self.generator not in GENERATORS and self.generator != "mcar_amputation":
            raise ValueError(f"unknown generator {self.generator!r}")
        if not self.methods:
            self.methods = {m: m for m in DEFAULT_METHODS[self.generator]}
        elif not isinstance(self.methods, dict):
            self.methods = {m: m for m in self.methods}
        if self.generator == "mcar_amputation":
            target = self.generator_params.get("target")
            if target is None or not Path(target).exists():
                raise ValueError(f"mcar_amputation needs an existing target file, got {target!r}")

    def echo(self) -> dict:
        """Settings that determine the report (thread count excluded)."""
        out = asdict(self)
        out.pop("threads")
        return out


def _parse_value(raw: str):
    raw = raw.strip()
    if raw == "":
        return None
    low = raw.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    for cast in (int, float):
        try:
            return cast(raw)
        except ValueError:
            pass
    return raw


def load_config(path) -> BenchmarkConfig:
    """Read an INI-style config.

    Sections: ``[benchmark]`` (top-level keys of :class:`BenchmarkConfig`),
    ``[generator]`` (generator arguments), ``[methods]`` (``label = spec``;
    an empty spec means the label is the spec) and ``[star]``
    (``test_fraction``, ``pattern_draws``).
    """
    parser = configparser.ConfigParser()
    parser.optionxform = str
    if not parser.read(path):
        raise FileNotFoundError(path)
    kw = {}
    if parser.has_section("benchmark"):
        for key, raw in parser.items("benchmark"):
            kw[key] = _parse_value(raw)
    if parser.has_section("generator"):
        kw["generator_params"] = {k: _parse_value(v) for k, v in parser.items("generator")}
    if parser.has_section("methods"):
        kw["methods"] = {k: (v.strip() or k) for k, v in parser.items("methods")}
    if parser.has_section("star"):
        star = dict(parser.items("star"))
        if "test_fraction" in star:
            kw["star_test_fraction"] = float(star["test_fraction"])
        if _parse_value(star.get("pattern_draws", "")) is not None:
            kw["star_pattern_draws"] = int(star["pattern_draws"])
    known = set(BenchmarkConfig.__dataclass_fields__)
    unknown = set(kw) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    return BenchmarkConfig(**kw)


def make_repetition(cfg: BenchmarkConfig, rep: int):
    """``(complete, masked)`` for repetition ``rep``."""
    seed = derive_seed(cfg.seed, "data", rep)
    if cfg.generator == "mcar_amputation":
        params = dict(cfg.generator_params)
        complete = read_csv(params.pop("target"))
        masked = mcar_amputate(complete, seed=seed, **params)
        return complete, masked
    return generate(cfg.generator, seed=seed, **cfg.generator_params)


@dataclass
class TaskResult:
    rep: int
    label: str
    scores: dict
    errors: dict


def _run_task(cfg: BenchmarkConfig, rep: int, label: str, complete, masked,
              N_values: Sequence[int]) -> TaskResult:
    imputer = parse_imputer(cfg.methods[label])
    scores, errors = {}, {}
    try:
        imputed = imputer.fit_impute(masked, 1, seed=derive_seed(cfg.seed, "impute", rep, label))[0]
    except Exception as exc:
        errors["imputation"] = f"{type(exc).__name__}: {exc}"
        return TaskResult(rep, label, scores, errors)
    for N in N_values:
        key = ("energy_i_score", N)
        try:
            report = energy_i_score(masked, imputed, imputer, N=N, min_rows=cfg.min_rows,
                                    weighted=cfg.weighted,
                                    seed=derive_seed(cfg.seed, "score", rep, label), n_jobs=1)
            scores[key] = report.aggregate
        except (NothingScorable, ValueError) as exc:
            errors[key] = str(exc)
    if cfg.star:
        star_cfg = StarConfig(cfg.star_test_fraction, cfg.star_pattern_draws, cfg.N, cfg.min_rows,
                              derive_seed(cfg.seed, "star", rep, label))
        try:
            scores[("energy_i_score_star", cfg.N)] = energy_i_score_star(masked, imputer, star_cfg,
                                                                         n_jobs=1).aggregate
        except (NothingScorable, ValueError) as exc:
            errors[("energy_i_score_star", cfg.N)] = str(exc)
    if cfg.full_information and complete is not None:
        scores[("full_information", None)] = full_information_score(complete, imputed)
    return TaskResult(rep, label, scores, errors)


def _run_all(cfg: BenchmarkConfig, N_values: Sequence[int]) -> list[TaskResult]:
    reps = [make_repetition(cfg, r) for r in range(cfg.repetitions)]
    tasks = [(r, label) for r in range(cfg.repetitions) for label in cfg.methods]
    threads = cfg.threads if cfg.threads is not None else default_threads()

    def run(task):
        r, label = task
        return _run_task(cfg, r, label, reps[r][0], reps[r][1], N_values)

    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(run, tasks))
    return [run(t) for t in tasks]


def _mean(values):
    finite = [v for v in values if v is not None]
    return math.fsum(finite) / len(finite) if finite else None


def summarize(raw: dict[str, list], failed: set[str]) -> dict:
    """Standardize a ``method -> per-repetition scores`` table and rank it."""
    pooled = {(label, r): v for label, vals in raw.items() if label not in failed
              for r, v in enumerate(vals)}
    finite = [v for v in pooled.values() if v is not None]
    if len(finite) == 1:
        std = {k: (None if v is None else 0.0) for k, v in pooled.items()}
    else:
        std = standardize_scores(pooled)
    n_rep = max((len(v) for v in raw.values()), default=0)
    standardized = {label: [std[(label, r)] for r in range(n_rep)]
                    for label in raw if label not in failed}
    mean_std = {label: _mean(v) for label, v in standardized.items()}
    ranking = sorted((lb for lb, m in mean_std.items() if m is not None),
                     key=lambda lb: (-mean_std[lb], lb))
    top = []
    for r in range(n_rep):
        cands = [(raw[lb][r], lb) for lb in standardized if raw[lb][r] is not None]
        top.append(min(cands, key=lambda c: (-c[0], c[1]))[1] if cands else None)
    return {
        "raw": {lb: list(v) for lb, v in raw.items()},
        "standardized": standardized,
        "mean_raw": {lb: _mean(v) for lb, v in raw.items()},
        "mean_standardized": mean_std,
        "ranking": ranking,
        "top_per_repetition": top,
    }


@dataclass
class BenchmarkReport:
    config: dict
    methods: dict
    failed: dict
    scores: dict
    errors: list
    runtime: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"version": __version__, "config": self.config, "methods": self.methods,
                "failed": self.failed, "scores": self.scores, "errors": self.errors}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def ranking(self, score_type: str = "energy_i_score") -> list[str]:
        return self.scores[score_type]["ranking"]

    def write(self, out_dir) -> Path:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(self.to_json())
        with open(out / "report.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["score_type", "rank", "method", "mean_standardized", "mean_raw", "n_scored"])
            for st, block in self.scores.items():
                for rank, label in enumerate(block["ranking"], 1):
                    n_ok = sum(v is not None for v in block["raw"][label])
                    w.writerow([st, rank, label, repr(block["mean_standardized"][label]),
                                repr(block["mean_raw"][label]), n_ok])
        (out / "runtime.json").write_text(json.dumps(self.runtime, indent=2, sort_keys=True) + "\n")
        return out


def _failed_methods(cfg, results) -> dict:
    failed = {}
    for label in cfg.methods:
        bad = [t for t in results if t.label == label and
               ("imputation" in t.errors or ("energy_i_score", cfg.N) in t.errors)]
        if len(bad) > cfg.repetitions / 2:
            failed[label] = f"failed on {len(bad)} of {cfg.repetitions} repetitions"
    return failed


def _collect(cfg, results, key) -> dict[str, list]:
    table = {label: [None] * cfg.repetitions for label in cfg.methods}
    for t in results:
        table[t.label][t.rep] = t.scores.get(key)
    return table


def _error_list(results) -> list:
    out = []
    for t in results:
        for key, msg in sorted(t.errors.items(), key=lambda kv: str(kv[0])):
            out.append({"repetition": t.rep, "method": t.label,
                        "stage": key if isinstance(key, str) else f"{key[0]}",
                        "message": msg})
    return out


def run_benchmark(cfg: BenchmarkConfig) -> BenchmarkReport:
    start = time.perf_counter()
    results = _run_all(cfg, [cfg.N])
    failed = _failed_methods(cfg, results)
    keys = [("energy_i_score", cfg.N)]
    if cfg.star:
        keys.append(("energy_i_score_star", cfg.N))
    if cfg.full_information:
        keys.append(("full_information", None))
    scores = {key[0]: summarize(_collect(cfg, results, key), set(failed)) for key in keys}
    runtime = {"seconds": time.perf_counter() - start,
               "threads": cfg.threads if cfg.threads is not None else default_threads()}
    return BenchmarkReport(cfg.echo(), dict(cfg.methods), failed, scores, _error_list(results),
                           runtime)


def run_sweep(cfg: BenchmarkConfig, N_values: Sequence[int] = (5, *range(10, 101, 10)),
              reference_N: int | None = None) -> dict:
    """Energy-I-Score rankings for several draw counts ``N``.

    Candidate imputations are computed once per (repetition, method) and
    shared across ``N``. ``top_agreement[N]`` is the fraction of
    repetitions whose top method at ``N`` matches the one at
    ``reference_N`` (50 when swept, otherwise the largest ``N``).
    """
    N_values = sorted(set(int(n) for n in N_values))
    if reference_N is None:
        reference_N = 50 if 50 in N_values else N_values[-1]
    if reference_N not in N_values:
        raise ValueError("reference_N must be one of the swept values")
    start = time.perf_counter()
    sweep_cfg = replace(cfg, star=False, full_information=False)
    results = _run_all(sweep_cfg, N_values)
    per_n = {}
    for N in N_values:
        failed = _failed_methods(replace(sweep_cfg, N=N), results)
        per_n[N] = summarize(_collect(sweep_cfg, results, ("energy_i_score", N)), set(failed))
    ref_top = per_n[reference_N]["top_per_repetition"]
    agreement = {}
    for N in N_values:
        top = per_n[N]["top_per_repetition"]
        agreement[N] = sum(a == b and a is not None for a, b in zip(top, ref_top)) / len(top)
    return {
        "version": __version__,
        "config": sweep_cfg.echo(),
        "N_values": N_values,
        "reference_N": reference_N,
        "per_N": {str(N): per_n[N] for N in N_values},
        "top_agreement": {str(N): agreement[N] for N in N_values},
        "ranking_matches_reference": {str(N): per_n[N]["ranking"] == per_n[reference_N]["ranking"]
                                      for N in N_values},
        "errors": _error_list(results),
        "runtime_seconds": time.perf_counter() - start,
    }


def simulate(which: str, out_dir, seed: int = 0, params: dict | None = None) -> Path:
    """Write ``complete.csv``, ``masked.csv``, ``mask.csv`` and ``manifest.json``."""
    from .data import write_csv, write_mask_csv

    params = dict(params or {})
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if which == "mcar_amputation":
        complete = read_csv(params["target"])
        amp = {k: v for k, v in params.items() if k != "target"}
        check_params(mcar_amputate, amp)
        masked = mcar_amputate(complete, seed=seed, **amp)
    else:
        complete, masked = generate(which, seed=seed, **params)
    write_csv(complete, out / "complete.csv")
    write_csv(masked, out / "masked.csv")
    write_mask_csv(masked, out / "mask.csv")
    manifest = {
        "generator": which,
        "params": params,
        "seed": seed,
        "rng": "numpy PCG64 seeded by SeedSequence([seed, crc32(generator tag)])",
        "version": __version__,
        "files": ["complete.csv", "masked.csv", "mask.csv"],
        "shape": list(complete.shape),
        "missing_fraction": masked.n_missing / (masked.n * masked.d),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return out


def simulate_from_manifest(manifest_path, out_dir) -> Path:
    manifest = json.loads(Path(manifest_path).read_text())
    return simulate(manifest["generator"], out_dir, manifest["seed"], manifest["params"])


def masked_fraction(data: MaskedDataset) -> float:
    return float(np.isnan(data.values).mean())
