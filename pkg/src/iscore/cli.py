"""Command-line interface: ``iscore {simulate,impute,score,benchmark,sweep-n}``.

Exit codes: 0 ok, 2 input contract violation, 3 nothing scorable,
4 numeric failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .bench import BenchmarkConfig, load_config, run_benchmark, run_sweep, simulate, simulate_from_manifest
from .data import compute_pattern_index, disagreeing_cells, load_pair, read_csv, write_csv
from .energy import full_information_score
from .external import FileDraws, draw_files, export_tables, scorable_tables
from .imputers import ImputationError, parse_imputer
from .score import NothingScorable, energy_i_score
from .score_star import StarConfig, energy_i_score_star

EXIT_OK, EXIT_INPUT, EXIT_EMPTY, EXIT_NUMERIC = 0, 2, 3, 4
MAX_LISTED_CELLS = 20

log = logging.getLogger("iscore")


class InputError(Exception):
    """Violated input contract (exit code 2)."""


def _kv_pairs(items) -> dict:
    out = {}
    for item in items or []:
        key, sep, raw = item.partition("=")
        if not sep:
            raise InputError(f"expected key=value, got {item!r}")
        out[key.strip()] = _value(raw.strip())
    return out


def _value(raw: str):
    for cast in (int, float):
        try:
            return cast(raw)
        except ValueError:
            pass
    return raw


def _write_json(obj, path):
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text)


# --- simulate -------------------------------------------------------------

def cmd_simulate(args) -> int:
    if args.from_manifest:
        out = simulate_from_manifest(args.from_manifest, args.out)
    else:
        if args.generator is None:
            raise InputError("give a generator name or --from-manifest")
        params = _kv_pairs(args.param)
        if args.generator == "mcar_amputation":
            if args.input is None:
                raise InputError("mcar_amputation needs --input complete.csv")
            if not Path(args.input).exists():
                raise InputError(f"{args.input} does not exist")
            params["target"] = str(args.input)
        out = simulate(args.generator, args.out, args.seed, params)
    print(f"wrote {out}")
    return EXIT_OK


# --- impute ---------------------------------------------------------------

def cmd_impute(args) -> int:
    data = read_csv(args.masked)
    imputer = parse_imputer(args.method)
    tables = imputer.fit_impute(data, args.k, seed=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for r, table in enumerate(tables, 1):
        write_csv(table, out / f"imputed_{r:03d}.csv")
    print(f"wrote {len(tables)} file(s) to {out}")
    return EXIT_OK


# --- score ----------------------------------------------------------------

def _check_inputs(masked, imputed):
    if masked.shape != imputed.shape or masked.names != imputed.names:
        raise InputError(f"imputed table {imputed.shape} {list(imputed.names)} does not match "
                         f"masked table {masked.shape} {list(masked.names)}")
    bad = disagreeing_cells(masked, imputed)
    if bad:
        listed = "\n".join(f"  row {r + 1}, column {c}" for r, c in bad[:MAX_LISTED_CELLS])
        more = f"\n  ... and {len(bad) - MAX_LISTED_CELLS} more" if len(bad) > MAX_LISTED_CELLS else ""
        raise InputError(f"imputed table changes {len(bad)} observed cell(s):\n{listed}{more}")
    holes = np.argwhere(np.isnan(imputed.values))
    if holes.size:
        r, c = holes[0]
        raise InputError(f"imputed table has {len(holes)} missing cell(s), "
                         f"e.g. row {r + 1}, column {imputed.names[c]}")


def cmd_score(args) -> int:
    masked, imputed = load_pair(args.masked, args.imputed)
    _check_inputs(masked, imputed)
    idx = compute_pattern_index(masked)
    if not idx.scored_set:
        raise NothingScorable("the masked table has no missing cells")
    if args.export_tables:
        index = export_tables(masked, imputed, args.export_tables, args.min_rows)
        print(f"wrote {len(index)} training table(s) to {args.export_tables}")
        if args.refit is None and args.draws is None:
            return EXIT_OK
    if (args.refit is None) == (args.draws is None):
        raise InputError("give exactly one of --refit METHOD or --draws DIR")
    if args.draws is not None:
        if args.star:
            raise InputError("--star re-imputes the masked table and needs --refit")
        for name, _ in scorable_tables(masked, imputed, args.min_rows):
            n_files = len(draw_files(args.draws, name))
            if n_files < args.n_draws:
                raise InputError(f"{args.draws}/{name} holds {n_files} file(s), need {args.n_draws}")
        imputer = FileDraws(args.draws)
    else:
        imputer = parse_imputer(args.refit)

    weighted = True if args.weighted is None else args.weighted
    report = energy_i_score(masked, imputed, imputer, N=args.n_draws, min_rows=args.min_rows,
                            weighted=weighted, seed=args.seed, n_jobs=args.threads)
    out = {"energy_i_score": report.to_dict()}
    text = [report.table()]
    if args.star:
        cfg = StarConfig(args.test_fraction, args.pattern_draws, args.n_draws, args.min_rows, args.seed)
        star = energy_i_score_star(masked, imputer, cfg, n_jobs=args.threads)
        out["energy_i_score_star"] = star.to_dict()
        text += ["", "energy-I-Score*", star.table()]
    if args.complete:
        complete = read_csv(args.complete)
        out["full_information"] = full_information_score(complete, imputed)
        text += ["", f"full-information score {out['full_information']:.6f}"]
    if args.format == "json":
        _write_json(out, args.out)
    else:
        print("\n".join(text))
        if args.out:
            _write_json(out, args.out)
    return EXIT_OK


# --- benchmark / sweep ----------------------------------------------------

def _bench_config(args) -> BenchmarkConfig:
    cfg = load_config(args.config) if args.config else None
    overrides = {}
    if args.generator is not None:
        overrides["generator"] = args.generator
    if args.param:
        overrides["generator_params"] = {**(cfg.generator_params if cfg else {}),
                                         **_kv_pairs(args.param)}
    if args.methods is not None:
        overrides["methods"] = {m.strip(): m.strip() for m in _split_methods(args.methods)}
    for flag, key in [("repetitions", "repetitions"), ("seed", "seed"), ("n_draws", "N"),
                      ("min_rows", "min_rows"), ("weighted", "weighted"), ("threads", "threads"),
                      ("test_fraction", "star_test_fraction"), ("pattern_draws", "star_pattern_draws")]:
        value = getattr(args, flag)
        if value is not None:
            overrides[key] = value
    if args.star:
        overrides["star"] = True
    if args.no_full_information:
        overrides["full_information"] = False
    if cfg is None:
        return BenchmarkConfig(**overrides)
    if "generator" in overrides and "methods" not in overrides and overrides["generator"] != cfg.generator:
        overrides["methods"] = {}
    return replace(cfg, **overrides)


def _split_methods(spec: str) -> list[str]:
    """Split ``a,b(k=1,m=2),c`` at top-level commas."""
    out, depth, cur = [], 0, ""
    for ch in spec:
        if ch == "," and depth == 0:
            out.append(cur)
            cur = ""
            continue
        depth += (ch == "(") - (ch == ")")
        cur += ch
    out.append(cur)
    return [s for s in (x.strip() for x in out) if s]


def cmd_benchmark(args) -> int:
    try:
        cfg = _bench_config(args)
    except (TypeError, ValueError, FileNotFoundError) as exc:
        raise InputError(str(exc)) from exc
    report = run_benchmark(cfg)
    out = report.write(args.out)
    for score_type, block in report.scores.items():
        print(f"{score_type}: " + " > ".join(block["ranking"]))
    for label, why in report.failed.items():
        print(f"failed: {label} ({why})")
    print(f"wrote {out / 'report.json'}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    try:
        cfg = _bench_config(args)
        n_list = [int(x) for x in args.n_list.split(",")] if args.n_list else None
    except (TypeError, ValueError, FileNotFoundError) as exc:
        raise InputError(str(exc)) from exc
    result = run_sweep(cfg, n_list, args.reference_n) if n_list else run_sweep(
        cfg, reference_N=args.reference_n)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    runtime = result.pop("runtime_seconds")
    (out / "sweep.json").write_text(json.dumps(result, indent=2, sort_keys=True) + "\n")
    (out / "runtime.json").write_text(json.dumps({"seconds": runtime}, indent=2) + "\n")
    for N in result["N_values"]:
        print(f"N={N:>4}  top agreement with N={result['reference_N']}: "
              f"{result['top_agreement'][str(N)]:.2f}  ranking: "
              + " > ".join(result["per_N"][str(N)]["ranking"]))
    return EXIT_OK


# --- parser ---------------------------------------------------------------

def _add_scoring_flags(p, defaults: bool):
    p.add_argument("-N", "--n-draws", type=int, default=50 if defaults else None,
                   help="re-imputations per test point (default 50)")
    p.add_argument("--min-rows", type=int, default=10 if defaults else None,
                   help="skip variables with fewer missing or observed cells (default 10)")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--weighted", dest="weighted", action="store_const", const=True, default=None,
                   help="weight variables by |missing|*|observed|/n^2 (default)")
    g.add_argument("--unweighted", dest="weighted", action="store_const", const=False,
                   help="plain mean over scored variables")
    p.add_argument("--star", action="store_true", help="also compute the pattern-wise score")
    p.add_argument("--test-fraction", type=float, default=0.2 if defaults else None,
                   help="held-out share of observed rows for --star (default 0.2)")
    p.add_argument("--pattern-draws", type=int, default=None,
                   help="pattern draws for --star (default 5 per distinct pattern)")
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads (default $ISCORE_THREADS or 1)")


def _add_bench_flags(p):
    p.add_argument("--config", help="INI config file; flags override it")
    p.add_argument("--generator", help="uniform, uniform_dep, gauss_mixture, nonlinear_mixture, "
                                       "strict_propriety or mcar_amputation")
    p.add_argument("--param", action="append", metavar="KEY=VALUE", help="generator argument")
    p.add_argument("--methods", help="comma-separated imputer specs, e.g. 'knn(k_neighbors=3),fcs_gaussian'")
    p.add_argument("--repetitions", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--no-full-information", action="store_true",
                   help="skip the score that needs the complete data")
    p.add_argument("--out", required=True, help="output directory")
    _add_scoring_flags(p, defaults=False)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="iscore", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic benchmark")
    p.add_argument("generator", nargs="?")
    p.add_argument("--param", action="append", metavar="KEY=VALUE")
    p.add_argument("--input", help="complete CSV for mcar_amputation")
    p.add_argument("--from-manifest", help="regenerate from a manifest.json")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("impute", help="impute a masked CSV with a built-in method")
    p.add_argument("masked")
    p.add_argument("--method", required=True, help="imputer spec, e.g. 'fcs_gaussian(iterations=10)'")
    p.add_argument("-k", type=int, default=1, help="number of imputations")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_impute)

    p = sub.add_parser("score", help="score one imputation of a masked CSV")
    p.add_argument("masked")
    p.add_argument("imputed")
    p.add_argument("--refit", help="built-in imputer that re-imputes the training tables")
    p.add_argument("--draws", help="directory <var>/*.csv of external re-imputations")
    p.add_argument("--export-tables", help="write the training tables to this directory")
    p.add_argument("--complete", help="complete CSV; adds the full-information score")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="JSON report path")
    p.add_argument("--format", choices=["table", "json"], default="table")
    _add_scoring_flags(p, defaults=True)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("benchmark", help="repeated benchmark with ranking")
    _add_bench_flags(p)
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("sweep-n", help="rank stability across draw counts N")
    _add_bench_flags(p)
    p.add_argument("--n-list", help="comma-separated N values (default 5,10,...,100)")
    p.add_argument("--reference-n", type=int, default=None)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NothingScorable as exc:
        print(f"nothing scorable: {exc}", file=sys.stderr)
        return EXIT_EMPTY
    except (np.linalg.LinAlgError, FloatingPointError, ImputationError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, FileNotFoundError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
