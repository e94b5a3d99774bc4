import csv
import json
from pathlib import Path

import numpy as np
import pytest

from iscore.bench import BenchmarkConfig, load_config, run_benchmark, run_sweep, summarize
from iscore.cli import main
from iscore.data import CompleteDataset, compute_pattern_index, load_pair, read_csv, write_csv
from iscore.imputers import make_imputer
from iscore.rng import derive_seed
from iscore.score import companion_set, training_table
from iscore.score_star import StarConfig

import naive

DATA = Path(__file__).parent / "data"
TOY = ["score", str(DATA / "toy12_masked.csv"), str(DATA / "toy12_imputed.csv"),
       "--refit", "marginal_sample", "-N", "3", "--min-rows", "2", "--seed", "7", "--star"]


# --- simulate ----------------------------------------------------------------

def test_simulate_uniform_files(tmp_path):
    assert main(["simulate", "uniform", "--out", str(tmp_path), "--seed", "3"]) == 0
    complete = read_csv(tmp_path / "complete.csv")
    masked = read_csv(tmp_path / "masked.csv")
    assert complete.shape == masked.shape == (2000, 6)
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["generator"] == "uniform" and manifest["seed"] == 3


def test_manifest_round_trip_is_byte_identical(tmp_path):
    main(["simulate", "gauss_mixture", "--param", "n_per_pattern=40", "--out", str(tmp_path / "a")])
    main(["simulate", "--from-manifest", str(tmp_path / "a" / "manifest.json"),
          "--out", str(tmp_path / "b")])
    for name in ["complete.csv", "masked.csv", "mask.csv", "manifest.json"]:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_simulate_zero_amputation_keeps_table(tmp_path):
    src = CompleteDataset(np.random.default_rng(0).normal(size=(30, 3)))
    write_csv(src, tmp_path / "src.csv")
    code = main(["simulate", "mcar_amputation", "--input", str(tmp_path / "src.csv"),
                 "--param", "prop=0", "--out", str(tmp_path / "o")])
    assert code == 0
    assert (tmp_path / "o" / "masked.csv").read_bytes() == (tmp_path / "o" / "complete.csv").read_bytes()


def test_simulate_missing_input_is_contract_error(tmp_path):
    assert main(["simulate", "mcar_amputation", "--input", str(tmp_path / "none.csv"),
                 "--out", str(tmp_path)]) == 2


def test_simulate_unknown_param_is_contract_error(tmp_path, capsys):
    src = CompleteDataset(np.ones((10, 2)))
    write_csv(src, tmp_path / "src.csv")
    assert main(["simulate", "uniform", "--param", "bogus=1", "--out", str(tmp_path / "a")]) == 2
    assert main(["simulate", "mcar_amputation", "--input", str(tmp_path / "src.csv"),
                 "--param", "fraction=0.2", "--out", str(tmp_path / "b")]) == 2
    assert "fraction" in capsys.readouterr().err


# --- impute / score ----------------------------------------------------------

def test_impute_writes_k_files(tmp_path):
    main(["simulate", "uniform", "--param", "n=100", "--out", str(tmp_path)])
    assert main(["impute", str(tmp_path / "masked.csv"), "--method", "knn", "-k", "3",
                 "--out", str(tmp_path / "imp")]) == 0
    files = sorted((tmp_path / "imp").glob("*.csv"))
    assert len(files) == 3
    assert not np.isnan(read_csv(files[0]).values).any()


def test_golden_toy_fixture_bit_exact(tmp_path, capsys):
    out = tmp_path / "report.json"
    assert main(TOY + ["--format", "json", "--out", str(out)]) == 0
    assert out.read_bytes() == (DATA / "toy12_golden.json").read_bytes()


def test_golden_toy_fixture_agrees_with_naive_oracle():
    golden = json.loads((DATA / "toy12_golden.json").read_text())
    masked, imputed = load_pair(DATA / "toy12_masked.csv", DATA / "toy12_imputed.csv")
    imp = make_imputer("marginal_sample")
    agg, per = naive.naive_energy_i_score(masked, imputed, imp, N=3, min_rows=2, seed=7)
    assert abs(golden["energy_i_score"]["aggregate"] - agg) <= 1e-12
    for name, score in per.items():
        assert abs(golden["energy_i_score"]["per_variable"][name]["score"] - score) <= 1e-12
    agg_star, _ = naive.naive_energy_i_score_star(masked, imp, N=3, min_rows=2, seed=7)
    assert abs(golden["energy_i_score_star"]["aggregate"] - agg_star) <= 1e-12


def test_external_imputation_file_is_scorable(tmp_path, capsys):
    # a column-mean fill written by hand stands in for any outside tool
    main(["simulate", "uniform", "--param", "n=300", "--out", str(tmp_path)])
    masked = read_csv(tmp_path / "masked.csv")
    vals = np.array(masked.values)
    means = np.nanmean(vals, axis=0)
    vals[np.isnan(vals)] = np.take(means, np.nonzero(np.isnan(vals))[1])
    write_csv(masked.replace_values(vals), tmp_path / "external.csv")
    code = main(["score", str(tmp_path / "masked.csv"), str(tmp_path / "external.csv"),
                 "--refit", "fcs_gaussian", "-N", "10", "--complete", str(tmp_path / "complete.csv"),
                 "--out", str(tmp_path / "r.json")])
    assert code == 0
    report = json.loads((tmp_path / "r.json").read_text())
    assert report["energy_i_score"]["aggregate"] < 0
    assert report["full_information"] < 0
    assert "aggregate" in capsys.readouterr().out


def test_zero_missing_exits_3(tmp_path):
    main(["simulate", "uniform", "--param", "n=50", "--out", str(tmp_path)])
    c = str(tmp_path / "complete.csv")
    assert main(["score", c, c, "--refit", "knn"]) == 3


def test_disagreement_exits_2_with_cells(tmp_path, capsys):
    rows = list(csv.reader(open(DATA / "toy12_imputed.csv")))
    rows[1][0] = "0.99"  # row 1 of data, column a is observed
    with open(tmp_path / "bad.csv", "w", newline="") as fh:
        csv.writer(fh).writerows(rows)
    code = main(["score", str(DATA / "toy12_masked.csv"), str(tmp_path / "bad.csv"),
                 "--refit", "knn", "--min-rows", "2"])
    assert code == 2
    err = capsys.readouterr().err
    assert "row 1, column a" in err


def test_incomplete_imputation_exits_2(tmp_path):
    code = main(["score", str(DATA / "toy12_masked.csv"), str(DATA / "toy12_masked.csv"),
                 "--refit", "knn", "--min-rows", "2"])
    assert code == 2


def test_score_needs_a_resampler():
    assert main(["score", str(DATA / "toy12_masked.csv"), str(DATA / "toy12_imputed.csv"),
                 "--min-rows", "2"]) == 2


def test_precomputed_draws_reproduce_refit(tmp_path):
    """Draw files made with the refit seeds give the refit score exactly."""
    masked_p, imputed_p = DATA / "toy12_masked.csv", DATA / "toy12_imputed.csv"
    assert main(["score", str(masked_p), str(imputed_p), "--export-tables", str(tmp_path / "t"),
                 "--min-rows", "2"]) == 0
    masked, imputed = load_pair(masked_p, imputed_p)
    idx = compute_pattern_index(masked)
    imp = make_imputer("knn")
    for j in idx.scored_set:
        name = masked.names[j]
        table = read_csv(tmp_path / "t" / f"{name}.csv")
        comps, _ = companion_set(masked, idx, j)
        ref, _ = training_table(masked, imputed, idx, j, comps)
        assert table.names == ref.names
        draws = imp.fit(ref, seed=derive_seed(5, "fit", j)).impute(4, seed=derive_seed(5, "draws", j))
        for r, d in enumerate(draws):
            (tmp_path / "d" / name).mkdir(parents=True, exist_ok=True)
            write_csv(d, tmp_path / "d" / name / f"draw_{r:03d}.csv")
    common = [str(masked_p), str(imputed_p), "-N", "4", "--min-rows", "2", "--seed", "5",
              "--format", "json"]
    main(["score", *common, "--refit", "knn", "--out", str(tmp_path / "refit.json")])
    main(["score", *common, "--draws", str(tmp_path / "d"), "--out", str(tmp_path / "files.json")])
    a = json.loads((tmp_path / "refit.json").read_text())["energy_i_score"]
    b = json.loads((tmp_path / "files.json").read_text())["energy_i_score"]
    assert a["aggregate"] == b["aggregate"]
    assert main(["score", *common[:-2], "--draws", str(tmp_path / "d"), "-N", "5"]) == 2


# --- benchmark ---------------------------------------------------------------

def small_cfg(**kw):
    base = dict(generator="uniform", generator_params={"n": 200}, repetitions=3, N=5,
                methods={m: m for m in ["oracle_uniform", "marginal_sample", "fcs_regression_predict"]})
    base.update(kw)
    return BenchmarkConfig(**base)


def test_single_rep_single_method_standardizes_to_zero():
    rep = run_benchmark(small_cfg(repetitions=1, methods={"knn": "knn"}))
    for block in rep.scores.values():
        assert block["standardized"]["knn"] == [0.0]
    assert rep.ranking() == ["knn"]


def test_ranking_is_sorted_mean_standardized(tmp_path):
    rep = run_benchmark(small_cfg(star=True))
    rep.write(tmp_path)
    rows = list(csv.DictReader(open(tmp_path / "report.csv")))
    for st in rep.scores:
        sub = [r for r in rows if r["score_type"] == st]
        means = [float(r["mean_standardized"]) for r in sub]
        assert means == sorted(means, reverse=True)
        assert [r["method"] for r in sub] == rep.scores[st]["ranking"]
    std = rep.scores["energy_i_score"]["standardized"]
    pooled = [v for vals in std.values() for v in vals]
    assert min(pooled) == -1.0 and max(pooled) == 0.0


def test_ties_broken_by_name():
    block = summarize({"b": [1.0, 1.0], "a": [1.0, 1.0]}, set())
    assert block["ranking"] == ["a", "b"]
    assert block["top_per_repetition"] == ["a", "a"]


def test_failing_method_marked_and_serialized_null(tmp_path):
    cfg = small_cfg(generator="gauss_mixture", generator_params={"n_per_pattern": 30},
                    methods={"dep": "oracle_dep_uniform", "fcs_gaussian": "fcs_gaussian"})
    rep = run_benchmark(cfg)
    assert "dep" in rep.failed
    assert rep.ranking() == ["fcs_gaussian"]
    data = json.loads(rep.to_json())
    assert data["scores"]["energy_i_score"]["raw"]["dep"] == [None, None, None]
    assert data["errors"]


def test_report_identical_across_thread_counts():
    a = run_benchmark(small_cfg(threads=1, star=True)).to_json()
    b = run_benchmark(small_cfg(threads=3, star=True)).to_json()
    assert a == b


def test_config_file_and_overrides(tmp_path):
    ini = tmp_path / "bench.ini"
    ini.write_text(
        "[benchmark]\ngenerator = uniform\nrepetitions = 2\nN = 4\nseed = 11\n"
        "[generator]\nn = 120\n"
        "[methods]\nknn3 = knn(k_neighbors=3)\nmarginal_sample =\n"
        "[star]\ntest_fraction = 0.3\n")
    cfg = load_config(ini)
    assert cfg.methods == {"knn3": "knn(k_neighbors=3)", "marginal_sample": "marginal_sample"}
    assert cfg.generator_params == {"n": 120} and cfg.star_test_fraction == 0.3
    out = tmp_path / "out"
    assert main(["benchmark", "--config", str(ini), "--repetitions", "1", "--unweighted",
                 "--out", str(out)]) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["config"]["repetitions"] == 1
    assert report["config"]["weighted"] is False
    assert report["config"]["N"] == 4
    assert set(report["methods"]) == {"knn3", "marginal_sample"}
    assert (out / "runtime.json").exists()


def test_bad_config_key_is_contract_error(tmp_path):
    ini = tmp_path / "bad.ini"
    ini.write_text("[benchmark]\nbogus = 1\n")
    assert main(["benchmark", "--config", str(ini), "--out", str(tmp_path / "o")]) == 2


def test_sweep_single_n_reduces_to_benchmark():
    cfg = small_cfg(full_information=False)
    sweep = run_sweep(cfg, [5])
    bench = run_benchmark(cfg)
    assert sweep["per_N"]["5"]["raw"] == bench.scores["energy_i_score"]["raw"]
    assert sweep["top_agreement"]["5"] == 1.0


def test_sweep_cli(tmp_path, capsys):
    code = main(["sweep-n", "--generator", "uniform", "--param", "n=150", "--repetitions", "2",
                 "--methods", "oracle_uniform,knn(k_neighbors=3)", "--n-list", "3,6",
                 "--out", str(tmp_path)])
    assert code == 0
    result = json.loads((tmp_path / "sweep.json").read_text())
    assert result["reference_N"] == 6
    assert set(result["per_N"]) == {"3", "6"}
    assert "knn(k_neighbors=3)" in result["config"]["methods"]
