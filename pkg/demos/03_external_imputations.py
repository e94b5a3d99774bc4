"""Score imputations made by any outside tool through files.

1. `iscore score --export-tables` writes, per variable, the table the
   method must re-impute.
2. The outside tool fills each table N times into draws/<variable>/.
3. `iscore score --draws draws/` scores the original imputation.

Here numpy stands in for the outside tool: it fills blanks by sampling
observed values of the same column.

Run: python demos/03_external_imputations.py
"""
import subprocess
import sys
import tempfile
from pathlib import Path

import numpy as np

from iscore import read_csv, write_csv


def outside_tool(path_in, path_out, rng):
    table = read_csv(path_in)
    vals = np.array(table.values)
    for j in range(vals.shape[1]):
        miss = np.isnan(vals[:, j])
        if miss.any():
            vals[miss, j] = rng.choice(vals[~miss, j], size=miss.sum())
    write_csv(table.replace_values(vals), path_out)


def iscore(*args):
    cmd = [sys.executable, "-m", "iscore.cli", *map(str, args)]
    print("$", " ".join(cmd[2:]))
    subprocess.run(cmd, check=True)


rng = np.random.default_rng(0)
N = 20
with tempfile.TemporaryDirectory() as tmp:
    tmp = Path(tmp)
    iscore("simulate", "uniform", "--param", "n=600", "--seed", 4, "--out", tmp / "sim")
    outside_tool(tmp / "sim" / "masked.csv", tmp / "imputed.csv", rng)
    iscore("score", tmp / "sim" / "masked.csv", tmp / "imputed.csv", "--export-tables", tmp / "tables")
    for table in sorted((tmp / "tables").glob("*.csv")):
        out = tmp / "draws" / table.stem
        out.mkdir(parents=True)
        for r in range(N):
            outside_tool(table, out / f"draw_{r:03d}.csv", rng)
    iscore("score", tmp / "sim" / "masked.csv", tmp / "imputed.csv", "--draws", tmp / "draws",
           "-N", N, "--complete", tmp / "sim" / "complete.csv")
