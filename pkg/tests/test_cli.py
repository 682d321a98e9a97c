"""Command-line interface: golden projection run, pipeline round trips,
exit codes and reproducibility."""

import csv
import hashlib
import json
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from demrecon import CensusData, load_census, write_census, write_theta
from demrecon.cli import main
from conftest import make_theta

DEMO = Path(__file__).resolve().parent.parent / "data" / "demo"


def _read_projection(path):
    keys, vals = [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        assert next(reader) == ["year", "sex", "age", "count"]
        for year, sex, age, count in reader:
            keys.append((int(year), sex, int(age)))
            vals.append(float(count))
    return keys, np.array(vals)


def _desk_inputs(tmp_path, mig=None, census_years="[1960, 1965, 1975]"):
    grid_yaml = tmp_path / "grid.yaml"
    grid_yaml.write_text(
        "grid:\n  start_year: 1960\n  end_year: 1975\n  open_age: 15\n"
        "  fert_min_age: 10\n  fert_max_age: 15\n"
        f"  census_years: {census_years}\n")
    elic_yaml = tmp_path / "elicitation.yaml"
    elic_yaml.write_text(
        "elicitation:\n  eta:\n    counts: 0.1\n    fertility: 0.1\n"
        "    survival: 0.1\n    migration: 0.2\n    srb: 0.1\n")
    from demrecon import load_grid
    grid = load_grid(grid_yaml)
    theta = make_theta(grid, seed=1)
    if mig is not None:
        theta = theta.replace(migration=np.full_like(theta.migration, mig))
    write_theta(tmp_path / "initial", theta, grid)
    return grid_yaml, elic_yaml, grid, theta


def _digest(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# ---------------------------------------------------------------------------
# deterministic projection against the frozen expectation


def test_project_demo_matches_expected_file(tmp_path):
    code = main(["project", "--grid", str(DEMO / "grid.yaml"),
                 "--initial-estimates-dir", str(DEMO / "initial"),
                 "--out-dir", str(tmp_path)])
    assert code == 0
    got_keys, got = _read_projection(tmp_path / "projection.csv")
    want_keys, want = _read_projection(DEMO / "expected_projection.csv")
    assert got_keys == want_keys
    assert np.allclose(got, want, rtol=1e-12, atol=0.0)


def test_project_missing_inputs_exit_2(tmp_path):
    code = main(["project", "--grid", str(DEMO / "grid.yaml"),
                 "--initial-estimates-dir", str(tmp_path / "nothing"),
                 "--out-dir", str(tmp_path)])
    assert code == 2


def test_console_script_runs(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "demrecon.cli", "project",
         "--grid", str(DEMO / "grid.yaml"),
         "--initial-estimates-dir", str(DEMO / "initial"),
         "--out-dir", str(tmp_path)],
        capture_output=True, text=True)
    assert proc.returncode == 0
    assert "projection.csv" in proc.stdout


# ---------------------------------------------------------------------------
# simulate -> sample -> summarize -> diagnose


def test_full_pipeline(tmp_path):
    grid_yaml, elic_yaml, grid, theta = _desk_inputs(tmp_path)
    sim = tmp_path / "sim"
    assert main(["simulate", "--grid", str(grid_yaml),
                 "--initial-estimates-dir", str(tmp_path / "initial"),
                 "--elicitation", str(elic_yaml), "--seed", "7",
                 "--out-dir", str(sim)]) == 0
    for sub in ("initial", "census", "truth/theta"):
        assert (sim / sub).is_dir()
    assert (sim / "truth" / "variances.csv").is_file()
    assert (sim / "manifest.json").is_file()
    census = load_census(sim / "census", grid)
    assert census.years == grid.likelihood_years
    assert np.all(census.counts > 0)

    run = tmp_path / "run"
    assert main(["sample", "--grid", str(grid_yaml),
                 "--initial-estimates-dir", str(sim / "initial"),
                 "--census", str(sim / "census"),
                 "--elicitation", str(elic_yaml),
                 "--iterations", "60", "--burn-in", "20", "--thin", "2",
                 "--chains", "2", "--seed", "3",
                 "--out-dir", str(run)]) == 0
    manifest = json.loads((run / "manifest.json").read_text())
    assert manifest["seed"] == 3
    assert manifest["settings"]["iterations"] == 60
    assert manifest["hyperparams"]["beta"]["srb"] > 0
    assert all(len(d) == 64 for d in manifest["input_digests"].values())

    with open(run / "samples.csv") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["chain", "draw", "parameter", "value"]
    n_params = len(rows[1:]) // 40  # 20 retained draws per chain, 2 chains
    assert n_params == 76

    summ = tmp_path / "summ"
    assert main(["summarize", "--sample-dir", str(run),
                 "--indicator", "srb", "--indicator", "tfr",
                 "--threshold", "srb>1.05", "--trend", "tfr",
                 "--joint", "both_up=srb:1960:1970:>;tfr:1960:1970:>",
                 "--out-dir", str(summ)]) == 0
    with open(summ / "summary.csv") as fh:
        srows = list(csv.DictReader(fh))
    assert {"indicator", "year", "statistic", "value"} == set(srows[0])
    assert any(r["statistic"] == "both_up" for r in srows)
    assert any(r["statistic"] == "p(srb>1.05)" for r in srows)

    diag = tmp_path / "diag"
    assert main(["diagnose", "--sample-dir", str(run),
                 "--parameter", "srb[1960]", "--parameter", "sigma2[srb]",
                 "--out-dir", str(diag)]) == 0
    with open(diag / "diagnostics.csv") as fh:
        drows = list(csv.DictReader(fh))
    assert [r["parameter"] for r in drows] == ["srb[1960]", "sigma2[srb]"]
    # 40 retained draws cannot meet the run-length minimum; the note says so
    assert all(r["note"] for r in drows)
    assert all(r["gelman_rubin"] for r in drows)


def test_sample_reruns_are_byte_identical(tmp_path):
    grid_yaml, elic_yaml, grid, theta = _desk_inputs(tmp_path)
    sim = tmp_path / "sim"
    main(["simulate", "--grid", str(grid_yaml),
          "--initial-estimates-dir", str(tmp_path / "initial"),
          "--elicitation", str(elic_yaml), "--seed", "7", "--out-dir", str(sim)])
    args = ["sample", "--grid", str(grid_yaml),
            "--initial-estimates-dir", str(sim / "initial"),
            "--census", str(sim / "census"), "--elicitation", str(elic_yaml),
            "--iterations", "40", "--burn-in", "10", "--chains", "1",
            "--seed", "5"]
    assert main(args + ["--out-dir", str(tmp_path / "a")]) == 0
    assert main(args + ["--out-dir", str(tmp_path / "b")]) == 0
    assert _digest(tmp_path / "a" / "samples.csv") == \
        _digest(tmp_path / "b" / "samples.csv")


def test_simulate_reruns_are_byte_identical(tmp_path):
    grid_yaml, elic_yaml, _, _ = _desk_inputs(tmp_path)
    for name in ("s1", "s2"):
        main(["simulate", "--grid", str(grid_yaml),
              "--initial-estimates-dir", str(tmp_path / "initial"),
              "--elicitation", str(elic_yaml), "--seed", "11",
              "--out-dir", str(tmp_path / name)])
    for f in ("census/census_female.csv", "census/census_male.csv",
              "truth/theta/srb.csv", "truth/variances.csv"):
        assert _digest(tmp_path / "s1" / f) == _digest(tmp_path / "s2" / f)


def test_flags_override_file_settings(tmp_path):
    grid_yaml, elic_yaml, grid, theta = _desk_inputs(tmp_path)
    grid_yaml.write_text(grid_yaml.read_text() +
                         "\nsampler:\n  iterations: 30\n  burn_in: 10\n"
                         "  chains: 1\n  seed: 1\n")
    sim = tmp_path / "sim"
    main(["simulate", "--grid", str(grid_yaml),
          "--initial-estimates-dir", str(tmp_path / "initial"),
          "--elicitation", str(elic_yaml), "--seed", "7", "--out-dir", str(sim)])
    run = tmp_path / "run"
    assert main(["sample", "--grid", str(grid_yaml),
                 "--initial-estimates-dir", str(sim / "initial"),
                 "--census", str(sim / "census"), "--elicitation", str(elic_yaml),
                 "--iterations", "40", "--burn-in", "20",
                 "--out-dir", str(run)]) == 0
    manifest = json.loads((run / "manifest.json").read_text())
    # flags win; unset values fall back to the file
    assert manifest["settings"]["iterations"] == 40
    assert manifest["settings"]["burn_in"] == 20
    assert manifest["settings"]["chains"] == 1
    assert manifest["seed"] == 1


# ---------------------------------------------------------------------------
# failure modes


def test_negative_projection_sample_exit_3(tmp_path):
    grid_yaml, elic_yaml, grid, theta = _desk_inputs(tmp_path, mig=-3.0)
    years = grid.likelihood_years
    census = CensusData(years=years,
                        counts=np.full((len(years), grid.n_ages, 2), 100.0))
    write_census(tmp_path / "census", census, grid)
    code = main(["sample", "--grid", str(grid_yaml),
                 "--initial-estimates-dir", str(tmp_path / "initial"),
                 "--census", str(tmp_path / "census"),
                 "--elicitation", str(elic_yaml),
                 "--iterations", "20", "--burn-in", "5",
                 "--out-dir", str(tmp_path / "run")])
    assert code == 3


def test_zero_eta_exit_2(tmp_path):
    grid_yaml, elic_yaml, _, _ = _desk_inputs(tmp_path)
    elic_yaml.write_text(
        "elicitation:\n  eta:\n    counts: 0.0\n    fertility: 0.1\n"
        "    survival: 0.1\n    migration: 0.2\n    srb: 0.1\n")
    code = main(["simulate", "--grid", str(grid_yaml),
                 "--initial-estimates-dir", str(tmp_path / "initial"),
                 "--elicitation", str(elic_yaml), "--out-dir",
                 str(tmp_path / "sim")])
    assert code == 2


def test_invalid_initial_estimates_exit_2(tmp_path):
    grid_yaml, elic_yaml, grid, theta = _desk_inputs(tmp_path)
    bad = theta.replace(survival=np.full_like(theta.survival, 1.5))
    write_theta(tmp_path / "bad", bad, grid)
    code = main(["project", "--grid", str(grid_yaml),
                 "--initial-estimates-dir", str(tmp_path / "bad"),
                 "--out-dir", str(tmp_path / "out")])
    assert code == 2


def test_summarize_rejects_unknown_indicator(tmp_path):
    grid_yaml, elic_yaml, grid, theta = _desk_inputs(tmp_path)
    sim = tmp_path / "sim"
    main(["simulate", "--grid", str(grid_yaml),
          "--initial-estimates-dir", str(tmp_path / "initial"),
          "--elicitation", str(elic_yaml), "--seed", "7", "--out-dir", str(sim)])
    run = tmp_path / "run"
    main(["sample", "--grid", str(grid_yaml),
          "--initial-estimates-dir", str(sim / "initial"),
          "--census", str(sim / "census"), "--elicitation", str(elic_yaml),
          "--iterations", "24", "--burn-in", "4", "--out-dir", str(run)])
    assert main(["summarize", "--sample-dir", str(run),
                 "--indicator", "happiness"]) == 2
    assert main(["summarize", "--sample-dir", str(run),
                 "--threshold", "srb==1"]) == 2
    assert main(["diagnose", "--sample-dir", str(run),
                 "--parameter", "tempo[0]"]) == 2
