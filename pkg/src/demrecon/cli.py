"""Command-line entry points.

Five subcommands cover the pipeline:

  project    deterministic projection of a parameter set
  sample     posterior sampling, writes samples.csv + manifest.json
  summarize  credible intervals, exceedance and trend probabilities
  diagnose   run-length and multi-chain convergence diagnostics
  simulate   synthetic dataset with known truth, for calibration studies

Exit codes: 0 success, 2 invalid inputs or configuration, 3 a run that
started but could not continue.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from . import io
from .diagnostics import gelman_rubin, raftery_lewis
from .grid import validate
from .priors import ElicitationError, beta_from_elicitation
from .projection import project_full
from .sampler import (ConfigError, SamplerConfig, SamplingError, parameter_names,
                      run_chain)
from .summaries import INDICATOR_NAMES, summary_rows

VALIDATION_EXIT = 2
RUNTIME_EXIT = 3


class _Invalid(Exception):
    """Input or configuration problem: exit code 2."""


def _validated(grid, theta=None, census=None):
    report = validate(grid, theta, census)
    if not report.ok:
        raise _Invalid("invalid inputs:\n" + str(report))


def _cmd_project(args) -> int:
    grid = io.load_grid(args.grid)
    theta = io.load_theta(args.initial_estimates_dir, grid)
    _validated(grid, theta)
    traj = project_full(theta.baseline, theta, grid)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "projection.csv"
    io.write_trajectory(path, traj)
    neg = traj.first_negative()
    if neg is not None:
        print(f"warning: negative count at year={neg[0]} age={neg[1]} sex={neg[2]}")
    print(f"wrote {path}")
    return 0


def _sampler_config(args, file_settings) -> SamplerConfig:
    def pick(flag, key, default):
        v = getattr(args, flag)
        if v is not None:
            return v
        return file_settings.get(key, default)

    return SamplerConfig(
        iterations=int(pick("iterations", "iterations", 5000)),
        burn_in=int(pick("burn_in", "burn_in", 2500)),
        thin=int(pick("thin", "thin", 1)),
        chains=int(pick("chains", "chains", 1)),
        seed=int(pick("seed", "seed", 0)),
    )


def _cmd_sample(args) -> int:
    grid = io.load_grid(args.grid)
    theta = io.load_theta(args.initial_estimates_dir, grid)
    census = io.load_census(args.census, grid)
    elic = io.load_elicitation(args.elicitation)
    _validated(grid, theta, census)
    hyper = beta_from_elicitation(elic, theta)
    config = _sampler_config(args, io.load_sampler_settings(args.grid))
    config.check()

    started = time.monotonic()
    sample = run_chain(config, grid, theta, census, hyper)
    elapsed = time.monotonic() - started

    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    io.write_samples(out / "samples.csv", sample)
    inputs = [args.grid, args.elicitation]
    inputs += sorted(str(p) for p in Path(args.initial_estimates_dir).glob("*.csv"))
    inputs += sorted(str(p) for p in Path(args.census).glob("*.csv"))
    settings = {"iterations": config.iterations, "burn_in": config.burn_in,
                "thin": config.thin, "chains": config.chains}
    manifest = io.make_manifest(config.seed, settings, grid, elic, hyper,
                                inputs, elapsed)
    manifest.write(out / "manifest.json")
    print(f"wrote {out / 'samples.csv'} ({sample.n_draws} draws,"
          f" {config.chains} chain(s)) and {out / 'manifest.json'}")
    return 0


def _parse_threshold(expr: str):
    for op in (">=", "<=", ">", "<"):
        if op in expr:
            name, value = expr.split(op, 1)
            return name.strip(), op, float(value)
    raise _Invalid(f"threshold {expr!r} must look like 'srb>1.06'")


def _parse_joint(expr: str):
    label, _, body = expr.partition("=")
    if not body:
        label, body = expr, expr
    preds = []
    for part in body.split(";"):
        bits = part.strip().split(":")
        if len(bits) != 4 or bits[3] not in (">", "<"):
            raise _Invalid(
                f"joint predicate {part!r} must be indicator:yearA:yearB:> or :<"
            )
        preds.append((bits[0], int(bits[1]), int(bits[2]), bits[3]))
    return label, preds


def _load_sample_dir(sample_dir):
    d = Path(sample_dir)
    manifest = io.RunManifest.read(d / "manifest.json")
    grid = manifest.to_grid()
    sample = io.read_samples(d / "samples.csv", grid)
    return manifest, grid, sample


def _cmd_summarize(args) -> int:
    _, _, sample = _load_sample_dir(args.sample_dir)
    indicators = args.indicator or ["srb", "tfr", "e0_female", "e0_male"]
    unknown = [n for n in indicators if n not in INDICATOR_NAMES]
    if unknown:
        raise _Invalid(f"unknown indicators {unknown}; choose from {list(INDICATOR_NAMES)}")
    probs = args.prob or [0.025, 0.5, 0.975]
    thresholds = [_parse_threshold(t) for t in (args.threshold or [])]
    joints = [_parse_joint(j) for j in (args.joint or [])]
    rows = summary_rows(sample, indicators, probs=probs, thresholds=thresholds,
                        trends=args.trend or [], joints=joints)
    out = Path(args.out_dir or args.sample_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "summary.csv"
    io.write_rows(path, rows, ["indicator", "year", "statistic", "value"])
    print(f"wrote {path} ({len(rows)} rows)")
    return 0


def _cmd_diagnose(args) -> int:
    _, grid, sample = _load_sample_dir(args.sample_dir)
    names = parameter_names(grid)
    wanted = args.parameter or names
    unknown = [n for n in wanted if n not in names]
    if unknown:
        raise _Invalid(f"unknown parameters {unknown[:5]}")
    flat = sample.flat()
    cols = {n: flat[:, i] for i, n in enumerate(names)}
    ids = sample.chain_ids()
    per_chain = {c: sample.chain == c for c in ids}

    rows = []
    for name in wanted:
        series = cols[name]
        row = {"parameter": name, "nmin": "", "burn_in": "", "n_required": "",
               "thin": "", "dependence": "", "gelman_rubin": "", "note": ""}
        try:
            rep = raftery_lewis(series[per_chain[ids[0]]], q=args.q, r=args.r, s=args.s)
            row.update(nmin=rep.nmin, burn_in=rep.burn_in, n_required=rep.n_required,
                       thin=rep.thin, dependence=f"{rep.dependence:.4g}")
        except ValueError as e:
            row["note"] = str(e)
        if len(ids) >= 2:
            n = min(int(np.sum(m)) for m in per_chain.values())
            try:
                row["gelman_rubin"] = f"{gelman_rubin([series[per_chain[c]][:n] for c in ids]):.4g}"
            except ValueError as e:
                row["note"] = (row["note"] + "; " if row["note"] else "") + str(e)
        rows.append(row)

    out = Path(args.out_dir or args.sample_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "diagnostics.csv"
    io.write_rows(path, rows, ["parameter", "nmin", "burn_in", "n_required",
                               "thin", "dependence", "gelman_rubin", "note"])
    done = [r for r in rows if r["dependence"] != ""]
    if done:
        worst = max(done, key=lambda r: float(r["dependence"]))
        print(f"wrote {path}; largest dependence factor {worst['dependence']}"
              f" ({worst['parameter']})")
    else:
        print(f"wrote {path}; no parameter had a long enough chain, see the note column")
    return 0


def _cmd_simulate(args) -> int:
    from .simulate import simulate_dataset

    grid = io.load_grid(args.grid)
    center = io.load_theta(args.initial_estimates_dir, grid)
    elic = io.load_elicitation(args.elicitation)
    _validated(grid, center)
    hyper = beta_from_elicitation(elic, center)
    data = simulate_dataset(grid, center, hyper, seed=args.seed or 0)

    out = Path(args.out_dir)
    io.write_theta(out / "initial", center, grid)
    io.write_census(out / "census", data.census, grid)
    io.write_theta(out / "truth" / "theta", data.theta_true, grid)
    io.write_rows(out / "truth" / "variances.csv",
                  [{"class": c, "value": repr(getattr(data.variances_true, c))}
                   for c in data.variances_true.as_dict()],
                  ["class", "value"])
    inputs = [args.grid, args.elicitation]
    inputs += sorted(str(p) for p in Path(args.initial_estimates_dir).glob("*.csv"))
    manifest = io.make_manifest(args.seed or 0, {"command": "simulate"}, grid,
                                elic, hyper, inputs, 0.0)
    manifest.write(out / "manifest.json")
    print(f"wrote synthetic dataset under {out}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="demrecon",
                                 description="Bayesian two-sex population reconstruction")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("project", help="run the deterministic projection")
    p.add_argument("--grid", required=True)
    p.add_argument("--initial-estimates-dir", required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(fn=_cmd_project)

    p = sub.add_parser("sample", help="draw from the posterior")
    p.add_argument("--grid", required=True)
    p.add_argument("--initial-estimates-dir", required=True)
    p.add_argument("--census", required=True)
    p.add_argument("--elicitation", required=True)
    p.add_argument("--iterations", type=int)
    p.add_argument("--burn-in", type=int, dest="burn_in")
    p.add_argument("--thin", type=int)
    p.add_argument("--chains", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(fn=_cmd_sample)

    p = sub.add_parser("summarize", help="summary tables from a sample")
    p.add_argument("--sample-dir", required=True)
    p.add_argument("--indicator", action="append")
    p.add_argument("--prob", action="append", type=float)
    p.add_argument("--threshold", action="append",
                   help="e.g. 'srb>1.06'; repeatable")
    p.add_argument("--trend", action="append",
                   help="indicator name; adds endpoint-change and slope posteriors")
    p.add_argument("--joint", action="append",
                   help="e.g. 'dip=srb:1960:1980:<;srb:1985:1995:>'")
    p.add_argument("--out-dir")
    p.set_defaults(fn=_cmd_summarize)

    p = sub.add_parser("diagnose", help="run-length and convergence diagnostics")
    p.add_argument("--sample-dir", required=True)
    p.add_argument("--q", type=float, default=0.025)
    p.add_argument("--r", type=float, default=0.005)
    p.add_argument("--s", type=float, default=0.95)
    p.add_argument("--parameter", action="append")
    p.add_argument("--out-dir")
    p.set_defaults(fn=_cmd_diagnose)

    p = sub.add_parser("simulate", help="synthetic dataset with known truth")
    p.add_argument("--grid", required=True)
    p.add_argument("--initial-estimates-dir", required=True,
                   help="directory with the center of the generating prior")
    p.add_argument("--elicitation", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(fn=_cmd_simulate)
    return ap


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (io.ParseError, _Invalid, ConfigError, ElicitationError,
            FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return VALIDATION_EXIT
    except (SamplingError, RuntimeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return RUNTIME_EXIT


if __name__ == "__main__":
    sys.exit(main())
