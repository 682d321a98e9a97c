"""Posterior summaries: quantiles, interval widths, exceedance and trend
probabilities, and per-draw indicator trajectories.

Everything operates on a TrajectoryMatrix, one scalar indicator per
draw per period. Quantiles use numpy's default linear interpolation
(type 7) so results are reproducible bit for bit elsewhere. Trend
measures regress on the START year of each period.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import FEMALE, MALE, ModelGrid
from .indicators import life_expectancy
from .projection import project_full
from .sampler import PosteriorSample

RATE_INDICATORS = ("tfr", "srb", "e0_female", "e0_male", "u5mr_female",
                   "u5mr_male", "sex_ratio_u5mr", "sex_diff_e0")
POPULATION_INDICATORS = ("srtp", "sru5", "net_migrants_female", "net_migrants_male")
INDICATOR_NAMES = RATE_INDICATORS + POPULATION_INDICATORS


@dataclass(frozen=True)
class TrajectoryMatrix:
    """Per-draw series of one scalar indicator: values is (n_draws, n_years)."""

    name: str
    values: np.ndarray
    years: tuple

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2:
            raise ValueError(f"values must be 2-d (draws, years), got shape {v.shape}")
        if v.shape[1] != len(self.years):
            raise ValueError(f"{v.shape[1]} columns but {len(self.years)} years")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "years", tuple(int(y) for y in self.years))

    @property
    def n_draws(self) -> int:
        return self.values.shape[0]

    def column(self, year: int) -> np.ndarray:
        return self.values[:, self.years.index(year)]


def marginal_quantiles(tm: TrajectoryMatrix, probs) -> np.ndarray:
    """Empirical quantiles per period: shape (len(probs), n_years)."""
    if tm.n_draws == 0:
        raise ValueError("empty sample")
    return np.quantile(tm.values, np.asarray(probs, dtype=np.float64), axis=0)


def mean_half_width(lower: np.ndarray, upper: np.ndarray) -> float:
    """Mean over all cells of (upper - lower) / 2."""
    lo = np.asarray(lower, dtype=np.float64)
    hi = np.asarray(upper, dtype=np.float64)
    if lo.shape != hi.shape:
        raise ValueError(f"shape mismatch: {lo.shape} vs {hi.shape}")
    return float(np.mean((hi - lo) / 2.0))


def exceedance_prob(tm: TrajectoryMatrix, threshold: float, direction: str = ">") -> np.ndarray:
    """Fraction of draws beyond the threshold, per period."""
    v = tm.values
    if direction == ">":
        hit = v > threshold
    elif direction == ">=":
        hit = v >= threshold
    elif direction == "<":
        hit = v < threshold
    elif direction == "<=":
        hit = v <= threshold
    else:
        raise ValueError(f"direction must be one of > >= < <=, got {direction!r}")
    return hit.mean(axis=0)


def endpoint_diff(tm: TrajectoryMatrix, year_a: int = None, year_b: int = None) -> np.ndarray:
    """Per-draw change value(year_b) - value(year_a); defaults to last minus first."""
    a = tm.years[0] if year_a is None else year_a
    b = tm.years[-1] if year_b is None else year_b
    return tm.column(b) - tm.column(a)


def ols_slope(tm: TrajectoryMatrix) -> np.ndarray:
    """Per-draw least-squares slope of the series against period start years.

    slope = sum((x - xbar) * (y - ybar)) / sum((x - xbar)^2), per year.
    """
    if len(tm.years) < 2:
        raise ValueError("need at least two periods for a slope")
    x = np.asarray(tm.years, dtype=np.float64)
    xc = x - x.mean()
    yc = tm.values - tm.values.mean(axis=1, keepdims=True)
    return (yc @ xc) / float(xc @ xc)


def joint_event_prob(predicates) -> float:
    """Fraction of draws on which every predicate holds.

    predicates is a sequence of equal-length boolean arrays, one entry
    per draw (e.g. ``endpoint_diff(tm, 1960, 1980) > 0``).
    """
    preds = [np.asarray(p, dtype=bool) for p in predicates]
    if not preds:
        raise ValueError("need at least one predicate")
    n = preds[0].size
    if any(p.size != n for p in preds):
        raise ValueError("predicates must cover the same draws")
    joint = np.ones(n, dtype=bool)
    for p in preds:
        joint &= p
    return float(joint.mean())


def _e0_matrix(survival: np.ndarray, sex: int) -> np.ndarray:
    """Life expectancy per draw and period from (draws, K+1, P, 2) survival."""
    s = survival[:, :, :, sex]
    s_open = s[:, -1, :]
    if np.any(s_open >= 1.0):
        raise ValueError("open-group survival >= 1 in the sample: life expectancy diverges")
    live = np.cumprod(s[:, :-1, :], axis=1)
    return 5.0 * (live.sum(axis=1) + live[:, -1, :] * s_open / (1.0 - s_open))


def indicator_trajectories(sample: PosteriorSample, name: str) -> TrajectoryMatrix:
    """Evaluate one named indicator on every draw of the sample.

    Rate-based indicators read the parameter draws directly; the
    population-based ones (srtp, sru5, net migrant counts) re-project
    each draw. srtp and sru5 are stock series over all grid years,
    everything else is a period series.
    """
    grid = sample.grid
    d = sample.draws
    pyears = tuple(int(y) for y in grid.period_years)

    if name == "tfr":
        return TrajectoryMatrix(name, 5.0 * d["fertility"].sum(axis=1), pyears)
    if name == "srb":
        return TrajectoryMatrix(name, d["srb"], pyears)
    if name in ("e0_female", "e0_male"):
        sex = FEMALE if name.endswith("female") else MALE
        return TrajectoryMatrix(name, _e0_matrix(d["survival"], sex), pyears)
    if name in ("u5mr_female", "u5mr_male"):
        sex = FEMALE if name.endswith("female") else MALE
        return TrajectoryMatrix(name, 1000.0 * (1.0 - d["survival"][:, 0, :, sex]), pyears)
    if name == "sex_ratio_u5mr":
        m = 1000.0 * (1.0 - d["survival"][:, 0, :, MALE])
        f = 1000.0 * (1.0 - d["survival"][:, 0, :, FEMALE])
        return TrajectoryMatrix(name, m / f, pyears)
    if name == "sex_diff_e0":
        vals = _e0_matrix(d["survival"], FEMALE) - _e0_matrix(d["survival"], MALE)
        return TrajectoryMatrix(name, vals, pyears)

    if name in POPULATION_INDICATORS:
        n = sample.n_draws
        stock_years = tuple(int(y) for y in grid.stock_years)
        per_period = name.startswith("net_migrants")
        width = len(pyears) if per_period else len(stock_years)
        out = np.empty((n, width))
        for i in range(n):
            theta = sample.theta_at(i)
            traj = project_full(theta.baseline, theta, grid).counts
            if name == "srtp":
                out[i] = traj[:, :, MALE].sum(axis=1) / traj[:, :, FEMALE].sum(axis=1)
            elif name == "sru5":
                out[i] = traj[:, 0, MALE] / traj[:, 0, FEMALE]
            else:
                sex = FEMALE if name.endswith("female") else MALE
                out[i] = np.sum(traj[:-1, :, sex] * theta.migration[:, :, sex].T, axis=1) / 5.0
        return TrajectoryMatrix(name, out, pyears if per_period else stock_years)

    raise KeyError(f"unknown indicator {name!r}")


def summary_rows(sample: PosteriorSample, indicators, probs=(0.025, 0.5, 0.975),
                 thresholds=(), trends=(), joints=()) -> list:
    """Tidy summary table: one dict per (indicator, year, statistic).

    thresholds: (indicator, direction, value) triples.
    trends: indicator names; each yields the posterior of the last-minus-
    first change and of the OLS slope on start years.
    joints: (label, predicates) pairs where predicates is a list of
    (indicator, year_a, year_b, direction) meaning the draw counts when
    value(year_a) - value(year_b) is > 0 ("decrease" if a precedes b) or
    < 0, matching the direction sign.
    """
    rows = []
    probs = tuple(float(p) for p in probs)
    cache = {}

    def tm(name):
        if name not in cache:
            cache[name] = indicator_trajectories(sample, name)
        return cache[name]

    for name in indicators:
        t = tm(name)
        qs = marginal_quantiles(t, probs)
        for j, year in enumerate(t.years):
            rows.append({"indicator": name, "year": year, "statistic": "mean",
                         "value": float(t.values[:, j].mean())})
            for p, q in zip(probs, qs[:, j]):
                rows.append({"indicator": name, "year": year,
                             "statistic": f"q{p:g}", "value": float(q)})
        if len(probs) >= 2:
            lo, hi = min(probs), max(probs)
            qlo = marginal_quantiles(t, [lo])[0]
            qhi = marginal_quantiles(t, [hi])[0]
            rows.append({"indicator": name, "year": "", "statistic": "mean_half_width",
                         "value": mean_half_width(qlo, qhi)})

    for name, direction, value in thresholds:
        t = tm(name)
        p = exceedance_prob(t, value, direction)
        stat = f"p({name}{direction}{value:g})"
        for j, year in enumerate(t.years):
            rows.append({"indicator": name, "year": year, "statistic": stat,
                         "value": float(p[j])})

    for name in trends:
        t = tm(name)
        diff = endpoint_diff(t)
        slope = ols_slope(t)
        for label, vals in (("endpoint_diff", diff), ("ols_slope", slope)):
            rows.append({"indicator": name, "year": "", "statistic": f"{label}_mean",
                         "value": float(vals.mean())})
            for p in probs:
                rows.append({"indicator": name, "year": "",
                             "statistic": f"{label}_q{p:g}",
                             "value": float(np.quantile(vals, p))})
            rows.append({"indicator": name, "year": "", "statistic": f"p({label}>0)",
                         "value": float(np.mean(vals > 0))})

    for label, predicates in joints:
        arrays = []
        for name, year_a, year_b, direction in predicates:
            change = endpoint_diff(tm(name), year_a, year_b)
            arrays.append(change > 0 if direction == ">" else change < 0)
        rows.append({"indicator": "joint", "year": "", "statistic": label,
                     "value": joint_event_prob(arrays)})
    return rows
