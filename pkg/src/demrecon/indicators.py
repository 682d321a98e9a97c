"""Scalar demographic indicators computed from one parameter draw.

These are cheap per-draw functions; posterior distributions of each
indicator come from mapping them over an MCMC sample (see summaries).

Conventions: sex ratios are male per female. Life expectancy treats the
K+1 survival entries as a synthetic cohort schedule; the open group
contributes a geometric tail 5 * (product of closed-group survivals) *
s_open / (1 - s_open), which diverges as s_open -> 1, so that case is an
error rather than a silent cap.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .grid import FEMALE, MALE, ModelGrid, ThetaVector


@dataclass(frozen=True)
class IndicatorSeries:
    """One indicator over time: values keyed by period (or stock) start year."""

    name: str
    values: Mapping
    units: str = ""

    def __post_init__(self):
        object.__setattr__(self, "values", dict(self.values))


def tfr(fertility_col: np.ndarray) -> float:
    """Total fertility rate: 5 times the sum of age-specific rates."""
    return 5.0 * float(np.sum(fertility_col))


def life_expectancy(survival_col: np.ndarray) -> float:
    """Life expectancy at birth from one sex/period survival column.

    e0 = 5 * sum over closed ages of the cumulative survival products,
    plus the open-group tail. survival_col has K+1 entries; the last is
    the open-group survival and must be < 1.
    """
    s = np.asarray(survival_col, dtype=np.float64)
    s_open = s[-1]
    if s_open >= 1.0:
        raise ValueError(f"open-group survival {s_open} >= 1: life expectancy diverges")
    live = np.cumprod(s[:-1])
    return 5.0 * (float(np.sum(live)) + float(live[-1]) * s_open / (1.0 - s_open))


def u5mr(s0: float) -> float:
    """Under-five mortality per 1000 births: deaths of the period's birth cohort."""
    return 1000.0 * (1.0 - s0)


def sex_ratio_u5mr(theta: ThetaVector, period: int) -> float:
    """Male over female under-five mortality in one period."""
    f = u5mr(theta.survival[0, period, FEMALE])
    m = u5mr(theta.survival[0, period, MALE])
    if f == 0.0:
        raise ZeroDivisionError("female under-five mortality is zero")
    return m / f


def sex_diff_e0(theta: ThetaVector, period: int) -> float:
    """Female minus male life expectancy at birth in one period, in years."""
    return (life_expectancy(theta.survival[:, period, FEMALE])
            - life_expectancy(theta.survival[:, period, MALE]))


def srtp(counts: np.ndarray) -> float:
    """Sex ratio of the total population: males per female."""
    females = float(np.sum(counts[:, FEMALE]))
    if females == 0.0:
        raise ZeroDivisionError("total female population is zero")
    return float(np.sum(counts[:, MALE])) / females


def sru5(counts: np.ndarray) -> float:
    """Sex ratio of the population aged 0 to 5: males per female."""
    if counts[0, FEMALE] == 0.0:
        raise ZeroDivisionError("female population aged [0,5) is zero")
    return float(counts[0, MALE]) / float(counts[0, FEMALE])


def avg_annual_net_migrants(counts: np.ndarray, migration: np.ndarray) -> np.ndarray:
    """Average net migrants per year over one period, by sex.

    counts and migration are the (K, 2) state and migration proportions
    at the period start. Returns a length-2 array (female, male).
    """
    return np.asarray(np.sum(counts * migration, axis=0) / 5.0)


def indicator_series(theta: ThetaVector, grid: ModelGrid, name: str) -> IndicatorSeries:
    """Evaluate one named indicator at every period of the grid.

    Rate-based indicators only; population-based series (srtp, sru5,
    migrant counts) need a projection and live in the summaries module.
    """
    years = [int(y) for y in grid.period_years]
    if name == "tfr":
        vals = {y: tfr(theta.fertility[:, p]) for p, y in enumerate(years)}
        return IndicatorSeries("tfr", vals, "children per woman")
    if name == "srb":
        vals = {y: float(theta.srb[p]) for p, y in enumerate(years)}
        return IndicatorSeries("srb", vals, "male per female birth")
    if name in ("e0_female", "e0_male"):
        sex = FEMALE if name.endswith("female") else MALE
        vals = {y: life_expectancy(theta.survival[:, p, sex]) for p, y in enumerate(years)}
        return IndicatorSeries(name, vals, "years")
    if name in ("u5mr_female", "u5mr_male"):
        sex = FEMALE if name.endswith("female") else MALE
        vals = {y: u5mr(theta.survival[0, p, sex]) for p, y in enumerate(years)}
        return IndicatorSeries(name, vals, "deaths per 1000 births")
    if name == "sex_ratio_u5mr":
        vals = {y: sex_ratio_u5mr(theta, p) for p, y in enumerate(years)}
        return IndicatorSeries(name, vals, "male per female rate")
    if name == "sex_diff_e0":
        vals = {y: sex_diff_e0(theta, p) for p, y in enumerate(years)}
        return IndicatorSeries(name, vals, "years")
    raise KeyError(f"unknown indicator {name!r}")
