"""Deterministic two-sex cohort-component projection.

One projection step advances the population five years:

  ages 5+ :  n[t+5] = L @ (n[t] * (1 + g/2)) + (n[t] * g/2 aged forward)
  age 0   :  b = 5 * sum over fertile ages a of
                 f[a] * (nF[a] + nF[a-5] * sF[a]) / 2
             n0_female = b * 1/(1+srb)   * (s0 * (1 + g0/2) + g0/2)
             n0_male   = b * srb/(1+srb) * (s0 * (1 + g0/2) + g0/2)

L is the (K-1) x K survival matrix: survivors of age group a move into
a+5, and the open group additionally retains its own members with the
extra survival entry. Migration is split in half: the first half
migrates at the start of the period and ages with the cohort, the
second half arrives at the end of the period, counted as n*g/2 persons
landing in the destination age group (the group the cohort has aged
into). The projection is female dominant: male counts never enter the
birth sum.

Exact arithmetic notes, relied on by tests: the aged survivor at
destination a+5 is computed as count[a] * (1 + g[a]/2) * s[a+5], and the
open group accumulates as (survivors from open_age-5) + (retained open
group members), in that order, before any migration is added. With g
identically zero these reduce bitwise to count * survival.

Negative counts are never an error here. They are carried through and
exposed via ``Trajectory.first_negative`` / ``positivity_indicator`` so
a sampler can reject the parameter draw instead of crashing mid-scan.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import FEMALE, MALE, SEX_LABELS, STEP, ModelGrid, ThetaVector


@dataclass(frozen=True)
class PopulationState:
    """Counts by age group and sex at one calendar year. counts is (K, 2)."""

    counts: np.ndarray
    year: int

    def __post_init__(self):
        c = np.array(self.counts, dtype=np.float64)
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)


@dataclass(frozen=True)
class PeriodRates:
    """The vital-rate slice for one period.

    fertility (n_fertile,), survival (K+1, 2), migration (K, 2), srb scalar.
    """

    fertility: np.ndarray
    survival: np.ndarray
    migration: np.ndarray
    srb: float


def period_rates(theta: ThetaVector, period: int) -> PeriodRates:
    """Extract the rates of one period (by index) from a ThetaVector."""
    return PeriodRates(
        fertility=theta.fertility[:, period],
        survival=theta.survival[:, period, :],
        migration=theta.migration[:, period, :],
        srb=float(theta.srb[period]),
    )


def build_leslie(survival_col: np.ndarray) -> np.ndarray:
    """Survival part of the projection matrix for one sex and period.

    survival_col has K+1 entries indexed by destination age. Returns the
    (K-1) x K matrix whose row i moves age group i into i+1 with
    survival_col[i+1]; the bottom row also keeps the open group with
    survival_col[K].
    """
    s = np.asarray(survival_col, dtype=np.float64)
    if s.ndim != 1 or s.size < 3:
        raise ValueError(f"survival column must be 1-d with K+1 >= 3 entries, got shape {s.shape}")
    K = s.size - 1
    L = np.zeros((K - 1, K))
    idx = np.arange(K - 1)
    L[idx, idx] = s[1:K]
    L[K - 2, K - 1] = s[K]
    return L


def total_births(counts_female: np.ndarray, survival_female: np.ndarray,
                 fertility: np.ndarray, fertile_index: np.ndarray) -> float:
    """Births over one 5-year period given the female side of the state.

    Approximates person-years lived in fertile group a by women already
    there plus women surviving in from a-5: 5 * (n[a] + n[a-5]*s[a]) / 2.
    When the first fertile group is [0,5) there is no younger group and
    that term is zero. Only female counts enter; the projection is
    female dominant.
    """
    ia = np.asarray(fertile_index)
    n_a = counts_female[ia]
    n_prev = np.where(ia > 0, counts_female[ia - 1], 0.0)
    s_a = survival_female[ia]
    return 5.0 * float(np.sum(fertility * (n_a + n_prev * s_a) * 0.5))


def _step_counts(counts: np.ndarray, fertility: np.ndarray, survival: np.ndarray,
                 migration: np.ndarray, srb: float, fertile_index: np.ndarray) -> np.ndarray:
    """One projection step on raw arrays; the hot path used by the sampler.

    counts (K, 2), survival (K+1, 2), migration (K, 2). Returns (K, 2).
    """
    half_g = 0.5 * migration
    base = counts * (1.0 + half_g)
    out = np.empty_like(counts)
    # survivors age one group; the open group also retains its members
    out[1:] = base[:-1] * survival[1:-1]
    out[-1] += base[-1] * survival[-1]
    # second-half migrants arrive already aged into the destination group
    mig_in = counts * half_g
    out[1:] += mig_in[:-1]
    out[-1] += mig_in[-1]

    b = total_births(counts[:, FEMALE], survival[:, FEMALE], fertility, fertile_index)
    g0 = half_g[0]
    factor = survival[0] * (1.0 + g0) + g0
    out[0, FEMALE] = b * (1.0 / (1.0 + srb)) * factor[FEMALE]
    out[0, MALE] = b * (srb / (1.0 + srb)) * factor[MALE]
    return out


def project_step(state: PopulationState, rates: PeriodRates, grid: ModelGrid) -> PopulationState:
    """Advance the population one period."""
    new = _step_counts(state.counts, rates.fertility, rates.survival,
                       rates.migration, rates.srb, grid.fertile_index)
    return PopulationState(counts=new, year=state.year + STEP)


@dataclass(frozen=True)
class Trajectory:
    """Projected counts at every grid year. counts is (P+1, K, 2)."""

    counts: np.ndarray
    years: tuple

    def __post_init__(self):
        c = np.asarray(self.counts, dtype=np.float64)
        c.setflags(write=False)
        object.__setattr__(self, "counts", c)
        object.__setattr__(self, "years", tuple(int(y) for y in self.years))

    def at(self, year: int) -> np.ndarray:
        return self.counts[self.years.index(year)]

    def first_negative(self):
        """(year, age, sex label) of the first negative count, or None."""
        bad = np.argwhere(self.counts < 0)
        if bad.size == 0:
            return None
        t, a, l = bad[0]
        return (self.years[t], int(a) * STEP, SEX_LABELS[l])


def project_full(baseline: np.ndarray, theta: ThetaVector, grid: ModelGrid) -> Trajectory:
    """Run the projection over every period of the grid.

    baseline is the (K, 2) count array for the start year (normally
    theta.baseline). Returns all intermediate states, baseline included.
    """
    P = grid.n_periods
    fi = grid.fertile_index
    traj = np.empty((P + 1, grid.n_ages, 2))
    traj[0] = baseline
    for p in range(P):
        traj[p + 1] = _step_counts(
            traj[p], theta.fertility[:, p], theta.survival[:, p, :],
            theta.migration[:, p, :], float(theta.srb[p]), fi,
        )
    return Trajectory(counts=traj, years=tuple(grid.stock_years))


def positivity_indicator(trajectory: Trajectory) -> int:
    """1 if every count at every age, year and sex is nonnegative, else 0."""
    return int(bool(np.all(trajectory.counts >= 0)))
