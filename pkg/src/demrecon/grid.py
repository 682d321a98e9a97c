"""Age/time/sex data model shared by all other modules.

Everything runs on a 5-year grid: age groups [0,5), [5,10), ..., [A, inf)
and calendar periods [t, t+5). Ages are labelled by their lower bound.
The open age group A gets one extra survival entry (labelled A+5) for
people who stay in the open group across a period.

Types here are deliberately permissive at construction time. Bad values
(a survival of 1.0, a census year off the grid) are caught by
``validate``, which never raises and reports every violation it finds
with index coordinates, so a caller can show the user the whole list at
once instead of failing on the first problem.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

# Sex axis convention used by every array in the package.
FEMALE = 0
MALE = 1
SEX_LABELS = ("female", "male")

# The five parameter classes of the hierarchical model, in the order they
# appear everywhere (variance vectors, elicitation files, sample output).
PARAM_CLASSES = ("counts", "fertility", "survival", "migration", "srb")

STEP = 5


def _freeze(a) -> np.ndarray:
    """Return a float64 copy with the writeable flag cleared."""
    out = np.array(a, dtype=np.float64)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class ModelGrid:
    """Index frame: baseline year, end year, age range and fertile span.

    Parameters
    ----------
    start_year : int
        Baseline calendar year (earliest census year).
    end_year : int
        Final year of the reconstruction (latest census year).
    open_age : int
        Lower bound of the open-ended oldest age group, e.g. 80.
    fert_min_age, fert_max_age : int
        Lower bounds of the first and last fertile age groups.
    census_years : tuple of int
        Calendar years with census counts. May be empty for
        projection-only use.
    step : int
        Grid resolution in years. Only 5 is supported; the field exists
        so a config that says otherwise produces a validation report
        instead of silent misbehaviour.
    """

    start_year: int
    end_year: int
    open_age: int = 80
    fert_min_age: int = 15
    fert_max_age: int = 45
    census_years: tuple = ()
    step: int = STEP

    def __post_init__(self):
        object.__setattr__(self, "census_years", tuple(int(y) for y in self.census_years))

    @property
    def n_ages(self) -> int:
        """Number of age groups K (closed groups plus the open group)."""
        return self.open_age // STEP + 1

    @property
    def n_periods(self) -> int:
        return (self.end_year - self.start_year) // STEP

    @property
    def ages(self) -> np.ndarray:
        """Lower bounds of the K age groups: 0, 5, ..., open_age."""
        return np.arange(0, self.open_age + STEP, STEP)

    @property
    def survival_ages(self) -> np.ndarray:
        """Destination-age labels of the K+1 survival entries.

        Entry a is the proportion of a cohort surviving INTO [a, a+5);
        the last entry (open_age + 5) is the proportion of the open
        group that remains alive over a period.
        """
        return np.arange(0, self.open_age + 2 * STEP, STEP)

    @property
    def fertile_ages(self) -> np.ndarray:
        return np.arange(self.fert_min_age, self.fert_max_age + STEP, STEP)

    @property
    def fertile_index(self) -> np.ndarray:
        """Indices of the fertile age groups within the K-length age axis."""
        return self.fertile_ages // STEP

    @property
    def n_fertile(self) -> int:
        return len(self.fertile_ages)

    @property
    def period_years(self) -> np.ndarray:
        """Start year of each projection period: start_year, ..., end_year-5."""
        return np.arange(self.start_year, self.end_year, STEP)

    @property
    def stock_years(self) -> np.ndarray:
        """Years at which population counts exist: start_year, ..., end_year."""
        return np.arange(self.start_year, self.end_year + STEP, STEP)

    def year_index(self, year: int) -> int:
        """Position of a stock year on the grid (0 for the baseline)."""
        if (year - self.start_year) % STEP != 0:
            raise ValueError(f"year {year} is not on the 5-year grid from {self.start_year}")
        return (year - self.start_year) // STEP

    @property
    def likelihood_years(self) -> tuple:
        """Census years that enter the count likelihood.

        The baseline census anchors the prior on the baseline counts and
        is excluded here so the same numbers are not used twice.
        """
        return tuple(y for y in self.census_years if self.start_year < y <= self.end_year)


@dataclass(frozen=True)
class ThetaVector:
    """All inputs of the deterministic projection for one parameter draw.

    Arrays are float64 and read-only after construction. Axis order is
    (age, period, sex) throughout; sex uses FEMALE=0, MALE=1.

    baseline : (K, 2)
        Population counts at the baseline year.
    fertility : (n_fertile, P)
        Age-specific fertility rates for the fertile age groups only
        (births per person-year).
    survival : (K+1, P, 2)
        Survival proportions indexed by destination age (see
        ``ModelGrid.survival_ages``).
    migration : (K, P, 2)
        Net migration proportions over each period.
    srb : (P,)
        Sex ratio at birth, male births per female birth, per period.
    """

    baseline: np.ndarray
    fertility: np.ndarray
    survival: np.ndarray
    migration: np.ndarray
    srb: np.ndarray

    def __post_init__(self):
        for name in ("baseline", "fertility", "survival", "migration", "srb"):
            object.__setattr__(self, name, _freeze(getattr(self, name)))

    def replace(self, **arrays) -> "ThetaVector":
        """Copy with some arrays swapped out."""
        current = {
            "baseline": self.baseline,
            "fertility": self.fertility,
            "survival": self.survival,
            "migration": self.migration,
            "srb": self.srb,
        }
        current.update(arrays)
        return ThetaVector(**current)


@dataclass(frozen=True)
class VarianceParams:
    """The five variances of the hierarchical model, one per parameter class.

    Each applies on that class's transformed scale: log for counts,
    fertility and srb, logit for survival, natural scale for migration.
    """

    counts: float
    fertility: float
    survival: float
    migration: float
    srb: float

    def as_dict(self) -> dict:
        return {c: getattr(self, c) for c in PARAM_CLASSES}

    @classmethod
    def from_dict(cls, d: Mapping) -> "VarianceParams":
        return cls(**{c: float(d[c]) for c in PARAM_CLASSES})


@dataclass(frozen=True)
class CensusData:
    """Census counts by age and sex at one or more census years.

    counts has shape (n_years, K, 2), aligned with ``years``.
    """

    years: tuple
    counts: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "years", tuple(int(y) for y in self.years))
        object.__setattr__(self, "counts", _freeze(self.counts))

    def at(self, year: int) -> np.ndarray:
        return self.counts[self.years.index(year)]


@dataclass(frozen=True)
class Elicitation:
    """Expert inputs that set the variance hyperpriors.

    eta is the elicited relative error per parameter class: the expert
    believes the true value lies within eta * 100 percent of the initial
    estimate with 90 percent probability. alpha is the inverse-gamma
    shape; the default 0.5 gives each prior the weight of a single data
    point.
    """

    eta: Mapping
    alpha: Mapping = field(default_factory=dict)

    def __post_init__(self):
        eta = {c: float(self.eta[c]) for c in PARAM_CLASSES}
        alpha = {c: float(dict(self.alpha).get(c, 0.5)) for c in PARAM_CLASSES}
        object.__setattr__(self, "eta", eta)
        object.__setattr__(self, "alpha", alpha)


@dataclass(frozen=True)
class ValidationReport:
    """Outcome of ``validate``: empty violations means pass."""

    violations: tuple

    @property
    def ok(self) -> bool:
        return not self.violations

    def __str__(self) -> str:
        if self.ok:
            return "ok"
        return "\n".join(self.violations)


def _check_grid(grid: ModelGrid, out: list, require_census: bool):
    if grid.step != STEP:
        out.append(f"grid: step must be {STEP}, got {grid.step}")
    if grid.end_year <= grid.start_year:
        out.append(f"grid: end_year {grid.end_year} must exceed start_year {grid.start_year}")
    elif (grid.end_year - grid.start_year) % STEP != 0:
        out.append(
            f"grid: end_year - start_year = {grid.end_year - grid.start_year}"
            f" is not a multiple of {STEP}"
        )
    if grid.open_age <= 0 or grid.open_age % STEP != 0:
        out.append(f"grid: open_age {grid.open_age} must be a positive multiple of {STEP}")
    for name in ("fert_min_age", "fert_max_age"):
        v = getattr(grid, name)
        if v % STEP != 0 or not (0 <= v <= grid.open_age):
            out.append(f"grid: {name} {v} must be a multiple of {STEP} in [0, {grid.open_age}]")
    if grid.fert_min_age > grid.fert_max_age:
        out.append(
            f"grid: fert_min_age {grid.fert_min_age} exceeds fert_max_age {grid.fert_max_age}"
        )

    years = grid.census_years
    if require_census and not years:
        out.append("grid: census_years is empty but census data was supplied")
    if years:
        for y in years:
            if (y - grid.start_year) % STEP != 0:
                out.append(
                    f"grid: census year {y} is off the {STEP}-year grid from {grid.start_year}"
                )
            elif not (grid.start_year <= y <= grid.end_year):
                out.append(
                    f"grid: census year {y} outside [{grid.start_year}, {grid.end_year}]"
                )
        if list(years) != sorted(set(years)):
            out.append("grid: census_years must be strictly increasing")
        if grid.start_year not in years:
            out.append(f"grid: baseline year {grid.start_year} must be a census year")
        if grid.end_year not in years:
            out.append(f"grid: end year {grid.end_year} must be a census year")


def _check_shape(name: str, arr: np.ndarray, want: tuple, out: list) -> bool:
    if arr.shape != want:
        out.append(f"{name}: shape {arr.shape} does not match grid, expected {want}")
        return False
    return True


def _cell_lines(name, arr, bad, labels, reason, out):
    """Append one violation line per offending array cell."""
    for idx in zip(*np.nonzero(bad)):
        coord = ",".join(str(lab[i]) for lab, i in zip(labels, idx))
        out.append(f"{name}[{coord}] = {arr[idx]:g} {reason}")


def validate(grid: ModelGrid, theta: ThetaVector = None, census: CensusData = None) -> ValidationReport:
    """Check every structural invariant and return the full list of violations.

    Total: never raises on bad values, always returns a report. Coordinates
    in the messages use age lower bounds, calendar years and sex labels.
    Census-year membership rules are only enforced when the grid declares
    census years or census data is supplied, so projection-only grids can
    leave ``census_years`` empty.
    """
    out: list = []
    _check_grid(grid, out, require_census=census is not None)

    K = grid.n_ages
    P = grid.n_periods
    ages = grid.ages
    sages = grid.survival_ages
    years = grid.period_years
    sexes = SEX_LABELS

    if theta is not None:
        t = theta
        if _check_shape("baseline", t.baseline, (K, 2), out):
            _cell_lines("baseline", t.baseline, t.baseline < 0, (ages, sexes), "is negative", out)
        if _check_shape("fertility", t.fertility, (grid.n_fertile, P), out):
            _cell_lines(
                "fertility", t.fertility, t.fertility <= 0,
                (grid.fertile_ages, years), "must be positive", out,
            )
        if _check_shape("survival", t.survival, (K + 1, P, 2), out):
            bad = (t.survival <= 0) | (t.survival >= 1)
            _cell_lines("survival", t.survival, bad, (sages, years, sexes), "outside (0, 1)", out)
        _check_shape("migration", t.migration, (K, P, 2), out)
        if _check_shape("srb", t.srb, (P,), out):
            _cell_lines("srb", t.srb, t.srb <= 0, (years,), "must be positive", out)

    if census is not None:
        if census.counts.ndim != 3 or census.counts.shape != (len(census.years), K, 2):
            out.append(
                f"census: counts shape {census.counts.shape} does not match"
                f" ({len(census.years)}, {K}, 2)"
            )
        else:
            _cell_lines(
                "census", census.counts, census.counts <= 0,
                (census.years, ages, sexes), "must be positive", out,
            )
        for y in census.years:
            if (y - grid.start_year) % STEP != 0 or not (grid.start_year <= y <= grid.end_year):
                out.append(f"census: year {y} is off the grid [{grid.start_year}, {grid.end_year}] step {STEP}")
            elif grid.census_years and y not in grid.census_years:
                out.append(f"census: year {y} is not declared in grid census_years")

    return ValidationReport(tuple(out))
