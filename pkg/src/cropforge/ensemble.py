"""Yield prediction from previously calibrated models.

Four combination strategies over a prediction matrix Y(y_x, y_k) — the yield
predicted for year y_k by the model calibrated on year y_x:

- all-previous: one seeded-random prior calibration year;
- previous-year: the model calibrated on y_i - 1;
- mean: arithmetic mean over all prior calibration years;
- quality: average weighted by historical skill, where the quality score
  Q(y_j) is the mean MAPE of model y_j over all evaluation years strictly
  between y_j and the target. Better history means a larger weight
  (w = 1/max(Q, 1e-6)); the literal variant w = Q is kept behind a switch
  for comparison.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np

from ._parallel import parallel_map
from .calibration import CalendarSpec, season_plan
from .formats import CalibrationEntry, SoilProfile, WeatherSeries
from .simulator import CoefficientBound, GeneticCoefficients, default_bounds, map_coefficients, simulate

QUALITY_EPSILON = 1e-6


@dataclass
class PredictionMatrix:
    """Y(y_x, y_k) keyed by (calibration year, evaluation year), y_x < y_k."""

    values: dict[tuple[int, int], float] = field(default_factory=dict)

    def __post_init__(self):
        for (y_x, y_k) in self.values:
            if y_x >= y_k:
                raise ValueError(f"matrix key ({y_x}, {y_k}) not above the diagonal")

    def calibration_years(self, y_i: int) -> list[int]:
        """Prior calibration years with a prediction for y_i."""
        return sorted({yx for (yx, yk) in self.values if yk == y_i and yx < y_i})


@dataclass
class CalibratedModelSet:
    entries: dict[int, list[CalibrationEntry]]
    target_year: int

    def __post_init__(self):
        for year, items in self.entries.items():
            if year >= self.target_year:
                raise ValueError(f"calibration year {year} not before target "
                                 f"{self.target_year}")
            if not items:
                raise ValueError(f"calibration year {year} has no entries")


@dataclass
class RegionPrediction:
    mean: float
    std: float
    field_predictions: list[float]

    def __post_init__(self):
        if self.std < 0:
            raise ValueError("std must be >= 0")
        if not min(self.field_predictions) <= self.mean <= max(self.field_predictions):
            raise ValueError("mean outside the field prediction range")


def evaluate_entry(entry: CalibrationEntry, weather: WeatherSeries, soil: SoilProfile,
                   target_year: int, calendar: CalendarSpec | None = None,
                   bounds: list[CoefficientBound] | None = None) -> float:
    """One simulate call with the entry's coefficients on the target season."""
    calendar = calendar or CalendarSpec()
    bounds = bounds or default_bounds()
    genetics = GeneticCoefficients(entry.calibration_values, bounds)
    plan = season_plan(map_coefficients(genetics), target_year, calendar)
    return simulate(plan, weather, genetics, soil).yield_kg_ha


def ensemble_all_previous(matrix: PredictionMatrix, y_i: int, seed: int) -> float:
    """Prediction of one uniformly chosen prior calibration year."""
    years = matrix.calibration_years(y_i)
    if not years:
        raise ValueError(f"no prior calibration years for {y_i}")
    rng = np.random.Generator(np.random.PCG64(seed))
    y_x = years[int(rng.integers(len(years)))]
    return matrix.values[(y_x, y_i)]


def ensemble_previous_year(matrix: PredictionMatrix, y_i: int) -> float:
    try:
        return matrix.values[(y_i - 1, y_i)]
    except KeyError:
        raise ValueError(f"no calibration for year {y_i - 1}") from None


def ensemble_mean(matrix: PredictionMatrix, y_i: int) -> float:
    years = matrix.calibration_years(y_i)
    if not years:
        raise ValueError(f"no prior calibration years for {y_i}")
    return sum(matrix.values[(y, y_i)] for y in years) / len(years)


def quality_score(matrix: PredictionMatrix, y_j: int, y_i: int,
                  observed: dict[int, float]) -> float:
    """Mean MAPE of model y_j over evaluation years k with y_j < k < y_i."""
    errors = []
    for k in sorted(observed):
        if y_j < k < y_i and (y_j, k) in matrix.values:
            o = observed[k]
            if o <= 0:
                raise ValueError(f"observed yield for {k} must be > 0")
            errors.append(abs(matrix.values[(y_j, k)] - o) / o)
    if not errors:
        raise ValueError(f"quality of {y_j} undefined for target {y_i}: "
                         "no scored evaluation years")
    return sum(errors) / len(errors)


def ensemble_quality(matrix: PredictionMatrix, y_i: int, observed: dict[int, float],
                     literal_q: bool = False) -> float:
    """Skill-weighted average over members calibrated on or before y_i - 2.

    The most recent prior year has no scoring window and is excluded. With
    ``literal_q`` the printed form of the weighting (w = Q) is used instead
    of the inverse.
    """
    years = matrix.calibration_years(y_i)
    if len(years) < 2:
        raise ValueError("quality ensemble needs at least 2 prior calibration "
                         "years; use previous-year or mean instead")
    members = []
    for y_j in years:
        if y_j > y_i - 2:
            continue
        try:
            q = quality_score(matrix, y_j, y_i, observed)
        except ValueError:
            continue  # no scoring window for this member
        members.append((y_j, q))
    if not members:
        raise ValueError(f"no scorable quality members for target {y_i}")
    if literal_q:
        weights = [q for _, q in members]
        if sum(weights) == 0:
            weights = [1.0] * len(members)
    else:
        weights = [1.0 / max(q, QUALITY_EPSILON) for _, q in members]
    total = sum(weights)
    return sum(w * matrix.values[(y_j, y_i)]
               for (y_j, _), w in zip(members, weights)) / total


def aggregate_region(field_predictions: list[float]) -> RegionPrediction:
    """Mean and population standard deviation over per-field predictions."""
    if not field_predictions:
        raise ValueError("no field predictions to aggregate")
    n = len(field_predictions)
    mean = sum(field_predictions) / n
    var = sum((p - mean) ** 2 for p in field_predictions) / n
    return RegionPrediction(mean=mean, std=math.sqrt(var),
                            field_predictions=list(field_predictions))


def _evaluate_task(args):
    entry, weather, soil, year, calendar, bounds = args
    return evaluate_entry(entry, weather, soil, year, calendar, bounds)


def build_prediction_matrix(models: CalibratedModelSet,
                            weather_by_year: dict[int, WeatherSeries],
                            soil: SoilProfile,
                            calendar: CalendarSpec | None = None,
                            bounds: list[CoefficientBound] | None = None,
                            jobs: int = 1):
    """Populate Y(y_x, y_k) for every pair of calibration year and later
    evaluation year (calibration years plus the target).

    The matrix holds the mean over the year's calibrated entries; the full
    per-entry prediction cloud is returned alongside for spread estimates
    and plotting.
    """
    calendar = calendar or CalendarSpec()
    bounds = bounds or default_bounds()
    cal_years = sorted(models.entries)
    eval_years = sorted(set(cal_years) | {models.target_year})
    pairs = [(yx, yk) for yx in cal_years for yk in eval_years if yk > yx]
    for _, yk in pairs:
        if yk not in weather_by_year:
            raise ValueError(f"missing weather for evaluation year {yk}")

    tasks, owners = [], []
    for yx, yk in pairs:
        for entry in models.entries[yx]:
            tasks.append((entry, weather_by_year[yk], soil, yk, calendar, bounds))
            owners.append((yx, yk))
    results, errors = parallel_map(_evaluate_task, tasks, jobs=jobs)
    bad = [e for e in errors if e is not None]
    if bad:
        raise ValueError(f"{len(bad)} evaluation failures; first: {bad[0]}")

    clouds: dict[tuple[int, int], list[float]] = {pair: [] for pair in pairs}
    for pair, value in zip(owners, results):
        clouds[pair].append(value)
    matrix = PredictionMatrix({pair: sum(vals) / len(vals)
                               for pair, vals in clouds.items()})
    return matrix, clouds


def observed_from_entries(entries: dict[int, list[CalibrationEntry]]) -> dict[int, float]:
    """County-level measured yield per year (mean over that year's entries)."""
    return {year: sum(e.measured_yield for e in items) / len(items)
            for year, items in entries.items()}


STRATEGIES = ("all-previous", "previous-year", "mean", "quality")


def run_strategy(strategy: str, matrix: PredictionMatrix, y_i: int,
                 observed: dict[int, float] | None = None, seed: int = 0,
                 literal_q: bool = False) -> float:
    if strategy == "all-previous":
        return ensemble_all_previous(matrix, y_i, seed)
    if strategy == "previous-year":
        return ensemble_previous_year(matrix, y_i)
    if strategy == "mean":
        return ensemble_mean(matrix, y_i)
    if strategy == "quality":
        if observed is None:
            raise ValueError("quality strategy needs observed yields")
        return ensemble_quality(matrix, y_i, observed, literal_q=literal_q)
    raise ValueError(f"unknown strategy {strategy!r}; choose from {STRATEGIES}")
