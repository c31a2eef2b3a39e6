"""Inversion of genetic coefficients from measured yields.

Each field is an independent PSO run over the normalized coefficient box;
the per-field RNG seed is derived from (year, lat, lon, base seed) so a
distributed batch is reproducible regardless of worker count or completion
order. Planting and harvest dates are owned by the calibrator: coefficients
17 and 18 shift a nominal regional calendar by up to +/-15 days.
"""

from __future__ import annotations

import dataclasses
import functools
import math
from dataclasses import dataclass

from ._parallel import parallel_map
from .formats import CalibrationDB, CalibrationEntry, SoilProfile, WeatherSeries, YieldRecord
from .pso import PsoConfig, pso_minimize
from .simulator import (
    CoefficientBound,
    GeneticCoefficients,
    ManagementPlan,
    add_days,
    default_bounds,
    map_coefficients,
    simulate,
)

_MASK64 = (1 << 64) - 1


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x ^= x >> 30
    x = (x * 0xBF58476D1CE4E5B9) & _MASK64
    x ^= x >> 27
    x = (x * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def field_seed(base_seed: int, year: int, lat: float, lon: float) -> int:
    """Stable 64-bit per-field seed from (year, lat, lon, base seed)."""
    h = base_seed & _MASK64
    for v in (year, round(lat * 1e4), round(lon * 1e4)):
        h = _splitmix64((h ^ (v & _MASK64)) & _MASK64)
    return h


@dataclass
class CostWeights:
    alpha: float = 1.0  # yield-importance weight
    beta: float = 0.0  # LAI-importance weight; off by default

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0 or self.alpha + self.beta <= 0:
            raise ValueError("need alpha >= 0, beta >= 0, alpha + beta > 0")


@dataclass
class FieldObservation:
    record: YieldRecord
    weather: WeatherSeries
    soil: SoilProfile
    lai_reference: list[float] | None = None


@dataclass
class CalendarSpec:
    """Nominal regional calendar the date-offset coefficients act on."""

    planting_doy: int = 121
    season_days: int = 160
    initial_soil_water_fraction: float = 0.5


def calibration_cost(sim_yield: float, measured_yield: float,
                     lai_rmse: float | None, mean_lai: float | None,
                     weights: CostWeights) -> float:
    """alpha * |Ysim - Ymeas| / Ymeas + beta * RMSE_LAI / mean_LAI."""
    if measured_yield <= 0:
        raise ValueError("measured yield must be > 0")
    cost = weights.alpha * abs(sim_yield - measured_yield) / measured_yield
    if weights.beta > 0:
        if lai_rmse is None or mean_lai is None:
            raise ValueError("beta > 0 requires an LAI reference")
        if mean_lai <= 0:
            raise ValueError("beta > 0 requires mean LAI > 0")
        cost += weights.beta * lai_rmse / mean_lai
    return cost


def _lai_rmse(sim_lai: list[float], reference: list[float]) -> float:
    n = min(len(sim_lai), len(reference))
    if n == 0:
        raise ValueError("empty LAI overlap")
    return math.sqrt(sum((sim_lai[k] - reference[k]) ** 2 for k in range(n)) / n)


def season_plan(traits, year: int, calendar: CalendarSpec) -> ManagementPlan:
    """Nominal calendar shifted by the (rounded) date-offset coefficients."""
    planting = add_days((year, calendar.planting_doy), round(traits.planting_offset))
    harvest = add_days((year, calendar.planting_doy),
                       calendar.season_days + round(traits.harvest_offset))
    return ManagementPlan(planting=planting, harvest=harvest,
                          initial_soil_water_fraction=calendar.initial_soil_water_fraction)


def _check_weather_window(obs: FieldObservation, calendar: CalendarSpec,
                          bounds: list[CoefficientBound]) -> None:
    # Any offset in bounds must stay inside the covered window.
    year = obs.record.year
    lo = add_days((year, calendar.planting_doy), round(bounds[16].lo))
    hi = add_days((year, calendar.planting_doy),
                  calendar.season_days + round(bounds[17].hi))
    keys = [(r.year, r.doy) for r in obs.weather.records]
    if lo not in keys or hi not in keys:
        raise ValueError(
            f"weather must cover {lo}..{hi} for year {year} (offsets included)")


def calibrate_field(obs: FieldObservation, weights: CostWeights, pso: PsoConfig,
                    calendar: CalendarSpec | None = None,
                    bounds: list[CoefficientBound] | None = None) -> CalibrationEntry:
    """Invert the coefficient vector that best reproduces the measured yield."""
    calendar = calendar or CalendarSpec()
    bounds = bounds or default_bounds()
    record = obs.record
    if record.yield_kg_ha <= 0:
        raise ValueError("measured yield must be > 0")
    if weights.beta > 0 and obs.lai_reference is None:
        raise ValueError("beta > 0 requires an LAI reference series")
    _check_weather_window(obs, calendar, bounds)

    mean_lai = None
    if obs.lai_reference is not None:
        mean_lai = sum(obs.lai_reference) / len(obs.lai_reference)

    def objective(values):
        genetics = GeneticCoefficients(list(values), bounds)
        traits = map_coefficients(genetics)
        plan = season_plan(traits, record.year, calendar)
        out = simulate(plan, obs.weather, genetics, obs.soil)
        rmse = None
        if weights.beta > 0:
            rmse = _lai_rmse(out.lai_series, obs.lai_reference)
        return calibration_cost(out.yield_kg_ha, record.yield_kg_ha,
                                rmse, mean_lai, weights)

    config = dataclasses.replace(
        pso, seed=field_seed(pso.seed, record.year, record.lat, record.lon))
    result = pso_minimize(objective, len(bounds), config)
    return CalibrationEntry(
        calibration_values=[float(v) for v in result.best_position],
        calibration_cost=float(result.best_cost),
        latitude=record.lat,
        longitude=record.lon,
        measured_yield=record.yield_kg_ha,
    )


@dataclass
class BatchResult:
    db: CalibrationDB
    failures: list[tuple[YieldRecord, str]]


def _field_task(obs, weights, pso, calendar, bounds):
    return calibrate_field(obs, weights, pso, calendar, bounds)


def calibrate_batch(observations: list[FieldObservation], weights: CostWeights,
                    pso: PsoConfig, parallelism: int = 1,
                    calendar: CalendarSpec | None = None,
                    progress=None) -> BatchResult:
    """Calibrate every field on a worker pool and group results by county/year.

    Fields fail independently; the batch raises only when every field fails.
    Output is invariant under worker count: per-field seeds are derived from
    the field identity and results are merged in input order.
    """
    if not observations:
        raise ValueError("no observations to calibrate")
    calendar = calendar or CalendarSpec()
    bounds = default_bounds()
    task = functools.partial(_field_task, weights=weights, pso=pso,
                             calendar=calendar, bounds=bounds)
    results, errors = parallel_map(task, observations, jobs=parallelism,
                                   progress=progress)
    db: CalibrationDB = {}
    failures = []
    for obs, entry, err in zip(observations, results, errors):
        if err is not None:
            failures.append((obs.record, err))
            continue
        db.setdefault(obs.record.county, {}).setdefault(obs.record.year, []).append(entry)
    if not db:
        raise ValueError(f"all {len(observations)} fields failed; first: {failures[0][1]}")
    return BatchResult(db=db, failures=failures)
