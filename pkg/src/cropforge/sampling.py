"""Surrogate training substrate: Sobol samples over the 33-parameter space
(18 genetic + 15 weather), coherent daily weather synthesized from sampled
seasonal aggregates, and one simulator labeling per sample.

The 15 weather parameters are 5 aggregates (mean TMAX, mean TMIN, mean SRAD,
rain depth on wet days, rain probability) for each of 3 equal sub-periods of
the season, every one sampled inside +/-15% of its base value. Daily values
are drawn from normals centered on the sampled aggregate (sigma = 10% of the
mean; 30% for rain depth), rain occurrence is a uniform draw against the
sampled probability, and a post-draw repair enforces tmax >= tmin + 0.5 and
srad >= 0.1. All values are quantized to the weather-file resolution (0.1)
so synthesized series round-trip exactly through the file format.
"""

from __future__ import annotations

import functools
import json
import math
from dataclasses import dataclass, field

import numpy as np

from ._parallel import parallel_map
from .formats import SoilProfile, WeatherRecord, WeatherSeries
from .simulator import (
    CoefficientBound,
    GeneticCoefficients,
    ManagementPlan,
    add_days,
    bounds_from_json,
    default_bounds,
    map_coefficients,
    simulate,
)
from .sobol import SobolSequence

N_GENETIC = 18
N_WEATHER = 15
DIMENSION = N_GENETIC + N_WEATHER
N_PERIODS = 3
AGGREGATES = ("tmax_mean", "tmin_mean", "srad_mean", "rain_depth", "rain_prob")

WEATHER_RELATIVE_RANGE = 0.15
TEMP_SRAD_DAILY_SIGMA = 0.10
RAIN_DAILY_SIGMA = 0.30
MIN_SEASON_DAYS = 90
MAX_SEASON_DAYS = 240

DEFAULT_SEASON = (121, 183)
DEFAULT_YEAR = 2001
DEFAULT_WEATHER_BASES = {
    "tmax_mean": 28.0,  # deg C
    "tmin_mean": 16.0,  # deg C
    "srad_mean": 20.0,  # MJ/m2/day
    "rain_depth": 10.0,  # mm on wet days
    "rain_prob": 0.35,
}

_MASK64 = (1 << 64) - 1


def _mix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x ^= x >> 30
    x = (x * 0xBF58476D1CE4E5B9) & _MASK64
    x ^= x >> 27
    x = (x * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def row_seed(base_seed: int, index: int) -> int:
    return _mix64((base_seed & _MASK64) ^ _mix64(index & _MASK64))


@dataclass(frozen=True)
class WeatherParam:
    name: str
    base: float
    lo: float
    hi: float

    def __post_init__(self):
        if not (math.isfinite(self.base) and self.lo < self.hi):
            raise ValueError(f"weather parameter {self.name}: bad range")


@dataclass
class ParameterSpace:
    """33 sampled dimensions: the genetic bounds table then the weather grid."""

    genetic_bounds: list[CoefficientBound]
    weather_params: list[WeatherParam]

    def __post_init__(self):
        if len(self.genetic_bounds) != N_GENETIC:
            raise ValueError(f"expected {N_GENETIC} genetic bounds")
        if len(self.weather_params) != N_WEATHER:
            raise ValueError(f"expected {N_WEATHER} weather parameters")

    @property
    def names(self) -> list[str]:
        return [b.name for b in self.genetic_bounds] + [w.name for w in self.weather_params]

    def ranges(self) -> np.ndarray:
        """(33, 2) array of physical lo/hi per dimension."""
        rows = [(b.lo, b.hi) for b in self.genetic_bounds]
        rows += [(w.lo, w.hi) for w in self.weather_params]
        return np.asarray(rows, dtype=float)


def default_parameter_space(bounds: list[CoefficientBound] | None = None,
                            weather_bases: dict[str, float] | None = None) -> ParameterSpace:
    bounds = bounds or default_bounds()
    bases = dict(DEFAULT_WEATHER_BASES)
    if weather_bases:
        bases.update(weather_bases)
    params = []
    for period in range(1, N_PERIODS + 1):
        for aggregate in AGGREGATES:
            base = bases[aggregate]
            delta = WEATHER_RELATIVE_RANGE * abs(base)
            params.append(WeatherParam(f"p{period}_{aggregate}", base,
                                       base - delta, base + delta))
    return ParameterSpace(genetic_bounds=bounds, weather_params=params)


def space_to_json(space: ParameterSpace) -> str:
    doc = {
        "genetic_bounds": [
            {"name": b.name, "lo": b.lo, "hi": b.hi, "unit": b.unit}
            for b in space.genetic_bounds
        ],
        "weather_params": [
            {"name": w.name, "base": w.base, "lo": w.lo, "hi": w.hi}
            for w in space.weather_params
        ],
    }
    return json.dumps(doc, indent=2) + "\n"


def space_from_json(text: str) -> ParameterSpace:
    doc = json.loads(text)
    bounds = bounds_from_json(json.dumps({"coefficients": doc["genetic_bounds"]}))
    params = [WeatherParam(w["name"], float(w["base"]), float(w["lo"]), float(w["hi"]))
              for w in doc["weather_params"]]
    return ParameterSpace(genetic_bounds=bounds, weather_params=params)


def sample_parameters(space: ParameterSpace, seq: SobolSequence) -> np.ndarray:
    """Next Sobol point mapped affinely onto the physical ranges."""
    if seq.dimension != DIMENSION:
        raise ValueError(f"sequence dimension {seq.dimension} != {DIMENSION}")
    u = seq.next_point()
    r = space.ranges()
    return r[:, 0] + u * (r[:, 1] - r[:, 0])


def synthesize_daily_weather(params, season: tuple[int, int], seed: int,
                             year: int = DEFAULT_YEAR) -> WeatherSeries:
    """Seeded daily series from the 15 weather aggregates.

    ``params`` is ordered period-major: (tmax, tmin, srad, rain depth, rain
    probability) for each of the 3 sub-periods.
    """
    params = np.asarray(params, dtype=float)
    if params.shape != (N_WEATHER,):
        raise ValueError(f"expected {N_WEATHER} weather parameters")
    if not np.isfinite(params).all():
        raise ValueError("non-finite weather parameter")
    start_doy, length = season
    if not MIN_SEASON_DAYS <= length <= MAX_SEASON_DAYS:
        raise ValueError(f"season length {length} outside "
                         f"{MIN_SEASON_DAYS}..{MAX_SEASON_DAYS}")
    rng = np.random.Generator(np.random.PCG64(seed))
    grid = params.reshape(N_PERIODS, len(AGGREGATES))
    records = []
    day = (year, start_doy)
    for k in range(length):
        tmax_m, tmin_m, srad_m, depth_m, prob = grid[min(N_PERIODS - 1,
                                                         k * N_PERIODS // length)]
        tmin = rng.normal(tmin_m, TEMP_SRAD_DAILY_SIGMA * abs(tmin_m))
        tmax = rng.normal(tmax_m, TEMP_SRAD_DAILY_SIGMA * abs(tmax_m))
        srad = rng.normal(srad_m, TEMP_SRAD_DAILY_SIGMA * abs(srad_m))
        rain = 0.0
        if rng.uniform() < min(1.0, max(0.0, prob)):
            rain = max(0.0, rng.normal(depth_m, RAIN_DAILY_SIGMA * abs(depth_m)))
        tmax = max(tmax, tmin + 0.5)
        srad = max(srad, 0.1)
        records.append(WeatherRecord(day[0], day[1], round(srad, 1),
                                     round(tmax, 1), round(tmin, 1), round(rain, 1)))
        day = add_days(day, 1)
    return WeatherSeries(records=records, station_id=f"synth-{seed & 0xffffffff:08x}")


@dataclass
class SurrogateDataset:
    """Sobol-sampled feature rows (physical units) with simulated yields."""

    features: np.ndarray  # (N, 33)
    yields: np.ndarray  # (N,)
    failures: list[tuple[int, str]] = field(default_factory=list)

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        self.yields = np.asarray(self.yields, dtype=float)
        if self.features.ndim != 2 or self.features.shape[1] != DIMENSION:
            raise ValueError(f"features must be (N, {DIMENSION})")
        if self.yields.shape != (self.features.shape[0],):
            raise ValueError("yields must align with features")
        if self.features.size and not (np.isfinite(self.features).all()
                                       and np.isfinite(self.yields).all()):
            raise ValueError("non-finite dataset entries")


def _label_row(args):
    (index, genetic_values, weather_params, season, seed, year, soil, bounds) = args
    weather = synthesize_daily_weather(weather_params, season, seed, year)
    genetics = GeneticCoefficients(list(genetic_values), bounds)
    traits = map_coefficients(genetics)
    start_doy, length = season
    planting = add_days((year, start_doy), 15 + round(traits.planting_offset))
    harvest = add_days((year, start_doy), length - 16 + round(traits.harvest_offset))
    plan = ManagementPlan(planting=planting, harvest=harvest)
    return simulate(plan, weather, genetics, soil).yield_kg_ha


MAX_FAILURE_FRACTION = 0.05


def generate_dataset(space: ParameterSpace, n: int, season: tuple[int, int],
                     seed: int, soil: SoilProfile, jobs: int = 1,
                     year: int = DEFAULT_YEAR, progress=None) -> SurrogateDataset:
    """n Sobol points, n synthesized seasons, n simulate calls.

    Rows are ordered by Sobol index. A failed simulation drops its row and
    is reported in ``failures``; more than 5% failures aborts.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    seq = SobolSequence(DIMENSION)
    r = space.ranges()
    lo, span = r[:, 0], r[:, 1] - r[:, 0]
    points = seq.take(n)
    features = lo + points * span

    tasks = []
    for i in range(n):
        # genetic coordinates are already normalized [0,1) by construction
        tasks.append((i, points[i, :N_GENETIC], features[i, N_GENETIC:],
                      season, row_seed(seed, i), year, soil, space.genetic_bounds))
    results, errors = parallel_map(_label_row, tasks, jobs=jobs, progress=progress)

    failures = [(i, err) for i, err in enumerate(errors) if err is not None]
    if len(failures) > MAX_FAILURE_FRACTION * n:
        raise ValueError(f"{len(failures)}/{n} rows failed "
                         f"(> {MAX_FAILURE_FRACTION:.0%}); first: {failures[0][1]}")
    keep = [i for i in range(n) if errors[i] is None]
    return SurrogateDataset(
        features=features[keep],
        yields=np.array([results[i] for i in keep], dtype=float),
        failures=failures,
    )
