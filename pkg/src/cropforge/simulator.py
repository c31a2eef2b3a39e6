"""Deterministic daily-step crop growth simulator.

The simulator takes management, daily weather, cultivar coefficients, and a
soil profile, and returns yield plus daily LAI and above-ground biomass
series. It is a deliberately small process-based model; the daily update is
fixed so results are bit-reproducible across runs and platforms.

Model description (all cultivar traits come from the 18-coefficient vector,
mapped affinely from [0, 1] onto the bounds table):

1. Phenology is driven by growing degree days, gdd = max(0, (tmax+tmin)/2 -
   base_temperature), accumulated from planting. Stage thresholds are
   cumulative: emergence at ``gdd_emergence``, flowering after a further
   ``gdd_vegetative``, grain fill after ``gdd_flowering`` more, and maturity
   once ``gdd_grain_fill`` has accumulated during fill.
2. Canopy: LAI starts at 0.05 on the day emergence is reached and grows
   logistically toward ``lai_max``:
   dLAI = lai_growth_rate * LAI * (1 - LAI/lai_max) * (gdd/100) * stress
          * min(1, srad), clamped to lai_max.
   From the first grain-fill day onward it senesces linearly in thermal time:
   dLAI = -senescence_rate * LAI_at_fill_start * gdd / gdd_grain_fill.
3. Intercepted PAR (MJ/m2) follows Beer's law with half of solar radiation
   photosynthetically active: ipar = 0.5 * srad * (1 - exp(-k * LAI)).
4. Biomass increment (kg/ha) between emergence and maturity:
   dB = 10 * rue * ipar * stress * ftemp * (1 - respiration_fraction), with
   ftemp = exp(-((tmean - 26)/temp_optimum_width)^2 / 2).
5. Water: a single 1 m bucket with capacity (0.05 + 0.001 * mean clay %) *
   1000 mm. Each day rain is added (excess runs off), transpiration demand is
   0.4 mm per MJ of intercepted PAR, supply is min(stored water,
   max_root_uptake), and stress = min(1, supply/max(demand, 1e-9)) **
   drought_sensitivity. The day's transpiration min(supply, demand) is
   removed after the stress factor is computed.
6. Yield = harvest_index * grain pool, where the grain pool accumulates
   dB * fill_efficiency on grain-fill days. Harvest before maturity simply
   truncates the accumulation.

``planting_offset``/``harvest_offset`` (coefficients 17 and 18) do not act
inside the daily loop; calibration and sampling use them to shift the
nominal calendar before calling :func:`simulate`.
"""

from __future__ import annotations

import datetime
import json
import math
from dataclasses import dataclass
from importlib import resources

from .formats import SoilProfile, WeatherSeries

N_COEFFICIENTS = 18

# Model constants (not calibrated).
TEMP_OPTIMUM_C = 26.0
LAI_AT_EMERGENCE = 0.05
PAR_FRACTION = 0.5
DEMAND_MM_PER_MJ = 0.4
BUCKET_DEPTH_MM = 1000.0
DEMAND_FLOOR_MM = 1e-9
THERMAL_UNIT_GDD = 100.0
RADIATION_GATE_MJ = 1.0
G_PER_M2_TO_KG_PER_HA = 10.0


@dataclass(frozen=True)
class CoefficientBound:
    name: str
    lo: float
    hi: float
    unit: str

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"bound {self.name}: lo {self.lo} must be < hi {self.hi}")


def default_bounds() -> list[CoefficientBound]:
    """The shared bounds table; calibration and sampling read the same file."""
    raw = resources.files("cropforge.data").joinpath("genetics_bounds.json").read_text()
    return bounds_from_json(raw)


def bounds_from_json(text: str) -> list[CoefficientBound]:
    doc = json.loads(text)
    bounds = [CoefficientBound(c["name"], float(c["lo"]), float(c["hi"]), c["unit"])
              for c in doc["coefficients"]]
    if len(bounds) != N_COEFFICIENTS:
        raise ValueError(f"expected {N_COEFFICIENTS} coefficient bounds, got {len(bounds)}")
    return bounds


@dataclass
class GeneticCoefficients:
    """Normalized coefficient vector plus the bounds that map it to physical units."""

    values: list[float]
    bounds: list[CoefficientBound]

    def __post_init__(self):
        if len(self.values) != len(self.bounds):
            raise ValueError(
                f"{len(self.values)} values for {len(self.bounds)} bounds")
        for i, v in enumerate(self.values):
            if not (math.isfinite(v) and 0.0 <= v <= 1.0):
                raise ValueError(f"coefficient [{i}] = {v!r} outside [0, 1]")


@dataclass(frozen=True)
class CultivarTraits:
    """Physical cultivar parameters (mapped from the normalized vector)."""

    gdd_vegetative: float
    gdd_flowering: float
    gdd_grain_fill: float
    base_temperature: float
    rue: float
    lai_max: float
    lai_growth_rate: float
    harvest_index: float
    extinction_coeff: float
    drought_sensitivity: float
    temp_optimum_width: float
    senescence_rate: float
    gdd_emergence: float
    max_root_uptake: float
    respiration_fraction: float
    fill_efficiency: float
    planting_offset: float
    harvest_offset: float


def map_coefficients(genetics: GeneticCoefficients) -> CultivarTraits:
    """physical_i = lo_i + value_i * (hi_i - lo_i)."""
    physical = []
    for v, b in zip(genetics.values, genetics.bounds):
        p = b.lo + v * (b.hi - b.lo)
        if not math.isfinite(p):
            raise ValueError(f"coefficient {b.name} maps to non-finite value")
        physical.append(p)
    return CultivarTraits(*physical)


@dataclass
class ManagementPlan:
    planting: tuple[int, int]  # (year, doy)
    harvest: tuple[int, int] | None = None  # None = harvest at maturity
    initial_soil_water_fraction: float = 0.5

    def __post_init__(self):
        if self.harvest is not None and self.harvest <= self.planting:
            raise ValueError(f"harvest {self.harvest} not after planting {self.planting}")
        if not 0.0 <= self.initial_soil_water_fraction <= 1.0:
            raise ValueError("initial_soil_water_fraction outside [0, 1]")


@dataclass
class SimulationOutput:
    yield_kg_ha: float
    lai_series: list[float]
    biomass_series: list[float]
    maturity_doy: int | None


def gdd_day(tmax: float, tmin: float, tbase: float) -> float:
    """Thermal time for one day: max(0, (tmax+tmin)/2 - tbase)."""
    if tmax < tmin:
        raise ValueError(f"tmax {tmax} < tmin {tmin}")
    return max(0.0, (tmax + tmin) / 2.0 - tbase)


def accumulate_gdd(series: WeatherSeries, tbase: float,
                   window: tuple[int, int]) -> list[float]:
    """Running GDD sum over records with start <= doy <= end (same season).

    The window must be gap-free inside the series; an empty window
    (end < start) gives [].
    """
    start, end = window
    if end < start:
        return []
    records = [r for r in series.records if start <= r.doy <= end]
    if not records:
        raise ValueError(f"window {window} not covered by series")
    if len(records) != end - start + 1 or records[0].doy != start:
        raise ValueError(f"gap in window {window}")
    out, total = [], 0.0
    for r in records:
        total += gdd_day(r.tmax, r.tmin, tbase)
        out.append(total)
    return out


def add_days(day: tuple[int, int], n: int) -> tuple[int, int]:
    """(year, doy) shifted by n calendar days."""
    year, doy = day
    d = datetime.date(year, 1, 1) + datetime.timedelta(days=doy - 1 + n)
    return d.year, d.timetuple().tm_yday


def simulate(plan: ManagementPlan, weather: WeatherSeries,
             genetics: GeneticCoefficients, soil: SoilProfile) -> SimulationOutput:
    """Run the daily model from planting to harvest (or maturity).

    Weather must cover the window without gaps; a missing day inside the
    window raises ValueError. With harvest=None the run stops at maturity,
    or at the end of the series if maturity is never reached.
    """
    t = map_coefficients(genetics)

    records = weather.records
    start = None
    for i, r in enumerate(records):
        key = (r.year, r.doy)
        if key == plan.planting:
            start = i
            break
        if key > plan.planting:
            break
    if start is None:
        raise ValueError(f"weather does not cover planting day {plan.planting}")

    gdd_to_flower = t.gdd_emergence + t.gdd_vegetative
    gdd_to_fill = gdd_to_flower + t.gdd_flowering
    gdd_to_maturity = gdd_to_fill + t.gdd_grain_fill

    capacity = (0.05 + 0.001 * soil.mean_clay()) * BUCKET_DEPTH_MM
    water = plan.initial_soil_water_fraction * capacity

    gdd_cum = 0.0
    lai = 0.0
    emerged = False
    biomass = 0.0
    grain_pool = 0.0
    lai_at_fill: float | None = None
    maturity_doy: int | None = None
    lai_series: list[float] = []
    biomass_series: list[float] = []

    expected = plan.planting
    i = start
    while True:
        if i >= len(records):
            if plan.harvest is not None:
                raise ValueError(f"weather does not cover harvest day {plan.harvest}")
            break  # maturity never reached; harvest at end of series
        r = records[i]
        key = (r.year, r.doy)
        if key != expected:
            raise ValueError(f"weather gap: expected day {expected}, found {key}")

        tmean = (r.tmax + r.tmin) / 2.0
        gdd_t = max(0.0, tmean - t.base_temperature)

        pre_emergence = gdd_cum < t.gdd_emergence
        filling = gdd_to_fill <= gdd_cum < gdd_to_maturity
        mature = gdd_cum >= gdd_to_maturity

        if not pre_emergence and not emerged:
            lai = LAI_AT_EMERGENCE
            emerged = True

        ipar = PAR_FRACTION * r.srad * (1.0 - math.exp(-t.extinction_coeff * lai))

        water = min(capacity, water + r.rain)
        demand = DEMAND_MM_PER_MJ * ipar
        supply = min(water, t.max_root_uptake)
        stress = min(1.0, supply / max(demand, DEMAND_FLOOR_MM)) ** t.drought_sensitivity
        water -= min(supply, demand)

        ftemp = math.exp(-0.5 * ((tmean - TEMP_OPTIMUM_C) / t.temp_optimum_width) ** 2)
        if not pre_emergence and not mature:
            db = (G_PER_M2_TO_KG_PER_HA * t.rue * ipar * stress * ftemp
                  * (1.0 - t.respiration_fraction))
        else:
            db = 0.0
        biomass += db
        if filling:
            grain_pool += db * t.fill_efficiency

        if filling or mature:
            if lai_at_fill is None:
                lai_at_fill = lai
            lai = max(0.0, lai - t.senescence_rate * lai_at_fill
                      * gdd_t / t.gdd_grain_fill)
        elif emerged:
            dlai = (t.lai_growth_rate * lai * (1.0 - lai / t.lai_max)
                    * (gdd_t / THERMAL_UNIT_GDD) * stress
                    * min(1.0, r.srad / RADIATION_GATE_MJ))
            lai = min(t.lai_max, lai + dlai)

        gdd_cum += gdd_t
        lai_series.append(lai)
        biomass_series.append(biomass)

        if maturity_doy is None and gdd_cum >= gdd_to_maturity:
            maturity_doy = r.doy
            if plan.harvest is None:
                break
        if plan.harvest is not None and key == plan.harvest:
            break
        expected = add_days(expected, 1)
        i += 1

    return SimulationOutput(
        yield_kg_ha=t.harvest_index * grain_pool,
        lai_series=lai_series,
        biomass_series=biomass_series,
        maturity_doy=maturity_doy,
    )
