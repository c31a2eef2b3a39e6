"""On-disk formats: daily weather files, soil profiles, yield tables,
calibration databases, and surrogate dataset CSVs.

All parsers take decoded text and raise :class:`FormatError` (with a line or
row reference where applicable) on malformed input; writers emit canonical
bytes so that writing the same value twice is byte-identical and a
parse -> write cycle on a canonical file reproduces it exactly.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

WEATHER_HEADER = "DATE SRAD TMAX TMIN RAIN"

# Canonical SoilGrids layer depths (cm) and per-layer feature names.
SOIL_DEPTHS_CM = (0, 5, 15, 30, 60, 100, 200)
SOIL_FEATURES = (
    "clay",
    "silt",
    "sand",
    "bulk_density",
    "coarse_fragments",
    "cec",
    "organic_carbon",
    "ph_h2o",
    "ph_kcl",
)

YIELD_COLUMNS = ("year", "lat", "lon", "fips", "yield", "state", "county")

DATASET_DIM = 33


class FormatError(ValueError):
    """Malformed on-disk data; message carries the offending location."""


def _finite(x: float) -> bool:
    return math.isfinite(x)


@dataclass(frozen=True)
class WeatherRecord:
    """One day of weather forcing."""

    year: int
    doy: int
    srad: float  # solar radiation, MJ/m2/day
    tmax: float  # deg C
    tmin: float  # deg C
    rain: float  # mm/day

    def __post_init__(self):
        if not 1 <= self.doy <= 366:
            raise ValueError(f"day-of-year {self.doy} outside 1..366")
        if self.tmax < self.tmin:
            raise ValueError(f"tmax < tmin at {self.date_token()}")
        if self.srad < 0 or self.rain < 0:
            raise ValueError(f"negative srad/rain at {self.date_token()}")
        for v in (self.srad, self.tmax, self.tmin, self.rain):
            if not _finite(v):
                raise ValueError(f"non-finite value at {self.date_token()}")

    def date_token(self) -> str:
        """YYDDD token used in weather files."""
        return f"{self.year % 100:02d}{self.doy:03d}"


@dataclass
class WeatherSeries:
    """Daily records strictly increasing by (year, doy)."""

    records: list[WeatherRecord] = field(default_factory=list)
    station_id: str = ""


@dataclass(frozen=True)
class SoilLayer:
    depth_cm: int
    clay: float
    silt: float
    sand: float
    bulk_density: float
    coarse_fragments: float
    cec: float
    organic_carbon: float
    ph_h2o: float
    ph_kcl: float

    def __post_init__(self):
        total = self.clay + self.silt + self.sand
        if not 99.0 <= total <= 101.0:
            raise ValueError(f"layer {self.depth_cm}: texture sums to {total:g}")
        for name in SOIL_FEATURES:
            v = getattr(self, name)
            if not _finite(v) or v < 0:
                raise ValueError(f"layer {self.depth_cm}: bad {name} value {v!r}")
        for name in ("ph_h2o", "ph_kcl"):
            v = getattr(self, name)
            if not 0.0 <= v <= 14.0:
                raise ValueError(f"layer {self.depth_cm}: {name} {v:g} outside 0..14")


@dataclass
class SoilProfile:
    """Exactly 7 layers at the canonical SoilGrids depths."""

    layers: list[SoilLayer]

    def __post_init__(self):
        if len(self.layers) != 7:
            raise ValueError(f"expected 7 layers, got {len(self.layers)}")
        depths = tuple(layer.depth_cm for layer in self.layers)
        if depths != SOIL_DEPTHS_CM:
            raise ValueError(f"layer depths {depths} != {SOIL_DEPTHS_CM}")

    def mean_clay(self) -> float:
        return sum(layer.clay for layer in self.layers) / 7.0


@dataclass(frozen=True)
class YieldRecord:
    year: int
    lat: float
    lon: float
    fips: int
    yield_kg_ha: float
    state: str
    county: str

    def __post_init__(self):
        if not -90.0 <= self.lat <= 90.0:
            raise ValueError(f"latitude {self.lat} outside -90..90")
        if not -180.0 <= self.lon <= 180.0:
            raise ValueError(f"longitude {self.lon} outside -180..180")
        if not self.yield_kg_ha > 0:
            raise ValueError(f"yield {self.yield_kg_ha} must be > 0")


@dataclass
class CalibrationEntry:
    """One calibrated field: normalized coefficients plus the fit context."""

    calibration_values: list[float]
    calibration_cost: float
    latitude: float
    longitude: float
    measured_yield: float

    def __post_init__(self):
        for i, v in enumerate(self.calibration_values):
            if not (_finite(v) and 0.0 <= v <= 1.0):
                raise ValueError(f"calibration value [{i}] = {v!r} outside [0, 1]")
        if not (_finite(self.calibration_cost) and self.calibration_cost >= 0):
            raise ValueError(f"calibration cost {self.calibration_cost!r} must be >= 0")


# county -> year -> calibrated fields
CalibrationDB = dict[str, dict[int, list[CalibrationEntry]]]


# ---------------------------------------------------------------------------
# Weather files: whitespace-separated, header DATE SRAD TMAX TMIN RAIN,
# DATE as YYDDD. Two-digit years >= 70 mean 19xx, else 20xx. Trailing extra
# columns are accepted and ignored.
# ---------------------------------------------------------------------------


def parse_weather(text: str, station_id: str = "") -> WeatherSeries:
    lines = text.splitlines()
    header_seen = False
    records: list[WeatherRecord] = []
    prev_key: tuple[int, int] | None = None
    for lineno, raw in enumerate(lines, start=1):
        tokens = raw.split()
        if not tokens:
            continue
        if not header_seen:
            if tokens[: len(WEATHER_HEADER.split())] != WEATHER_HEADER.split():
                raise FormatError(
                    f"line {lineno}: expected header '{WEATHER_HEADER}', got {raw.strip()!r}"
                )
            header_seen = True
            continue
        if len(tokens) < 5:
            raise FormatError(f"line {lineno}: expected 5 columns, got {len(tokens)}")
        date = tokens[0]
        if len(date) != 5 or not date.isdigit():
            raise FormatError(f"line {lineno}: bad DATE token {date!r}")
        yy, doy = int(date[:2]), int(date[2:])
        year = 1900 + yy if yy >= 70 else 2000 + yy
        values = []
        for token in tokens[1:5]:
            try:
                values.append(float(token))
            except ValueError:
                raise FormatError(f"line {lineno}: bad numeric token {token!r}") from None
        try:
            record = WeatherRecord(year, doy, *values)
        except ValueError as exc:
            raise FormatError(f"line {lineno}: {exc}") from None
        key = (record.year, record.doy)
        if prev_key is not None and key <= prev_key:
            raise FormatError(f"line {lineno}: date {date} not increasing")
        prev_key = key
        records.append(record)
    if not header_seen:
        raise FormatError(f"missing header '{WEATHER_HEADER}'")
    return WeatherSeries(records=records, station_id=station_id)


def write_weather(series: WeatherSeries) -> str:
    """Canonical emission: fixed-width columns, one decimal place."""
    out = [WEATHER_HEADER]
    for r in series.records:
        if not 1970 <= r.year <= 2069:
            raise ValueError(f"year {r.year} not representable as YYDDD")
        out.append(f"{r.date_token()}{r.srad:6.1f}{r.tmax:6.1f}{r.tmin:6.1f}{r.rain:6.1f}")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# Yield tables: CSV with header year,lat,lon,fips,yield,state,county.
# ---------------------------------------------------------------------------


def parse_yield_records(text: str) -> list[YieldRecord]:
    try:
        rows = [row for row in csv.reader(io.StringIO(text)) if row]
    except csv.Error as exc:
        raise FormatError(f"bad CSV: {exc}") from None
    if not rows:
        raise FormatError("empty yield table (missing header)")
    if tuple(c.strip() for c in rows[0]) != YIELD_COLUMNS:
        raise FormatError(f"row 1: expected header {','.join(YIELD_COLUMNS)}")
    records = []
    for rownum, row in enumerate(rows[1:], start=2):
        if len(row) != 7:
            raise FormatError(f"row {rownum}: expected 7 fields, got {len(row)}")
        try:
            record = YieldRecord(
                year=int(row[0]),
                lat=float(row[1]),
                lon=float(row[2]),
                fips=int(row[3]),
                yield_kg_ha=float(row[4]),
                state=row[5],
                county=row[6],
            )
        except ValueError as exc:
            raise FormatError(f"row {rownum}: {exc}") from None
        records.append(record)
    return records


def write_yield_records(records: list[YieldRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(YIELD_COLUMNS)
    for r in records:
        writer.writerow([r.year, r.lat, r.lon, r.fips, r.yield_kg_ha, r.state, r.county])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# Calibration database: JSON, county -> year -> list of calibrated fields.
# ---------------------------------------------------------------------------


def read_calibration_db(text: str) -> CalibrationDB:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise FormatError("calibration DB must be a JSON object")
    db: CalibrationDB = {}
    for county, years in doc.items():
        if not isinstance(years, dict) or not years:
            raise FormatError(f"county {county!r}: expected a non-empty year map")
        db[county] = {}
        for year_key, entries in years.items():
            if not (isinstance(year_key, str) and len(year_key) == 4 and year_key.isdigit()):
                raise FormatError(f"county {county!r}: bad year key {year_key!r}")
            year = int(year_key)
            if not isinstance(entries, list) or not entries:
                raise FormatError(f"{county}/{year}: expected a non-empty entry list")
            parsed = []
            for obj in entries:
                parsed.append(_entry_from_json(obj, county, year))
            db[county][year] = parsed
    return db


def _entry_from_json(obj, county: str, year: int) -> CalibrationEntry:
    where = f"{county}/{year}"
    if not isinstance(obj, dict):
        raise FormatError(f"{where}: entry must be an object")
    try:
        values = obj["calibration_values"]
        cost = obj["calibration_cost"]
        loc = obj["location"]
        lat, lon = loc["latitude"], loc["longitude"]
        measured = loc["measured_yield"]
    except (KeyError, TypeError) as exc:
        raise FormatError(f"{where}: missing field {exc}") from None
    if not isinstance(values, list):
        raise FormatError(f"{where}: calibration_values must be a list")
    for i, v in enumerate(values):
        if not isinstance(v, (int, float)) or not (0.0 <= float(v) <= 1.0):
            raise FormatError(f"{where}: calibration_values[{i}] = {v!r} outside [0, 1]")
    try:
        return CalibrationEntry(
            calibration_values=[float(v) for v in values],
            calibration_cost=float(cost),
            latitude=float(lat),
            longitude=float(lon),
            measured_yield=float(measured),
        )
    except (TypeError, ValueError) as exc:
        raise FormatError(f"{where}: {exc}") from None


def write_calibration_db(db: CalibrationDB) -> str:
    """Counties and years emitted in sorted order for byte-determinism."""
    doc = {}
    for county in sorted(db):
        doc[county] = {}
        for year in sorted(db[county]):
            doc[county][str(year)] = [
                {
                    "calibration_values": e.calibration_values,
                    "calibration_cost": e.calibration_cost,
                    "location": {
                        "latitude": e.latitude,
                        "longitude": e.longitude,
                        "measured_yield": e.measured_yield,
                    },
                }
                for e in db[county][year]
            ]
    return json.dumps(doc, indent=2) + "\n"


# ---------------------------------------------------------------------------
# Soil profiles: JSON keyed by layer depth in cm.
# ---------------------------------------------------------------------------


def read_soil(text: str) -> SoilProfile:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise FormatError("soil profile must be a JSON object keyed by depth")
    if len(doc) != 7:
        raise FormatError(f"expected 7 layers, got {len(doc)}")
    layers = []
    for depth in SOIL_DEPTHS_CM:
        key = str(depth)
        if key not in doc:
            raise FormatError(f"missing layer at depth {depth} cm")
        obj = doc[key]
        if not isinstance(obj, dict):
            raise FormatError(f"layer {depth}: must be an object")
        kwargs = {}
        for name in SOIL_FEATURES:
            if name not in obj:
                raise FormatError(f"layer {depth}: missing {name}")
            v = obj[name]
            if not isinstance(v, (int, float)):
                raise FormatError(f"layer {depth}: {name} is not numeric")
            kwargs[name] = float(v)
        try:
            layers.append(SoilLayer(depth_cm=depth, **kwargs))
        except ValueError as exc:
            raise FormatError(str(exc)) from None
    try:
        return SoilProfile(layers=layers)
    except ValueError as exc:
        raise FormatError(str(exc)) from None


def write_soil(profile: SoilProfile) -> str:
    doc = {
        str(layer.depth_cm): {name: getattr(layer, name) for name in SOIL_FEATURES}
        for layer in profile.layers
    }
    return json.dumps(doc, indent=2) + "\n"


# ---------------------------------------------------------------------------
# Surrogate dataset: CSV with feature columns x00..x32 plus yield.
# ---------------------------------------------------------------------------

DATASET_COLUMNS = tuple(f"x{i:02d}" for i in range(DATASET_DIM)) + ("yield",)


def read_dataset_csv(text: str) -> tuple[np.ndarray, np.ndarray]:
    """Returns (features (N, 33), yields (N,)); raises FormatError on bad rows."""
    try:
        rows = [row for row in csv.reader(io.StringIO(text)) if row]
    except csv.Error as exc:
        raise FormatError(f"bad CSV: {exc}") from None
    if not rows or tuple(rows[0]) != DATASET_COLUMNS:
        raise FormatError(f"expected header {','.join(DATASET_COLUMNS[:2])},...,yield")
    features, yields = [], []
    for rownum, row in enumerate(rows[1:], start=2):
        if len(row) != DATASET_DIM + 1:
            raise FormatError(f"row {rownum}: expected {DATASET_DIM + 1} fields")
        try:
            values = [float(tok) for tok in row]
        except ValueError as exc:
            raise FormatError(f"row {rownum}: {exc}") from None
        if not all(_finite(v) for v in values):
            raise FormatError(f"row {rownum}: non-finite value")
        features.append(values[:-1])
        yields.append(values[-1])
    return (
        np.asarray(features, dtype=float).reshape(len(yields), DATASET_DIM),
        np.asarray(yields, dtype=float),
    )


def write_dataset_csv(features: np.ndarray, yields: np.ndarray) -> str:
    features = np.asarray(features, dtype=float)
    yields = np.asarray(yields, dtype=float)
    if features.ndim != 2 or features.shape[1] != DATASET_DIM:
        raise ValueError(f"features must be (N, {DATASET_DIM}), got {features.shape}")
    if yields.shape != (features.shape[0],):
        raise ValueError("yields length must match features")
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(DATASET_COLUMNS)
    for row, y in zip(features, yields):
        writer.writerow([repr(float(v)) for v in row] + [repr(float(y))])
    return buf.getvalue()
