import json
import math

import numpy as np
import pytest

from cropforge import formats
from cropforge.formats import (
    CalibrationEntry,
    FormatError,
    SoilLayer,
    SoilProfile,
    WeatherRecord,
    WeatherSeries,
    YieldRecord,
)
from tests.conftest import FIXTURES


class TestParseWeather:
    def test_sample_line(self):
        series = formats.parse_weather(
            "DATE SRAD TMAX TMIN RAIN\n09001 1.1 25.0 18.5 20.7\n"
        )
        (r,) = series.records
        assert r == WeatherRecord(2009, 1, 1.1, 25.0, 18.5, 20.7)

    def test_header_only(self):
        series = formats.parse_weather("DATE SRAD TMAX TMIN RAIN\n")
        assert series.records == []

    def test_tmax_below_tmin(self):
        # Values adapted from the sample file's defective trailing rows.
        with pytest.raises(FormatError, match="tmax < tmin at 09366"):
            formats.parse_weather(
                "DATE SRAD TMAX TMIN RAIN\n09366 8.8 12.4 21.2 18.4\n"
            )

    def test_century_pivot(self):
        series = formats.parse_weather(
            "DATE SRAD TMAX TMIN RAIN\n70001 1.0 20.0 10.0 0.0\n"
        )
        assert series.records[0].year == 1970
        series = formats.parse_weather(
            "DATE SRAD TMAX TMIN RAIN\n69365 1.0 20.0 10.0 0.0\n"
        )
        assert series.records[0].year == 2069

    def test_malformed_token_reports_line(self):
        with pytest.raises(FormatError, match="line 3.*'x'"):
            formats.parse_weather(
                "DATE SRAD TMAX TMIN RAIN\n"
                "09001 1.1 25.0 18.5 20.7\n"
                "09002 x 25.0 18.5 20.7\n"
            )

    def test_short_line_reports_line(self):
        with pytest.raises(FormatError, match="line 2"):
            formats.parse_weather("DATE SRAD TMAX TMIN RAIN\n09001 1.1 25.0\n")

    def test_extra_trailing_columns_ignored(self):
        series = formats.parse_weather(
            "DATE SRAD TMAX TMIN RAIN WIND\n09001 1.1 25.0 18.5 20.7 3.2\n"
        )
        assert series.records[0].rain == 20.7

    def test_missing_header(self):
        with pytest.raises(FormatError, match="header"):
            formats.parse_weather("09001 1.1 25.0 18.5 20.7\n")

    def test_non_increasing_dates(self):
        with pytest.raises(FormatError, match="not increasing"):
            formats.parse_weather(
                "DATE SRAD TMAX TMIN RAIN\n"
                "09002 1.1 25.0 18.5 20.7\n"
                "09001 1.1 25.0 18.5 20.7\n"
            )


class TestWriteWeather:
    def test_canonical_line(self):
        series = WeatherSeries([WeatherRecord(2009, 1, 1.1, 25.0, 18.5, 20.7)])
        text = formats.write_weather(series)
        assert text.splitlines()[1] == "09001   1.1  25.0  18.5  20.7"

    def test_empty_series_is_header_only(self):
        assert formats.write_weather(WeatherSeries([])) == "DATE SRAD TMAX TMIN RAIN\n"

    def test_sample_file_roundtrip_bytes(self):
        text = (FIXTURES / "sample_2009.wth").read_text()
        assert formats.write_weather(formats.parse_weather(text)) == text

    def test_parse_write_parse_field_equality(self):
        rng = np.random.default_rng(7)
        records = []
        for d in range(1, 200):
            tmin = round(float(rng.uniform(-5, 20)), 1)
            tmax = round(tmin + float(rng.uniform(0.5, 15)), 1)
            records.append(
                WeatherRecord(2011, d, round(float(rng.uniform(0, 30)), 1),
                              tmax, tmin, round(float(rng.uniform(0, 40)), 1))
            )
        series = WeatherSeries(records)
        text = formats.write_weather(series)
        assert formats.parse_weather(text).records == records
        assert formats.write_weather(formats.parse_weather(text)) == text

    def test_unrepresentable_year(self):
        series = WeatherSeries([WeatherRecord(2070, 1, 1.0, 20.0, 10.0, 0.0)])
        with pytest.raises(ValueError, match="2070"):
            formats.write_weather(series)


class TestYieldRecords:
    HEADER = "year,lat,lon,fips,yield,state,county\n"

    def test_sample_row(self):
        rows = formats.parse_yield_records(
            self.HEADER + "2013,40.106,-90.000,17017,3537,IL,Cass\n"
        )
        assert rows == [YieldRecord(2013, 40.106, -90.0, 17017, 3537.0, "IL", "Cass")]

    def test_header_only(self):
        assert formats.parse_yield_records(self.HEADER) == []

    def test_bad_yield_reports_row(self):
        with pytest.raises(FormatError, match="row 2"):
            formats.parse_yield_records(self.HEADER + "2013,40.1,-90.0,17017,abc,IL,Cass\n")

    def test_nonpositive_yield(self):
        with pytest.raises(FormatError, match="row 2.*> 0"):
            formats.parse_yield_records(self.HEADER + "2013,40.1,-90.0,17017,0,IL,Cass\n")

    def test_roundtrip(self):
        records = [
            YieldRecord(2013, 40.106, -90.0, 17017, 3537.0, "IL", "Cass"),
            YieldRecord(2014, 39.9, -91.2, 17001, 2737.0, "IL", "Adams"),
        ]
        text = formats.write_yield_records(records)
        assert formats.parse_yield_records(text) == records
        assert formats.write_yield_records(formats.parse_yield_records(text)) == text


class TestCalibrationDb:
    def test_listing_fixture(self):
        db = formats.read_calibration_db((FIXTURES / "calibrated_fields.json").read_text())
        (entry,) = db["Adams"][2012]
        assert entry.calibration_cost == 0.0617
        assert entry.latitude == 39.8428
        assert entry.longitude == -91.21
        assert entry.measured_yield == 2737.0
        assert entry.calibration_values[0] == 0.1574

    def test_listing_fixture_roundtrip_bytes(self):
        text = (FIXTURES / "calibrated_fields.json").read_text()
        assert formats.write_calibration_db(formats.read_calibration_db(text)) == text

    def test_empty_db(self):
        assert formats.write_calibration_db({}) == "{}\n"
        assert formats.read_calibration_db("{}") == {}

    def test_two_county_roundtrip(self):
        entry = CalibrationEntry([0.5, 0.25], 0.1, 40.0, -90.0, 3000.0)
        other = CalibrationEntry([0.1, 0.9], 0.0, 41.0, -89.5, 3500.0)
        db = {"Cass": {2013: [entry], 2014: [entry, other]}, "Adams": {2012: [other]}}
        text = formats.write_calibration_db(db)
        assert formats.read_calibration_db(text) == db
        # counties/years sorted for byte determinism
        assert text.index('"Adams"') < text.index('"Cass"')

    def test_value_outside_unit_interval(self):
        doc = {"Adams": {"2012": [{
            "calibration_values": [0.5, 1.2],
            "calibration_cost": 0.1,
            "location": {"latitude": 40.0, "longitude": -90.0, "measured_yield": 2000.0},
        }]}}
        with pytest.raises(FormatError, match=r"Adams/2012.*\[1\]"):
            formats.read_calibration_db(json.dumps(doc))

    def test_bad_year_key(self):
        with pytest.raises(FormatError, match="year"):
            formats.read_calibration_db('{"Adams": {"12": []}}')


def _layer_doc(clay=30.0, silt=40.0, sand=30.0):
    return {
        "clay": clay, "silt": silt, "sand": sand,
        "bulk_density": 1.35, "coarse_fragments": 5.0, "cec": 20.0,
        "organic_carbon": 15.0, "ph_h2o": 6.5, "ph_kcl": 5.8,
    }


class TestSoil:
    DEPTHS = ("0", "5", "15", "30", "60", "100", "200")

    def test_valid_profile(self):
        doc = {d: _layer_doc() for d in self.DEPTHS}
        profile = formats.read_soil(json.dumps(doc))
        assert len(profile.layers) == 7
        assert profile.mean_clay() == pytest.approx(30.0)

    def test_six_layers(self):
        doc = {d: _layer_doc() for d in self.DEPTHS[:6]}
        with pytest.raises(FormatError, match="expected 7 layers, got 6"):
            formats.read_soil(json.dumps(doc))

    def test_bad_texture_sum(self):
        doc = {d: _layer_doc() for d in self.DEPTHS}
        doc["0"]["clay"] = 80.0
        with pytest.raises(FormatError, match="texture sums to 150"):
            formats.read_soil(json.dumps(doc))

    def test_roundtrip(self):
        doc = {d: _layer_doc() for d in self.DEPTHS}
        doc["60"]["clay"] = 35.0
        doc["60"]["silt"] = 35.0
        text = formats.write_soil(formats.read_soil(json.dumps(doc)))
        profile = formats.read_soil(text)
        assert profile == formats.read_soil(json.dumps(doc))
        assert formats.write_soil(profile) == text


class TestDatasetCsv:
    def test_roundtrip(self):
        rng = np.random.default_rng(123)
        features = rng.uniform(-3, 3, size=(5, 33))
        yields = rng.uniform(0, 5000, size=5)
        text = formats.write_dataset_csv(features, yields)
        back_x, back_y = formats.read_dataset_csv(text)
        assert np.array_equal(back_x, features)
        assert np.array_equal(back_y, yields)
        assert formats.write_dataset_csv(back_x, back_y) == text

    def test_bad_header(self):
        with pytest.raises(FormatError, match="header"):
            formats.read_dataset_csv("a,b\n1,2\n")

    def test_bad_cell_reports_row(self):
        text = formats.write_dataset_csv(np.zeros((1, 33)), np.zeros(1))
        broken = text.replace("0.0", "zero", 1)
        with pytest.raises(FormatError, match="row 2"):
            formats.read_dataset_csv(broken)


class TestFuzzSafety:
    """Arbitrary bytes must produce FormatError, never another exception."""

    PARSERS = [
        formats.parse_weather,
        formats.parse_yield_records,
        formats.read_calibration_db,
        formats.read_soil,
        formats.read_dataset_csv,
    ]

    def test_garbage_inputs(self):
        rng = np.random.default_rng(99)
        blobs = [""]
        for _ in range(60):
            n = int(rng.integers(1, 400))
            raw = bytes(rng.integers(32, 127, size=n).tolist())
            blobs.append(raw.decode("ascii"))
        blobs += ["{", "[1,2", "DATE\n09", "\x00\x01", "{}" * 5, "9" * 500]
        for parser in self.PARSERS:
            for blob in blobs:
                try:
                    parser(blob)
                except FormatError:
                    pass

    def test_record_invariants_rejected(self):
        with pytest.raises(ValueError):
            WeatherRecord(2001, 0, 1.0, 20.0, 10.0, 0.0)
        with pytest.raises(ValueError):
            WeatherRecord(2001, 1, -1.0, 20.0, 10.0, 0.0)
        with pytest.raises(ValueError):
            WeatherRecord(2001, 1, 1.0, 20.0, 10.0, math.nan)
        with pytest.raises(ValueError):
            YieldRecord(2013, 95.0, 0.0, 1, 100.0, "IL", "Cass")
        with pytest.raises(ValueError):
            CalibrationEntry([1.5], 0.0, 0.0, 0.0, 100.0)
        with pytest.raises(ValueError):
            SoilProfile([SoilLayer(0, **_layer_doc())] * 6)
