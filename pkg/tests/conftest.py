import pathlib

import pytest

from cropforge.formats import WeatherRecord, WeatherSeries, read_soil
from cropforge.simulator import default_bounds

FIXTURES = pathlib.Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def soil():
    from importlib import resources

    text = resources.files("cropforge.data").joinpath("soil_default.json").read_text()
    return read_soil(text)


@pytest.fixture(scope="session")
def bounds():
    return default_bounds()


def constant_weather(year=2001, start_doy=1, days=120, srad=20.0, tmax=28.0,
                     tmin=16.0, rain=5.0):
    records = [
        WeatherRecord(year, d, srad, tmax, tmin, rain)
        for d in range(start_doy, start_doy + days)
    ]
    return WeatherSeries(records=records)


@pytest.fixture
def reference_weather():
    return constant_weather()
