import numpy as np
import pytest

import cropforge.ensemble as ensemble_mod
from cropforge.calibration import CalendarSpec, season_plan
from cropforge.ensemble import (
    CalibratedModelSet,
    PredictionMatrix,
    RegionPrediction,
    aggregate_region,
    build_prediction_matrix,
    ensemble_all_previous,
    ensemble_mean,
    ensemble_previous_year,
    ensemble_quality,
    evaluate_entry,
    observed_from_entries,
    quality_score,
    run_strategy,
)
from cropforge.formats import CalibrationEntry
from cropforge.simulator import GeneticCoefficients, map_coefficients, simulate
from tests.conftest import constant_weather


class TestAllPrevious:
    def test_single_prior(self):
        matrix = PredictionMatrix({(2011, 2012): 3000.0})
        assert ensemble_all_previous(matrix, 2012, seed=0) == 3000.0

    def test_seed_repeatable(self):
        matrix = PredictionMatrix({(y, 2012): 1000.0 * y for y in (2009, 2010, 2011)})
        assert ensemble_all_previous(matrix, 2012, 7) == ensemble_all_previous(
            matrix, 2012, 7)

    def test_uniform_selection(self):
        matrix = PredictionMatrix({(2009, 2012): 1.0, (2010, 2012): 2.0,
                                   (2011, 2012): 3.0})
        counts = {1.0: 0, 2.0: 0, 3.0: 0}
        for seed in range(10000):
            counts[ensemble_all_previous(matrix, 2012, seed)] += 1
        for c in counts.values():
            assert abs(c / 10000 - 1 / 3) <= 0.02

    def test_no_priors(self):
        with pytest.raises(ValueError, match="no prior"):
            ensemble_all_previous(PredictionMatrix({}), 2012, 0)


class TestPreviousYear:
    def test_basic(self):
        matrix = PredictionMatrix({(2011, 2012): 3000.0})
        assert ensemble_previous_year(matrix, 2012) == 3000.0

    def test_missing_previous(self):
        matrix = PredictionMatrix({(2009, 2012): 3000.0})
        with pytest.raises(ValueError, match="2011"):
            ensemble_previous_year(matrix, 2012)

    def test_ignores_earlier_years(self):
        matrix = PredictionMatrix({(2009, 2012): 1.0, (2010, 2012): 2.0,
                                   (2011, 2012): 3.0})
        assert ensemble_previous_year(matrix, 2012) == 3.0


class TestMean:
    def test_two_members(self):
        matrix = PredictionMatrix({(2010, 2012): 2000.0, (2011, 2012): 4000.0})
        assert ensemble_mean(matrix, 2012) == 3000.0

    def test_single_member(self):
        matrix = PredictionMatrix({(2011, 2012): 1234.0})
        assert ensemble_mean(matrix, 2012) == 1234.0
        assert ensemble_mean(matrix, 2012) == ensemble_previous_year(matrix, 2012)

    def test_against_brute_force(self):
        rng = np.random.default_rng(5)
        values = rng.uniform(1000, 5000, size=5)
        matrix = PredictionMatrix({(2005 + i, 2012): float(v)
                                   for i, v in enumerate(values)})
        want = sum(values) / len(values)
        assert ensemble_mean(matrix, 2012) == pytest.approx(want, abs=1e-12)


class TestQualityScore:
    def test_single_k(self):
        matrix = PredictionMatrix({(2010, 2011): 1100.0})
        assert quality_score(matrix, 2010, 2012, {2011: 1000.0}) == pytest.approx(0.10)

    def test_perfect_history(self):
        matrix = PredictionMatrix({(2009, 2010): 500.0, (2009, 2011): 700.0})
        observed = {2010: 500.0, 2011: 700.0}
        assert quality_score(matrix, 2009, 2012, observed) == 0.0

    def test_mean_of_two(self):
        matrix = PredictionMatrix({(2009, 2010): 1100.0, (2009, 2011): 1300.0})
        observed = {2010: 1000.0, 2011: 1000.0}
        assert quality_score(matrix, 2009, 2012, observed) == pytest.approx(0.20)

    def test_undefined_without_window(self):
        matrix = PredictionMatrix({(2011, 2012): 1000.0})
        with pytest.raises(ValueError, match="undefined"):
            quality_score(matrix, 2011, 2012, {2012: 1000.0})

    def test_no_target_leakage(self):
        matrix = PredictionMatrix({(2009, 2010): 1100.0, (2009, 2011): 900.0,
                                   (2009, 2012): 1000.0})
        base = quality_score(matrix, 2009, 2012, {2010: 1000.0, 2011: 1000.0})
        spiked = quality_score(matrix, 2009, 2012,
                               {2010: 1000.0, 2011: 1000.0, 2012: 1.0})
        assert base == spiked


def quality_fixture():
    # members 2009 (Q = 0.1) and 2010 (Q = 0.2) predicting 1000 / 2000 for 2012
    matrix = PredictionMatrix({
        (2009, 2010): 1100.0,
        (2009, 2011): 900.0,
        (2010, 2011): 1200.0,
        (2009, 2012): 1000.0,
        (2010, 2012): 2000.0,
        (2011, 2012): 1500.0,
    })
    observed = {2010: 1000.0, 2011: 1000.0}
    return matrix, observed


class TestQualityEnsemble:
    def test_inverse_weighting(self):
        matrix, observed = quality_fixture()
        # weights 1/0.1 = 10 and 1/0.2 = 5 -> (10*1000 + 5*2000) / 15
        want = (10 * 1000 + 5 * 2000) / 15
        assert ensemble_quality(matrix, 2012, observed) == pytest.approx(want)

    def test_equal_quality_is_arithmetic_mean(self):
        matrix = PredictionMatrix({
            (2009, 2010): 1100.0, (2009, 2011): 1100.0, (2010, 2011): 1100.0,
            (2009, 2012): 1000.0, (2010, 2012): 2000.0, (2011, 2012): 999.0,
        })
        observed = {2010: 1000.0, 2011: 1000.0}
        assert ensemble_quality(matrix, 2012, observed) == pytest.approx(1500.0)

    def test_perfect_member_dominates(self):
        matrix, observed = quality_fixture()
        matrix.values[(2010, 2011)] = 1000.0  # Q(2010) = 0
        out = ensemble_quality(matrix, 2012, observed)
        assert out == pytest.approx(2000.0, rel=1e-4)

    def test_most_recent_prior_excluded(self):
        matrix, observed = quality_fixture()
        for spike in (0.0, 1e9):
            matrix.values[(2011, 2012)] = spike
            assert ensemble_quality(matrix, 2012, observed) == pytest.approx(
                (10 * 1000 + 5 * 2000) / 15)

    def test_literal_q_variant(self):
        matrix, observed = quality_fixture()
        want = (0.1 * 1000 + 0.2 * 2000) / 0.3
        assert ensemble_quality(matrix, 2012, observed,
                                literal_q=True) == pytest.approx(want)

    def test_needs_two_priors(self):
        matrix = PredictionMatrix({(2011, 2012): 1000.0})
        with pytest.raises(ValueError, match="previous-year or mean"):
            ensemble_quality(matrix, 2012, {2011: 900.0})


class TestAggregateRegion:
    def test_single(self):
        out = aggregate_region([3000.0])
        assert out.mean == 3000.0 and out.std == 0.0

    def test_two(self):
        out = aggregate_region([2000.0, 4000.0])
        assert out.mean == 3000.0 and out.std == 1000.0

    def test_population_std_oracle(self):
        rng = np.random.default_rng(9)
        values = rng.uniform(1000, 5000, size=50).tolist()
        out = aggregate_region(values)
        n = len(values)
        mean = sum(values) / n
        var = sum((v - mean) ** 2 for v in values) / n
        assert out.mean == pytest.approx(mean, abs=1e-12)
        assert out.std == pytest.approx(var ** 0.5, abs=1e-12)

    def test_empty(self):
        with pytest.raises(ValueError):
            aggregate_region([])

    def test_mean_in_range_enforced(self):
        with pytest.raises(ValueError):
            RegionPrediction(mean=10.0, std=0.0, field_predictions=[1.0, 2.0])


class TestConvexity:
    def test_every_strategy_within_member_range(self):
        rng = np.random.default_rng(33)
        for trial in range(20):
            years = list(range(2005, 2012))
            matrix = PredictionMatrix({})
            for i, yx in enumerate(years):
                for yk in years[i + 1:] + [2012]:
                    matrix.values[(yx, yk)] = float(rng.uniform(1000, 5000))
            observed = {y: float(rng.uniform(1500, 4500)) for y in years}
            members = [matrix.values[(y, 2012)] for y in years]
            lo, hi = min(members), max(members)
            for strategy in ("all-previous", "previous-year", "mean", "quality"):
                out = run_strategy(strategy, matrix, 2012, observed=observed,
                                   seed=trial)
                assert lo - 1e-9 <= out <= hi + 1e-9


class TestEvaluateEntry:
    def test_reproduces_calibration_year_yield(self, bounds, soil):
        values = [0.45] * 18
        weather = constant_weather(year=2013, start_doy=100, days=210)
        genetics = GeneticCoefficients(values, bounds)
        plan = season_plan(map_coefficients(genetics), 2013, CalendarSpec())
        direct = simulate(plan, weather, genetics, soil).yield_kg_ha
        entry = CalibrationEntry(values, 0.0, 40.0, -90.0, direct)
        assert evaluate_entry(entry, weather, soil, 2013) == direct

    def test_zero_radiation_target_year(self, bounds, soil):
        entry = CalibrationEntry([0.5] * 18, 0.0, 40.0, -90.0, 2000.0)
        weather = constant_weather(year=2014, start_doy=100, days=210, srad=0.0)
        assert evaluate_entry(entry, weather, soil, 2014) == 0.0

    def test_single_simulate_call(self, soil, monkeypatch):
        calls = []
        real = ensemble_mod.simulate

        def counting(*args, **kwargs):
            calls.append(1)
            return real(*args, **kwargs)

        monkeypatch.setattr(ensemble_mod, "simulate", counting)
        entry = CalibrationEntry([0.5] * 18, 0.0, 40.0, -90.0, 2000.0)
        weather = constant_weather(year=2014, start_doy=100, days=210)
        evaluate_entry(entry, weather, soil, 2014)
        assert len(calls) == 1


class TestBuildMatrix:
    def model_set(self, soil, bounds):
        entries = {}
        rng = np.random.default_rng(3)
        for year in (2010, 2011):
            year_entries = []
            for _ in range(3):
                values = (0.3 + 0.4 * rng.uniform(size=18)).tolist()
                year_entries.append(CalibrationEntry(values, 0.01, 40.0, -90.0, 2500.0))
            entries[year] = year_entries
        return CalibratedModelSet(entries=entries, target_year=2012)

    def weather_map(self):
        return {y: constant_weather(year=y, start_doy=100, days=210,
                                    srad=18.0 + (y % 5), rain=4.0 + (y % 3))
                for y in (2010, 2011, 2012)}

    def test_upper_triangle_only(self, soil, bounds):
        models = self.model_set(soil, bounds)
        matrix, clouds = build_prediction_matrix(models, self.weather_map(), soil)
        assert set(matrix.values) == {(2010, 2011), (2010, 2012), (2011, 2012)}
        assert all(len(c) == 3 for c in clouds.values())
        for pair, cloud in clouds.items():
            assert matrix.values[pair] == pytest.approx(sum(cloud) / len(cloud))

    def test_jobs_invariance(self, soil, bounds):
        models = self.model_set(soil, bounds)
        m1, _ = build_prediction_matrix(models, self.weather_map(), soil, jobs=1)
        m2, _ = build_prediction_matrix(models, self.weather_map(), soil, jobs=4)
        assert m1.values == m2.values

    def test_missing_weather_year(self, soil, bounds):
        models = self.model_set(soil, bounds)
        weather = self.weather_map()
        del weather[2012]
        with pytest.raises(ValueError, match="2012"):
            build_prediction_matrix(models, weather, soil)

    def test_observed_from_entries(self, soil, bounds):
        models = self.model_set(soil, bounds)
        observed = observed_from_entries(models.entries)
        assert observed == {2010: 2500.0, 2011: 2500.0}

    def test_target_year_validation(self):
        entry = CalibrationEntry([0.5] * 18, 0.0, 40.0, -90.0, 2000.0)
        with pytest.raises(ValueError, match="not before"):
            CalibratedModelSet(entries={2012: [entry]}, target_year=2012)
