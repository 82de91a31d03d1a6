"""Trapezoid integrals, mean survival, RMS, and life-years gained."""

import numpy as np
import pytest

from survanchor.estimands import (
    life_years_gained,
    mean_survival,
    restricted_mean_survival,
    trapezoid_integral,
)
from survanchor.extrapolate import ExtrapolatedCurve, make_grid

pytestmark = pytest.mark.filterwarnings("ignore:.*survival above.*")


def exponential_curve(rates, horizon=150.0, step=0.25, group="g", time_unit="months"):
    """Analytic exponential survival curves, one row per rate."""
    grid = make_grid(horizon, step)
    rates = np.atleast_1d(np.asarray(rates, dtype=float))
    hazard = np.tile(rates[:, None], (1, grid.size))
    survival = np.exp(-rates[:, None] * grid[None, :])
    return ExtrapolatedCurve(
        grid=grid,
        hazard=hazard,
        survival=survival,
        group=group,
        method="baseline",
        t_star=horizon,
        time_unit=time_unit,
    )


class TestTrapezoidIntegral:
    def test_unit_function(self):
        grid = np.linspace(0.0, 7.0, 29)
        assert trapezoid_integral(np.ones_like(grid), grid) == pytest.approx(7.0, abs=1e-14)

    def test_exponential_against_antiderivative(self):
        grid = np.arange(0.0, 10.0 + 1e-12, 0.01)
        val = trapezoid_integral(np.exp(-grid), grid)
        assert val == pytest.approx(1.0 - np.exp(-10.0), abs=1e-4)

    def test_single_trapezoid(self):
        assert trapezoid_integral([1.0, 0.0], [0.0, 2.0]) == pytest.approx(1.0, abs=1e-15)

    def test_unordered_grid_rejected(self):
        with pytest.raises(ValueError, match="increasing"):
            trapezoid_integral([1.0, 0.5, 0.2], [0.0, 2.0, 1.0])

    def test_nonfinite_values_rejected(self):
        with pytest.raises(ValueError, match="finite"):
            trapezoid_integral([1.0, np.inf], [0.0, 1.0])

    def test_second_order_convergence(self):
        coarse = np.arange(0.0, 20.0 + 1e-9, 0.002)
        fine = np.arange(0.0, 20.0 + 1e-9, 0.001)
        i_coarse = trapezoid_integral(np.exp(-coarse), coarse)
        i_fine = trapezoid_integral(np.exp(-fine), fine)
        assert abs(i_coarse - i_fine) < 1e-6


class TestMeanSurvival:
    def test_exponential_mean_within_one_percent(self):
        curve = exponential_curve([0.1, 0.1, 0.1])
        result = mean_survival(curve)
        assert result.restricted_draws == 0
        np.testing.assert_allclose(result.values, 10.0, rtol=0.01)

    def test_flat_curve_is_flagged_restricted(self):
        grid = make_grid(50.0, 1.0)
        curve = ExtrapolatedCurve(
            grid=grid,
            hazard=np.zeros((2, grid.size)),
            survival=np.ones((2, grid.size)),
            group="g",
            method="baseline",
            t_star=50.0,
        )
        result = mean_survival(curve)
        assert result.restricted_draws == 2
        np.testing.assert_allclose(result.values, 50.0, rtol=1e-12)

    def test_summary_fields(self):
        curve = exponential_curve([0.1, 0.2, 0.3])
        s = mean_survival(curve).summary()
        assert s["q2.5"] <= s["q50"] <= s["q97.5"]
        assert s["units"] == "months"
        assert s["n_draws"] == 3


class TestRestrictedMeanSurvival:
    def test_exponential_analytic(self):
        curve = exponential_curve([1.0], horizon=10.0, step=0.001)
        result = restricted_mean_survival(curve, 1.0)
        assert result.values[0] == pytest.approx(1.0 - np.exp(-1.0), abs=1e-5)

    def test_matches_mean_when_tail_is_dead(self):
        curve = exponential_curve([0.1], horizon=200.0, step=0.25)
        rms = restricted_mean_survival(curve, 200.0)
        mean = mean_survival(curve)
        slack = 1e-4 * (200.0 - mean.t_max[0])
        assert abs(rms.values[0] - mean.values[0]) <= slack + 1e-12

    def test_off_grid_restriction_time_interpolates(self):
        curve = exponential_curve([0.5], horizon=20.0, step=1.0)
        r = restricted_mean_survival(curve, 2.5)
        lo = restricted_mean_survival(curve, 2.0)
        hi = restricted_mean_survival(curve, 3.0)
        assert lo.values[0] < r.values[0] < hi.values[0]
        analytic = (1.0 - np.exp(-0.5 * 2.5)) / 0.5
        assert r.values[0] == pytest.approx(analytic, rel=0.03)

    def test_beyond_grid_rejected(self):
        curve = exponential_curve([0.5], horizon=20.0)
        with pytest.raises(ValueError, match="outside the grid"):
            restricted_mean_survival(curve, 25.0)


class TestLifeYearsGained:
    def test_identical_curves_give_exact_zero(self):
        curve = exponential_curve([0.1, 0.2, 0.4])
        result = life_years_gained(curve, curve)
        assert np.all(result.values == 0.0)
        assert result.sd == 0.0

    def test_exponential_pair_analytic(self):
        c1 = exponential_curve([0.1, 0.1], horizon=200.0, step=0.1)
        c2 = exponential_curve([0.2, 0.2], horizon=200.0, step=0.1)
        result = life_years_gained(c1, c2)
        np.testing.assert_allclose(result.values, 5.0, rtol=0.01)

    def test_equals_mean_difference_with_common_cutoff(self):
        # both curves reach the threshold at the same grid index by construction
        c1 = exponential_curve([0.3, 0.25], horizon=60.0, step=0.5)
        c2 = exponential_curve([0.3, 0.25], horizon=60.0, step=0.5)
        c2.survival = c2.survival * 0.97  # same cutoff index, different area
        lyg = life_years_gained(c1, c2)
        m1, m2 = mean_survival(c1), mean_survival(c2)
        np.testing.assert_array_equal(m1.t_max, m2.t_max)
        np.testing.assert_allclose(lyg.values, m1.values - m2.values, atol=1e-12)

    def test_grid_mismatch_rejected(self):
        c1 = exponential_curve([0.1], horizon=100.0)
        c2 = exponential_curve([0.1], horizon=120.0)
        with pytest.raises(ValueError, match="grid"):
            life_years_gained(c1, c2)

    def test_draw_count_mismatch_rejected(self):
        c1 = exponential_curve([0.1, 0.2])
        c2 = exponential_curve([0.1])
        with pytest.raises(ValueError, match="draw counts"):
            life_years_gained(c1, c2)

    def test_hr_derived_arm_gains_in_every_draw(self):
        from survanchor.extrapolate import derive_hr_arm

        rng = np.random.default_rng(7)
        source = exponential_curve(rng.uniform(0.05, 0.4, 50), horizon=400.0, step=0.5)
        derived = derive_hr_arm(source, 0.5)
        result = life_years_gained(derived, source)
        assert np.all(result.values > 0.0)
