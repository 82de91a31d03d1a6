"""Lee-Carter fitting, projection, cohort survival, and synthesis."""

import numpy as np
import pytest

from survanchor.data import kaplan_meier
from survanchor.mortality import (
    LeeCarterPosterior,
    MortalitySurface,
    ProjectedRates,
    cohort_survival,
    fit_lee_carter,
    load_mortality_csv,
    load_rates_csv,
    project_rates,
    project_rates_sequence,
    synthesize_cohort,
    write_rates_csv,
)


def synthetic_surface(rng, n_ages=20, n_years=30, drift=-1.0, sv=0.05, se=0.01):
    ages = np.arange(50, 50 + n_ages)
    years = np.arange(1990, 1990 + n_years)
    alpha = -6.5 + 0.07 * np.arange(n_ages)
    beta = np.full(n_ages, 1.0 / n_ages)
    kappa = np.cumsum(np.concatenate([[0.0], drift + sv * rng.standard_normal(n_years - 1)]))
    kappa -= kappa.mean()
    y = alpha[:, None] + np.outer(beta, kappa) + se * rng.standard_normal((n_ages, n_years))
    return MortalitySurface(ages=ages, years=years, sex="female", log_rates=y)


def handmade_posterior(n_draws=200, n_ages=5, sv2=0.0, drift=-0.5, seed=0):
    """A posterior of identical draws (optionally with innovation variance)."""
    ages = np.arange(60, 60 + n_ages)
    years = np.arange(2000, 2010)
    alpha = np.tile(np.linspace(-4.0, -3.0, n_ages), (n_draws, 1))
    beta = np.full((n_draws, n_ages), 1.0 / n_ages)
    kappa = np.tile(np.linspace(2.0, -2.0, years.size), (n_draws, 1))
    return LeeCarterPosterior(
        ages=ages,
        years=years,
        sex="female",
        alpha=alpha,
        beta=beta,
        kappa=kappa,
        drift=np.full(n_draws, drift),
        sigma2_v=np.full(n_draws, sv2),
        sigma2_eps=np.full(n_draws, 1e-4),
    )


class TestLoadMortalityCsv:
    def test_roundtrip_grid(self, tmp_path):
        p = tmp_path / "mx.csv"
        rows = ["year,age,sex,mx"]
        for year in (2000, 2001):
            for age in (60, 61):
                rows.append(f"{year},{age},female,{0.01 * (age - 59)}")
                rows.append(f"{year},{age},male,{0.02 * (age - 59)}")
        p.write_text("\n".join(rows) + "\n")
        surf = load_mortality_csv(p, "female")
        assert surf.log_rates.shape == (2, 2)
        assert surf.log_rates[0, 0] == pytest.approx(np.log(0.01))

    def test_zero_rate_rejected(self, tmp_path):
        p = tmp_path / "mx.csv"
        p.write_text("year,age,sex,mx\n2000,60,female,0.0\n")
        with pytest.raises(ValueError, match="row 2"):
            load_mortality_csv(p, "female")

    def test_incomplete_grid_rejected(self, tmp_path):
        p = tmp_path / "mx.csv"
        p.write_text("year,age,sex,mx\n2000,60,female,0.01\n2001,61,female,0.01\n")
        with pytest.raises(ValueError, match="incomplete"):
            load_mortality_csv(p, "female")


class TestFitLeeCarter:
    def test_recovers_known_drift(self, rng):
        surf = synthetic_surface(rng)
        post = fit_lee_carter(surf, iterations=600, warmup=400, seed=1)
        assert abs(post.drift.mean() - (-1.0)) < 0.15
        assert np.abs(post.beta.sum(axis=1) - 1.0).max() < 1e-10
        assert np.abs(post.kappa.sum(axis=1)).max() < 1e-10

    def test_symmetric_two_age_surface(self, rng):
        # both ages share the signal, so the loadings split evenly
        n_years = 25
        years = np.arange(1990, 1990 + n_years)
        kappa = np.cumsum(np.concatenate([[0.0], -0.8 + 0.05 * rng.standard_normal(n_years - 1)]))
        y = np.vstack([-5.0 + 0.5 * kappa, -4.0 + 0.5 * kappa])
        y += 0.01 * rng.standard_normal(y.shape)
        surf = MortalitySurface(ages=np.array([60, 61]), years=years, sex="male", log_rates=y)
        post = fit_lee_carter(surf, iterations=500, warmup=400, seed=2)
        np.testing.assert_allclose(post.beta.mean(axis=0), [0.5, 0.5], atol=0.05)

    def test_no_trend_gives_drift_near_zero(self, rng):
        n_ages, n_years = 6, 20
        y = -4.0 + 0.02 * rng.standard_normal((n_ages, n_years))
        surf = MortalitySurface(
            ages=np.arange(60, 66), years=np.arange(2000, 2020), sex="female", log_rates=y
        )
        post = fit_lee_carter(surf, iterations=600, warmup=400, seed=3)
        assert abs(post.drift.mean()) < 2.0 * post.drift.std()

    def test_preconditions(self, rng):
        surf = synthetic_surface(rng, n_ages=3, n_years=4)
        with pytest.raises(ValueError, match="5 years"):
            fit_lee_carter(surf, iterations=10, warmup=5, seed=0)


class TestProjection:
    def test_deterministic_limit_without_innovation(self):
        post = handmade_posterior(sv2=0.0)
        rates = project_rates(post, 2010, rng=np.random.default_rng(0))
        expected = np.exp(post.alpha[0] + post.beta[0] * (post.kappa[0, -1] + post.drift[0]))
        np.testing.assert_allclose(rates.rates[0], expected, rtol=1e-12)

    def test_projection_variance_grows_linearly(self):
        post = handmade_posterior(n_draws=4000, sv2=0.04)
        r1 = project_rates(post, 2012, rng=np.random.default_rng(1))  # 3 steps
        r2 = project_rates(post, 2015, rng=np.random.default_rng(2))  # 6 steps
        v1 = np.var(np.log(r1.rates[:, 0]))
        v2 = np.var(np.log(r2.rates[:, 0]))
        assert v2 / v1 == pytest.approx(2.0, rel=0.3)

    def test_negative_drift_lowers_median_rates(self):
        post = handmade_posterior(sv2=0.0, drift=-0.5)
        r1 = project_rates(post, 2011, rng=np.random.default_rng(0))
        r2 = project_rates(post, 2016, rng=np.random.default_rng(0))
        assert np.median(r2.rates) < np.median(r1.rates)

    def test_target_year_must_be_future(self):
        post = handmade_posterior()
        with pytest.raises(ValueError, match="after the last observed"):
            project_rates(post, 2009)

    def test_rates_csv_roundtrip(self, tmp_path):
        post = handmade_posterior(n_draws=3)
        rates = project_rates(post, 2012, rng=np.random.default_rng(5))
        p = tmp_path / "rates.csv"
        write_rates_csv(p, rates, header_comment="x")
        back = load_rates_csv(p)
        assert back.target_year == 2012 and back.sex == "female"
        np.testing.assert_array_equal(back.ages, rates.ages)
        np.testing.assert_allclose(back.rates, rates.rates, rtol=1e-15)


class TestCohortSurvival:
    def test_zero_horizon_is_one(self):
        rates = ProjectedRates(
            ages=np.arange(60, 70), target_year=2024, sex="female",
            rates=np.full((7, 10), 0.1),
        )
        np.testing.assert_array_equal(cohort_survival(rates, 62, 0), 1.0)

    def test_constant_rate_partial_sum(self):
        rates = ProjectedRates(
            ages=np.arange(60, 70), target_year=2024, sex="female",
            rates=np.full((7, 10), 0.1),
        )
        np.testing.assert_allclose(
            cohort_survival(rates, 60, 3), np.exp(-0.3), rtol=1e-14
        )

    def test_two_year_reach_uses_two_rates(self):
        # a 20-year-old reaching 22 multiplies through m20 and m21 only
        ages = np.arange(20, 25)
        m = np.array([[0.01, 0.02, 0.5, 0.5, 0.5]])
        rates = ProjectedRates(ages=ages, target_year=2024, sex="male", rates=m)
        assert cohort_survival(rates, 20, 2)[0] == pytest.approx(np.exp(-0.01 - 0.02), rel=1e-14)

    def test_monotone_in_horizon(self):
        rng = np.random.default_rng(8)
        rates = ProjectedRates(
            ages=np.arange(60, 80), target_year=2024, sex="female",
            rates=rng.uniform(0.01, 0.3, (20, 20)),
        )
        probs = np.stack([cohort_survival(rates, 60, j) for j in range(21)])
        assert np.all(np.diff(probs, axis=0) <= 1e-15)

    def test_age_range_enforced(self):
        rates = ProjectedRates(
            ages=np.arange(60, 70), target_year=2024, sex="female",
            rates=np.full((2, 10), 0.1),
        )
        with pytest.raises(ValueError, match="outside"):
            cohort_survival(rates, 65, 10)


class TestSynthesizeCohort:
    def make_rates(self, level=0.25, n_draws=50, n_ages=30):
        return ProjectedRates(
            ages=np.arange(60, 60 + n_ages), target_year=2024, sex="female",
            rates=np.full((n_draws, n_ages), level),
        )

    def test_negligible_rates_censor_everyone(self):
        rates = self.make_rates(level=1e-14)
        ds = synthesize_cohort(rates, [(60, "female", 40)], seed=1)
        assert ds.n_events == 0
        assert np.all(ds.times == rates.ages.size)

    def test_constant_rate_mean_time(self):
        level = 0.5
        rates = self.make_rates(level=level, n_ages=60)
        ds = synthesize_cohort(rates, [(60, "female", 4000)], seed=2)
        # oracle: direct mean of the implied discrete law (+1/2 within-year)
        pi = np.exp(-level * np.arange(61))
        probs = -np.diff(pi)
        analytic = float((probs * (np.arange(60) + 0.5)).sum() + pi[-1] * 60)
        assert ds.times.mean() == pytest.approx(analytic, rel=0.05)

    def test_cause_proportion_one_starves_other_dataset(self):
        rates = self.make_rates()
        y, z = synthesize_cohort(
            rates, [(60, "female", 100)], cause_proportions={60: 1.0, 89: 1.0}, seed=3
        )
        assert z.n_events == 0
        assert y.n_events > 0

    def test_reproducible_given_seed(self):
        rates = self.make_rates()
        a = synthesize_cohort(rates, [(60, "female", 50), (70, "female", 20)], seed=9)
        b = synthesize_cohort(rates, [(60, "female", 50), (70, "female", 20)], seed=9)
        np.testing.assert_array_equal(a.times, b.times)
        np.testing.assert_array_equal(a.events, b.events)

    def test_km_matches_averaged_cohort_survival(self):
        rng = np.random.default_rng(12)
        n_ages = 40
        rates = ProjectedRates(
            ages=np.arange(60, 60 + n_ages), target_year=2024, sex="female",
            rates=np.exp(rng.normal(np.log(0.08), 0.3, (80, n_ages))),
        )
        ds = synthesize_cohort(rates, [(60, "female", 10000)], seed=4)
        km = kaplan_meier(ds)
        grid_j = np.arange(1, n_ages)
        target = np.stack([cohort_survival(rates, 60, j) for j in grid_j]).mean(axis=1)
        km_at = np.interp(grid_j.astype(float), km.times, km.survival)
        assert np.max(np.abs(km_at - target)) < 0.02

    def test_months_unit_scales_times(self):
        rates = self.make_rates()
        ds = synthesize_cohort(rates, [(60, "female", 30)], seed=5, time_unit="months")
        assert ds.time_unit == "months"
        assert ds.times.max() <= rates.ages.size * 12.0

    def test_sex_specific_rates_required(self):
        rates = {"female": self.make_rates()}
        with pytest.raises(ValueError, match="male"):
            synthesize_cohort(rates, [(60, "male", 5)], seed=0)

    def test_empty_profile_rejected(self):
        with pytest.raises(ValueError, match="profile"):
            synthesize_cohort(self.make_rates(), [], seed=0)

    def test_diagonal_variant_runs_and_differs(self):
        post = handmade_posterior(n_draws=100, sv2=0.0, drift=-0.4)
        rng = np.random.default_rng(0)
        single = project_rates(post, 2012, rng=rng)
        seq = project_rates_sequence(post, 2012, 2012 + 4, rng=np.random.default_rng(0))
        assert [r.target_year for r in seq] == [2012, 2013, 2014, 2015, 2016]
        base = synthesize_cohort(single, [(60, "female", 400)], seed=6)
        diag = synthesize_cohort(single, [(60, "female", 400)], seed=6, diagonal=seq)
        # strong negative drift makes later-year rates lower, so diagonal lives longer
        assert diag.times.mean() > base.times.mean()
