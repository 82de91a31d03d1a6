"""Ingestion, Kaplan-Meier, kernel hazard, and IPD reconstruction."""

import numpy as np
import pytest

from survanchor.data import (
    DigitizedCurve,
    SurvivalDataset,
    SurvivalRecord,
    default_bandwidth,
    empirical_hazard,
    kaplan_meier,
    load_survival_csv,
    nelson_aalen,
    reconstruct_ipd,
    write_survival_csv,
)

from conftest import make_dataset, random_dataset


class TestLoadCsv:
    def test_well_formed(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("time,event,age,sex,group\n1.5,1,60,female,a\n2.0,0,,,a\n3.1,1,70,male,b\n")
        ds = load_survival_csv(p)
        assert len(ds) == 3
        assert ds.records[0].age == 60
        assert ds.records[1].age is None and ds.records[1].sex is None

    def test_zero_time_names_row(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("time,event\n1.0,1\n0.0,1\n")
        with pytest.raises(ValueError, match="row 3"):
            load_survival_csv(p)

    def test_bad_event_rejected(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("time,event\n1.0,2\n")
        with pytest.raises(ValueError, match="event"):
            load_survival_csv(p)

    def test_missing_column(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("time,status\n1.0,1\n")
        with pytest.raises(ValueError, match="missing required columns"):
            load_survival_csv(p)

    def test_empty_file(self, tmp_path):
        p = tmp_path / "d.csv"
        p.write_text("")
        with pytest.raises(ValueError, match="empty"):
            load_survival_csv(p)

    def test_roundtrip(self, tmp_path, rng):
        ds = random_dataset(rng, 20)
        p = tmp_path / "d.csv"
        write_survival_csv(p, ds, header_comment="check")
        back = load_survival_csv(p)
        np.testing.assert_array_equal(back.times, ds.times)
        np.testing.assert_array_equal(back.events, ds.events)


def km_oracle(times, events):
    """Brute-force product-limit: loop over distinct event times."""
    times = np.asarray(times, dtype=float)
    events = np.asarray(events, dtype=int)
    steps = []
    s = 1.0
    for t in sorted(set(times[events == 1])):
        at_risk = int(np.sum(times >= t))
        d = int(np.sum((times == t) & (events == 1)))
        s *= 1.0 - d / at_risk
        steps.append((t, s, at_risk))
    return steps


class TestKaplanMeier:
    def test_four_events_no_censoring(self):
        ds = make_dataset([1, 2, 3, 4], [1, 1, 1, 1])
        curve = kaplan_meier(ds)
        # hand product-limit: S(2) = (3/4)(2/3) = 0.5
        assert curve.survival[1] == pytest.approx(0.5, abs=1e-15)
        np.testing.assert_array_equal(curve.n_risk, [4, 3, 2, 1])

    def test_all_censored_is_flat_one(self):
        ds = make_dataset([1, 2, 3], [0, 0, 0])
        curve = kaplan_meier(ds)
        assert curve.times.size == 0  # no steps: S stays 1 everywhere

    def test_single_event_reaches_zero(self):
        ds = make_dataset([1.0], [1])
        curve = kaplan_meier(ds)
        assert curve.survival[-1] == 0.0

    def test_matches_bruteforce_on_small_datasets(self, rng):
        for _ in range(50):
            n = int(rng.integers(1, 9))
            times = np.round(rng.exponential(3.0, n) + 0.1, 1)  # provoke ties
            events = rng.integers(0, 2, n)
            if events.sum() == 0:
                events[0] = 1
            curve = kaplan_meier(make_dataset(times, events))
            oracle = km_oracle(times, events)
            assert curve.times.size == len(oracle)
            for (t, s, n_risk), tc, sc, nc in zip(
                oracle, curve.times, curve.survival, curve.n_risk
            ):
                assert tc == t and nc == n_risk
                assert sc == pytest.approx(s, abs=1e-15)


class TestEmpiricalHazard:
    def test_no_events_gives_zero(self):
        ds = make_dataset([1, 2, 3], [0, 0, 0])
        grid = np.linspace(0.5, 2.5, 5)
        np.testing.assert_array_equal(empirical_hazard(ds, 1.0, grid), 0.0)

    def test_single_event_kernel_value(self):
        # event at t=5 with 6 at risk there; grid point on the event
        times = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10]
        events = [0, 0, 0, 0, 1, 0, 0, 0, 0, 0]
        b = 2.0
        est = empirical_hazard(make_dataset(times, events), b, np.array([5.0]))
        assert est[0] == pytest.approx((0.75 / b) / 6.0, rel=1e-12)

    def test_bandwidth_validation(self):
        ds = make_dataset([1.0], [1])
        with pytest.raises(ValueError, match="bandwidth"):
            empirical_hazard(ds, 0.0, np.array([1.0]))

    def test_constant_hazard_recovery(self):
        rng = np.random.default_rng(5)
        lam, n = 0.2, 2000
        times = rng.exponential(1 / lam, n)
        ds = make_dataset(times, np.ones(n, dtype=int))
        b = default_bandwidth(ds)
        lo, hi = np.percentile(times, [25, 75])
        grid = np.linspace(lo, hi, 30)
        est = empirical_hazard(ds, b, grid)
        assert np.all(np.abs(est - lam) <= 0.25 * lam)

    def test_integral_close_to_nelson_aalen(self):
        rng = np.random.default_rng(6)
        n = 2000
        times = rng.exponential(5.0, n)
        ds = make_dataset(times, np.ones(n, dtype=int))
        b = default_bandwidth(ds)
        grid = np.linspace(b, np.percentile(times, 90), 200)
        est = empirical_hazard(ds, b, grid)
        smoothed_mass = np.trapezoid(est, grid)
        na = nelson_aalen(ds, grid)
        assert smoothed_mass == pytest.approx(na[-1] - na[0], rel=0.15)


class TestReconstructIpd:
    def test_roundtrip_from_km_output(self, rng):
        ds = random_dataset(rng, 40)
        km = kaplan_meier(ds)
        curve = DigitizedCurve(
            times=tuple(km.times),
            survival=tuple(km.survival),
            risk_table=tuple((float(t), int(n)) for t, n in zip(km.times, km.n_risk)),
            total_n=len(ds),
        )
        rebuilt = reconstruct_ipd(curve)
        km2 = kaplan_meier(rebuilt)
        np.testing.assert_array_equal(km2.times, km.times)
        np.testing.assert_allclose(km2.survival, km.survival, atol=1e-9)
        np.testing.assert_array_equal(km2.n_risk, km.n_risk)

    def test_flat_curve_all_censored(self):
        curve = DigitizedCurve(times=(1.0, 5.0, 10.0), survival=(1.0, 1.0, 1.0), total_n=50)
        ds = reconstruct_ipd(curve)
        assert len(ds) == 50
        assert ds.n_events == 0
        assert np.all(ds.times == 10.0)

    def test_drop_to_zero_all_events(self):
        # survival 1 -> 0.6 -> 0.2 -> 0.0 with n=10: drops of 4, 4, 2 subjects
        curve = DigitizedCurve(
            times=(1.0, 2.0, 3.0), survival=(0.6, 0.2, 0.0), total_n=10
        )
        ds = reconstruct_ipd(curve)
        assert ds.n_events == 10
        km = kaplan_meier(ds)
        np.testing.assert_allclose(km.survival, [0.6, 0.2, 0.0], atol=1e-12)

    def test_increasing_survival_rejected(self):
        with pytest.raises(ValueError, match="nonincreasing"):
            DigitizedCurve(times=(1.0, 2.0), survival=(0.5, 0.7), total_n=10)

    def test_inconsistent_risk_table_rejected(self):
        # curve implies 5 events out of 10 but risk table claims 12 remain later
        curve = DigitizedCurve(
            times=(1.0, 2.0),
            survival=(0.5, 0.25),
            risk_table=((1.0, 10), (2.0, 12)),
            total_n=10,
        )
        with pytest.raises(ValueError, match="inconsistent|at risk"):
            reconstruct_ipd(curve)

    def test_sparse_risk_table_is_close(self, rng):
        ds = random_dataset(rng, 60, censor_frac=0.25)
        km = kaplan_meier(ds)
        anchor_times = np.percentile(ds.times, [0, 50]).tolist()
        anchors = []
        for at in anchor_times:
            n_at = int(np.sum(ds.times >= at))
            anchors.append((float(at), n_at))
        curve = DigitizedCurve(
            times=tuple(km.times),
            survival=tuple(km.survival),
            risk_table=tuple(anchors),
            total_n=len(ds),
        )
        rebuilt = reconstruct_ipd(curve)
        km2 = kaplan_meier(rebuilt)
        # sparse-anchor reconstruction is approximate: step heights track closely
        common = np.linspace(km.times[0], km.times[-1], 25)
        s1 = np.interp(common, km.times, km.survival)
        s2 = np.interp(common, km2.times, km2.survival)
        assert np.max(np.abs(s1 - s2)) < 0.08
