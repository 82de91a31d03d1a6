"""Survival data containers, empirical estimators and curve-to-data reconstruction.

CSV formats handled here:

  survival data     header ``time,event,age,sex,group``; ``age`` and ``sex``
                    may be empty; UTF-8, decimal point.
  digitized curve   header ``time,survival``; optional companion risk table
                    with header ``time,n_risk``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

TIME_UNITS = ("months", "years")


@dataclass(frozen=True)
class SurvivalRecord:
    """One observed (time, event-indicator) record."""

    time: float
    event: int
    age: int | None = None
    sex: str | None = None
    group: str = ""

    def __post_init__(self):
        object.__setattr__(self, "time", float(self.time))
        object.__setattr__(self, "event", int(self.event))
        if not (np.isfinite(self.time) and self.time > 0.0):
            raise ValueError(f"time must be finite and > 0, got {self.time}")
        if self.event not in (0, 1):
            raise ValueError(f"event must be 0 or 1, got {self.event}")
        if self.sex is not None and self.sex not in ("female", "male"):
            raise ValueError(f"sex must be 'female' or 'male', got {self.sex!r}")
        if self.age is not None and self.age < 0:
            raise ValueError(f"age must be >= 0, got {self.age}")


@dataclass(frozen=True)
class SurvivalDataset:
    """A nonempty collection of records sharing one time unit."""

    records: tuple[SurvivalRecord, ...]
    time_unit: str = "months"

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        if len(self.records) == 0:
            raise ValueError("dataset must contain at least one record")
        if self.time_unit not in TIME_UNITS:
            raise ValueError(f"time_unit must be one of {TIME_UNITS}, got {self.time_unit!r}")

    def __len__(self) -> int:
        return len(self.records)

    @property
    def times(self) -> np.ndarray:
        return np.array([r.time for r in self.records])

    @property
    def events(self) -> np.ndarray:
        return np.array([r.event for r in self.records])

    @property
    def n_events(self) -> int:
        return int(self.events.sum())

    def max_time(self) -> float:
        return float(self.times.max())


@dataclass(frozen=True)
class DigitizedCurve:
    """Coordinates read off a published survival plot, plus at-risk information."""

    times: tuple[float, ...]
    survival: tuple[float, ...]
    risk_table: tuple[tuple[float, int], ...] | None = None
    total_n: int | None = None

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        s = np.asarray(self.survival, dtype=float)
        if t.size == 0 or t.size != s.size:
            raise ValueError("times and survival must be equal-length and nonempty")
        if np.any(np.diff(t) <= 0.0):
            raise ValueError("digitized times must be strictly increasing")
        if np.any(np.diff(s) > 0.0):
            raise ValueError("survival probabilities must be nonincreasing in time")
        if np.any((s < 0.0) | (s > 1.0)):
            raise ValueError("survival probabilities must lie in [0, 1]")
        if self.risk_table is None and self.total_n is None:
            raise ValueError("either a risk table or total_n is required")
        if self.total_n is not None and self.total_n <= 0:
            raise ValueError(f"total_n must be positive, got {self.total_n}")


@dataclass(frozen=True)
class KaplanMeierCurve:
    """Product-limit estimate: one step per distinct event time."""

    times: np.ndarray
    survival: np.ndarray
    n_risk: np.ndarray = field(default_factory=lambda: np.array([]))

    def steps(self) -> list[tuple[float, float, int]]:
        return [
            (float(t), float(s), int(n))
            for t, s, n in zip(self.times, self.survival, self.n_risk)
        ]


# ---------------------------------------------------------------------------
# CSV ingestion
# ---------------------------------------------------------------------------


def load_survival_csv(path, time_unit: str = "months", group: str | None = None) -> SurvivalDataset:
    """Load and validate a survival CSV.

    Rows failing validation are reported with their 1-based row number.
    ``group`` optionally restricts the load to records with that group label.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"survival CSV not found: {path}")
    records = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(row for row in fh if not row.startswith("#"))
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        required = ["time", "event"]
        missing = [c for c in required if c not in header]
        if missing:
            raise ValueError(f"{path}: missing required columns {missing}")
        col = {name: header.index(name) for name in header}
        for i, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                time = float(row[col["time"]])
                event = int(row[col["event"]])
                age_raw = row[col["age"]] if "age" in col else ""
                sex_raw = row[col["sex"]] if "sex" in col else ""
                rec = SurvivalRecord(
                    time=time,
                    event=event,
                    age=int(age_raw) if age_raw else None,
                    sex=sex_raw if sex_raw else None,
                    group=row[col["group"]] if "group" in col else "",
                )
            except (ValueError, IndexError) as exc:
                raise ValueError(f"{path}: row {i}: {exc}") from None
            if group is None or rec.group == group:
                records.append(rec)
    if not records:
        raise ValueError(f"{path}: no usable records" + (f" for group {group!r}" if group else ""))
    return SurvivalDataset(tuple(records), time_unit=time_unit)


def write_survival_csv(path, data: SurvivalDataset, header_comment: str | None = None) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        writer = csv.writer(fh)
        writer.writerow(["time", "event", "age", "sex", "group"])
        for r in data.records:
            writer.writerow(
                [repr(r.time), r.event, "" if r.age is None else r.age, r.sex or "", r.group]
            )


def load_digitized_csv(path, risk_table_path=None, total_n: int | None = None) -> DigitizedCurve:
    """Load a digitized curve plus (optionally) its companion risk table."""

    def read_pairs(p, value_name):
        with open(p, newline="", encoding="utf-8") as fh:
            reader = csv.reader(row for row in fh if not row.startswith("#"))
            header = next(reader)
            for name in ("time", value_name):
                if name not in header:
                    raise ValueError(f"{p}: missing column {name!r}")
            it, iv = header.index("time"), header.index(value_name)
            return [(float(r[it]), float(r[iv])) for r in reader if r]

    pts = read_pairs(path, "survival")
    risk = None
    if risk_table_path is not None:
        risk = tuple((t, int(n)) for t, n in read_pairs(risk_table_path, "n_risk"))
    return DigitizedCurve(
        times=tuple(t for t, _ in pts),
        survival=tuple(s for _, s in pts),
        risk_table=risk,
        total_n=total_n,
    )


# ---------------------------------------------------------------------------
# empirical estimators
# ---------------------------------------------------------------------------


def kaplan_meier(data: SurvivalDataset) -> KaplanMeierCurve:
    """Product-limit estimator with a step at each distinct event time.

    Ties between events and censorings at the same instant are resolved with
    events first (the censored subjects are still at risk at their own time).
    """
    times = data.times
    events = data.events
    order = np.argsort(times, kind="stable")
    times, events = times[order], events[order]
    n = len(times)

    step_times, step_surv, step_risk = [], [], []
    surv = 1.0
    i = 0
    while i < n:
        t = times[i]
        j = i
        d = 0
        while j < n and times[j] == t:
            d += int(events[j])
            j += 1
        at_risk = n - i
        if d > 0:
            surv *= 1.0 - d / at_risk
            step_times.append(t)
            step_surv.append(surv)
            step_risk.append(at_risk)
        i = j
    return KaplanMeierCurve(
        times=np.asarray(step_times),
        survival=np.asarray(step_surv),
        n_risk=np.asarray(step_risk, dtype=int),
    )


def write_km_csv(path, curve: KaplanMeierCurve, header_comment: str | None = None) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if header_comment:
            fh.write(f"# {header_comment}\n")
        writer = csv.writer(fh)
        writer.writerow(["time", "survival", "n_risk"])
        for t, s, n in curve.steps():
            writer.writerow([repr(t), repr(s), n])


def load_km_csv(path) -> KaplanMeierCurve:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(row for row in fh if not row.startswith("#"))
        header = next(reader)
        if header[:2] != ["time", "survival"]:
            raise ValueError(f"{path}: not a Kaplan-Meier CSV")
        rows = [r for r in reader if r]
    return KaplanMeierCurve(
        times=np.array([float(r[0]) for r in rows]),
        survival=np.array([float(r[1]) for r in rows]),
        n_risk=np.array([int(r[2]) if len(r) > 2 and r[2] else 0 for r in rows]),
    )


def default_bandwidth(data: SurvivalDataset) -> float:
    """Rule-of-thumb kernel bandwidth: 1.5 * IQR(event times) * n^(-1/5)."""
    event_times = data.times[data.events == 1]
    if event_times.size == 0:
        return 1.0
    q75, q25 = np.percentile(event_times, [75, 25])
    iqr = q75 - q25
    if iqr <= 0.0:
        iqr = max(float(np.ptp(data.times)), 1.0)
    return float(1.5 * iqr * len(data) ** (-0.2))


def _epanechnikov_mass(a: np.ndarray) -> np.ndarray:
    """Integral of the Epanechnikov kernel over [-min(a,1), 1], a >= 0."""
    a = np.minimum(a, 1.0)
    return 0.5 + 0.75 * a - 0.25 * a**3


def empirical_hazard(data: SurvivalDataset, bandwidth: float, grid) -> np.ndarray:
    """Kernel-smoothed hazard on a grid.

    At grid point t the estimate is sum over event times of
    K_b(t - t_event) / n_at_risk(t_event), with an Epanechnikov kernel that is
    renormalized near t = 0 so the kernel mass lost below zero does not bias
    the estimate downward.
    """
    if bandwidth <= 0.0:
        raise ValueError(f"bandwidth must be > 0, got {bandwidth}")
    grid = np.asarray(grid, dtype=float)
    times = data.times
    events = data.events
    order = np.argsort(times, kind="stable")
    times, events = times[order], events[order]
    n = len(times)
    # at-risk count just before each observation
    n_at_risk = n - np.arange(n)

    est = np.zeros_like(grid)
    ev = events == 1
    if not np.any(ev):
        return est
    t_ev = times[ev]
    risk_ev = n_at_risk[ev].astype(float)
    u = (grid[:, None] - t_ev[None, :]) / bandwidth
    kern = np.where(np.abs(u) <= 1.0, 0.75 * (1.0 - u**2) / bandwidth, 0.0)
    est = (kern / risk_ev[None, :]).sum(axis=1)
    est /= _epanechnikov_mass(grid / bandwidth)
    return est


def nelson_aalen(data: SurvivalDataset, grid) -> np.ndarray:
    """Nelson-Aalen cumulative hazard evaluated on a grid."""
    times = data.times
    events = data.events
    order = np.argsort(times, kind="stable")
    times, events = times[order], events[order]
    n = len(times)
    increments, inc_times = [], []
    i = 0
    while i < n:
        t = times[i]
        j = i
        d = 0
        while j < n and times[j] == t:
            d += int(events[j])
            j += 1
        if d > 0:
            inc_times.append(t)
            increments.append(d / (n - i))
        i = j
    cum = np.cumsum(increments)
    idx = np.searchsorted(np.asarray(inc_times), np.asarray(grid, dtype=float), side="right")
    return np.concatenate([[0.0], cum])[idx]


# ---------------------------------------------------------------------------
# IPD reconstruction from digitized curves
# ---------------------------------------------------------------------------


def reconstruct_ipd(
    curve: DigitizedCurve, group: str = "", time_unit: str = "months"
) -> SurvivalDataset:
    """Rebuild individual (time, event) records consistent with a digitized curve.

    When the risk table covers every step time the allocation is exact: event
    counts follow from consecutive survival ratios and the at-risk counts, and
    the implied censorings are spread uniformly inside each interval, so the
    Kaplan-Meier estimate of the output reproduces the input step heights.
    With a sparse or absent risk table the per-interval event counts are
    rounded against a running at-risk count and censoring is deferred to the
    interval (or follow-up) end, which is approximate.
    """
    times = np.asarray(curve.times, dtype=float)
    surv = np.asarray(curve.survival, dtype=float)

    drops = surv < np.concatenate([[1.0], surv[:-1]])
    if curve.risk_table is not None:
        risk_times = np.asarray([t for t, _ in curve.risk_table])
        risk_n = np.asarray([n for _, n in curve.risk_table], dtype=int)
        if np.any(np.diff(risk_times) <= 0.0):
            raise ValueError("risk-table times must be strictly increasing")
        step_times = times[drops]
        if step_times.size == 0 or np.all(np.isin(step_times, risk_times)):
            return _reconstruct_exact(curve, group, time_unit)
        return _reconstruct_with_anchors(curve, risk_times, risk_n, group, time_unit)
    return _reconstruct_total_n_only(curve, group, time_unit)


def _spread(lo: float, hi: float, count: int) -> list[float]:
    """count times strictly inside (lo, hi), evenly spaced."""
    return [lo + (hi - lo) * (i + 1) / (count + 1) for i in range(count)]


def _reconstruct_exact(curve: DigitizedCurve, group: str, time_unit: str) -> SurvivalDataset:
    times = np.asarray(curve.times, dtype=float)
    surv = np.asarray(curve.survival, dtype=float)
    risk = dict(curve.risk_table)

    drops_idx = [k for k in range(times.size) if surv[k] < (surv[k - 1] if k else 1.0)]
    total = curve.total_n if curve.total_n is not None else int(curve.risk_table[0][1])
    records: list[SurvivalRecord] = []
    if not drops_idx:
        return SurvivalDataset(
            tuple(
                SurvivalRecord(time=float(times[-1]), event=0, group=group)
                for _ in range(total)
            ),
            time_unit=time_unit,
        )

    prev_s = 1.0
    prev_t = 0.0
    carry = total  # subjects still unaccounted for
    for pos, k in enumerate(drops_idx):
        t, s = times[k], surv[k]
        n_k = int(round(risk[t]))
        if n_k <= 0:
            raise ValueError(f"nonpositive at-risk count at time {t}")
        d_k = int(round(n_k * (1.0 - s / prev_s)))
        if d_k > n_k:
            raise ValueError(f"curve implies more events than at risk at time {t}")
        censored_before = carry - n_k
        if censored_before < 0:
            raise ValueError(f"risk table inconsistent at time {t}: {n_k} at risk, {carry} remain")
        for ct in _spread(prev_t, t, censored_before):
            records.append(SurvivalRecord(time=ct, event=0, group=group))
        records.extend(SurvivalRecord(time=t, event=1, group=group) for _ in range(d_k))
        carry = n_k - d_k
        prev_s = s
        prev_t = t
    # everyone still at risk after the last drop is censored at follow-up end
    end = float(times[-1])
    if end > prev_t:
        for ct in _spread(prev_t, end, carry):
            records.append(SurvivalRecord(time=ct, event=0, group=group))
    else:
        records.extend(SurvivalRecord(time=end, event=0, group=group) for _ in range(carry))
    return SurvivalDataset(tuple(records), time_unit=time_unit)


def _reconstruct_total_n_only(curve: DigitizedCurve, group: str, time_unit: str) -> SurvivalDataset:
    times = np.asarray(curve.times, dtype=float)
    surv = np.asarray(curve.survival, dtype=float)
    n_r = int(curve.total_n)
    records: list[SurvivalRecord] = []
    prev_s = 1.0
    for t, s in zip(times, surv):
        if n_r <= 0:
            break
        d = int(round(n_r * (1.0 - s / prev_s))) if prev_s > 0 else 0
        d = min(d, n_r)
        records.extend(SurvivalRecord(time=float(t), event=1, group=group) for _ in range(d))
        if d > 0:
            prev_s = prev_s * (1.0 - d / n_r)
        n_r -= d
    records.extend(
        SurvivalRecord(time=float(times[-1]), event=0, group=group) for _ in range(n_r)
    )
    return SurvivalDataset(tuple(records), time_unit=time_unit)


def _reconstruct_with_anchors(
    curve: DigitizedCurve,
    risk_times: np.ndarray,
    risk_n: np.ndarray,
    group: str,
    time_unit: str,
) -> SurvivalDataset:
    """Sparse risk table: allocate events inside each anchor interval, then
    censor whatever the next anchor says is gone.  Censorings are placed just
    before the next anchor so the within-interval event accounting stays exact.
    """
    times = np.asarray(curve.times, dtype=float)
    surv = np.asarray(curve.survival, dtype=float)
    records: list[SurvivalRecord] = []

    n_r = int(risk_n[0])
    prev_s = 1.0
    anchor_idx = 0
    for t, s in zip(times, surv):
        while anchor_idx + 1 < risk_times.size and t >= risk_times[anchor_idx + 1]:
            anchor_idx += 1
            target = int(risk_n[anchor_idx])
            c = n_r - target
            if c < 0:
                raise ValueError(
                    f"risk table inconsistent at time {risk_times[anchor_idx]}: "
                    f"{target} at risk but only {n_r} remain"
                )
            for ct in _spread(
                risk_times[anchor_idx - 1], risk_times[anchor_idx], c
            ):
                records.append(SurvivalRecord(time=ct, event=0, group=group))
            n_r = target
        if n_r <= 0:
            break
        d = int(round(n_r * (1.0 - s / prev_s))) if prev_s > 0 else 0
        d = min(d, n_r)
        if d > 0:
            records.extend(SurvivalRecord(time=float(t), event=1, group=group) for _ in range(d))
            prev_s = prev_s * (1.0 - d / n_r)
            n_r -= d
    records.extend(
        SurvivalRecord(time=float(times[-1]), event=0, group=group) for _ in range(n_r)
    )
    return SurvivalDataset(tuple(records), time_unit=time_unit)
