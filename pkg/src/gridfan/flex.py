"""Fleet-level flexibility arithmetic and demand-response event analytics.

Scaling logic: one instrumented building's fast fan-power swing is turned
into a per-square-foot flexibility density and extrapolated over the national
commercial floor area, discounted by the fraction of buildings whose fans sit
behind variable-frequency drives.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

W_PER_KW = 1000.0
KW_PER_GW = 1.0e6


@dataclass(frozen=True)
class FleetAssumptions:
    per_building_swing_kw: float = 24.0  # fast fan-power swing of the reference building
    building_floor_area_ft2: float = 141_000.0
    national_floor_area_ft2: float = 72.0e9
    vfd_fraction: float = 0.30
    response_time_s: float = 1.0
    published_estimate_gw: Optional[float] = None  # literature figure to echo, if any

    def __post_init__(self):
        if self.per_building_swing_kw < 0:
            raise ValueError("swing must be >= 0")
        if not self.building_floor_area_ft2 > 0 or not self.national_floor_area_ft2 > 0:
            raise ValueError("floor areas must be positive")
        if not 0.0 <= self.vfd_fraction <= 1.0:
            raise ValueError("vfd_fraction must lie in [0, 1]")
        if self.response_time_s < 0:
            raise ValueError("response time must be >= 0")


def flexibility_density(assumptions: FleetAssumptions) -> float:
    """Fast-response flexibility per square foot, in W/ft^2."""
    return (
        assumptions.per_building_swing_kw
        * W_PER_KW
        / assumptions.building_floor_area_ft2
    )


@dataclass(frozen=True)
class CapacityReport:
    gigawatts: float
    density_w_per_ft2: float
    assumptions: FleetAssumptions
    published_estimate_gw: Optional[float]
    discrepancy_note: Optional[str]

    def lines(self) -> list[str]:
        a = self.assumptions
        out = [
            "fast ancillary capacity from commercial-building supply fans",
            f"  per-building swing:      {a.per_building_swing_kw:g} kW "
            f"(response time ~{a.response_time_s:g} s)",
            f"  reference floor area:    {a.building_floor_area_ft2:g} ft^2",
            f"  flexibility density:     {self.density_w_per_ft2:.5f} W/ft^2",
            f"  national floor area:     {a.national_floor_area_ft2:g} ft^2",
            f"  VFD-equipped fraction:   {a.vfd_fraction:g}",
            f"  estimated capacity:      {self.gigawatts:.4f} GW",
        ]
        if self.published_estimate_gw is not None:
            out.append(
                f"  published estimate:      {self.published_estimate_gw:g} GW"
            )
        if self.discrepancy_note:
            out.append(f"  note: {self.discrepancy_note}")
        return out


def national_capacity(assumptions: FleetAssumptions) -> CapacityReport:
    """Extrapolate the density over the national stock, in GW.

    The computed value is reported as-is; when the configuration carries a
    published estimate the report echoes it and flags any gap beyond rounding
    instead of adjusting inputs to match.
    """
    density = flexibility_density(assumptions)
    kw = (
        density
        * assumptions.national_floor_area_ft2
        * assumptions.vfd_fraction
        / W_PER_KW
    )
    gw = kw / KW_PER_GW
    note = None
    published = assumptions.published_estimate_gw
    if published is not None and abs(gw - published) > 0.05:
        note = (
            f"computed {gw:.2f} GW differs from the published {published:g} GW; "
            "the published figure presumably rounds or assumes a different "
            "VFD share, inputs reported above are used verbatim"
        )
    return CapacityReport(
        gigawatts=gw,
        density_w_per_ft2=density,
        assumptions=assumptions,
        published_estimate_gw=published,
        discrepancy_note=note,
    )


def swing_fraction(nominal_kw: float, swing_kw: float) -> float:
    """Swing as a percentage of nominal draw."""
    if not nominal_kw > 0:
        raise ValueError("nominal power must be positive")
    return 100.0 * swing_kw / nominal_kw


# ---------------------------------------------------------------------------
# Demand-response event analytics
# ---------------------------------------------------------------------------

DEFAULT_BASELINE_HOURS = 2.0  # baseline window preceding the event when unspecified
MIN_WINDOW_SAMPLES = 10


@dataclass(frozen=True)
class TimeSeries:
    """Timestamped power telemetry (epoch seconds, kW)."""

    timestamps: tuple[float, ...]
    values_kw: tuple[float, ...]

    def __post_init__(self):
        ts = tuple(float(t) for t in self.timestamps)
        vs = tuple(float(v) for v in self.values_kw)
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "values_kw", vs)
        if len(ts) != len(vs):
            raise ValueError("timestamps and values must have equal length")
        if len(ts) < 2:
            raise ValueError("series needs at least two samples")
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise ValueError("timestamps must be strictly increasing")

    def window_values(self, start: float, end: float) -> np.ndarray:
        t = np.asarray(self.timestamps)
        mask = (t >= start) & (t < end)
        return np.asarray(self.values_kw)[mask]


@dataclass(frozen=True)
class DrEvent:
    series: TimeSeries
    event_window: tuple[float, float]
    baseline_window: Optional[tuple[float, float]] = None

    def __post_init__(self):
        start, end = self.event_window
        if not start < end:
            raise ValueError("event window start must precede end")
        baseline = self.baseline_window
        if baseline is None:
            baseline = (start - DEFAULT_BASELINE_HOURS * 3600.0, start)
            object.__setattr__(self, "baseline_window", baseline)
        b0, b1 = baseline
        if not b0 < b1:
            raise ValueError("baseline window start must precede end")
        if b1 > start and b0 < end:
            raise ValueError("baseline and event windows must not overlap")
        lo, hi = self.series.timestamps[0], self.series.timestamps[-1]
        for w0, w1 in (baseline, self.event_window):
            if w1 <= lo or w0 > hi:
                raise ValueError(
                    f"window [{w0}, {w1}) lies outside the series span [{lo}, {hi}]"
                )


@dataclass(frozen=True)
class DrReport:
    baseline_mean_kw: float
    event_mean_kw: float
    drop_kw: float
    percent_drop: float
    event_hours: float
    energy_saved_kwh: float

    def lines(self) -> list[str]:
        return [
            "demand-response event analysis",
            f"  baseline mean:  {self.baseline_mean_kw:.3f} kW",
            f"  event mean:     {self.event_mean_kw:.3f} kW",
            f"  absolute drop:  {self.drop_kw:.3f} kW",
            f"  relative drop:  {self.percent_drop:.2f} %",
            f"  event length:   {self.event_hours:.3f} h",
            f"  energy saved:   {self.energy_saved_kwh:.3f} kWh",
        ]


def analyze_dr_event(event: DrEvent) -> DrReport:
    """Mean-over-window comparison of the event against its baseline."""
    base = event.series.window_values(*event.baseline_window)
    during = event.series.window_values(*event.event_window)
    for name, vals in (("baseline", base), ("event", during)):
        if len(vals) < MIN_WINDOW_SAMPLES:
            raise ValueError(
                f"{name} window holds {len(vals)} samples, "
                f"need at least {MIN_WINDOW_SAMPLES}"
            )
    baseline_mean = float(np.mean(base))
    event_mean = float(np.mean(during))
    if baseline_mean == 0.0:
        raise ValueError("baseline mean is zero; percent drop undefined")
    drop = baseline_mean - event_mean
    hours = (event.event_window[1] - event.event_window[0]) / 3600.0
    return DrReport(
        baseline_mean_kw=baseline_mean,
        event_mean_kw=event_mean,
        drop_kw=drop,
        percent_drop=100.0 * drop / baseline_mean,
        event_hours=hours,
        energy_saved_kwh=drop * hours,
    )
