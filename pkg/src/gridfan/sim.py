"""Scenario definition, disturbance scheduling and the coupled time loop
reproducing the three-case frequency-regulation experiment.

Each step reads the frequency, forms the AGC and ancillary commands from it,
holds them over the step (zero-order hold) and advances the plant one RK4
step. The saturated ancillary command can be applied instantaneously, through
a first-order actuation lag, or through an identified fan model running at
its own sample period.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .grid import (
    AgcIntegrator,
    GridParameters,
    SignalBus,
    ancillary_power,
    build_closed_loop,
)
from .linsys import TransferFunction, _rk4_update, realize, step_rk4
from .sysid import ArxModel

ANCILLARY_MODES = ("off", "ideal", "lagged", "arx")

# Hard cap from the integrator guidance: dt <= min(time constants)/20 and
# never above 0.01 s.
DT_CEILING = 0.01
DEFAULT_DT = 0.005
DEFAULT_HORIZON = 50.0
DIVERGENCE_LIMIT = 1.0  # |omega - omega_des| beyond this aborts the run


class SimulationDiverged(RuntimeError):
    """Raised when the frequency deviation exceeds the divergence limit.

    Carries the time of the blow-up and the trajectory recorded so far.
    """

    def __init__(self, message: str, time: float, partial: "Trajectory"):
        super().__init__(message)
        self.time = time
        self.partial = partial


@dataclass(frozen=True)
class DisturbanceSchedule:
    """Sum of rectangular load pulses (t_start, t_end, magnitude p.u.)."""

    steps: tuple[tuple[float, float, float], ...] = ()

    def __post_init__(self):
        steps = tuple((float(a), float(b), float(m)) for a, b, m in self.steps)
        object.__setattr__(self, "steps", steps)
        for start, end, _ in steps:
            if not start < end:
                raise ValueError(f"pulse start {start} must precede end {end}")


def evaluate_disturbance(schedule: DisturbanceSchedule, t: float) -> float:
    """Load deviation at time t; pulses are right-continuous, active on
    [t_start, t_end)."""
    if t < 0:
        raise ValueError("time must be >= 0")
    return sum(m for start, end, m in schedule.steps if start <= t < end)


@dataclass(frozen=True)
class Scenario:
    grid: GridParameters
    schedule: DisturbanceSchedule
    horizon: float = DEFAULT_HORIZON
    dt: float = DEFAULT_DT
    ancillary_mode: str = "off"
    lag_time_constant: float = 1.0  # actuation lag for mode "lagged", s
    arx_model: Optional[ArxModel] = None
    arx_kw_per_pu: float = 24.0  # fan-power swing representing 1 p.u. command
    label: str = "scenario"

    def __post_init__(self):
        if self.ancillary_mode not in ANCILLARY_MODES:
            raise ValueError(
                f"ancillary_mode must be one of {ANCILLARY_MODES}, "
                f"got {self.ancillary_mode!r}"
            )
        if not 0 < self.dt <= self.horizon:
            raise ValueError(f"need 0 < dt <= horizon, got dt={self.dt}, horizon={self.horizon}")
        cap = min(DT_CEILING, self.grid.min_time_constant() / 20.0)
        if self.ancillary_mode == "lagged":
            if not self.lag_time_constant > 0:
                raise ValueError("lag_time_constant must be positive")
            cap = min(cap, self.lag_time_constant / 20.0)
        if self.dt > cap + 1e-15:
            raise ValueError(
                f"dt={self.dt} too coarse for the plant's fastest lag; "
                f"need dt <= {cap:g}"
            )
        if self.ancillary_mode == "arx":
            if self.arx_model is None:
                raise ValueError("ancillary_mode 'arx' requires arx_model")
            if self.arx_model.sample_period < self.dt:
                raise ValueError("fan model sample period must be >= dt")
            if not self.arx_kw_per_pu > 0:
                raise ValueError("arx_kw_per_pu must be positive")


@dataclass(frozen=True)
class TrajectorySummary:
    max_abs_freq_dev: float
    peak_time: float
    settling_time: float  # last excursion beyond 10% of the peak deviation
    integral_abs_freq_dev: float
    ancillary_energy: float
    final_freq_dev: float


@dataclass
class Trajectory:
    """Sampled signal bus, one row per integration step including t=0."""

    label: str
    dt: float
    omega_des: float
    damping: float
    t: np.ndarray
    omega: np.ndarray
    delta_pd: np.ndarray
    delta_pc: np.ndarray
    p_anc: np.ndarray
    p_gv: np.ndarray
    delta_pm: np.ndarray

    def freq_deviation(self) -> np.ndarray:
        return self.omega - self.omega_des

    def bus_at(self, k: int) -> SignalBus:
        """Signal bus at step k. The generation increase follows from the
        power balance: what the machine delivers electrically is the load
        change plus damping draw minus the ancillary injection."""
        dev = self.omega[k] - self.omega_des
        return SignalBus(
            delta_PD=float(self.delta_pd[k]),
            delta_PC=float(self.delta_pc[k]),
            P_anc=float(self.p_anc[k]),
            omega=float(self.omega[k]),
            P_GV=float(self.p_gv[k]),
            delta_PM=float(self.delta_pm[k]),
            delta_PG=float(self.delta_pd[k] - self.p_anc[k] + self.damping * dev),
        )

    def summary(self) -> TrajectorySummary:
        """Recompute summary statistics from the samples."""
        dev = self.freq_deviation()
        peak = int(np.argmax(np.abs(dev)))
        # The held command on step k acts over [t_k, t_k + dt), so the plain
        # dt-weighted sum is the exact integral of the applied signal.
        energy = float(np.sum(self.p_anc[:-1]) * self.dt)
        mag = np.abs(dev)
        integral = float(self.dt * (np.sum(mag) - 0.5 * (mag[0] + mag[-1])))
        band = 0.1 * mag[peak]
        outside = np.nonzero(mag > band)[0]
        settling = float(self.t[outside[-1]]) if len(outside) else 0.0
        return TrajectorySummary(
            max_abs_freq_dev=float(mag[peak]),
            peak_time=float(self.t[peak]),
            settling_time=settling,
            integral_abs_freq_dev=integral,
            ancillary_energy=energy,
            final_freq_dev=float(dev[-1]),
        )


class _IdealPath:
    def apply(self, command: float, _dt: float) -> float:
        return command


class _LaggedPath:
    """First-order actuation lag 1/(1 + delta*s) between command and injection."""

    def __init__(self, delta: float):
        self.model = realize(TransferFunction((1.0,), (1.0, delta)))
        self.state = self.model.zero_state()

    def apply(self, command: float, dt: float) -> float:
        applied = float((self.model.C @ self.state)[0])
        self.state, _ = step_rk4(self.model, self.state, np.array([command]), dt)
        return applied


class _ArxPath:
    """Route the command through the identified fan dynamics.

    The per-unit command is converted to a set-point deviation via the
    inverted static gain of the fan model, run through the ARX difference
    equation at the model's own sample period, and the resulting power
    deviation converted back to per-unit. At DC the injection equals the
    command; the fan dynamics shape the transient.
    """

    def __init__(self, model: ArxModel, kw_per_pu: float, dt: float):
        gain = model.dc_gain()
        if gain == 0.0 or not math.isfinite(gain):
            raise ValueError("fan model static gain must be finite and nonzero")
        self.model = model
        self.kw_per_pu = kw_per_pu
        self.gain = gain
        self.steps_per_sample = max(1, int(round(model.sample_period / dt)))
        self._countdown = 0
        hist = max(model.na, model.nk + model.nb) + 1
        self.u_hist = [0.0] * hist
        self.y_hist = [0.0] * hist
        self.applied = 0.0

    def apply(self, command: float, _dt: float) -> float:
        if self._countdown == 0:
            u_new = command * self.kw_per_pu / self.gain
            y_new = 0.0
            for i in range(1, self.model.na + 1):
                y_new -= self.model.a[i - 1] * self.y_hist[-i]
            for j in range(1, self.model.nb + 1):
                y_new += self.model.b[j - 1] * self.u_hist[-(self.model.nk + j)]
            self.u_hist = self.u_hist[1:] + [u_new]
            self.y_hist = self.y_hist[1:] + [y_new]
            self.applied = y_new / self.kw_per_pu
            self._countdown = self.steps_per_sample
        self._countdown -= 1
        return self.applied


def _make_ancillary_path(s: Scenario):
    if s.ancillary_mode == "ideal":
        return _IdealPath()
    if s.ancillary_mode == "lagged":
        return _LaggedPath(s.lag_time_constant)
    if s.ancillary_mode == "arx":
        return _ArxPath(s.arx_model, s.arx_kw_per_pu, s.dt)
    return None


def run_scenario(s: Scenario) -> Trajectory:
    """Integrate one scenario and record the full signal bus.

    Deterministic: repeated runs produce bit-identical trajectories.
    Raises SimulationDiverged (with the partial trajectory attached) if the
    frequency deviation leaves the +/-1 p.u. band.
    """
    p = s.grid
    plant = build_closed_loop(p)
    x = plant.zero_state()
    n_steps = int(round(s.horizon / s.dt))

    t_grid = np.arange(n_steps + 1) * s.dt
    omega = np.empty(n_steps + 1)
    delta_pd = np.empty(n_steps + 1)
    delta_pc = np.empty(n_steps + 1)
    p_anc = np.empty(n_steps + 1)
    p_gv = np.empty(n_steps + 1)
    delta_pm = np.empty(n_steps + 1)

    agc = AgcIntegrator(p) if p.agc_enabled else None
    path = _make_ancillary_path(s)
    c_omega = plant.C[0]
    c_aux = plant.C[1:]
    d_aux = plant.D[1:]

    def partial(k: int) -> Trajectory:
        return Trajectory(
            s.label, s.dt, p.omega_des, p.D, t_grid[:k], omega[:k],
            delta_pd[:k], delta_pc[:k], p_anc[:k], p_gv[:k], delta_pm[:k],
        )

    for k in range(n_steps + 1):
        t = t_grid[k]
        dev = float(c_omega @ x)
        w = p.omega_des + dev
        if abs(dev) > DIVERGENCE_LIMIT:
            raise SimulationDiverged(
                f"frequency deviation {dev:.3g} p.u. exceeded "
                f"{DIVERGENCE_LIMIT} p.u. at t={t:.3f} s in scenario "
                f"{s.label!r}; aborting",
                time=float(t),
                partial=partial(k),
            )
        pc = agc.update(w, s.dt) if agc is not None else 0.0
        if path is None:
            anc = 0.0
        else:
            anc = path.apply(ancillary_power(w, p), s.dt)
        pd = evaluate_disturbance(s.schedule, t)
        u = np.array([pd, pc, anc])
        aux = c_aux @ x + d_aux @ u

        omega[k] = w
        delta_pd[k] = pd
        delta_pc[k] = pc
        p_anc[k] = anc
        p_gv[k] = aux[0]
        delta_pm[k] = aux[1]

        if k < n_steps:
            # same arithmetic as step_rk4; the per-step finiteness check is
            # covered by the divergence guard above
            x = _rk4_update(plant.A, plant.B, x, u, s.dt)

    return partial(n_steps + 1)


@dataclass(frozen=True)
class ComparisonRow:
    label: str
    summary: TrajectorySummary


@dataclass(frozen=True)
class ComparisonTable:
    rows: tuple[ComparisonRow, ...]
    by_max_abs_dev: tuple[str, ...]  # labels, smallest peak deviation first
    by_integral_abs_dev: tuple[str, ...]

    def row(self, label: str) -> ComparisonRow:
        for r in self.rows:
            if r.label == label:
                return r
        raise KeyError(label)


_PLANT_FIELDS = (
    "M", "D", "T1", "T2", "T3", "T4", "T5", "T6", "T7",
    "K1", "K2", "K3", "K4", "R", "omega_des",
)


def compare_scenarios(scenarios: Sequence[Scenario]) -> tuple[ComparisonTable, list[Trajectory]]:
    """Run a scenario family and tabulate aligned summary metrics.

    All scenarios must share horizon, dt and the physical plant parameters;
    controller settings (gains, bounds, modes) are what the family varies.
    """
    if len(scenarios) < 2:
        raise ValueError("need at least two scenarios to compare")
    labels = [s.label for s in scenarios]
    if len(set(labels)) != len(labels):
        raise ValueError("scenario labels must be unique")
    ref = scenarios[0]
    for s in scenarios[1:]:
        if s.horizon != ref.horizon or s.dt != ref.dt:
            raise ValueError("scenarios must share horizon and dt")
        for name in _PLANT_FIELDS:
            if getattr(s.grid, name) != getattr(ref.grid, name):
                raise ValueError(
                    f"mismatched grids: plant parameter {name} differs "
                    f"between {ref.label!r} and {s.label!r}"
                )
    trajectories = [run_scenario(s) for s in scenarios]
    rows = tuple(
        ComparisonRow(traj.label, traj.summary()) for traj in trajectories
    )
    by_max = tuple(
        r.label for r in sorted(rows, key=lambda r: r.summary.max_abs_freq_dev)
    )
    by_integral = tuple(
        r.label for r in sorted(rows, key=lambda r: r.summary.integral_abs_freq_dev)
    )
    return ComparisonTable(rows, by_max, by_integral), trajectories


# ---------------------------------------------------------------------------
# CSV emission (full double precision so reproduction hashes are stable)
# ---------------------------------------------------------------------------

TRAJECTORY_COLUMNS = ("t", "omega", "delta_PD", "delta_PC", "P_anc", "P_GV", "delta_PM")


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def write_trajectory_csv(traj: Trajectory, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(TRAJECTORY_COLUMNS) + "\n")
        for k in range(len(traj.t)):
            row = (
                traj.t[k], traj.omega[k], traj.delta_pd[k], traj.delta_pc[k],
                traj.p_anc[k], traj.p_gv[k], traj.delta_pm[k],
            )
            fh.write(",".join(_fmt(v) for v in row) + "\n")


COMPARISON_COLUMNS = (
    "label",
    "max_abs_freq_dev",
    "peak_time",
    "settling_time",
    "integral_abs_freq_dev",
    "ancillary_energy",
    "final_freq_dev",
    "rank_by_max_abs_dev",
    "rank_by_integral_abs_dev",
)


def write_comparison_csv(table: ComparisonTable, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(COMPARISON_COLUMNS) + "\n")
        for r in table.rows:
            s = r.summary
            fh.write(
                ",".join(
                    [
                        r.label,
                        _fmt(s.max_abs_freq_dev),
                        _fmt(s.peak_time),
                        _fmt(s.settling_time),
                        _fmt(s.integral_abs_freq_dev),
                        _fmt(s.ancillary_energy),
                        _fmt(s.final_freq_dev),
                        str(table.by_max_abs_dev.index(r.label) + 1),
                        str(table.by_integral_abs_dev.index(r.label) + 1),
                    ]
                )
                + "\n"
            )
