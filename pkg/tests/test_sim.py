import csv

import numpy as np
import pytest

from gridfan.grid import reference_parameters
from gridfan.sim import (
    DisturbanceSchedule,
    Scenario,
    SimulationDiverged,
    TRAJECTORY_COLUMNS,
    compare_scenarios,
    evaluate_disturbance,
    run_scenario,
    write_trajectory_csv,
)
from gridfan.sysid import ArxModel

TWO_PULSES = DisturbanceSchedule(((10.0, 20.0, 0.5), (30.0, 40.0, -1.0)))


def reference_cases(horizon=50.0, dt=0.005):
    base = reference_parameters()
    return [
        Scenario(grid=base, schedule=TWO_PULSES, horizon=horizon, dt=dt,
                 ancillary_mode="off", label="no-ancillary"),
        Scenario(grid=base.with_ancillary(45.0, 0.3), schedule=TWO_PULSES,
                 horizon=horizon, dt=dt, ancillary_mode="ideal", label="bound-0.3"),
        Scenario(grid=base.with_ancillary(45.0, 0.6), schedule=TWO_PULSES,
                 horizon=horizon, dt=dt, ancillary_mode="ideal", label="bound-0.6"),
    ]


# --- disturbance schedule ------------------------------------------------------


def test_pulse_active_inside_window():
    schedule = DisturbanceSchedule(((10.0, 20.0, 0.5),))
    assert evaluate_disturbance(schedule, 15.0) == 0.5


def test_pulse_edges_right_continuous():
    schedule = DisturbanceSchedule(((10.0, 20.0, 0.5),))
    assert evaluate_disturbance(schedule, 10.0) == 0.5
    assert evaluate_disturbance(schedule, 20.0) == 0.0


def test_overlapping_pulses_superpose():
    schedule = DisturbanceSchedule(((10.0, 20.0, 0.5), (15.0, 25.0, -1.0)))
    assert evaluate_disturbance(schedule, 17.0) == -0.5


def test_pulse_ordering_validated():
    with pytest.raises(ValueError):
        DisturbanceSchedule(((20.0, 10.0, 0.5),))


def test_negative_time_rejected():
    with pytest.raises(ValueError):
        evaluate_disturbance(DisturbanceSchedule(()), -1.0)


# --- scenario validation ---------------------------------------------------------


def test_dt_exceeding_horizon_rejected(ref_params):
    with pytest.raises(ValueError, match="horizon"):
        Scenario(grid=ref_params, schedule=DisturbanceSchedule(()),
                 horizon=0.001, dt=0.005)


def test_dt_coarser_than_fastest_lag_rejected(ref_params):
    with pytest.raises(ValueError, match="dt"):
        Scenario(grid=ref_params, schedule=DisturbanceSchedule(()),
                 horizon=10.0, dt=0.008)  # min lag 0.1 s -> cap 0.005


def test_unknown_mode_rejected(ref_params):
    with pytest.raises(ValueError, match="ancillary_mode"):
        Scenario(grid=ref_params, schedule=DisturbanceSchedule(()),
                 horizon=10.0, dt=0.005, ancillary_mode="magic")


def test_arx_mode_requires_model(ref_params):
    with pytest.raises(ValueError, match="arx_model"):
        Scenario(grid=ref_params, schedule=DisturbanceSchedule(()),
                 horizon=10.0, dt=0.005, ancillary_mode="arx")


# --- run_scenario ------------------------------------------------------------------


def test_empty_schedule_keeps_bus_identically_zero(ref_params):
    scenario = Scenario(grid=ref_params, schedule=DisturbanceSchedule(()),
                        horizon=2.0, dt=0.005, ancillary_mode="ideal",
                        label="flat")
    traj = run_scenario(scenario)
    assert np.all(traj.freq_deviation() == 0.0)
    assert np.all(traj.p_anc == 0.0)
    assert np.all(traj.delta_pm == 0.0)


def test_droop_only_plateau_against_closed_form(ref_params):
    # disturbance held for 60 s so the slowest mode (about 5 s) dies out
    schedule = DisturbanceSchedule(((10.0, 200.0, 0.5),))
    scenario = Scenario(grid=ref_params, schedule=schedule, horizon=70.0,
                        dt=0.005, ancillary_mode="off", label="plateau")
    traj = run_scenario(scenario)
    assert traj.freq_deviation()[-1] == pytest.approx(-0.024967, abs=1e-4)


def test_unsaturated_case_plateau_against_closed_form():
    p = reference_parameters().with_ancillary(45.0, 0.6)
    schedule = DisturbanceSchedule(((10.0, 200.0, 0.5),))
    scenario = Scenario(grid=p, schedule=schedule, horizon=70.0, dt=0.005,
                        ancillary_mode="ideal", label="unsat")
    traj = run_scenario(scenario)
    assert traj.freq_deviation()[-1] == pytest.approx(-0.007688, abs=1e-4)
    # injection stayed inside the bound the whole run
    assert np.max(np.abs(traj.p_anc)) < 0.6


def test_determinism_bit_identical_runs():
    scenario = reference_cases()[1]
    a = run_scenario(scenario)
    b = run_scenario(scenario)
    assert np.array_equal(a.omega, b.omega)
    assert np.array_equal(a.p_anc, b.p_anc)


def test_divergence_aborts_with_partial_trajectory():
    # inertia a hundred times too small destabilizes the droop loop
    p = reference_parameters(M=1.326)
    schedule = DisturbanceSchedule(((1.0, 100.0, 0.5),))
    scenario = Scenario(grid=p, schedule=schedule, horizon=60.0, dt=0.005,
                        label="unstable")
    with pytest.raises(SimulationDiverged) as err:
        run_scenario(scenario)
    assert err.value.time > 0.0
    assert len(err.value.partial.omega) > 0


def test_lagged_mode_reaches_same_plateau_as_ideal():
    p = reference_parameters().with_ancillary(45.0, 0.6)
    schedule = DisturbanceSchedule(((5.0, 200.0, 0.5),))
    lagged = Scenario(grid=p, schedule=schedule, horizon=80.0, dt=0.005,
                      ancillary_mode="lagged", lag_time_constant=1.0,
                      label="lagged")
    traj = run_scenario(lagged)
    assert traj.freq_deviation()[-1] == pytest.approx(-0.007688, abs=1e-4)


def test_arx_mode_static_fan_model_matches_ideal_plateau():
    # unit-delay fan model with static gain 15 kW/inch: at steady state the
    # routed injection equals the commanded one
    model = ArxModel(na=0, nb=1, nk=0, theta=(15.0,), sample_period=0.005)
    p = reference_parameters().with_ancillary(45.0, 0.6)
    schedule = DisturbanceSchedule(((5.0, 200.0, 0.5),))
    scenario = Scenario(grid=p, schedule=schedule, horizon=70.0, dt=0.005,
                        ancillary_mode="arx", arx_model=model,
                        arx_kw_per_pu=24.0, label="arx")
    traj = run_scenario(scenario)
    assert traj.freq_deviation()[-1] == pytest.approx(-0.007688, abs=1e-4)


def test_sign_symmetry_of_unclipped_loop():
    base = reference_parameters().with_ancillary(45.0, 0.6)
    up = DisturbanceSchedule(((10.0, 20.0, 0.2),))
    down = DisturbanceSchedule(((10.0, 20.0, -0.2),))
    t_up = run_scenario(Scenario(grid=base, schedule=up, horizon=30.0,
                                 dt=0.005, ancillary_mode="ideal", label="up"))
    t_down = run_scenario(Scenario(grid=base, schedule=down, horizon=30.0,
                                   dt=0.005, ancillary_mode="ideal", label="down"))
    assert np.max(np.abs(t_up.freq_deviation() + t_down.freq_deviation())) <= 1e-9


def test_step_halving_convergence_droop_case():
    cases = {dt: run_scenario(Scenario(
        grid=reference_parameters(), schedule=TWO_PULSES, horizon=50.0,
        dt=dt, ancillary_mode="off", label="ref")) for dt in (0.005, 0.0025)}
    peaks = {dt: t.summary().max_abs_freq_dev for dt, t in cases.items()}
    assert abs(peaks[0.005] - peaks[0.0025]) < 1e-6


def test_energy_bookkeeping_consistent():
    traj = run_scenario(reference_cases()[2])
    summary = traj.summary()
    manual = float(np.sum(traj.p_anc[:-1]) * traj.dt)
    assert summary.ancillary_energy == manual


def test_summary_recomputable_from_samples():
    traj = run_scenario(reference_cases()[1])
    s1 = traj.summary()
    s2 = traj.summary()
    assert s1 == s2
    dev = np.abs(traj.freq_deviation())
    assert s1.max_abs_freq_dev == dev.max()
    assert 0.0 < s1.settling_time <= traj.t[-1]


def test_bus_accessor_power_balance():
    p = reference_parameters().with_ancillary(45.0, 0.3)
    schedule = DisturbanceSchedule(((10.0, 1000.0, 0.5),))
    traj = run_scenario(Scenario(grid=p, schedule=schedule, horizon=70.0,
                                 dt=0.005, ancillary_mode="ideal", label="hold"))
    bus = traj.bus_at(len(traj.t) - 1)
    assert bus.delta_PD == 0.5
    assert bus.P_anc == 0.3  # saturated
    assert bus.delta_PG == pytest.approx(
        0.5 - 0.3 + traj.damping * (bus.omega - 1.0), rel=1e-12
    )
    # at steady state the inertia absorbs nothing: generation increase
    # equals the mechanical power deviation
    assert bus.delta_PG == pytest.approx(bus.delta_PM, abs=1e-5)


# --- comparisons ------------------------------------------------------------------


def test_three_cases_strictly_improve():
    table, _ = compare_scenarios(reference_cases())
    by_label = {r.label: r.summary for r in table.rows}
    peaks = [by_label[k].max_abs_freq_dev for k in
             ("no-ancillary", "bound-0.3", "bound-0.6")]
    integrals = [by_label[k].integral_abs_freq_dev for k in
                 ("no-ancillary", "bound-0.3", "bound-0.6")]
    assert peaks[0] > peaks[1] > peaks[2]
    assert integrals[0] > integrals[1] > integrals[2]
    assert table.by_max_abs_dev == ("bound-0.6", "bound-0.3", "no-ancillary")


def test_identical_scenarios_give_identical_metrics():
    base = reference_cases()[1]
    clone = Scenario(grid=base.grid, schedule=base.schedule, horizon=base.horizon,
                     dt=base.dt, ancillary_mode=base.ancillary_mode, label="clone")
    table, _ = compare_scenarios([base, clone])
    assert table.rows[0].summary == table.rows[1].summary


def test_enlarged_bounds_never_increase_peak_deviation():
    base = reference_parameters()
    bounds = (0.0, 0.15, 0.3, 0.45, 0.6)
    scenarios = [
        Scenario(grid=base.with_ancillary(45.0, b), schedule=TWO_PULSES,
                 horizon=50.0, dt=0.005,
                 ancillary_mode="off" if b == 0.0 else "ideal",
                 label=f"bound-{b}")
        for b in bounds
    ]
    table, _ = compare_scenarios(scenarios)
    peaks = [r.summary.max_abs_freq_dev for r in table.rows]
    assert all(a >= b - 1e-15 for a, b in zip(peaks, peaks[1:]))


def test_comparison_rejects_single_scenario():
    with pytest.raises(ValueError):
        compare_scenarios(reference_cases()[:1])


def test_comparison_rejects_mismatched_plants():
    a, b, _ = reference_cases()
    mismatched = Scenario(grid=reference_parameters(M=100.0), schedule=TWO_PULSES,
                          horizon=50.0, dt=0.005, label=b.label)
    with pytest.raises(ValueError, match="mismatched grids"):
        compare_scenarios([a, mismatched])


def test_comparison_rejects_mismatched_dt():
    a, b, _ = reference_cases()
    slower = Scenario(grid=b.grid, schedule=TWO_PULSES, horizon=50.0, dt=0.0025,
                      ancillary_mode="ideal", label=b.label)
    with pytest.raises(ValueError, match="horizon and dt"):
        compare_scenarios([a, slower])


# --- CSV output --------------------------------------------------------------------


def test_trajectory_csv_round_trips_doubles(tmp_path):
    traj = run_scenario(reference_cases(horizon=2.0)[1])
    path = tmp_path / "traj.csv"
    write_trajectory_csv(traj, path)
    with open(path) as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    assert tuple(header) == TRAJECTORY_COLUMNS
    assert len(rows) == len(traj.t)
    k = len(rows) // 2
    assert float(rows[k][1]) == traj.omega[k]
    assert float(rows[k][4]) == traj.p_anc[k]
