import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from gridfan.grid import (
    AgcIntegrator,
    agc_signal,
    ancillary_power,
    build_closed_loop,
    droop_steady_state,
    generator_tf,
    governor_tf,
    load_to_frequency_tf,
    reference_parameters,
    regulated_steady_state,
    turbine_tf,
)
from gridfan.sim import DisturbanceSchedule, Scenario, run_scenario


def held_step_final_dev(params, magnitude, mode="off", hold=60.0):
    """Frequency deviation after a load step held long enough to settle."""
    schedule = DisturbanceSchedule(((10.0, 10.0 + 10.0 * hold, magnitude),))
    scenario = Scenario(
        grid=params,
        schedule=schedule,
        horizon=10.0 + hold,
        dt=0.005,
        ancillary_mode=mode,
        label="held-step",
    )
    return run_scenario(scenario).freq_deviation()[-1]


# --- parameter validation ---------------------------------------------------


def test_reference_parameters_are_valid():
    p = reference_parameters()
    assert p.M == 132.6 and p.R == 0.05 and p.Kp == 45.0


@pytest.mark.parametrize(
    "overrides",
    [
        {"M": 0.0},
        {"R": 0.0},
        {"D": -0.1},
        {"T4": -1.0},
        {"anc_min": 0.1},
        {"anc_max": -0.1},
        {"K1": 0.5},  # fractions no longer sum to 1
    ],
)
def test_invalid_parameters_rejected(overrides):
    with pytest.raises(ValueError):
        reference_parameters(**overrides)


# --- block transfer functions -------------------------------------------------


def test_governor_reference_form(ref_params):
    tf = governor_tf(ref_params)
    assert tf.num == (1.0,)
    assert tf.den == pytest.approx((1.0, 0.2, 0.01))


def test_governor_all_zero_time_constants_is_unity():
    p = reference_parameters(T1=0.0, T3=0.0)
    tf = governor_tf(p)
    assert tf.num == (1.0,) and tf.den == (1.0,)


def test_governor_with_feedforward_zero_has_unit_dc_gain():
    p = reference_parameters(T1=2.8, T2=1.0, T3=0.15)
    tf = governor_tf(p)
    assert tf.num == (1.0, 1.0)
    assert tf.dc_gain() == 1.0


def test_turbine_single_stage(ref_params):
    tf = turbine_tf(ref_params)
    assert tf.num == (1.0,)
    assert tf.den == (1.0, 1.0)


def test_turbine_equal_fractions_zero_lags_is_unity():
    p = reference_parameters(K1=0.25, K2=0.25, K3=0.25, K4=0.25, T4=0.0)
    tf = turbine_tf(p)
    assert tf.num == pytest.approx((1.0,))
    assert tf.den == (1.0,)


def test_turbine_two_stage_weighted_sum():
    # 0.3/(1+s) + 0.7/((1+s)(1+2s)) = (1 + 0.6 s)/((1+s)(1+2s))
    p = reference_parameters(K1=0.3, K2=0.7, T5=2.0)
    tf = turbine_tf(p)
    assert tf.num == pytest.approx((1.0, 0.6))
    assert tf.den == pytest.approx((1.0, 3.0, 2.0))


def test_turbine_dc_gain_equals_fraction_sum():
    p = reference_parameters(K1=0.5, K2=0.25, K3=0.125, K4=0.125, T5=2.0, T6=3.0, T7=4.0)
    assert turbine_tf(p).dc_gain() == 1.0


def test_generator_reference_dc_gain(ref_params):
    tf = generator_tf(ref_params)
    assert tf.dc_gain() == pytest.approx(37.7358, abs=1e-4)


def test_generator_unit_parameters():
    p = reference_parameters(M=1.0, D=1.0)
    tf = generator_tf(p)
    assert tf.num == (1.0,) and tf.den == (1.0, 1.0)


def test_generator_lossless_is_integrator():
    p = reference_parameters(D=0.0)
    tf = generator_tf(p)
    assert tf.den == (0.0, 132.6)


# --- ancillary controller -----------------------------------------------------


def test_ancillary_zero_at_rated_frequency(ref_params):
    assert ancillary_power(1.0, ref_params) == 0.0


def test_ancillary_unclipped_over_frequency():
    p = reference_parameters(anc_min=-0.6, anc_max=0.6)
    assert ancillary_power(1.005, p) == pytest.approx(-0.225, abs=1e-12)


def test_ancillary_clipped_under_frequency():
    p = reference_parameters()  # bound 0.3
    assert ancillary_power(0.98, p) == 0.3  # unclipped would be +0.9


def test_ancillary_rejects_nonfinite(ref_params):
    with pytest.raises(ValueError):
        ancillary_power(math.nan, ref_params)


@given(dev=st.floats(-0.5, 0.5, allow_nan=False))
def test_ancillary_stays_within_bounds_and_decreases(dev):
    p = reference_parameters()
    value = ancillary_power(1.0 + dev, p)
    assert p.anc_min <= value <= p.anc_max
    nudged = ancillary_power(1.0 + dev + 1e-3, p)
    assert nudged <= value + 1e-15


@given(dev=st.floats(1e-6, 0.5, allow_nan=False))
def test_ancillary_odd_symmetry_before_clipping(dev):
    p = reference_parameters(anc_min=-1e9, anc_max=1e9)
    up = ancillary_power(1.0 + dev, p)
    down = ancillary_power(1.0 - dev, p)
    assert up == pytest.approx(-down, rel=1e-12)


# --- AGC ------------------------------------------------------------------------


def test_agc_zero_for_rated_frequency():
    p = reference_parameters(agc_enabled=True, agc_gain=1.0)
    assert agc_signal([1.0] * 100, p, 0.1) == 0.0


def test_agc_integrates_constant_deviation():
    p = reference_parameters(agc_enabled=True, agc_gain=1.0)
    # 10 s of a constant -0.01 deviation: integral -0.1, signal +0.1
    history = [0.99] * 101
    assert agc_signal(history, p, 0.1) == pytest.approx(0.1, rel=1e-12)


def test_agc_requires_enabled_flag(ref_params):
    with pytest.raises(ValueError):
        agc_signal([1.0], ref_params, 0.1)


def test_agc_accumulator_matches_pure_function():
    p = reference_parameters(agc_enabled=True, agc_gain=0.7)
    rng = np.random.default_rng(0)
    history = list(1.0 + 0.01 * rng.standard_normal(50))
    acc = AgcIntegrator(p)
    last = 0.0
    for w in history:
        last = acc.update(w, 0.05)
    assert last == agc_signal(history, p, 0.05)


def test_agc_drives_steady_state_deviation_to_zero():
    p = reference_parameters(agc_enabled=True, agc_gain=1.0)
    schedule = DisturbanceSchedule(((5.0, 1000.0, 0.5),))
    scenario = Scenario(
        grid=p, schedule=schedule, horizon=200.0, dt=0.005, label="agc"
    )
    traj = run_scenario(scenario)
    assert abs(traj.freq_deviation()[-1]) <= 1e-4


# --- closed loop ---------------------------------------------------------------


def test_closed_loop_dc_gain_matches_droop_formula(ref_params):
    model = build_closed_loop(ref_params)
    dc = -(model.C @ np.linalg.solve(model.A, model.B))
    # load disturbance input, frequency output
    assert dc[0, 0] == pytest.approx(-1.0 / (0.0265 + 20.0), rel=1e-12)
    assert 0.5 * dc[0, 0] == pytest.approx(-0.024967, abs=1e-6)


def test_closed_loop_without_droop_leaves_damping_only():
    p = reference_parameters(R=math.inf)
    model = build_closed_loop(p)
    dc = -(model.C @ np.linalg.solve(model.A, model.B))
    assert 0.5 * dc[0, 0] == pytest.approx(-0.5 / 0.0265, rel=1e-9)
    assert dc[0, 0] == pytest.approx(-18.868 / 0.5, abs=2e-3)


def test_closed_loop_tf_matches_state_space(ref_params):
    tf = load_to_frequency_tf(ref_params)
    model = build_closed_loop(ref_params)
    for w in (0.01, 0.1, 1.0, 10.0):
        via_ss = model.response_at(1j * w)[0, 0]
        assert abs(-via_ss - tf(1j * w)) <= 1e-9 * abs(tf(1j * w))


def test_closed_loop_equilibrium_stays_at_rated(ref_params):
    scenario = Scenario(
        grid=ref_params,
        schedule=DisturbanceSchedule(()),
        horizon=5.0,
        dt=0.005,
        label="equilibrium",
    )
    traj = run_scenario(scenario)
    assert np.all(traj.omega == 1.0)
    assert np.all(traj.p_gv == 0.0)
    assert np.all(traj.delta_pm == 0.0)


# --- steady-state invariants (simulated) ----------------------------------------


def test_droop_steady_state_invariant(ref_params):
    dev = held_step_final_dev(ref_params, 0.5, mode="off")
    assert dev == pytest.approx(droop_steady_state(0.5, ref_params), abs=1e-4)
    assert dev == pytest.approx(-0.024967, abs=1e-4)


def test_unsaturated_ancillary_steady_state():
    p = reference_parameters().with_ancillary(45.0, 0.6)
    dev = held_step_final_dev(p, 0.5, mode="ideal")
    assert dev == pytest.approx(-0.5 / (0.0265 + 20.0 + 45.0), abs=1e-4)


def test_saturated_ancillary_steady_state():
    p = reference_parameters().with_ancillary(45.0, 0.3)
    dev = held_step_final_dev(p, 0.5, mode="ideal")
    assert dev == pytest.approx(-(0.5 - 0.3) / (0.0265 + 20.0), abs=1e-4)
    assert dev == pytest.approx(-0.009987, abs=1e-4)


def test_regulated_steady_state_helper_matches_clipping():
    p03 = reference_parameters().with_ancillary(45.0, 0.3)
    p06 = reference_parameters().with_ancillary(45.0, 0.6)
    assert regulated_steady_state(0.5, p03) == pytest.approx(
        -(0.5 - 0.3) / (0.0265 + 20.0), rel=1e-12
    )
    assert regulated_steady_state(0.5, p06) == pytest.approx(
        -0.5 / (0.0265 + 20.0 + 45.0), rel=1e-12
    )
    assert regulated_steady_state(0.5, p03) == pytest.approx(-0.009987, abs=1e-6)
    assert regulated_steady_state(0.5, p06) == pytest.approx(-0.007689, abs=1e-6)
