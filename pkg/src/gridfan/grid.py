"""Single-area power-system blocks: governor, turbine, generator, droop loop,
saturated proportional ancillary injection and optional integral AGC.

All signals are deviations in per-unit on the system base; frequency is in
per-unit of rated frequency (omega_des = 1).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .linsys import (
    StateSpaceModel,
    TransferFunction,
    UNITY,
    realize,
    tf_feedback,
    tf_parallel_weighted,
    tf_series,
)

_K_SUM_TOL = 1e-9

# Reference parameter set for the frequency-regulation experiment: non-reheat
# turbine (K1=1, T4=1), two-pole governor, 5% droop, proportional ancillary
# gain 45 with symmetric 0.3 p.u. bounds. The inertia constant is used as
# published; system_base_mva only documents the MW <-> p.u. conversion.
REFERENCE = dict(
    M=132.6,
    D=0.0265,
    T1=0.1,
    T2=0.0,
    T3=0.1,
    T4=1.0,
    T5=0.0,
    T6=0.0,
    T7=0.0,
    K1=1.0,
    K2=0.0,
    K3=0.0,
    K4=0.0,
    R=0.05,
    omega_des=1.0,
    Kp=45.0,
    anc_min=-0.3,
    anc_max=0.3,
    agc_enabled=False,
    agc_gain=0.0,
    system_base_mva=100.0,
)


@dataclass(frozen=True)
class GridParameters:
    M: float  # inertia coefficient in the swing term 1/(D + sM)
    D: float  # load damping, p.u.
    T1: float  # governor time constants, s
    T2: float
    T3: float
    T4: float  # turbine stage time constants, s
    T5: float
    T6: float
    T7: float
    K1: float  # turbine stage fractions, sum to 1
    K2: float
    K3: float
    K4: float
    R: float  # droop, p.u. frequency per p.u. power
    omega_des: float = 1.0
    Kp: float = 45.0  # ancillary proportional gain
    anc_min: float = -0.3  # ancillary saturation bounds, p.u.
    anc_max: float = 0.3
    agc_enabled: bool = False
    agc_gain: float = 0.0  # integral gain, p.u./s
    system_base_mva: float = 100.0

    def __post_init__(self):
        if not self.M > 0:
            raise ValueError(f"inertia M must be positive, got {self.M}")
        if self.D < 0:
            raise ValueError(f"damping D must be >= 0, got {self.D}")
        if not self.R > 0:
            raise ValueError(f"droop R must be positive, got {self.R}")
        for name in ("T1", "T2", "T3", "T4", "T5", "T6", "T7"):
            if getattr(self, name) < 0:
                raise ValueError(f"time constant {name} must be >= 0")
        if self.Kp < 0:
            raise ValueError("ancillary gain Kp must be >= 0")
        if not (self.anc_min <= 0.0 <= self.anc_max):
            raise ValueError(
                f"saturation bounds must bracket zero, got "
                f"[{self.anc_min}, {self.anc_max}]"
            )
        ksum = self.K1 + self.K2 + self.K3 + self.K4
        if abs(ksum - 1.0) > _K_SUM_TOL:
            raise ValueError(f"turbine stage fractions must sum to 1, got {ksum}")
        if self.agc_gain < 0:
            raise ValueError("agc_gain must be >= 0")
        if not self.system_base_mva > 0:
            raise ValueError("system_base_mva must be positive")

    def with_ancillary(self, kp: float, bound: float) -> "GridParameters":
        """Copy with proportional gain kp and symmetric bounds +/-bound."""
        return replace(self, Kp=kp, anc_min=-bound, anc_max=bound)

    def min_time_constant(self) -> float:
        """Smallest positive lag among governor/turbine stages; inf if none."""
        lags = [
            t
            for t in (self.T1, self.T3, self.T4, self.T5, self.T6, self.T7)
            if t > 0
        ]
        return min(lags) if lags else math.inf


def reference_parameters(**overrides) -> GridParameters:
    return GridParameters(**{**REFERENCE, **overrides})


@dataclass
class SignalBus:
    """One integration step's worth of recorded signals (all p.u., finite)."""

    delta_PD: float
    delta_PC: float
    P_anc: float
    omega: float
    P_GV: float
    delta_PM: float
    delta_PG: float


def _first_order(time_constant: float) -> TransferFunction:
    if time_constant == 0.0:
        return UNITY
    return TransferFunction((1.0,), (1.0, time_constant))


def governor_tf(p: GridParameters) -> TransferFunction:
    """(1 + s T2) / ((1 + s T1)(1 + s T3)); zero time constants drop out."""
    num = (1.0,) if p.T2 == 0.0 else (1.0, p.T2)
    den = tf_series(_first_order(p.T1), _first_order(p.T3)).den
    return TransferFunction(num, den)


def turbine_tf(p: GridParameters) -> TransferFunction:
    """Weighted cascade of four first-order stages.

    Built in nested (Horner) form F1*(K1 + F2*(K2 + F3*(K3 + F4*K4))) so the
    shared stage factors appear once and the denominator stays at minimal
    order. DC gain is exactly K1+K2+K3+K4.
    """
    g = TransferFunction((p.K4,), (1.0,))
    for k, t in ((p.K3, p.T7), (p.K2, p.T6), (p.K1, p.T5)):
        g = tf_series(_first_order(t), g)
        g = tf_parallel_weighted([(1.0, g), (k, UNITY)])
    return tf_series(_first_order(p.T4), g)


def generator_tf(p: GridParameters) -> TransferFunction:
    """Swing dynamics 1/(D + sM)."""
    return TransferFunction((1.0,), (p.D, p.M))


def ancillary_power(omega: float, p: GridParameters) -> float:
    """Saturated proportional ancillary injection.

    Unsaturated command is -Kp*(omega - omega_des); over-frequency commands
    are floored at anc_min, under-frequency commands capped at anc_max.
    """
    if not math.isfinite(omega):
        raise ValueError("omega must be finite")
    unsat = -p.Kp * (omega - p.omega_des)
    if omega >= p.omega_des:
        return max(unsat, p.anc_min)
    return min(unsat, p.anc_max)


class AgcIntegrator:
    """Trapezoidal accumulator for the speed-changer signal
    delta_PC = -gain * integral(omega - omega_des) dt.

    The single stateful element of a simulation; each run owns its own
    instance.
    """

    def __init__(self, p: GridParameters):
        self.gain = p.agc_gain
        self.omega_des = p.omega_des
        self.integral = 0.0
        self._prev_dev: float | None = None

    def update(self, omega: float, dt: float) -> float:
        dev = omega - self.omega_des
        if self._prev_dev is not None:
            self.integral += 0.5 * dt * (self._prev_dev + dev)
        self._prev_dev = dev
        return -self.gain * self.integral

    @property
    def delta_pc(self) -> float:
        return -self.gain * self.integral


def agc_signal(omega_history, p: GridParameters, dt: float) -> float:
    """delta_PC after trapezoidal integration over a sampled omega history."""
    if not p.agc_enabled:
        raise ValueError("AGC is disabled in these parameters")
    acc = AgcIntegrator(p)
    out = 0.0
    for w in omega_history:
        out = acc.update(w, dt)
    return out


# Input/output ordering of the closed-loop realization.
CL_INPUTS = ("delta_PD", "delta_PC", "P_anc")
CL_OUTPUTS = ("omega_dev", "P_GV", "delta_PM")


def build_closed_loop(p: GridParameters) -> StateSpaceModel:
    """State-space model of governor -> turbine -> generator with the droop
    path closed internally.

    Inputs are (delta_PD, delta_PC, P_anc); the ancillary and AGC injections
    stay external because they are saturated/stateful and get applied in the
    simulation loop. Output row 0 is the frequency deviation omega-omega_des;
    rows 1 and 2 expose the valve output and mechanical power for trajectory
    capture.
    """
    gov = realize(governor_tf(p))
    turb = realize(turbine_tf(p))
    gen = realize(generator_tf(p))
    inv_r = 1.0 / p.R

    ng, nt, nn = gov.n, turb.n, gen.n
    n = ng + nt + nn
    sg = slice(0, ng)
    st = slice(ng, ng + nt)
    sn = slice(ng + nt, n)

    # Scalar direct-feedthrough terms of the blocks (generator is strictly
    # proper by construction, so the frequency output has no feedthrough and
    # the interconnection contains no algebraic loop).
    d_gov = gov.D[0, 0]
    d_turb = turb.D[0, 0]
    c_gen = gen.C[0]  # (nn,)

    A = np.zeros((n, n))
    A[sg, sg] = gov.A
    A[sg, sn] = -gov.B @ (inv_r * c_gen).reshape(1, nn)
    A[st, sg] = turb.B @ gov.C
    A[st, st] = turb.A
    A[st, sn] = -turb.B @ (d_gov * inv_r * c_gen).reshape(1, nn)
    A[sn, sg] = gen.B @ (d_turb * gov.C)
    A[sn, st] = gen.B @ turb.C
    A[sn, sn] = gen.A - gen.B @ (d_turb * d_gov * inv_r * c_gen).reshape(1, nn)

    B = np.zeros((n, 3))
    B[sg, 1] = gov.B[:, 0]
    B[st, 1] = (turb.B * d_gov)[:, 0]
    B[sn, 0] = -gen.B[:, 0]
    B[sn, 1] = (gen.B * d_turb * d_gov)[:, 0]
    B[sn, 2] = gen.B[:, 0]

    C = np.zeros((3, n))
    C[0, sn] = c_gen
    C[1, sg] = gov.C[0]
    C[1, sn] = -d_gov * inv_r * c_gen
    C[2, sg] = d_turb * gov.C[0]
    C[2, st] = turb.C[0]
    C[2, sn] = -d_turb * d_gov * inv_r * c_gen

    D = np.zeros((3, 3))
    D[1, 1] = d_gov
    D[2, 1] = d_turb * d_gov

    return StateSpaceModel(A, B, C, D, input_names=CL_INPUTS, output_names=CL_OUTPUTS)


def load_to_frequency_tf(p: GridParameters) -> TransferFunction:
    """Transfer function from a net power injection at the generator node
    to the frequency deviation, droop loop closed (positive injection raises
    frequency; apply -delta_PD for a load increase)."""
    loop = tf_series(
        tf_series(governor_tf(p), turbine_tf(p)),
        TransferFunction((1.0 / p.R,), (1.0,)),
    )
    return tf_feedback(generator_tf(p), loop)


def droop_steady_state(delta_pd: float, p: GridParameters) -> float:
    """Final frequency deviation for a sustained load step, droop loop only."""
    return -delta_pd / (p.D + 1.0 / p.R)


def regulated_steady_state(delta_pd: float, p: GridParameters) -> float:
    """Final frequency deviation with the proportional ancillary loop active,
    accounting for saturation (clipped injection acts as a constant offset)."""
    unsat = -delta_pd / (p.D + 1.0 / p.R + p.Kp)
    demanded = -p.Kp * unsat
    if p.anc_min <= demanded <= p.anc_max:
        return unsat
    clip = p.anc_max if demanded > p.anc_max else p.anc_min
    return -(delta_pd - clip) / (p.D + 1.0 / p.R)
