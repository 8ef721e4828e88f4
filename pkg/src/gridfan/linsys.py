"""Transfer-function algebra, canonical realization and fixed-step RK4 integration.

Coefficient convention used everywhere in this package: polynomial coefficients
are stored in ASCENDING powers of s, i.e. ``num=(1.0, 0.5)`` means ``1 + 0.5 s``.
All operations are pure functions over immutable values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


def _trim(coeffs: Sequence[float]) -> tuple[float, ...]:
    """Drop trailing (highest-order) zero coefficients, keeping at least one."""
    out = [float(c) for c in coeffs]
    while len(out) > 1 and out[-1] == 0.0:
        out.pop()
    return tuple(out)


@dataclass(frozen=True)
class TransferFunction:
    """Rational function num(s)/den(s), coefficients in ascending powers of s.

    Invariants enforced at construction: finite coefficients, non-empty
    denominator with nonzero leading (highest-order) coefficient after
    trailing-zero trimming, and properness deg(num) <= deg(den).
    """

    num: tuple[float, ...]
    den: tuple[float, ...]

    def __post_init__(self):
        num = _trim(self.num)
        den = _trim(self.den)
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "den", den)
        if not all(math.isfinite(c) for c in num + den):
            raise ValueError("transfer function coefficients must be finite")
        if all(c == 0.0 for c in den):
            raise ValueError("denominator must not be the zero polynomial")
        if len(num) - 1 > len(den) - 1 and any(c != 0.0 for c in num):
            raise ValueError(
                f"improper transfer function: numerator degree {len(num) - 1} "
                f"exceeds denominator degree {len(den) - 1}"
            )

    @property
    def order(self) -> int:
        return len(self.den) - 1

    def __call__(self, s: complex) -> complex:
        """Evaluate num(s)/den(s)."""
        n = sum(c * s**k for k, c in enumerate(self.num))
        d = sum(c * s**k for k, c in enumerate(self.den))
        return n / d

    def dc_gain(self) -> float:
        """Gain at s=0; raises if the denominator vanishes there."""
        if self.den[0] == 0.0:
            raise ZeroDivisionError("denominator vanishes at s=0 (free integrator)")
        return self.num[0] / self.den[0]


UNITY = TransferFunction((1.0,), (1.0,))


def _polymul(a: tuple[float, ...], b: tuple[float, ...]) -> tuple[float, ...]:
    return tuple(np.convolve(np.asarray(a), np.asarray(b)))


def _polyadd(a: tuple[float, ...], b: tuple[float, ...]) -> tuple[float, ...]:
    n = max(len(a), len(b))
    out = np.zeros(n)
    out[: len(a)] += a
    out[: len(b)] += b
    return tuple(out)


def tf_series(g: TransferFunction, h: TransferFunction) -> TransferFunction:
    """Cascade g*h by polynomial products; no pole-zero cancellation."""
    return TransferFunction(_polymul(g.num, h.num), _polymul(g.den, h.den))


def tf_parallel_weighted(
    terms: Sequence[tuple[float, TransferFunction]]
) -> TransferFunction:
    """Weighted sum over a common denominator.

    When every term shares an identical denominator the sum keeps it;
    otherwise the common denominator is the product of all denominators.
    DC gain equals the weighted sum of the terms' DC gains.
    """
    if len(terms) == 0:
        raise ValueError("tf_parallel_weighted needs at least one term")
    dens = [tf.den for _, tf in terms]
    if all(d == dens[0] for d in dens):
        num: tuple[float, ...] = (0.0,)
        for w, tf in terms:
            num = _polyadd(num, _polymul((float(w),), tf.num))
        return TransferFunction(num, dens[0])
    common = (1.0,)
    for d in dens:
        common = _polymul(common, d)
    num = (0.0,)
    for i, (w, tf) in enumerate(terms):
        rest = (float(w),)
        for j, d in enumerate(dens):
            if j != i:
                rest = _polymul(rest, d)
        num = _polyadd(num, _polymul(rest, tf.num))
    return TransferFunction(num, common)


def tf_feedback(
    forward: TransferFunction, feedback: TransferFunction
) -> TransferFunction:
    """Close a negative feedback loop: forward / (1 + forward*feedback)."""
    num = _polymul(forward.num, feedback.den)
    den = _polyadd(
        _polymul(forward.den, feedback.den), _polymul(forward.num, feedback.num)
    )
    if all(c == 0.0 for c in den):
        raise ValueError("degenerate algebraic loop: closed-loop denominator is zero")
    return TransferFunction(num, den)


@dataclass
class StateSpaceModel:
    """State-space realization (A, B, C, D) with dx/dt = Ax + Bu, y = Cx + Du."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    input_names: tuple[str, ...] = field(default=())
    output_names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        self.B = np.atleast_2d(np.asarray(self.B, dtype=float))
        self.C = np.atleast_2d(np.asarray(self.C, dtype=float))
        self.D = np.atleast_2d(np.asarray(self.D, dtype=float))
        n = self.A.shape[0]
        if self.A.shape != (n, n):
            raise ValueError(f"A must be square, got {self.A.shape}")
        if self.B.shape[0] != n:
            raise ValueError(f"B has {self.B.shape[0]} rows, expected {n}")
        if self.C.shape[1] != n:
            raise ValueError(f"C has {self.C.shape[1]} columns, expected {n}")
        if self.D.shape != (self.C.shape[0], self.B.shape[1]):
            raise ValueError(
                f"D shape {self.D.shape} inconsistent with C/B "
                f"({self.C.shape[0]}x{self.B.shape[1]} expected)"
            )

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def p(self) -> int:
        return self.C.shape[0]

    def zero_state(self) -> np.ndarray:
        return np.zeros(self.n)

    def response_at(self, s: complex) -> np.ndarray:
        """Transfer matrix C (sI - A)^-1 B + D evaluated at a complex point."""
        if self.n == 0:
            return self.D.astype(complex)
        resolvent = np.linalg.solve(
            s * np.eye(self.n) - self.A, self.B.astype(complex)
        )
        return self.C @ resolvent + self.D


def realize(tf: TransferFunction) -> StateSpaceModel:
    """Controllable-canonical-form realization of a proper transfer function.

    Deterministic, no balancing or minimality pass; a biproper tf yields a
    nonzero D plus the companion state block.
    """
    den = np.asarray(tf.den)
    lead = den[-1]
    a = den / lead  # monic, ascending
    n = len(a) - 1
    b = np.zeros(n + 1)
    b[: len(tf.num)] = np.asarray(tf.num) / lead
    if n == 0:
        return StateSpaceModel(
            np.zeros((0, 0)), np.zeros((0, 1)), np.zeros((1, 0)), [[b[0]]]
        )
    A = np.zeros((n, n))
    A[:-1, 1:] = np.eye(n - 1)
    A[-1, :] = -a[:-1]
    B = np.zeros((n, 1))
    B[-1, 0] = 1.0
    d = b[n]
    C = (b[:n] - d * a[:n]).reshape(1, n)
    return StateSpaceModel(A, B, C, [[d]])


def _rk4_update(
    A: np.ndarray, B: np.ndarray, x: np.ndarray, u: np.ndarray, dt: float
) -> np.ndarray:
    """One classical RK4 update of dx/dt = Ax + Bu with u held constant."""
    bu = B @ u
    k1 = A @ x + bu
    k2 = A @ (x + 0.5 * dt * k1) + bu
    k3 = A @ (x + 0.5 * dt * k2) + bu
    k4 = A @ (x + dt * k3) + bu
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def step_rk4(
    model: StateSpaceModel,
    state: np.ndarray,
    inp: np.ndarray,
    dt: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Advance one classical RK4 step with the input held constant (ZOH).

    Returns (next_state, output) where the output is evaluated at the end of
    the step against the held input. Deterministic: identical arguments give
    bit-identical results.
    """
    if not dt > 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    x = np.asarray(state, dtype=float)
    u = np.atleast_1d(np.asarray(inp, dtype=float))
    if not np.all(np.isfinite(x)) or not np.all(np.isfinite(u)):
        raise ValueError("non-finite state or input")
    x_next = _rk4_update(model.A, model.B, x, u, dt)
    y = model.C @ x_next + model.D @ u
    return x_next, y


def realization_matches(
    tf: TransferFunction,
    model: StateSpaceModel,
    n_points: int = 20,
    rel_tol: float = 1e-9,
) -> bool:
    """Check model frequency response against tf at log-spaced frequencies."""
    for w in np.logspace(-2, 2, n_points):
        s = 1j * w
        want = tf(s)
        got = model.response_at(s)[0, 0]
        scale = max(abs(want), 1e-30)
        if abs(got - want) / scale > rel_tol:
            return False
    return True
