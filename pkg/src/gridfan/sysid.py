"""ARX identification of the fan SISO model (duct-pressure set-point in,
fan power out), plus a synthetic fan-plant fixture generator used in place
of raw building telemetry.

Time indexing is zero-based. The difference-equation convention is

    y(t) = -a_1 y(t-1) - ... - a_na y(t-na)
           + b_1 u(t-nk-1) + ... + b_nb u(t-nk-nb)  (+ noise)

so nk = 0 already carries one sample of input delay. The parameter vector
theta stacks (a_1..a_na, b_1..b_nb).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

DEFAULT_ORDERS = (2, 2, 1)  # (na, nb, nk) when the caller expresses no preference


class ExcitationError(RuntimeError):
    """Regressor matrix is rank deficient: the input is not persistently exciting."""


class UnstableSimulationError(RuntimeError):
    """Free-run simulation produced a non-finite output; carries the partial run."""

    def __init__(self, message: str, partial: np.ndarray):
        super().__init__(message)
        self.partial = partial


@dataclass(frozen=True)
class ArxModel:
    """ARX model orders plus stacked parameter vector (a_1..a_na, b_1..b_nb).

    u_offset/y_offset record the operating point the model's signals deviate
    around (zero when fit on raw signals); the dynamics act on deviations.
    """

    na: int
    nb: int
    nk: int
    theta: tuple[float, ...]
    sample_period: float
    u_offset: float = 0.0
    y_offset: float = 0.0

    def __post_init__(self):
        if self.na < 0 or self.nb < 1 or self.nk < 0:
            raise ValueError(f"invalid orders na={self.na}, nb={self.nb}, nk={self.nk}")
        if len(self.theta) != self.na + self.nb:
            raise ValueError(
                f"theta has {len(self.theta)} entries, expected na+nb={self.na + self.nb}"
            )
        if not all(math.isfinite(v) for v in self.theta):
            raise ValueError("theta must be finite")
        if not self.sample_period > 0:
            raise ValueError("sample_period must be positive")
        object.__setattr__(self, "theta", tuple(float(v) for v in self.theta))

    @property
    def a(self) -> np.ndarray:
        return np.asarray(self.theta[: self.na])

    @property
    def b(self) -> np.ndarray:
        return np.asarray(self.theta[self.na :])

    @property
    def offset(self) -> int:
        """Samples of history needed before the first predictable output."""
        return max(self.na, self.nk + self.nb)

    def dc_gain(self) -> float:
        denom = 1.0 + float(np.sum(self.a))
        if denom == 0.0:
            raise ZeroDivisionError("model has a pole at z=1, no finite static gain")
        return float(np.sum(self.b)) / denom


@dataclass(frozen=True)
class IoRecord:
    """Uniformly sampled input/output record (set-point u, fan power y)."""

    u: tuple[float, ...]
    y: tuple[float, ...]
    sample_period: float
    timestamps: Optional[tuple[float, ...]] = None

    def __post_init__(self):
        object.__setattr__(self, "u", tuple(float(v) for v in self.u))
        object.__setattr__(self, "y", tuple(float(v) for v in self.y))
        if len(self.u) != len(self.y):
            raise ValueError(f"u has {len(self.u)} samples but y has {len(self.y)}")
        if len(self.u) < 1:
            raise ValueError("record must hold at least one sample")
        if not self.sample_period > 0:
            raise ValueError("sample_period must be positive")
        if self.timestamps is not None:
            ts = tuple(float(t) for t in self.timestamps)
            object.__setattr__(self, "timestamps", ts)
            if len(ts) != len(self.u):
                raise ValueError("timestamps length must match samples")
            _check_uniform(ts, self.sample_period)

    def __len__(self) -> int:
        return len(self.u)


def _check_uniform(ts: Sequence[float], period: float, tol_frac: float = 0.01):
    diffs = np.diff(np.asarray(ts))
    if len(diffs) and np.any(np.abs(diffs - period) > tol_frac * period):
        worst = int(np.argmax(np.abs(diffs - period)))
        raise ValueError(
            f"non-uniform sampling: step {worst} spans {diffs[worst]:g} s, "
            f"expected {period:g} s within 1%"
        )


@dataclass(frozen=True)
class RegressorSet:
    """Stacked regressors Phi (na+nb rows, one column per predictable sample)
    and the matching output vector."""

    phi_matrix: np.ndarray
    y_vector: np.ndarray
    offset: int
    na: int
    nb: int
    nk: int
    sample_period: float


@dataclass(frozen=True)
class FitDiagnostics:
    residual_rms: float
    rank: int
    n_parameters: int
    n_equations: int


def build_regressors(data: IoRecord, na: int, nb: int, nk: int) -> RegressorSet:
    """Assemble the lagged-data matrix; rows with incomplete history are excluded.

    Column for time t is [-y(t-1) .. -y(t-na), u(t-nk-1) .. u(t-nk-nb)], paired
    with output y(t). The first usable t is offset = max(na, nk+nb).
    """
    if na < 0 or nb < 1 or nk < 0:
        raise ValueError(f"invalid orders na={na}, nb={nb}, nk={nk}")
    m = len(data)
    if m <= na + nb + nk:
        raise ValueError(
            f"series too short: {m} samples, need at least {na + nb + nk + 1} "
            f"for orders (na={na}, nb={nb}, nk={nk})"
        )
    u = np.asarray(data.u)
    y = np.asarray(data.y)
    offset = max(na, nk + nb)
    cols = m - offset
    phi = np.empty((na + nb, cols))
    for i in range(1, na + 1):
        phi[i - 1, :] = -y[offset - i : m - i]
    for j in range(1, nb + 1):
        lag = nk + j
        phi[na + j - 1, :] = u[offset - lag : m - lag]
    return RegressorSet(
        phi_matrix=phi,
        y_vector=y[offset:],
        offset=offset,
        na=na,
        nb=nb,
        nk=nk,
        sample_period=data.sample_period,
    )


def fit_arx(reg: RegressorSet) -> tuple[ArxModel, FitDiagnostics]:
    """Least-squares solve for theta via SVD-based lstsq (orthogonal
    factorization, never the normal equations).

    Raises ExcitationError when Phi is rank deficient, i.e. the input was not
    persistently exciting enough for the requested orders.
    """
    n_par = reg.na + reg.nb
    n_eq = reg.phi_matrix.shape[1]
    if n_eq < n_par:
        raise ValueError(f"{n_eq} regressor columns cannot determine {n_par} parameters")
    design = reg.phi_matrix.T
    theta, _, rank, _ = np.linalg.lstsq(design, reg.y_vector, rcond=None)
    if rank < n_par:
        raise ExcitationError(
            f"regressor rank {rank} < {n_par} parameters; input is not "
            "persistently exciting for these orders"
        )
    residual = design @ theta - reg.y_vector
    rms = float(np.sqrt(np.mean(residual**2)))
    model = ArxModel(
        na=reg.na,
        nb=reg.nb,
        nk=reg.nk,
        theta=tuple(theta),
        sample_period=reg.sample_period,
    )
    return model, FitDiagnostics(rms, int(rank), n_par, n_eq)


def simulate_arx(
    model: ArxModel, u: Sequence[float], y_init: Sequence[float]
) -> np.ndarray:
    """Free-run simulation: predictions are fed back as the output lags.

    The returned array shares u's time base; the first len(y_init) samples are
    the seed. Input samples before t=0 are taken as zero.
    """
    if len(y_init) < model.na:
        raise ValueError(f"need at least na={model.na} seed outputs, got {len(y_init)}")
    u_arr = np.asarray(u, dtype=float)
    n = len(u_arr)
    n0 = min(len(y_init), n)
    out = np.zeros(n)
    out[:n0] = np.asarray(y_init, dtype=float)[:n0]
    a, b = model.a, model.b
    # Truncate well before float overflow so the unstable-recursion guard
    # fires without arithmetic warnings.
    blow_up = 1e150
    for t in range(n0, n):
        acc = 0.0
        for i in range(1, model.na + 1):
            acc -= a[i - 1] * out[t - i]
        for j in range(1, model.nb + 1):
            lag = t - model.nk - j
            if lag >= 0:
                acc += b[j - 1] * u_arr[lag]
        if not math.isfinite(acc) or abs(acc) > blow_up:
            raise UnstableSimulationError(
                f"free-run output diverged at sample {t}; model is unstable "
                "in closed recursion",
                partial=out[:t],
            )
        out[t] = acc
    return out


def predict_one_step(
    model: ArxModel, u: Sequence[float], y_measured: Sequence[float]
) -> np.ndarray:
    """One-step-ahead predictions using measured output lags.

    Samples before the model's offset are copied from the measurements.
    """
    u_arr = np.asarray(u, dtype=float)
    y_arr = np.asarray(y_measured, dtype=float)
    if len(u_arr) != len(y_arr):
        raise ValueError("u and y must have equal length")
    n = len(u_arr)
    start = min(model.offset, n)
    out = y_arr.copy()
    a, b = model.a, model.b
    for t in range(start, n):
        acc = 0.0
        for i in range(1, model.na + 1):
            acc -= a[i - 1] * y_arr[t - i]
        for j in range(1, model.nb + 1):
            acc += b[j - 1] * u_arr[t - model.nk - j]
        out[t] = acc
    return out


def fit_metric(measured: Sequence[float], simulated: Sequence[float]) -> float:
    """Normalized-RMS fit in percent: 100*(1 - ||y-yhat|| / ||y-mean(y)||).

    100 is a perfect match, 0 is no better than the mean, negative is worse.
    """
    y = np.asarray(measured, dtype=float)
    yh = np.asarray(simulated, dtype=float)
    if len(y) != len(yh):
        raise ValueError("measured and simulated must have equal length")
    if len(y) < 2:
        raise ValueError("need at least 2 samples")
    spread = np.linalg.norm(y - np.mean(y))
    if spread == 0.0:
        raise ValueError("measured series is constant; fit metric undefined")
    return float(100.0 * (1.0 - np.linalg.norm(y - yh) / spread))


def demean_record(data: IoRecord) -> tuple[IoRecord, float, float]:
    """Split a record into deviations around its sample means.

    Returns (deviation record, u mean, y mean). Identification is performed
    on deviations because the raw fan signals sit on a large operating point
    (tens of kW, pressures above an inch of water) that a no-intercept ARX
    ratio cannot represent.
    """
    u0 = float(np.mean(data.u))
    y0 = float(np.mean(data.y))
    record = IoRecord(
        u=tuple(v - u0 for v in data.u),
        y=tuple(v - y0 for v in data.y),
        sample_period=data.sample_period,
        timestamps=data.timestamps,
    )
    return record, u0, y0


def fit_record(
    data: IoRecord,
    na: int = DEFAULT_ORDERS[0],
    nb: int = DEFAULT_ORDERS[1],
    nk: int = DEFAULT_ORDERS[2],
    demean: bool = True,
) -> tuple[ArxModel, FitDiagnostics]:
    """Fit an ARX model to a record, removing the operating point first.

    Orders default to a second-order model with one sample of extra delay,
    adequate for a fan+duct+drive cascade; use select_orders for a data-driven
    choice. The returned model carries the subtracted means as
    u_offset/y_offset so absolute signals can be reconstructed downstream.
    """
    if demean:
        deviations, u0, y0 = demean_record(data)
    else:
        deviations, u0, y0 = data, 0.0, 0.0
    model, diag = fit_arx(build_regressors(deviations, na, nb, nk))
    model = ArxModel(
        na=model.na,
        nb=model.nb,
        nk=model.nk,
        theta=model.theta,
        sample_period=model.sample_period,
        u_offset=u0,
        y_offset=y0,
    )
    return model, diag


def select_orders(
    data: IoRecord,
    na_candidates: Sequence[int] = (1, 2, 3),
    nb_candidates: Sequence[int] = (1, 2, 3),
    nk_candidates: Sequence[int] = (0, 1, 2),
    holdout_fraction: float = 0.3,
) -> tuple[int, int, int]:
    """Pick (na, nb, nk) by best free-run fit on a held-out tail.

    Fits on the leading 1-holdout_fraction of the record (demeaned) and
    scores the free-run continuation over the tail. Candidates that fail to
    fit or diverge are skipped; ties go to the first candidate in scan order.
    """
    m = len(data)
    split = int(round(m * (1.0 - holdout_fraction)))
    head = IoRecord(data.u[:split], data.y[:split], data.sample_period)
    dev_head, u0, y0 = demean_record(head)
    dev_u = tuple(v - u0 for v in data.u)
    dev_y = tuple(v - y0 for v in data.y)
    best: Optional[tuple[int, int, int]] = None
    best_fit = -math.inf
    for na in na_candidates:
        for nb in nb_candidates:
            for nk in nk_candidates:
                try:
                    model, _ = fit_arx(build_regressors(dev_head, na, nb, nk))
                    sim = simulate_arx(model, dev_u, dev_y[: model.offset])
                    score = fit_metric(dev_y[split:], sim[split:])
                except (ValueError, ExcitationError, UnstableSimulationError):
                    continue
                if score > best_fit:
                    best_fit = score
                    best = (na, nb, nk)
    if best is None:
        raise ExcitationError("no candidate orders produced a usable fit")
    return best


# ---------------------------------------------------------------------------
# Synthetic fan-plant fixture
# ---------------------------------------------------------------------------

VALID_SWITCHING_PERIODS_MIN = (1, 2, 3)
PRESSURE_BAND_INWC = (1.2, 1.9)  # safe duct static pressure range
NOMINAL_FAN_KW = 67.0  # rated draw of one supply fan

# Hidden reference plant: first-order pressure tracking followed by a mildly
# nonlinear static power curve. Deliberately NOT of ARX structure, so that
# identification stays an approximation exercise like on the real fan. The
# lag puts the power settle time in the tens of seconds while the initial
# response shows up within a sample or two, as observed on large supply fans.
_FIXTURE_LAG_S = 5.0
_FIXTURE_POWER_FLOOR_KW = 55.0
_FIXTURE_POWER_EXPONENT = 1.25


@dataclass(frozen=True)
class FixtureConfig:
    """Settings for the synthetic pressure-step experiment."""

    pressure_low: float = 1.2
    pressure_high: float = 1.9
    switching_period_min: int = 2
    span_min: float = 30.0
    sample_period: float = 2.0
    noise_std_kw: float = 0.25
    seed: int = 0

    def __post_init__(self):
        lo, hi = PRESSURE_BAND_INWC
        if not (lo <= self.pressure_low <= self.pressure_high <= hi):
            raise ValueError(
                f"pressure levels must satisfy {lo} <= low <= high <= {hi}, "
                f"got low={self.pressure_low}, high={self.pressure_high}"
            )
        if self.switching_period_min not in VALID_SWITCHING_PERIODS_MIN:
            raise ValueError(
                f"switching period must be one of {VALID_SWITCHING_PERIODS_MIN} "
                f"minutes, got {self.switching_period_min}"
            )
        if self.noise_std_kw < 0:
            raise ValueError("noise level must be >= 0")
        if not self.sample_period > 0 or not self.span_min > 0:
            raise ValueError("sample period and span must be positive")


def _fixture_power_curve(pressure: np.ndarray) -> np.ndarray:
    lo, hi = PRESSURE_BAND_INWC
    frac = np.clip((pressure - lo) / (hi - lo), 0.0, None)
    return _FIXTURE_POWER_FLOOR_KW + (
        NOMINAL_FAN_KW - _FIXTURE_POWER_FLOOR_KW
    ) * frac**_FIXTURE_POWER_EXPONENT


def generate_fan_fixture(config: FixtureConfig) -> IoRecord:
    """Square-wave set-point record with fan power from the hidden plant.

    The set-point toggles between the two pressure levels every switching
    period, starting with a step up at t=0 (the initial move off the low
    baseline counts as the first edge, so a 15-minute span at a 1-minute
    period carries 15 edges). Deterministic for a given seed.
    """
    ts = config.sample_period
    n = int(round(config.span_min * 60.0 / ts))
    t = np.arange(n) * ts
    period_s = config.switching_period_min * 60.0
    phase = np.floor(t / period_s).astype(int)
    sdsp = np.where(phase % 2 == 0, config.pressure_high, config.pressure_low)

    # Exact zero-order-hold discretization of the tracking lag.
    alpha = 1.0 - math.exp(-ts / _FIXTURE_LAG_S)
    pressure = np.empty(n)
    level = config.pressure_low  # plant at rest on the low level before t=0
    for k in range(n):
        level = level + alpha * (sdsp[k] - level)
        pressure[k] = level

    rng = np.random.default_rng(config.seed)
    noise = rng.normal(0.0, config.noise_std_kw, size=n) if config.noise_std_kw else 0.0
    power = _fixture_power_curve(pressure) + noise
    return IoRecord(
        u=tuple(sdsp),
        y=tuple(power),
        sample_period=ts,
        timestamps=tuple(t),
    )


# ---------------------------------------------------------------------------
# Model file format (plain text, one key per line, full double precision)
# ---------------------------------------------------------------------------

_MODEL_HEADER = "gridfan-arx-model v1"


def save_arx_model(model: ArxModel, path) -> None:
    lines = [
        _MODEL_HEADER,
        f"na {model.na}",
        f"nb {model.nb}",
        f"nk {model.nk}",
        f"sample_period {model.sample_period:.17g}",
        f"u_offset {model.u_offset:.17g}",
        f"y_offset {model.y_offset:.17g}",
        "theta " + " ".join(f"{v:.17g}" for v in model.theta),
        "",
    ]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines))


def load_arx_model(path) -> ArxModel:
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or lines[0] != _MODEL_HEADER:
        raise ValueError(f"{path}: not a gridfan ARX model file")
    fields = {}
    for ln in lines[1:]:
        key, _, rest = ln.partition(" ")
        fields[key] = rest
    try:
        return ArxModel(
            na=int(fields["na"]),
            nb=int(fields["nb"]),
            nk=int(fields["nk"]),
            theta=tuple(float(v) for v in fields["theta"].split()),
            sample_period=float(fields["sample_period"]),
            u_offset=float(fields.get("u_offset", 0.0)),
            y_offset=float(fields.get("y_offset", 0.0)),
        )
    except KeyError as exc:
        raise ValueError(f"{path}: missing field {exc} in model file") from exc
