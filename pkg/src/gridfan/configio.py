"""TOML run configurations, validated fail-closed.

Unknown keys are hard errors (silent default drift would corrupt
reproductions), every file names its schema version, and error messages point
back at the offending line of the source file where possible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Optional

try:
    import tomllib  # Python >= 3.11
except ModuleNotFoundError:  # pragma: no cover - depends on interpreter
    import tomli as tomllib

from .flex import FleetAssumptions
from .grid import GridParameters, reference_parameters
from .sim import DisturbanceSchedule, Scenario
from .sysid import load_arx_model

SCHEMA_VERSION = 1


class ConfigError(Exception):
    """Configuration rejected; message carries file/line context when known."""


def _find_line(text: str, key: str) -> Optional[int]:
    """Best-effort line lookup for a key name in the raw TOML text."""
    for i, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if stripped.startswith(f"{key}") and "=" in stripped:
            name = stripped.split("=", 1)[0].strip()
            if name == key:
                return i
        if stripped in (f"[{key}]", f"[[{key}]]"):
            return i
    return None


_MISSING = object()


class _Section:
    """Dict wrapper that tracks consumed keys and anchors errors to lines."""

    def __init__(self, data: dict, name: str, path: Path, text: str):
        self.data = data
        self.name = name
        self.path = path
        self.text = text
        self.seen: set[str] = set()

    def _where(self, key: str) -> str:
        line = _find_line(self.text, key)
        loc = f"{self.path}:{line}" if line else f"{self.path}"
        section = f" in [{self.name}]" if self.name else ""
        return f"{loc}{section}"

    def take(self, key: str, kind, default=_MISSING):
        self.seen.add(key)
        if key not in self.data:
            if default is _MISSING:
                raise ConfigError(f"{self._where(key)}: missing required key {key!r}")
            return default
        value = self.data[key]
        if kind is float and isinstance(value, int) and not isinstance(value, bool):
            value = float(value)
        if not isinstance(value, kind) or isinstance(value, bool) and kind is not bool:
            raise ConfigError(
                f"{self._where(key)}: key {key!r} must be {kind.__name__}, "
                f"got {type(value).__name__}"
            )
        return value

    def reject_unknown(self):
        unknown = set(self.data) - self.seen
        if unknown:
            key = sorted(unknown)[0]
            raise ConfigError(
                f"{self._where(key)}: unknown key {key!r} in section "
                f"[{self.name or 'top level'}]"
            )


def _load_toml(path: Path) -> tuple[dict, str]:
    text = Path(path).read_text(encoding="utf-8")
    try:
        return tomllib.loads(text), text
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: TOML parse error: {exc}") from exc


def _check_schema(top: _Section):
    version = top.take("schema_version", int)
    if version != SCHEMA_VERSION:
        raise ConfigError(
            f"{top.path}: schema_version {version} unsupported "
            f"(this build reads version {SCHEMA_VERSION})"
        )


_GRID_KEYS = {
    "inertia": "M",
    "damping": "D",
    "governor_t1": "T1",
    "governor_t2": "T2",
    "governor_t3": "T3",
    "turbine_t4": "T4",
    "turbine_t5": "T5",
    "turbine_t6": "T6",
    "turbine_t7": "T7",
    "turbine_k1": "K1",
    "turbine_k2": "K2",
    "turbine_k3": "K3",
    "turbine_k4": "K4",
    "droop": "R",
    "rated_frequency": "omega_des",
    "system_base_mva": "system_base_mva",
}

_SCENARIO_CONTROL_KEYS = {
    "ancillary_gain": "Kp",
    "anc_min": "anc_min",
    "anc_max": "anc_max",
    "agc_enabled": "agc_enabled",
    "agc_gain": "agc_gain",
}


@dataclass(frozen=True)
class SimulateConfig:
    scenarios: tuple[Scenario, ...]
    snapshot: dict  # resolved values, reproducible without the source file


def load_simulate_config(path, dt_override: Optional[float] = None) -> SimulateConfig:
    """Parse a simulation config into runnable scenarios.

    Layout: one [grid] section with the shared plant, [integration] with dt
    and horizon, repeated [[disturbance]] pulses shared by every scenario and
    repeated [[scenario]] entries that select the controller configuration.
    """
    path = Path(path)
    raw, text = _load_toml(path)
    top = _Section(raw, "", path, text)
    _check_schema(top)

    base = reference_parameters()
    grid_kwargs: dict[str, Any] = {}
    grid_raw = top.take("grid", dict, {})
    grid = _Section(grid_raw, "grid", path, text)
    for key, field in _GRID_KEYS.items():
        default = getattr(base, field)
        grid_kwargs[field] = grid.take(key, float, default)
    grid.reject_unknown()

    integ = _Section(top.take("integration", dict, {}), "integration", path, text)
    dt = integ.take("dt", float, 0.005)
    horizon = integ.take("horizon", float, 50.0)
    integ.reject_unknown()
    if dt_override is not None:
        dt = dt_override

    pulses = []
    for i, entry in enumerate(top.take("disturbance", list, [])):
        sec = _Section(entry, f"disturbance #{i + 1}", path, text)
        start = sec.take("start", float)
        end = sec.take("end", float)
        magnitude = sec.take("magnitude", float)
        sec.reject_unknown()
        pulses.append((start, end, magnitude))

    scenario_entries = top.take("scenario", list)
    top.reject_unknown()
    if not scenario_entries:
        raise ConfigError(f"{path}: at least one [[scenario]] section is required")

    scenarios = []
    snapshot_scenarios = []
    for i, entry in enumerate(scenario_entries):
        sec = _Section(entry, f"scenario #{i + 1}", path, text)
        label = sec.take("label", str)
        mode = sec.take("ancillary_mode", str, "off")
        overrides: dict[str, Any] = {}
        for key, field in _SCENARIO_CONTROL_KEYS.items():
            kind = bool if field == "agc_enabled" else float
            default = getattr(base, field)
            value = sec.take(key, kind, default)
            overrides[field] = value
        lag = sec.take("lag_time_constant", float, 1.0)
        arx_path = sec.take("fan_model", str, "")
        kw_per_pu = sec.take("fan_kw_per_pu", float, 24.0)
        sec.reject_unknown()

        arx_model = None
        if mode == "arx":
            if not arx_path:
                raise ConfigError(
                    f"{path}: scenario {label!r} uses ancillary_mode='arx' "
                    "but names no fan_model file"
                )
            model_path = (path.parent / arx_path).resolve()
            try:
                arx_model = load_arx_model(model_path)
            except (OSError, ValueError) as exc:
                raise ConfigError(f"{path}: cannot load fan model: {exc}") from exc

        try:
            params = GridParameters(**{**grid_kwargs, **overrides})
            scenario = Scenario(
                grid=params,
                schedule=DisturbanceSchedule(tuple(pulses)),
                horizon=horizon,
                dt=dt,
                ancillary_mode=mode,
                lag_time_constant=lag,
                arx_model=arx_model,
                arx_kw_per_pu=kw_per_pu,
                label=label,
            )
        except ValueError as exc:
            raise ConfigError(f"{path}: scenario {label!r}: {exc}") from exc
        scenarios.append(scenario)
        snapshot_scenarios.append(
            {
                "label": label,
                "ancillary_mode": mode,
                **{k: overrides[f] for k, f in _SCENARIO_CONTROL_KEYS.items()},
                "lag_time_constant": lag,
                "fan_model": arx_path,
                "fan_kw_per_pu": kw_per_pu,
            }
        )

    labels = [s.label for s in scenarios]
    if len(set(labels)) != len(labels):
        raise ConfigError(f"{path}: scenario labels must be unique, got {labels}")

    snapshot = {
        "schema_version": SCHEMA_VERSION,
        "grid": {k: grid_kwargs[f] for k, f in _GRID_KEYS.items()},
        "integration": {"dt": dt, "horizon": horizon},
        "disturbance": [
            {"start": a, "end": b, "magnitude": m} for a, b, m in pulses
        ],
        "scenario": snapshot_scenarios,
    }
    return SimulateConfig(tuple(scenarios), snapshot)


def simulate_config_from_snapshot(snapshot: dict) -> SimulateConfig:
    """Rebuild scenarios from a manifest's resolved config snapshot."""
    base = reference_parameters()
    grid_kwargs = {
        field: float(snapshot["grid"].get(key, getattr(base, field)))
        for key, field in _GRID_KEYS.items()
    }
    pulses = tuple(
        (d["start"], d["end"], d["magnitude"]) for d in snapshot.get("disturbance", [])
    )
    scenarios = []
    for entry in snapshot["scenario"]:
        overrides = {
            field: entry[key] for key, field in _SCENARIO_CONTROL_KEYS.items()
        }
        arx_model = None
        if entry["ancillary_mode"] == "arx" and entry.get("fan_model"):
            arx_model = load_arx_model(entry["fan_model"])
        scenarios.append(
            Scenario(
                grid=GridParameters(**{**grid_kwargs, **overrides}),
                schedule=DisturbanceSchedule(pulses),
                horizon=float(snapshot["integration"]["horizon"]),
                dt=float(snapshot["integration"]["dt"]),
                ancillary_mode=entry["ancillary_mode"],
                lag_time_constant=float(entry["lag_time_constant"]),
                arx_model=arx_model,
                arx_kw_per_pu=float(entry["fan_kw_per_pu"]),
                label=entry["label"],
            )
        )
    return SimulateConfig(tuple(scenarios), snapshot)


_ASSUMPTION_KEYS = (
    "per_building_swing_kw",
    "building_floor_area_ft2",
    "national_floor_area_ft2",
    "vfd_fraction",
    "response_time_s",
)


def load_assumptions_config(path) -> tuple[FleetAssumptions, dict]:
    """Parse a capacity-estimate config into FleetAssumptions + snapshot."""
    path = Path(path)
    raw, text = _load_toml(path)
    top = _Section(raw, "", path, text)
    _check_schema(top)
    sec = _Section(top.take("assumptions", dict), "assumptions", path, text)
    defaults = FleetAssumptions()
    kwargs: dict[str, Any] = {
        key: sec.take(key, float, getattr(defaults, key)) for key in _ASSUMPTION_KEYS
    }
    published = sec.take("published_estimate_gw", float, math.nan)
    sec.reject_unknown()
    top.reject_unknown()
    if not math.isnan(published):
        kwargs["published_estimate_gw"] = published
    try:
        assumptions = FleetAssumptions(**kwargs)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    snapshot = {
        "schema_version": SCHEMA_VERSION,
        "assumptions": {
            **{key: kwargs[key] for key in _ASSUMPTION_KEYS},
            **(
                {"published_estimate_gw": published}
                if not math.isnan(published)
                else {}
            ),
        },
    }
    return assumptions, snapshot


def assumptions_from_snapshot(snapshot: dict) -> FleetAssumptions:
    return FleetAssumptions(**snapshot["assumptions"])
