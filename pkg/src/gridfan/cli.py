"""Command-line front end.

Subcommands: simulate, identify, gen-fixture, estimate, analyze-dr.
Exit codes: 0 success, 2 configuration/validation problem, 3 numerical abort,
4 excitation (rank) failure during identification.

Every run drops a manifest.json next to its outputs holding the resolved
configuration; re-running a manifest reproduces the outputs bit-exactly.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .configio import (
    ConfigError,
    assumptions_from_snapshot,
    load_assumptions_config,
    load_simulate_config,
    simulate_config_from_snapshot,
)
from .csvio import (
    read_io_csv,
    read_telemetry_csv,
    write_io_csv,
    write_key_value_csv,
)
from .flex import DrEvent, analyze_dr_event, national_capacity
from .sim import (
    ComparisonRow,
    ComparisonTable,
    SimulationDiverged,
    compare_scenarios,
    run_scenario,
    write_comparison_csv,
    write_trajectory_csv,
)
from .sysid import (
    ExcitationError,
    FixtureConfig,
    IoRecord,
    fit_metric,
    fit_record,
    generate_fan_fixture,
    predict_one_step,
    save_arx_model,
    select_orders,
    simulate_arx,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_EXCITATION = 4


def _slug(label: str) -> str:
    return "".join(c if c.isalnum() or c in "-_" else "-" for c in label.lower())


def _write_manifest(out_dir: Path, payload: dict) -> Path:
    payload = {"tool": "gridfan", "version": __version__, **payload}
    path = out_dir / "manifest.json"
    path.write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return path


def cmd_simulate(config_path, out_dir, dt_override=None, snapshot=None) -> int:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if snapshot is not None:
        config = simulate_config_from_snapshot(snapshot)
    else:
        config = load_simulate_config(config_path, dt_override=dt_override)
    if len(config.scenarios) >= 2:
        table, trajectories = compare_scenarios(config.scenarios)
    else:
        trajectories = [run_scenario(config.scenarios[0])]
        rows = (ComparisonRow(trajectories[0].label, trajectories[0].summary()),)
        table = ComparisonTable(rows, (rows[0].label,), (rows[0].label,))

    outputs = []
    for traj in trajectories:
        name = f"trajectory_{_slug(traj.label)}.csv"
        write_trajectory_csv(traj, out_dir / name)
        outputs.append(name)
    write_comparison_csv(table, out_dir / "comparison.csv")
    outputs.append("comparison.csv")
    _write_manifest(
        out_dir,
        {
            "subcommand": "simulate",
            "config_snapshot": config.snapshot,
            "inputs": {"config": str(config_path) if config_path else None},
            "outputs": outputs,
            "seed": None,
        },
    )

    print(f"simulated {len(trajectories)} scenario(s) -> {out_dir}")
    for row in table.rows:
        s = row.summary
        print(
            f"  {row.label}: max|dev|={s.max_abs_freq_dev:.6f} p.u. "
            f"integral|dev|={s.integral_abs_freq_dev:.6f} p.u.*s "
            f"anc energy={s.ancillary_energy:.4f} p.u.*s"
        )
    print("ordering by max |freq deviation|: " + " < ".join(table.by_max_abs_dev))
    print(
        "ordering by integral |freq deviation|: "
        + " < ".join(table.by_integral_abs_dev)
    )
    return EXIT_OK


def _parse_orders(text: str):
    if text == "auto":
        return None
    parts = text.split(",")
    if len(parts) != 3:
        raise ConfigError(
            f"--orders must be 'auto' or 'na,nb,nk', got {text!r}"
        )
    try:
        na, nb, nk = (int(v) for v in parts)
    except ValueError as exc:
        raise ConfigError(f"--orders entries must be integers, got {text!r}") from exc
    return na, nb, nk


def cmd_identify(data_csv, orders_text, out_path, holdout_fraction=0.3) -> int:
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    record = read_io_csv(data_csv)
    orders = _parse_orders(orders_text)
    if orders is None:
        orders = select_orders(record, holdout_fraction=holdout_fraction)
    na, nb, nk = orders

    # Fit on the leading portion around its operating point; the trailing
    # holdout_fraction stays untouched so the tail fit is a genuine test.
    split = int(round(len(record) * (1.0 - holdout_fraction)))
    head = IoRecord(record.u[:split], record.y[:split], record.sample_period)
    model, diag = fit_record(head, na, nb, nk)
    dev_u = tuple(v - model.u_offset for v in record.u)
    dev_y = tuple(v - model.y_offset for v in record.y)
    free_run = simulate_arx(model, dev_u, dev_y[: model.offset])
    one_step = predict_one_step(model, dev_u, dev_y)
    tail_fit = fit_metric(dev_y[split:], free_run[split:])
    full_fit = fit_metric(dev_y[model.offset :], free_run[model.offset :])
    one_step_fit = fit_metric(dev_y[model.offset :], one_step[model.offset :])

    save_arx_model(model, out_path)
    report_lines = [
        f"fan model identification: {data_csv}",
        f"  orders: na={na} nb={nb} nk={nk} ({'auto-selected' if orders_text == 'auto' else 'requested'})",
        f"  sample period: {model.sample_period:g} s",
        f"  operating point: u={model.u_offset:.6g}, y={model.y_offset:.6g}",
        f"  theta: {' '.join(f'{v:.17g}' for v in model.theta)}",
        f"  regressor rank: {diag.rank}/{diag.n_parameters} over {diag.n_equations} equations",
        f"  residual rms: {diag.residual_rms:.6g}",
        f"  free-run fit (full record): {full_fit:.2f} %",
        f"  free-run fit (held-out tail {int(holdout_fraction * 100)}%): {tail_fit:.2f} %",
        f"  one-step fit: {one_step_fit:.2f} %",
    ]
    report_path = out_path.with_suffix(out_path.suffix + ".report.txt")
    report_path.write_text("\n".join(report_lines) + "\n", encoding="utf-8")
    _write_manifest(
        out_path.parent,
        {
            "subcommand": "identify",
            "config_snapshot": {
                "orders": list(orders),
                "orders_requested": orders_text,
                "holdout_fraction": holdout_fraction,
            },
            "inputs": {"data": str(data_csv)},
            "outputs": [out_path.name, report_path.name],
            "seed": None,
        },
    )
    print("\n".join(report_lines))
    print(f"model written to {out_path}")
    return EXIT_OK


def cmd_gen_fixture(settings: FixtureConfig, out_csv) -> int:
    out_csv = Path(out_csv)
    out_csv.parent.mkdir(parents=True, exist_ok=True)
    record = generate_fan_fixture(settings)
    write_io_csv(record, out_csv)
    _write_manifest(
        out_csv.parent,
        {
            "subcommand": "gen-fixture",
            "config_snapshot": {
                "pressure_low": settings.pressure_low,
                "pressure_high": settings.pressure_high,
                "switching_period_min": settings.switching_period_min,
                "span_min": settings.span_min,
                "sample_period": settings.sample_period,
                "noise_std_kw": settings.noise_std_kw,
            },
            "inputs": {},
            "outputs": [out_csv.name],
            "seed": settings.seed,
        },
    )
    print(
        f"fixture with {len(record)} samples "
        f"({settings.switching_period_min} min switching, "
        f"{settings.span_min:g} min span) -> {out_csv}"
    )
    return EXIT_OK


def cmd_estimate(config_path, out_dir, snapshot=None) -> int:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if snapshot is not None:
        assumptions = assumptions_from_snapshot(snapshot)
        snap = snapshot
    else:
        assumptions, snap = load_assumptions_config(config_path)
    report = national_capacity(assumptions)

    pairs = [
        ("per_building_swing_kw", assumptions.per_building_swing_kw),
        ("building_floor_area_ft2", assumptions.building_floor_area_ft2),
        ("flexibility_density_w_per_ft2", report.density_w_per_ft2),
        ("national_floor_area_ft2", assumptions.national_floor_area_ft2),
        ("vfd_fraction", assumptions.vfd_fraction),
        ("response_time_s", assumptions.response_time_s),
        ("capacity_gw", report.gigawatts),
    ]
    if report.published_estimate_gw is not None:
        pairs.append(("published_estimate_gw", report.published_estimate_gw))
    if report.discrepancy_note:
        pairs.append(("note", report.discrepancy_note))
    write_key_value_csv(pairs, out_dir / "capacity_report.csv")
    text = "\n".join(report.lines()) + "\n"
    (out_dir / "capacity_report.txt").write_text(text, encoding="utf-8")
    _write_manifest(
        out_dir,
        {
            "subcommand": "estimate",
            "config_snapshot": snap,
            "inputs": {"config": str(config_path) if config_path else None},
            "outputs": ["capacity_report.csv", "capacity_report.txt"],
            "seed": None,
        },
    )
    print(text, end="")
    return EXIT_OK


def _parse_window(text: str, flag: str) -> tuple[float, float]:
    parts = text.split(",")
    if len(parts) != 2:
        raise ConfigError(f"{flag} must be 'start,end' in epoch seconds, got {text!r}")
    try:
        start, end = float(parts[0]), float(parts[1])
    except ValueError as exc:
        raise ConfigError(f"{flag} entries must be numbers, got {text!r}") from exc
    return start, end


def cmd_analyze_dr(data_csv, event_window, baseline_window, out_dir) -> int:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    series = read_telemetry_csv(data_csv)
    try:
        event = DrEvent(series, event_window, baseline_window)
        report = analyze_dr_event(event)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    pairs = [
        ("baseline_start", event.baseline_window[0]),
        ("baseline_end", event.baseline_window[1]),
        ("event_start", event.event_window[0]),
        ("event_end", event.event_window[1]),
        ("baseline_mean_kw", report.baseline_mean_kw),
        ("event_mean_kw", report.event_mean_kw),
        ("drop_kw", report.drop_kw),
        ("percent_drop", report.percent_drop),
        ("event_hours", report.event_hours),
        ("energy_saved_kwh", report.energy_saved_kwh),
    ]
    write_key_value_csv(pairs, out_dir / "dr_report.csv")
    text = "\n".join(report.lines()) + "\n"
    (out_dir / "dr_report.txt").write_text(text, encoding="utf-8")
    _write_manifest(
        out_dir,
        {
            "subcommand": "analyze-dr",
            "config_snapshot": {
                "event_window": list(event.event_window),
                "baseline_window": list(event.baseline_window),
            },
            "inputs": {"data": str(data_csv)},
            "outputs": ["dr_report.csv", "dr_report.txt"],
            "seed": None,
        },
    )
    print(text, end="")
    return EXIT_OK


def run_from_manifest(manifest_path, out_dir) -> int:
    """Re-run a recorded manifest into a fresh output directory."""
    manifest = json.loads(Path(manifest_path).read_text(encoding="utf-8"))
    sub = manifest["subcommand"]
    snap = manifest["config_snapshot"]
    if sub == "simulate":
        return cmd_simulate(None, out_dir, snapshot=snap)
    if sub == "estimate":
        return cmd_estimate(None, out_dir, snapshot=snap)
    if sub == "gen-fixture":
        settings = FixtureConfig(**snap, seed=manifest["seed"])
        return cmd_gen_fixture(settings, Path(out_dir) / manifest["outputs"][0])
    if sub == "identify":
        orders = manifest["config_snapshot"]["orders"]
        return cmd_identify(
            manifest["inputs"]["data"],
            ",".join(str(v) for v in orders),
            Path(out_dir) / manifest["outputs"][0],
            holdout_fraction=manifest["config_snapshot"]["holdout_fraction"],
        )
    if sub == "analyze-dr":
        return cmd_analyze_dr(
            manifest["inputs"]["data"],
            tuple(snap["event_window"]),
            tuple(snap["baseline_window"]),
            out_dir,
        )
    raise ConfigError(f"{manifest_path}: unknown subcommand {sub!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gridfan",
        description=(
            "Grid frequency regulation with fast ancillary service from "
            "building HVAC fans: simulation, fan-model identification and "
            "fleet flexibility analytics."
        ),
    )
    parser.add_argument("--version", action="version", version=__version__)
    subs = parser.add_subparsers(dest="subcommand", required=True)

    sim = subs.add_parser("simulate", help="run scenario family from a config file")
    sim.add_argument("--config", required=True, help="TOML scenario config")
    sim.add_argument("--out", required=True, help="output directory")
    sim.add_argument(
        "--dt-override", type=float, default=None, help="replace the config's dt"
    )

    ident = subs.add_parser("identify", help="fit a fan model from a CSV record")
    ident.add_argument("--data", required=True, help="CSV with columns timestamp,u,y")
    ident.add_argument(
        "--orders", default="auto", help="'na,nb,nk' or 'auto' (default auto)"
    )
    ident.add_argument("--out", required=True, help="model file to write")

    fix = subs.add_parser("gen-fixture", help="generate a synthetic fan record")
    fix.add_argument("--out", required=True, help="CSV file to write")
    fix.add_argument("--seed", type=int, default=0)
    fix.add_argument("--period-minutes", type=int, default=2, dest="period")
    fix.add_argument("--span-minutes", type=float, default=30.0, dest="span")
    fix.add_argument("--sample-period", type=float, default=2.0)
    fix.add_argument("--noise-std", type=float, default=0.25)
    fix.add_argument("--pressure-low", type=float, default=1.2)
    fix.add_argument("--pressure-high", type=float, default=1.9)

    est = subs.add_parser("estimate", help="fleet capacity estimate from a config")
    est.add_argument("--config", required=True, help="TOML assumptions config")
    est.add_argument("--out", required=True, help="output directory")

    dr = subs.add_parser("analyze-dr", help="demand-response event report")
    dr.add_argument("--data", required=True, help="CSV with columns timestamp,kw")
    dr.add_argument("--event", required=True, help="event window 'start,end' (epoch s)")
    dr.add_argument(
        "--baseline",
        default=None,
        help="baseline window 'start,end'; default: 2 h before the event",
    )
    dr.add_argument("--out", required=True, help="output directory")

    rerun = subs.add_parser("rerun", help="re-run a recorded manifest")
    rerun.add_argument("--manifest", required=True)
    rerun.add_argument("--out", required=True, help="output directory")

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.subcommand == "simulate":
            return cmd_simulate(args.config, args.out, dt_override=args.dt_override)
        if args.subcommand == "identify":
            return cmd_identify(args.data, args.orders, args.out)
        if args.subcommand == "gen-fixture":
            try:
                settings = FixtureConfig(
                    pressure_low=args.pressure_low,
                    pressure_high=args.pressure_high,
                    switching_period_min=args.period,
                    span_min=args.span,
                    sample_period=args.sample_period,
                    noise_std_kw=args.noise_std,
                    seed=args.seed,
                )
            except ValueError as exc:
                raise ConfigError(str(exc)) from exc
            return cmd_gen_fixture(settings, args.out)
        if args.subcommand == "estimate":
            return cmd_estimate(args.config, args.out)
        if args.subcommand == "analyze-dr":
            event = _parse_window(args.event, "--event")
            baseline = (
                _parse_window(args.baseline, "--baseline") if args.baseline else None
            )
            return cmd_analyze_dr(args.data, event, baseline, args.out)
        if args.subcommand == "rerun":
            return run_from_manifest(args.manifest, args.out)
        parser.error(f"unknown subcommand {args.subcommand}")
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SimulationDiverged as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ExcitationError as exc:
        print(f"identification failed: {exc}", file=sys.stderr)
        return EXIT_EXCITATION
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
