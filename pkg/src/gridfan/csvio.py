"""CSV formats shared by the CLI and library.

Three-column records (timestamp,u,y) carry identification data; two-column
telemetry (timestamp,kw) carries fan power for demand-response analysis.
Headers are mandatory and validated; numbers are emitted with 17 significant
digits so files round-trip doubles exactly.
"""

from __future__ import annotations

import csv

import numpy as np

from .flex import TimeSeries
from .sysid import IoRecord

IO_HEADER = ["timestamp", "u", "y"]
SIGNAL_HEADER = ["timestamp", "value"]
TELEMETRY_HEADER = ["timestamp", "kw"]


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _read_rows(path, expected_header: list[str]) -> list[list[str]]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file, expected header {expected_header}")
        if [h.strip() for h in header] != expected_header:
            raise ValueError(
                f"{path}: bad header {header}, expected {expected_header}"
            )
        rows = [row for row in reader if row]
    if not rows:
        raise ValueError(f"{path}: no data rows")
    return rows


def _infer_period(timestamps: np.ndarray, path) -> float:
    diffs = np.diff(timestamps)
    if len(diffs) == 0:
        raise ValueError(f"{path}: need at least two samples")
    period = float(np.median(diffs))
    if period <= 0:
        raise ValueError(f"{path}: timestamps must be strictly increasing")
    if np.any(np.abs(diffs - period) > 0.01 * period):
        worst = int(np.argmax(np.abs(diffs - period)))
        raise ValueError(
            f"{path}: non-uniform sampling at row {worst + 2}: step of "
            f"{diffs[worst]:g} s against nominal {period:g} s (1% tolerance)"
        )
    return period


def read_io_csv(path) -> IoRecord:
    """Load a (timestamp,u,y) record, validating uniform sampling."""
    rows = _read_rows(path, IO_HEADER)
    data = np.array([[float(v) for v in row] for row in rows])
    if data.shape[1] != 3:
        raise ValueError(f"{path}: expected 3 columns, got {data.shape[1]}")
    period = _infer_period(data[:, 0], path)
    return IoRecord(
        u=tuple(data[:, 1]),
        y=tuple(data[:, 2]),
        sample_period=period,
        timestamps=tuple(data[:, 0]),
    )


def read_signal_csv(path) -> tuple[np.ndarray, np.ndarray]:
    """Load a single (timestamp,value) signal with uniform sampling."""
    rows = _read_rows(path, SIGNAL_HEADER)
    data = np.array([[float(v) for v in row] for row in rows])
    if data.shape[1] != 2:
        raise ValueError(f"{path}: expected 2 columns, got {data.shape[1]}")
    _infer_period(data[:, 0], path)
    return data[:, 0], data[:, 1]


def read_io_pair_csv(input_path, output_path) -> IoRecord:
    """Combine separate input and output signal files into one record.

    Both files must share the same uniform time base.
    """
    ut, uv = read_signal_csv(input_path)
    yt, yv = read_signal_csv(output_path)
    if len(ut) != len(yt) or np.any(ut != yt):
        raise ValueError(
            f"{input_path} and {output_path} do not share a time base"
        )
    period = _infer_period(ut, input_path)
    return IoRecord(
        u=tuple(uv), y=tuple(yv), sample_period=period, timestamps=tuple(ut)
    )


def write_io_csv(record: IoRecord, path) -> None:
    ts = record.timestamps
    if ts is None:
        ts = tuple(i * record.sample_period for i in range(len(record)))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(IO_HEADER) + "\n")
        for t, u, y in zip(ts, record.u, record.y):
            fh.write(f"{_fmt(t)},{_fmt(u)},{_fmt(y)}\n")


def read_telemetry_csv(path) -> TimeSeries:
    """Load (timestamp,kw) power telemetry; sampling need not be uniform."""
    rows = _read_rows(path, TELEMETRY_HEADER)
    data = np.array([[float(v) for v in row] for row in rows])
    if data.shape[1] != 2:
        raise ValueError(f"{path}: expected 2 columns, got {data.shape[1]}")
    return TimeSeries(timestamps=tuple(data[:, 0]), values_kw=tuple(data[:, 1]))


def write_telemetry_csv(series: TimeSeries, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(TELEMETRY_HEADER) + "\n")
        for t, v in zip(series.timestamps, series.values_kw):
            fh.write(f"{_fmt(t)},{_fmt(v)}\n")


def write_key_value_csv(pairs: list[tuple[str, object]], path) -> None:
    """Two-column (key,value) report file."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("key,value\n")
        for key, value in pairs:
            if isinstance(value, float):
                fh.write(f"{key},{_fmt(value)}\n")
            else:
                fh.write(f"{key},{value}\n")
