#!/usr/bin/env python3
"""Run the bundled three-case frequency-regulation experiment and print the
comparison table. Trajectories land in results/regulation/ as CSV."""

from pathlib import Path
import sys

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "src"))

from gridfan.cli import main  # noqa: E402

if __name__ == "__main__":
    out = REPO / "results" / "regulation"
    code = main([
        "simulate",
        "--config", str(REPO / "configs" / "regulation_cases.toml"),
        "--out", str(out),
    ])
    sys.exit(code)
