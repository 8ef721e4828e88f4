#!/usr/bin/env python3
"""Fleet capacity estimates for the 2003 stock survey inputs and the 2035
floor-space projection. Reports land in results/capacity/."""

from pathlib import Path
import sys

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "src"))

from gridfan.cli import main  # noqa: E402

if __name__ == "__main__":
    code = 0
    for name in ("capacity_2003", "capacity_2035"):
        print(f"--- {name} ---")
        code |= main([
            "estimate",
            "--config", str(REPO / "configs" / f"{name}.toml"),
            "--out", str(REPO / "results" / "capacity" / name),
        ])
    sys.exit(code)
