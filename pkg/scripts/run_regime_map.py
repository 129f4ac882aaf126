#!/usr/bin/env python3
"""Map the steady-state regime over the (probe power, drive Rabi rate) plane.

Classifies every grid point as EIT, MWI, or self-oscillation and writes the
map plus the oscillation-onset boundary extracted per power column.  Also
traces the curve where Im sigma_1e changes sign (the transparency/gain
crossover), which is power independent in this model.
"""

import argparse
import csv
import pathlib
from dataclasses import replace

import numpy as np

from nvgyro.lambda_dynamics import default_params, perfect_eit_curve
from nvgyro.sensing import sweep_power_drive


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--workers", type=int, default=4)
    ap.add_argument("--np", type=int, default=36, dest="n_p")
    ap.add_argument("--nw", type=int, default=48, dest="n_w")
    ap.add_argument("--out", type=pathlib.Path, default=pathlib.Path("out"))
    args = ap.parse_args()

    base = default_params()
    p_grid = np.linspace(-90, -20, args.n_p)
    w_grid = 2 * np.pi * np.geomspace(2e3, 4e5, args.n_w)
    res = sweep_power_drive(base, p_grid, w_grid, workers=args.workers)

    args.out.mkdir(parents=True, exist_ok=True)
    with open(args.out / "regime_map.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["p_dbm", "omega2_hz", "regime"])
        for c in res.cells:
            w.writerow([c.p_dbm, c.omega_2 / (2 * np.pi), c.regime])

    with open(args.out / "oscillation_boundary.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["p_dbm", "omega2_onset_hz"])
        for p, om in res.boundary:
            w.writerow([p, om / (2 * np.pi)])

    crossing = perfect_eit_curve(base, p_grid[::6])
    print(f"wrote {args.out}/regime_map.csv ({len(res.cells)} cells)")
    print("Im sigma_1e zero crossings (dBm, Hz):")
    for p, om in crossing:
        print(f"  {p:6.1f}  {om / (2 * np.pi):.1f}")


if __name__ == "__main__":
    main()
