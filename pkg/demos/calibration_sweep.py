"""Find the largest stable force ceiling for each virtual boundary size.

Small boundaries concentrate the whole force swing into a narrow displacement
band, and under a slow feedback loop that turns into bang-bang ringing. The
sweep replays one pulse scenario per (x_B, w_max) candidate, walking w_max
downward until the ring-down is clean, and reports the stability frontier.
The frontier is monotone: larger boundaries tolerate the full ceiling.
"""

from __future__ import annotations

import argparse
import math

from fractal_impedance import Scenario, calibrate_sweep


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument(
        "--grid", default="0.1,0.05,0.01,0.005,0.0025,0.001",
        help="descending x_B grid (m)",
    )
    parser.add_argument("--wmax-init", type=float, default=30.0)
    parser.add_argument("--duration", type=float, default=10.0, help="episode length (s)")
    args = parser.parse_args()

    base = Scenario(
        name="calibration_base",
        plant="point_mass",
        controller="fic",
        duration=args.duration,
        dt=1e-3,
        feedback_hz=100.0,
        x0=(0.0,),
        reference={"type": "static", "pose": (0.0,)},
        k_const=0.0,
        w_max=args.wmax_init,
        x_b=0.1,
        damping=0.5,
        pulses=({"start": 0.5, "duration": 0.15, "wrench": (10.0,)},),
    )
    grid = [float(v) for v in args.grid.split(",")]
    rows = calibrate_sweep(base, args.wmax_init, grid)

    print(f"{'x_B (m)':>10} {'largest stable w_max (N)':>26}")
    for row in rows:
        w = row["w_max"]
        label = "none stable" if math.isnan(w) else f"{w:g}"
        print(f"{row['x_b']:>10g} {label:>26}")


if __name__ == "__main__":
    main()
