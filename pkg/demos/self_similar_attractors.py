"""Trace the family of attractor orbits around a fixed target.

An undamped point mass is released at the target with increasing kinetic
energy. Each run diverges until the controller has absorbed the kinetic
energy, then rides a convergence spring sized to give exactly that energy
back. The resulting orbits nest inside each other: same shape, different
scale. Peak excursion grows with start energy while the controller force
never exceeds w_max.
"""

from __future__ import annotations

import argparse

import numpy as np

from fractal_impedance import Scenario, run_scenario


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument(
        "--energies", default="0.25,0.5,1.0,2.0", help="start kinetic energies (J)"
    )
    parser.add_argument("--duration", type=float, default=4.0, help="episode length (s)")
    parser.add_argument("--out", default=None, help="optional CSV of (energy, t, x_err, xdot)")
    args = parser.parse_args()

    energies = sorted(float(v) for v in args.energies.split(","))
    lines = ["energy,t,x_err,xdot"]
    print(f"{'E0 (J)':>8} {'peak |x_err| (m)':>18} {'peak |wrench| (N)':>18} {'switches':>9}")
    for e0 in energies:
        sc = Scenario(
            name=f"orbit_{e0:g}J",
            plant="point_mass",
            controller="fic",
            duration=args.duration,
            dt=1e-4,
            feedback_hz=10000.0,
            x0=(0.0,),
            xdot0=(float(np.sqrt(2.0 * e0)),),
            reference={"type": "static", "pose": (0.0,)},
            k_const=0.0,
            w_max=30.0,
            x_b=0.1,
            damping=0.0,
        )
        rec = run_scenario(sc)
        peak_x = float(np.max(np.abs(rec.x_err[:, 0])))
        peak_w = float(np.max(np.abs(rec.wrench[:, 0])))
        print(
            f"{e0:8.2f} {peak_x:18.4f} {peak_w:18.4f} "
            f"{len(rec.ledger.switch_events):9d}"
        )
        if args.out:
            for k in range(rec.n_samples):
                lines.append(
                    f"{e0:.9g},{rec.t[k]:.9g},{rec.x_err[k, 0]:.9g},{rec.xdot[k, 0]:.9g}"
                )

    if args.out:
        with open(args.out, "w", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
        print(f"\nwrote {args.out}")


if __name__ == "__main__":
    main()
