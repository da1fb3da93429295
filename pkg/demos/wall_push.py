"""Drive a point mass into a stiff wall and watch the force settle at w_max.

The commanded pose sits well past the wall, so the tracking error stays
beyond the virtual boundary and both phase branches of the controller clamp
at the force ceiling. The steady contact force therefore equals w_max exactly
in this frictionless model; a shallower command would leave the convergence
branch unsaturated and the contact would chatter instead of settling.
"""

from __future__ import annotations

import argparse

import numpy as np

from fractal_impedance import Scenario, run_scenario


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--w-max", type=float, default=30.0, help="force ceiling (N)")
    parser.add_argument("--depth", type=float, default=0.25, help="command depth past the wall (m)")
    parser.add_argument("--out", default=None, help="optional CSV of (t, x, contact force)")
    args = parser.parse_args()

    sc = Scenario(
        name="wall_push",
        plant="point_mass",
        controller="fic",
        duration=6.0,
        dt=1e-4,
        feedback_hz=1000.0,
        x0=(0.4,),
        reference={"type": "static", "pose": (0.5 + args.depth,)},
        k_const=0.0,
        w_max=args.w_max,
        x_b=0.1,
        damping=25.0,
        wall={"axis": 0, "offset": 0.5, "stiffness": 1e4, "damping": 200.0},
    )
    rec = run_scenario(sc)
    force = -rec.contact_f[:, 0]  # reaction pushing back on the mass

    for t_mark in (0.5, 1.0, 2.0, 4.0, 6.0 - sc.dt):
        k = int(np.searchsorted(rec.t, t_mark))
        print(f"t = {rec.t[k]:5.2f} s: x = {rec.x[k, 0]:.4f} m, contact force = {force[k]:8.4f} N")

    steady = force[rec.t >= 4.0]
    print(
        f"\nsteady force {float(np.mean(steady)):.6f} N "
        f"({100.0 * float(np.mean(steady)) / args.w_max:.2f}% of the {args.w_max:g} N ceiling)"
    )
    print(f"work dissipated into the wall damper: {-rec.ledger.contact_work:.6f} J")

    if args.out:
        data = np.column_stack((rec.t, rec.x[:, 0], force))
        np.savetxt(
            args.out, data, fmt="%.9g", delimiter=",",
            header="t,x,contact_force", comments="",
        )
        print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
