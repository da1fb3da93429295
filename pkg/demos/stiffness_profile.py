"""Print the saturating spring profile for a few virtual boundary sizes.

Inside the boundary the stiffness grows exponentially with displacement; at
the boundary the force reaches its ceiling w_max and stays there. Shrinking
x_B steepens the profile without ever raising the force above w_max, which is
what makes the boundary a safe tuning knob.
"""

from __future__ import annotations

import argparse

import numpy as np

from fractal_impedance import StiffnessParams, spring_energy, spring_force, stiffness


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--w-max", type=float, default=30.0, help="force ceiling (N)")
    parser.add_argument("--k-const", type=float, default=0.0, help="constant stiffness term")
    parser.add_argument("--out", default=None, help="optional CSV output path")
    args = parser.parse_args()

    boundaries = (0.1, 0.05, 0.02)
    params = [StiffnessParams(args.k_const, args.w_max, xb) for xb in boundaries]
    x = np.linspace(0.0, 0.15, 16)

    header = f"{'x (m)':>8}" + "".join(
        f"{'F@xB=' + format(p.x_b, 'g'):>14}" for p in params
    )
    print(header)
    rows = []
    for xi in x:
        forces = [spring_force(p, xi) for p in params]
        print(f"{xi:8.3f}" + "".join(f"{f:14.4f}" for f in forces))
        rows.append([xi] + forces)

    print()
    for p in params:
        e_b = spring_energy(p, p.x_b)
        print(
            f"x_B = {p.x_b:g} m: stiffness at rest {stiffness(p, 0.0):.2f} N/m, "
            f"force at boundary {spring_force(p, p.x_b):.2f} N, "
            f"stored energy at boundary {e_b:.4f} J"
        )

    if args.out:
        cols = ["x"] + [f"force_xb_{p.x_b:g}" for p in params]
        np.savetxt(
            args.out, np.asarray(rows), fmt="%.9g", delimiter=",",
            header=",".join(cols), comments="",
        )
        print(f"\nwrote {args.out}")


if __name__ == "__main__":
    main()
