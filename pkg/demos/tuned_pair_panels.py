"""Reproduce the six benchmark operating points of the tuned-pair reservoir.

Each panel fixes the pulse settings (u, mu, epsilon, chi) at interaction
angle theta = pi/20, iterates the exact two-qubit channel to its steady
state, and prints the quadrature summary next to the published reference
row.  Columns follow the reference-table frame: listed means are
(-<X_pi/2>, <X_0>) of the internal frame, and the two deviation columns
are read along -mu/2 and its perpendicular.

The closing section runs the inverse workflow: hand `tune` a displaced
squeezed target and read back which pulse settings realise it.
"""

import argparse
import math

import numpy as np

from qubitbath.fock_space import SqueezeTarget
from qubitbath.observables import squeezing_db
from qubitbath.pair_reservoir import PairTuning, simulate_pair_reservoir, tune

THETA = math.pi / 20.0

# (label, u, mu, epsilon, chi, n_max), followed by the published steady row
# (<X_0>, <X_pi/2>, dX_first, dX_second, r_eff[dB]) in the table frame.
PANELS = [
    ("plain squeeze", math.pi / 6, 0.0, 0.0, 0.0, 60,
     (0.0, 0.0, 0.970, 0.258, 5.75)),
    ("axis flip", math.pi / 6, math.pi, 0.0, 0.0, 60,
     (0.0, 0.0, 0.970, 0.258, 5.75)),
    ("strong squeeze", math.pi / 4.5, 0.0, 0.0, 0.0, 80,
     (0.0, 0.0, 1.711, 0.146, 10.7)),
    ("displaced", math.pi / 6, 0.0, math.pi / 30, 0.0, 60,
     (0.0, 2.454, 0.921, 0.272, 5.3)),
    ("rotated, chi=pi/2", math.pi / 6, math.pi / 2, math.pi / 30, math.pi / 2, 60,
     (1.589, 0.921, 0.946, 0.265, 5.5)),
    ("rotated, chi=0", math.pi / 6, math.pi / 2, math.pi / 30, 0.0, 60,
     (0.921, 1.589, 0.946, 0.265, 5.5)),
]


def table_row(stats, mu):
    axis = -mu / 2.0
    d = []
    for phi in (axis, axis + math.pi / 2.0):
        direction = np.array([math.cos(phi), math.sin(phi)])
        d.append(math.sqrt(float(direction @ stats.var_matrix @ direction)))
    return (-stats.mean_xpi2, stats.mean_x0, d[0], d[1],
            squeezing_db(min(d)))


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--steps", type=int, default=20_000)
    parser.add_argument("--tol", type=float, default=1e-9)
    args = parser.parse_args()

    widths = (24, 9, 9, 9, 9, 9)
    header = ("panel", "<X_0>", "<X_pi/2>", "dX_1", "dX_2", "r_eff[dB]")
    print("  ".join(h.ljust(w) for h, w in zip(header, widths)))
    for label, u, mu, epsilon, chi, n_max, reference in PANELS:
        tuning = PairTuning(u=u, theta=THETA, mu=mu, epsilon=epsilon, chi=chi)
        run = simulate_pair_reservoir(
            tuning, n_max=n_max, steps=args.steps, tol=args.tol, record_every=0
        )
        row = table_row(run.trajectory[-1], mu)
        for tag, values in (("sim", row), ("ref", reference)):
            cells = [f"{label} ({tag})"]
            cells += [f"{0.0 if abs(v) < 5e-4 else v:.3f}" for v in values]
            print("  ".join(c.ljust(w) for c, w in zip(cells, widths)))
        if not run.converged:
            print(f"  warning: {label} did not converge in {args.steps} steps")

    print()
    print("inverse workflow: which pulses give a 10.6 dB squeeze?")
    report = tune(SqueezeTarget(alpha=0.0, r=-1.2212, phi_r=0.0), THETA)
    t = report.tuning
    print(f"  tune -> u = {t.u:.5f} (pi/{math.pi / t.u:.3f}), mu = {t.mu:.3f}, "
          f"epsilon = {t.epsilon:.3f}, chi = {t.chi:.3f}")
    print(f"  predicted convergence rate per pair: kappa = {report.kappa:.5f}")


if __name__ == "__main__":
    main()
