#!/usr/bin/env python3
"""Rate-function and quasi-potential numbers with their oracles.

Prints the discretisation floor on a PDE path, the cost of a shifted path,
the holding cost of a flat profile, the homogeneous quasi-potential and the
well-depth estimates in the two-well regime.
"""
import argparse
import json

import numpy as np

from rdlab.hydro import DensityPath, DensitySlice, evolve
from rdlab.ldp import holding_cost, quasipotential_homogeneous, rate_function, well_depths
from rdlab.model import example_2_1, reaction_polynomials


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--M", type=int, default=128)
    ap.add_argument("--dt", type=float, default=1e-3)
    ap.add_argument("--shift", type=float, default=0.05)
    ap.add_argument("--radius", type=float, default=0.15)
    ap.add_argument("--out", default="action_checks.json")
    args = ap.parse_args()

    out = {}
    p25 = reaction_polynomials(example_2_1(0.25))
    rho0 = DensitySlice.from_function(lambda x: 0.5 + 0.3 * np.cos(2 * np.pi * x), args.M)
    path = evolve(rho0, p25, 1.0, args.dt)
    floor = rate_function(path, rho0, p25)
    moved = DensityPath(path.times, path.values + args.shift)
    out["floor"] = floor.value
    out["floor_iterations"] = floor.iterations
    out["shifted"] = rate_function(moved, moved.values[0], p25).value

    p0 = reaction_polynomials(example_2_1(0.0))
    hold = rate_function(DensityPath.constant(0.25, 32, 1.0, 100), DensitySlice.constant(0.25, 32), p0)
    out["holding"] = {"value": hold.value, "oracle": holding_cost(p0, 0.25)}
    qp = quasipotential_homogeneous(p0, 0.75, 0.5)
    out["quasipotential"] = {"value": qp.value, "oracle": qp.oracle}

    h0, per = well_depths(reaction_polynomials(example_2_1(0.75)), args.radius)
    out["well_depths"] = {"h0": h0, "wells": [{"well": w.well, "estimate": w.estimate} for w in per],
                          "label": per[0].label}
    print(json.dumps(out, indent=2))
    with open(args.out, "w") as fh:
        json.dump(out, fh, indent=2)


if __name__ == "__main__":
    main()
