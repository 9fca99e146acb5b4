#!/usr/bin/env python3
"""Rubber-layer material in homogeneous cyclic shear at three frequencies.

Two Maxwell branches share tau = 17.5 but differ in stiffness by two orders
of magnitude, so the loop shape is frequency sensitive: at high omega the
response stiffens toward the hyperelastic limit and the loop thins.
"""

import argparse
import os
import sys

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from viscokit import (
    HillBranch,
    LoadProgram,
    MaterialModel,
    MaxwellBranch,
    Sinusoid,
    run_strain_controlled,
)

MODEL = MaterialModel(
    equilibrium=(
        HillBranch(mu=1.75e5, strain="CR:m=2.0,n=0.0"),
        HillBranch(mu=0.35e5, strain="CR:m=0.0,n=0.0"),
    ),
    maxwell=(
        MaxwellBranch(mu=0.536e4, strain="CR:m=2.0,n=0.0", tau=17.5),
        MaxwellBranch(mu=5.3064e5, strain="CR:m=0.0,n=0.0", tau=17.5),
    ),
)

CASES = ((0.03, 0.1), (0.3, 0.01), (3.0, 0.001))  # (omega, dt)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--amplitude", type=float, default=0.35)
    ap.add_argument("--cycles", type=int, default=2)
    ap.add_argument("--out-dir", default="out")
    args = ap.parse_args()

    os.makedirs(args.out_dir, exist_ok=True)
    print(f"gamma0 = {args.amplitude:g}, {args.cycles} cycle(s) per frequency")
    print("omega    dt       peak force     loop area (last cycle)")
    for omega, dt in CASES:
        t_end = args.cycles * 2.0 * np.pi / omega
        program = LoadProgram(
            kind="simple_shear",
            schedule=Sinusoid(amplitude=args.amplitude, omega=omega),
            t_end=t_end,
            dt=dt,
        )
        series = run_strain_controlled(MODEL, program)
        gamma = series.f[:, 1, 2]
        force = np.einsum("nij,njk->nik", series.f, series.s)[:, 1, 2]
        period = 2.0 * np.pi / omega
        last = series.t >= (args.cycles - 1) * period
        area = float(np.trapz(force[last], gamma[last]))
        peak = float(np.max(np.abs(force[last])))
        print(f"{omega:<8g} {dt:<8g} {peak:12.5e}  {area:12.5e}")
        path = os.path.join(args.out_dir, f"bearing_shear_w{omega:g}.csv")
        series.to_csv(path)
        print(f"                  -> {path}")


if __name__ == "__main__":
    main()
