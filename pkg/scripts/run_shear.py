#!/usr/bin/env python3
"""Cyclic simple shear: six sinusoid cycles to the steady hysteresis loop.

Runs the two-equilibrium-branch material with one Maxwell branch whose strain
exponents are swept over (m, n) = (0,0), (1,0), (2,0); at full strain
amplitude the peak shear force grows with m.  Writes one CSV per case.
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

OMEGA = 0.3
CYCLES = 6


def shear_force(series):
    """Nominal traction component 2 on the reference plane with normal 3."""
    p = np.einsum("nij,njk->nik", series.f, series.s)
    return p[:, 1, 2]


def cycle_slice(t, omega, k):
    """Index range of the k-th full cycle (0-based)."""
    period = 2.0 * np.pi / omega
    return (t >= k * period) & (t <= (k + 1) * period)


def loop_metrics(series, omega):
    gamma = series.f[:, 1, 2]
    force = shear_force(series)
    last = cycle_slice(series.t, omega, CYCLES - 1)
    prev = cycle_slice(series.t, omega, CYCLES - 2)
    # signed path integral of force over gamma = work input per cycle, >= 0
    area = float(np.trapz(force[last], gamma[last]))
    # drift: compare the two last cycles at matching phase
    t_last = series.t[last] - (CYCLES - 1) * 2.0 * np.pi / omega
    t_prev = series.t[prev] - (CYCLES - 2) * 2.0 * np.pi / omega
    f_prev = np.interp(t_last, t_prev, force[prev])
    drift = float(np.max(np.abs(force[last] - f_prev)) / np.max(np.abs(force[last])))
    return float(np.max(np.abs(force[last]))), area, drift


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--gamma0", type=float, default=1.0)
    ap.add_argument("--dt", type=float, default=0.1)
    ap.add_argument("--out-dir", default="out")
    args = ap.parse_args()

    os.makedirs(args.out_dir, exist_ok=True)
    t_end = CYCLES * 2.0 * np.pi / OMEGA
    print(f"gamma(t) = {args.gamma0:g} sin({OMEGA:g} t), {CYCLES} cycles, dt = {args.dt:g}")
    print("(m,n)     peak force     loop area      drift last/prev cycle")
    for m in (0.0, 1.0, 2.0):
        model = MaterialModel(
            equilibrium=(
                HillBranch(mu=1.75e5, strain="CR:m=2.0,n=0.0"),
                HillBranch(mu=0.35e5, strain="CR:m=0.0,n=0.0"),
            ),
            maxwell=(
                MaxwellBranch(mu=5.36e5, strain=f"CR:m={m},n=0.0", tau=17.5),
            ),
        )
        program = LoadProgram(
            kind="simple_shear",
            schedule=Sinusoid(amplitude=args.gamma0, omega=OMEGA),
            t_end=t_end,
            dt=args.dt,
        )
        series = run_strain_controlled(model, program)
        peak, area, drift = loop_metrics(series, OMEGA)
        print(f"({m:g},0)    {peak:12.5e}  {area:12.5e}  {drift:.3e}")
        path = os.path.join(args.out_dir, f"shear_m{m:g}.csv")
        series.to_csv(path)
        print(f"          -> {path}")


if __name__ == "__main__":
    main()
