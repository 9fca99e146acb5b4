#!/usr/bin/env python3
"""Uniaxial creep study: ramp the axial nominal traction, hold, watch the
stretch creep toward the tau-independent equilibrium value.

Writes one CSV per relaxation time and prints a small progress table.
"""

import argparse
import os
import sys
import time

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from viscokit import (
    HillBranch,
    LoadProgram,
    MaterialModel,
    MaxwellBranch,
    RampHold,
    run_stress_controlled,
)

MU = 4.225e5
STRAIN = "CR:m=1.2,n=1.4"
RATE = 1.737e6
T_RAMP = 1.0


def make_model(tau):
    return MaterialModel(
        equilibrium=(HillBranch(mu=MU, strain=STRAIN),),
        maxwell=(MaxwellBranch(mu=MU, strain=STRAIN, tau=tau),),
    )


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--taus", type=float, nargs="+", default=[0.5, 5.0, 50.0])
    ap.add_argument("--t-end", type=float, default=200.0)
    ap.add_argument("--dt", type=float, default=0.05)
    ap.add_argument("--out-dir", default="out")
    args = ap.parse_args()

    os.makedirs(args.out_dir, exist_ok=True)
    probes = list(dict.fromkeys(t for t in (1.0, 5.0, 30.0, args.t_end) if t <= args.t_end))

    print(f"ramp to {RATE * T_RAMP:.4g} over {T_RAMP} time unit(s), hold to t = {args.t_end}")
    header = "tau      " + "".join(f"  lam({t:g})" for t in probes) + "   normQ/mu    steps/s"
    print(header)
    for tau in args.taus:
        program = LoadProgram(
            kind="uniaxial_stress",
            schedule=RampHold(rate=RATE, t_ramp=T_RAMP),
            t_end=args.t_end,
            dt=args.dt,
        )
        tic = time.perf_counter()
        series = run_stress_controlled(make_model(tau), program)
        wall = time.perf_counter() - tic
        lam_ax = series.f[:, 2, 2]
        cells = "".join(
            f"  {lam_ax[np.searchsorted(series.t, t)]:.6f}" for t in probes
        )
        rel_q = series.q_norms[-1, 0] / MU
        print(f"{tau:<9g}{cells}   {rel_q:.3e}  {len(series.t) / wall:8.0f}")
        path = os.path.join(args.out_dir, f"creep_tau{tau:g}.csv")
        series.to_csv(path)
        print(f"          -> {path}")


if __name__ == "__main__":
    main()
