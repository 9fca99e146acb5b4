"""Single-point load drivers: stress-controlled uniaxial and strain-controlled shear.

Both drivers march a :class:`~viscokit.viscoelastic.PointState` through a load
program with fixed time step and record a :class:`TimeSeries`.

Stress control solves, at every step, the three-unknown system

    x = (lam_lat, lam_ax, P)
    R = [ P_lat_nominal,  P_ax_nominal - H(t),  constraint ]

with F = diag(lam_lat, lam_lat, lam_ax), nominal stress P_aa = lam_a S_aa and
the constraint either J - 1 = 0 (no volumetric law: incompressible, P is a
Lagrange multiplier) or dpsi(J) + P = 0 (volumetric law present).  The Newton
matrix uses the internal-variable-frozen material tangent; the internal
variables are re-integrated from the converged previous state at every global
iteration, so the converged solution is exact even though the off-diagonal
sensitivity through the flow rule is dropped.  Optionally the full Jacobian is
approximated by central differences (``consistent_tangent=True``).

Strain control prescribes F(t) = I + gamma(t) e2 (x) e3 (volume preserving).
Without a volumetric law the pressure follows from the plane-stress-like
condition S_33 = 0, which is linear in P and solved in closed form; with one,
the closure P = -dpsi(J) applies.  A failed local solve is converted into
:class:`~viscokit.errors.StepRejected` carrying a halved step suggestion, and
the driver can optionally substep on its own.
"""

from __future__ import annotations

import math
import os
import tempfile
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    GlobalNewtonDiverged,
    InvalidParameters,
    LocalNewtonDiverged,
    StateNotSPD,
    StepRejected,
)
from .tensors import ddot42, inv3
from .viscoelastic import (
    MaterialModel,
    PointOutput,
    PointState,
    evaluate_point,
    s_vol_gibbs,
)

__all__ = [
    "Constant",
    "RampHold",
    "Sinusoid",
    "LoadProgram",
    "TimeSeries",
    "run_stress_controlled",
    "run_strain_controlled",
    "solve_pressure",
    "GLOBAL_TOL",
    "GLOBAL_MAX_ITER",
]

GLOBAL_TOL = 1e-10
GLOBAL_MAX_ITER = 10

PROGRAM_KINDS = ("uniaxial_stress", "simple_shear")


@dataclass(frozen=True)
class Constant:
    value: float

    def __call__(self, t: float) -> float:
        return self.value


@dataclass(frozen=True)
class RampHold:
    """Linear ramp at the given rate until t_ramp, constant afterwards."""

    rate: float
    t_ramp: float

    def __call__(self, t: float) -> float:
        return self.rate * min(t, self.t_ramp)


@dataclass(frozen=True)
class Sinusoid:
    amplitude: float
    omega: float

    def __call__(self, t: float) -> float:
        return self.amplitude * math.sin(self.omega * t)


@dataclass(frozen=True)
class LoadProgram:
    """What to drive (kind), how it varies in time (schedule), and the grid."""

    kind: str
    schedule: object
    t_end: float
    dt: float

    def __post_init__(self):
        if self.kind not in PROGRAM_KINDS:
            raise InvalidParameters(
                f"unknown program kind {self.kind!r}; expected one of {PROGRAM_KINDS}"
            )
        if not self.dt > 0.0 or not self.t_end > 0.0:
            raise InvalidParameters("t_end and dt must be positive")

    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))


@dataclass
class TimeSeries:
    """Recorded trajectory of one driver run.

    ``f`` has shape (n, 3, 3); ``s`` is the second Piola-Kirchhoff stress.
    ``q_norms`` has one column per Maxwell branch.
    """

    t: np.ndarray
    f: np.ndarray
    j: np.ndarray
    pressure: np.ndarray
    s: np.ndarray
    s_neq_33: np.ndarray
    q_norms: np.ndarray
    dissipation: np.ndarray
    local_iters: np.ndarray
    global_iters: np.ndarray
    states: list = field(default_factory=list, repr=False)

    def __len__(self) -> int:
        return len(self.t)

    _S_COLS = ("S11", "S22", "S33", "S12", "S23", "S13")
    _S_IDX = ((0, 0), (1, 1), (2, 2), (0, 1), (1, 2), (0, 2))

    def header(self) -> list[str]:
        cols = ["t"]
        cols += [f"F{i+1}{j+1}" for i in range(3) for j in range(3)]
        cols += ["J", "P"]
        cols += list(self._S_COLS)
        cols += ["Sneq33"]
        cols += [f"normQ_{k+1}" for k in range(self.q_norms.shape[1])]
        cols += ["D", "local_iters", "global_iters"]
        return cols

    def to_csv(self, path: str) -> None:
        """Write the series as CSV with 17 significant digits, atomically."""
        rows = []
        for k in range(len(self.t)):
            row = [self.t[k]]
            row += list(self.f[k].reshape(-1))
            row += [self.j[k], self.pressure[k]]
            row += [self.s[k][i] for i in self._S_IDX]
            row += [self.s_neq_33[k]]
            row += list(self.q_norms[k])
            row += [self.dissipation[k], self.local_iters[k], self.global_iters[k]]
            rows.append(",".join(f"{v:.17g}" for v in row))
        text = ",".join(self.header()) + "\n" + "\n".join(rows) + "\n"
        directory = os.path.dirname(os.path.abspath(path)) or "."
        fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
        try:
            with os.fdopen(fd, "w") as handle:
                handle.write(text)
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise

    @staticmethod
    def from_csv(path: str) -> "TimeSeries":
        with open(path) as handle:
            header = handle.readline().strip().split(",")
            data = np.loadtxt(handle, delimiter=",", ndmin=2)
        col = {name: k for k, name in enumerate(header)}
        n = data.shape[0]
        f = np.empty((n, 3, 3))
        for i in range(3):
            for j in range(3):
                f[:, i, j] = data[:, col[f"F{i+1}{j+1}"]]
        s = np.zeros((n, 3, 3))
        for name, (i, j) in zip(TimeSeries._S_COLS, TimeSeries._S_IDX):
            s[:, i, j] = data[:, col[name]]
            s[:, j, i] = data[:, col[name]]
        nq = len([c for c in header if c.startswith("normQ_")])
        q = np.empty((n, nq))
        for k in range(nq):
            q[:, k] = data[:, col[f"normQ_{k+1}"]]
        return TimeSeries(
            t=data[:, col["t"]],
            f=f,
            j=data[:, col["J"]],
            pressure=data[:, col["P"]],
            s=s,
            s_neq_33=data[:, col["Sneq33"]],
            q_norms=q,
            dissipation=data[:, col["D"]],
            local_iters=data[:, col["local_iters"]].astype(int),
            global_iters=data[:, col["global_iters"]].astype(int),
        )


def solve_pressure(c: np.ndarray, j: float, s_iso: np.ndarray, component=(2, 2)) -> float:
    """Pressure making the (component) total stress vanish: linear in P."""
    cinv = inv3(c)
    i, k = component
    return s_iso[i, k] / (j * cinv[i, k])


class _Recorder:
    def __init__(self, model: MaterialModel):
        self.model = model
        self.rows: dict[str, list] = {
            "t": [], "f": [], "j": [], "p": [], "s": [], "sneq33": [],
            "q": [], "d": [], "li": [], "gi": [],
        }
        self.states: list[PointState] = []

    def add(self, t, f, j, p, s, sneq33, q_norms, diss, local_it, global_it, state):
        r = self.rows
        r["t"].append(t)
        r["f"].append(np.asarray(f, dtype=float).copy())
        r["j"].append(j)
        r["p"].append(p)
        r["s"].append(np.asarray(s, dtype=float).copy())
        r["sneq33"].append(sneq33)
        r["q"].append(tuple(q_norms))
        r["d"].append(diss)
        r["li"].append(local_it)
        r["gi"].append(global_it)
        self.states.append(state.copy())

    def series(self) -> TimeSeries:
        r = self.rows
        nq = len(self.model.maxwell)
        return TimeSeries(
            t=np.asarray(r["t"]),
            f=np.asarray(r["f"]),
            j=np.asarray(r["j"]),
            pressure=np.asarray(r["p"]),
            s=np.asarray(r["s"]),
            s_neq_33=np.asarray(r["sneq33"]),
            q_norms=np.asarray(r["q"]).reshape(len(r["t"]), nq),
            dissipation=np.asarray(r["d"]),
            local_iters=np.asarray(r["li"], dtype=int),
            global_iters=np.asarray(r["gi"], dtype=int),
            states=self.states,
        )


def _record_initial(rec: _Recorder, model: MaterialModel, state: PointState,
                    out: PointOutput):
    rec.add(
        state.t, state.f, out.j, out.pressure, out.s, out.s_neq[2, 2],
        out.q_norms, out.dissipation, 0, 0, state,
    )


def run_stress_controlled(
    model: MaterialModel,
    program: LoadProgram,
    state: PointState | None = None,
    tol: float = GLOBAL_TOL,
    max_iter: int = GLOBAL_MAX_ITER,
    consistent_tangent: bool = False,
) -> TimeSeries:
    """March the uniaxial stress-controlled problem through the program."""
    if program.kind != "uniaxial_stress":
        raise InvalidParameters(f"stress control expects 'uniaxial_stress', got {program.kind!r}")
    if model.formulation != "gibbs":
        raise InvalidParameters("stress control drives the pressure-explicit layout only")
    state = state.copy() if state is not None else PointState.initial(model)
    rec = _Recorder(model)
    out0 = evaluate_point(model, state.f, state, 0.0, pressure=state.pressure,
                          compute_tangent=False)
    _record_initial(rec, model, state, out0)

    lat0 = float(np.linalg.norm(state.f[:, 0]))
    ax0 = float(np.linalg.norm(state.f[:, 2]))
    x = np.array([lat0, ax0, state.pressure])
    x_prev = x.copy()
    # Residual scale for the stopping test: stress rows dominate the norm, so
    # a pure drop test punishes good predictors (the better the initial guess,
    # the smaller the denominator).  Anchor it to the material/load scale.
    r_scale = max(model.mu_scale,
                  max(abs(program.schedule(k * program.dt))
                      for k in range(program.n_steps() + 1)))
    t0, dt = state.t, program.dt
    for n in range(program.n_steps()):
        t_next = t0 + (n + 1) * dt
        h_target = program.schedule(t_next)
        # Linear extrapolation of the previous two solutions; loads are smooth
        # in every program, so this lands one Newton correction closer.
        guess = 2.0 * x - x_prev
        if guess[0] <= 0.0 or guess[1] <= 0.0:
            guess = x.copy()
        x_prev = x
        x, out, iters = _newton_uniaxial(
            model, state, dt, h_target, guess, tol, max_iter, consistent_tangent,
            r_scale,
        )
        state = out.state
        rec.add(
            t_next, out.state.f, out.j, x[2], out.s, out.s_neq[2, 2],
            out.q_norms, out.dissipation, out.report.max_iterations, iters, state,
        )
    return rec.series()


def _f_uniaxial(lat: float, ax: float) -> np.ndarray:
    return np.diag([lat, lat, ax])


def _residual_uniaxial(model, state, dt, h_target, x):
    lat, ax, p = x
    if lat <= 0.0 or ax <= 0.0:
        raise GlobalNewtonDiverged(
            f"iterate left the admissible range: lam_lat={lat:g}, lam_ax={ax:g}"
        )
    f = _f_uniaxial(lat, ax)
    out = evaluate_point(model, f, state, dt, pressure=p)
    j = lat * lat * ax
    r = np.array([
        lat * out.s[0, 0],
        ax * out.s[2, 2] - h_target,
        (j - 1.0) if model.volumetric is None else model.volumetric.dpsi(j) + p,
    ])
    return r, out


def _jacobian_uniaxial(model, out, x):
    lat, ax, p = x
    cinv = np.diag([1.0 / (lat * lat), 1.0 / (lat * lat), 1.0 / (ax * ax)])
    j = lat * lat * ax
    ctot = out.c_iso + out.c_vol
    dc_dlat = np.diag([2.0 * lat, 2.0 * lat, 0.0])
    dc_dax = np.diag([0.0, 0.0, 2.0 * ax])
    ds_dlat = 0.5 * ddot42(ctot, dc_dlat)
    ds_dax = 0.5 * ddot42(ctot, dc_dax)
    ds_dp = -j * cinv

    jac = np.empty((3, 3))
    jac[0, 0] = out.s[0, 0] + lat * ds_dlat[0, 0]
    jac[0, 1] = lat * ds_dax[0, 0]
    jac[0, 2] = lat * ds_dp[0, 0]
    jac[1, 0] = ax * ds_dlat[2, 2]
    jac[1, 1] = out.s[2, 2] + ax * ds_dax[2, 2]
    jac[1, 2] = ax * ds_dp[2, 2]
    if model.volumetric is None:
        jac[2] = (2.0 * lat * ax, lat * lat, 0.0)
    else:
        d2 = model.volumetric.d2psi(j)
        jac[2] = (d2 * 2.0 * lat * ax, d2 * lat * lat, 1.0)
    return jac


def _newton_uniaxial(model, state, dt, h_target, x0, tol, max_iter, consistent_tangent,
                     r_scale=1.0):
    x = np.asarray(x0, dtype=float).copy()
    r, out = _residual_uniaxial(model, state, dt, h_target, x)
    r0 = np.linalg.norm(r)
    floor = tol * max(r0, r_scale)
    for it in range(max_iter + 1):
        rn = np.linalg.norm(r)
        if rn <= floor:
            return x, out, it
        if it == max_iter:
            raise GlobalNewtonDiverged(
                f"global Newton stalled at |R|={rn:.3e} (|R0|={r0:.3e}) "
                f"after {max_iter} iterations"
            )
        if consistent_tangent:
            jac = np.empty((3, 3))
            for k in range(3):
                hk = 1e-7 * max(1.0, abs(x[k]))
                xp = x.copy(); xp[k] += hk
                xm = x.copy(); xm[k] -= hk
                rp, _ = _residual_uniaxial(model, state, dt, h_target, xp)
                rm, _ = _residual_uniaxial(model, state, dt, h_target, xm)
                jac[:, k] = (rp - rm) / (2.0 * hk)
        else:
            jac = _jacobian_uniaxial(model, out, x)
        x = x + np.linalg.solve(jac, -r)
        r, out = _residual_uniaxial(model, state, dt, h_target, x)
    raise AssertionError("unreachable")


def _f_simple_shear(gamma: float) -> np.ndarray:
    f = np.eye(3)
    f[1, 2] = gamma
    return f


def run_strain_controlled(
    model: MaterialModel,
    program: LoadProgram,
    state: PointState | None = None,
    on_reject: str = "raise",
    max_subdivisions: int = 8,
) -> TimeSeries:
    """March the simple-shear strain-controlled problem through the program.

    ``on_reject='raise'`` surfaces :class:`StepRejected` (with a halved-step
    suggestion) when the local solve fails; ``'substep'`` retries internally
    with up to ``max_subdivisions`` halvings.
    """
    if program.kind != "simple_shear":
        raise InvalidParameters(f"strain control expects 'simple_shear', got {program.kind!r}")
    if on_reject not in ("raise", "substep"):
        raise InvalidParameters(f"on_reject must be 'raise' or 'substep', got {on_reject!r}")
    state = state.copy() if state is not None else PointState.initial(model)
    rec = _Recorder(model)
    _record_initial(rec, model, state, _strain_step(model, state, state.f, 0.0))

    t0, dt = state.t, program.dt
    for n in range(program.n_steps()):
        t_next = t0 + (n + 1) * dt
        f_next = _f_simple_shear(program.schedule(t_next))
        try:
            out = _strain_step(model, state, f_next, dt)
        except (LocalNewtonDiverged, StateNotSPD) as exc:
            if on_reject == "raise":
                raise StepRejected(
                    f"step to t={t_next:g} failed ({exc}); retry with a smaller step",
                    dt_suggested=0.5 * dt,
                ) from exc
            out = _substep_strain(model, state, t0 + n * dt, t_next, program.schedule,
                                  dt, max_subdivisions)
        state = out.state
        rec.add(
            t_next, out.state.f, out.j, out.pressure, out.s, out.s_neq[2, 2],
            out.q_norms, out.dissipation, out.report.max_iterations, 1, state,
        )
    return rec.series()


def _strain_step(model, state, f_next, dt) -> PointOutput:
    out = evaluate_point(model, f_next, state, dt, compute_tangent=False)
    if model.formulation == "gibbs" and model.volumetric is None:
        # resolve the multiplier from S_33 = 0 (linear in P) and rebuild
        c = f_next.T @ f_next
        s_iso = out.s_eq + out.s_neq
        p = solve_pressure(c, out.j, s_iso)
        out.pressure = p
        out.state.pressure = p
        out.s_vol = s_vol_gibbs(c, out.j, p)
        out.s = s_iso + out.s_vol
    return out


def _substep_strain(model, state, t_from, t_to, schedule, dt, max_subdivisions):
    levels = 0
    n_sub = 1
    while True:
        try:
            st = state.copy()
            out = None
            h = (t_to - t_from) / n_sub
            for k in range(n_sub):
                f_k = _f_simple_shear(schedule(t_from + (k + 1) * h))
                out = _strain_step(model, st, f_k, h)
                st = out.state
            return out
        except (LocalNewtonDiverged, StateNotSPD) as exc:
            levels += 1
            n_sub *= 2
            if levels > max_subdivisions:
                raise StepRejected(
                    f"step to t={t_to:g} failed after {max_subdivisions} subdivisions",
                    dt_suggested=dt / n_sub,
                ) from exc
