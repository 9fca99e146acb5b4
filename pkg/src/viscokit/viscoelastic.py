"""Finite-strain viscoelasticity: material model, state, and time integration.

The model superposes equilibrium elastic branches and Maxwell branches.  Each
Maxwell branch carries an internal symmetric positive definite variable Gamma
(a viscous right Cauchy-Green-like tensor) evolving by

    dGamma/dt = 2 V^-1 : Q,        Q = T : Q_v(Gamma),

where T = 2 mu (E_drive - E_v(Gamma)) is the branch overstress, E_v is the
generalized strain of Gamma's own spectral decomposition, Q_v its projection
tensor, and V the viscosity tensor (default 2 eta I_sym with eta = mu tau, so
the rate reduces to Q / eta).  The driving strain E_drive is evaluated on the
unimodular part of C in the isochoric ("gibbs") layout or on C itself in the
total ("helmholtz") layout.

Steps integrate with the implicit midpoint rule; the per-branch nonlinear
update solves

    r(G) = G - Gamma_n - dt 2 V^-1 : Q(E_mid, (Gamma_n + G)/2) = 0

by Newton iteration with the exact tangent I - (dt/2) V^-1 : K, where
K = 2 dQ/dGamma = -2 mu Q_v^T : Q_v + T : L_v.  For quadratic scale functions
the problem is linear and the first correction lands exactly.

Dissipation per branch is D = Q : V^-1 : Q >= 0 (equal to |Q|^2 / (2 eta) for
the scalar default), which is the thermodynamic rate the evolution law is
built to guarantee.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    InvalidParameters,
    LocalNewtonDiverged,
    NotPositiveDefinite,
    StateNotSPD,
)
from .hyperelastic import HillBranch, VolumetricModel
from .spectral import SpectralDecomp, decompose
from .strains import ScaleFunction, flory_split, scale_function, strain_tensor
from .projections import apply_q_coaxial, proj_L, proj_P, proj_P_tilde, proj_Q
from .tensors import (
    I2,
    ddot22,
    ddot24,
    ddot26,
    ddot42,
    ddot44,
    dev,
    dyad,
    from_mandel6,
    identity4,
    inv3,
    norm,
    odot,
    sym,
    to_mandel6,
    to_mandel66,
    transpose4,
    tr,
)

__all__ = [
    "MaxwellBranch",
    "MaterialModel",
    "PointState",
    "PointOutput",
    "LocalReport",
    "LOCAL_TOL",
    "LOCAL_MAX_ITER",
    "GAMMA_SPD_FLOOR",
    "q_alpha",
    "k_alpha",
    "integrate_state",
    "evaluate_point",
    "stress_helmholtz_total",
    "dissipation_rate",
    "isochoric_energy",
    "s_vol_gibbs",
    "c_vol_gibbs",
    "c_vol_closure",
]

LOCAL_TOL = 1e-10
LOCAL_MAX_ITER = 5
# Relative floor for the SPD check on internal variables.
GAMMA_SPD_FLOOR = 1e-12

FORMULATIONS = ("gibbs", "helmholtz")


def _as_scale(strain) -> ScaleFunction:
    if isinstance(strain, ScaleFunction):
        return strain
    return scale_function(strain)


@dataclass(frozen=True)
class MaxwellBranch:
    """Maxwell element: modulus, relaxation time, strain measures, viscosity.

    ``viscous_strain`` is the scale function applied to Gamma; by default it
    is the same as the driving strain.  ``viscosity4`` optionally replaces the
    scalar viscosity 2 eta I_sym by a general SPD rank-4 tensor.
    """

    mu: float
    tau: float
    strain: ScaleFunction
    viscous_strain: ScaleFunction | None = None
    viscosity4: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "strain", _as_scale(self.strain))
        if self.viscous_strain is not None:
            object.__setattr__(self, "viscous_strain", _as_scale(self.viscous_strain))
        if not self.mu > 0.0:
            raise InvalidParameters(f"Maxwell modulus must be positive, got {self.mu}")
        if not self.tau > 0.0:
            raise InvalidParameters(f"relaxation time must be positive, got {self.tau}")

    @property
    def eta(self) -> float:
        return self.mu * self.tau

    @property
    def vsf(self) -> ScaleFunction:
        return self.viscous_strain if self.viscous_strain is not None else self.strain

    def vinv_mandel(self) -> np.ndarray:
        """Mandel matrix of V^-1 (V = 2 eta I_sym unless viscosity4 is set)."""
        if self.viscosity4 is None:
            return np.eye(6) / (2.0 * self.eta)
        return np.linalg.inv(to_mandel66(self.viscosity4))


@dataclass(frozen=True)
class MaterialModel:
    """Superposition of equilibrium and Maxwell branches plus volumetric law."""

    equilibrium: tuple[HillBranch, ...] = ()
    maxwell: tuple[MaxwellBranch, ...] = ()
    volumetric: VolumetricModel | None = None
    formulation: str = "gibbs"

    def __post_init__(self):
        object.__setattr__(self, "equilibrium", tuple(self.equilibrium))
        object.__setattr__(self, "maxwell", tuple(self.maxwell))
        if self.formulation not in FORMULATIONS:
            raise InvalidParameters(
                f"unknown formulation {self.formulation!r}; expected one of {FORMULATIONS}"
            )
        if not self.equilibrium and not self.maxwell:
            raise InvalidParameters("model needs at least one branch")

    @property
    def mu_scale(self) -> float:
        mus = [b.mu for b in self.equilibrium] + [b.mu for b in self.maxwell]
        return max(mus)


@dataclass
class PointState:
    """Material point state: time, deformation gradient, internal variables."""

    t: float
    f: np.ndarray
    gammas: tuple[np.ndarray, ...]
    pressure: float = 0.0

    @staticmethod
    def initial(model: MaterialModel) -> "PointState":
        return PointState(
            t=0.0,
            f=np.eye(3),
            gammas=tuple(np.eye(3) for _ in model.maxwell),
            pressure=0.0,
        )

    def copy(self) -> "PointState":
        return PointState(
            t=self.t,
            f=self.f.copy(),
            gammas=tuple(g.copy() for g in self.gammas),
            pressure=self.pressure,
        )


@dataclass
class LocalReport:
    """Newton statistics of one implicit step, per Maxwell branch."""

    iterations: tuple[int, ...] = ()
    residual_histories: tuple[tuple[float, ...], ...] = ()

    @property
    def max_iterations(self) -> int:
        return max(self.iterations, default=0)


@dataclass
class PointOutput:
    """Stress, tangent, and bookkeeping of one integrated step."""

    state: PointState
    s: np.ndarray
    s_eq: np.ndarray
    s_neq: np.ndarray
    s_vol: np.ndarray
    j: float
    pressure: float
    q_norms: tuple[float, ...]
    dissipation: float
    report: LocalReport
    c_iso: np.ndarray | None = None
    c_vol: np.ndarray | None = None


def q_alpha(branch: MaxwellBranch, e_drive: np.ndarray, gamma: np.ndarray) -> np.ndarray:
    """Driving force Q = T : Q_v of one Maxwell branch.

    ``e_drive`` is the branch's generalized strain of the driving tensor;
    ``gamma`` the internal variable.
    """
    dg = decompose(gamma, spd_floor=GAMMA_SPD_FLOOR)
    ev = strain_tensor(dg, branch.vsf)
    t_over = 2.0 * branch.mu * (e_drive - ev)
    return ddot24(t_over, proj_Q(dg, branch.vsf))


def k_alpha(branch: MaxwellBranch, e_drive: np.ndarray, gamma: np.ndarray) -> np.ndarray:
    """Gamma-tangent K = 2 dQ/dGamma = -2 mu Q_v^T : Q_v + T : L_v."""
    dg = decompose(gamma, spd_floor=GAMMA_SPD_FLOOR)
    ev = strain_tensor(dg, branch.vsf)
    t_over = 2.0 * branch.mu * (e_drive - ev)
    qv = proj_Q(dg, branch.vsf)
    return -2.0 * branch.mu * ddot44(transpose4(qv), qv) + ddot26(t_over, proj_L(dg, branch.vsf))


def _integrate_branch(
    branch: MaxwellBranch,
    e_mid: np.ndarray,
    gamma_n: np.ndarray,
    dt: float,
    tol: float,
    max_iter: int,
) -> tuple[np.ndarray, list[float]]:
    vinv = branch.vinv_mandel()
    vsf = branch.vsf
    mu2 = 2.0 * branch.mu
    g = gamma_n.copy()
    history: list[float] = []

    for it in range(max_iter + 1):
        g_mid = 0.5 * (gamma_n + g)
        try:
            dg = decompose(g_mid, spd_floor=GAMMA_SPD_FLOOR)
        except NotPositiveDefinite as exc:
            raise StateNotSPD(
                f"internal variable left the SPD cone during the local solve: {exc}"
            ) from exc
        ev = strain_tensor(dg, vsf)
        t_over = mu2 * (e_mid - ev)
        qv = proj_Q(dg, vsf)
        q = ddot24(t_over, qv)
        r = g - gamma_n - 2.0 * dt * from_mandel6(vinv @ to_mandel6(q))
        rn = norm(r)
        history.append(rn)
        if rn <= tol or rn <= tol * history[0]:
            return g, history
        if it == max_iter:
            raise LocalNewtonDiverged(
                f"local Newton did not reach tol={tol:g} in {max_iter} corrections "
                f"(residuals: {', '.join(f'{h:.3e}' for h in history)})"
            )
        kv = -mu2 * ddot44(transpose4(qv), qv) + ddot26(t_over, proj_L(dg, vsf))
        a = np.eye(6) - 0.5 * dt * (vinv @ to_mandel66(kv))
        dgm = np.linalg.solve(a, -to_mandel6(r))
        g = sym(g + from_mandel6(dgm))

    raise AssertionError("unreachable")


def _integrate_all(model, c_drive_n, c_drive_np1, gammas_n, dt, tol, max_iter):
    """Advance all branches; also return the end-state decompositions."""
    if len(gammas_n) != len(model.maxwell):
        raise InvalidParameters(
            f"state carries {len(gammas_n)} internal variables, model has "
            f"{len(model.maxwell)} Maxwell branches"
        )
    if not model.maxwell:
        return (), LocalReport((), ()), []
    d_mid = decompose(0.5 * (c_drive_n + c_drive_np1))
    gammas: list[np.ndarray] = []
    end_decomps: list[SpectralDecomp] = []
    iters: list[int] = []
    hists: list[tuple[float, ...]] = []
    for branch, gamma_n in zip(model.maxwell, gammas_n):
        e_mid = strain_tensor(d_mid, branch.strain)
        g, history = _integrate_branch(branch, e_mid, gamma_n, dt, tol, max_iter)
        # decompose doubles as the SPD check on the end state
        end_decomps.append(decompose(g, spd_floor=GAMMA_SPD_FLOOR))
        gammas.append(g)
        iters.append(len(history) - 1)
        hists.append(tuple(history))
    return tuple(gammas), LocalReport(tuple(iters), tuple(hists)), end_decomps


def integrate_state(
    model: MaterialModel,
    c_drive_n: np.ndarray,
    c_drive_np1: np.ndarray,
    gammas_n: tuple[np.ndarray, ...],
    dt: float,
    tol: float = LOCAL_TOL,
    max_iter: int = LOCAL_MAX_ITER,
) -> tuple[tuple[np.ndarray, ...], LocalReport]:
    """Advance all internal variables over one step of the driving tensor.

    The midpoint rule evaluates the driving strain at (C_n + C_np1)/2 and the
    viscous strain at (Gamma_n + Gamma_np1)/2.  Returns the new internal
    variables (SPD-checked) and the Newton statistics.
    """
    gammas, report, _ = _integrate_all(
        model, c_drive_n, c_drive_np1, gammas_n, dt, tol, max_iter
    )
    return gammas, report


def dissipation_rate(model: MaterialModel, c_drive: np.ndarray, gammas) -> float:
    """Total dissipation sum_alpha Q : V^-1 : Q (>= 0 for SPD viscosities)."""
    dc = decompose(c_drive)
    total = 0.0
    for branch, gamma in zip(model.maxwell, gammas):
        q = q_alpha(branch, strain_tensor(dc, branch.strain), gamma)
        qm = to_mandel6(q)
        total += float(qm @ branch.vinv_mandel() @ qm)
    return total


def s_vol_gibbs(c: np.ndarray, j: float, pressure: float, cinv=None) -> np.ndarray:
    """Volumetric stress S_vol = -J P C^-1."""
    if cinv is None:
        cinv = inv3(c)
    return -j * pressure * cinv


def c_vol_gibbs(c: np.ndarray, j: float, pressure: float, cinv=None) -> np.ndarray:
    """Volumetric tangent 2 dS_vol/dC at held pressure."""
    if cinv is None:
        cinv = inv3(c)
    return -j * pressure * dyad(cinv, cinv) + 2.0 * j * pressure * odot(cinv, cinv)


def c_vol_closure(c: np.ndarray, j: float, vol: VolumetricModel, cinv=None) -> np.ndarray:
    """Volumetric tangent when P = -dpsi(J) follows the deformation."""
    if cinv is None:
        cinv = inv3(c)
    dp, d2p = vol.dpsi(j), vol.d2psi(j)
    return j * (dp + j * d2p) * dyad(cinv, cinv) - 2.0 * j * dp * odot(cinv, cinv)


def _tangent_iso(dct, c, cinv, p4, j, s_tilde_terms):
    """Isochoric tangent with frozen internal variables.

    ``dct`` is the decomposition of the unimodular driving tensor, ``p4`` the
    deviatoric projection of the full ``c``.  ``s_tilde_terms`` is a list of
    (mu, scale_function, T_tilde) triples; the fictitious modulus of every
    branch is 2 mu Q^T : Q + T : L on the unimodular frame.
    """
    ctilde = np.zeros((3, 3, 3, 3))
    s_tilde = np.zeros((3, 3))
    for mu, sf, t_tilde in s_tilde_terms:
        qt = proj_Q(dct, sf)
        ctilde += 2.0 * mu * ddot44(transpose4(qt), qt) + ddot26(t_tilde, proj_L(dct, sf))
        s_tilde += ddot24(t_tilde, qt)
    ctilde *= j ** (-4.0 / 3.0)

    s_iso = j ** (-2.0 / 3.0) * ddot42(p4, s_tilde)
    tr_term = j ** (-2.0 / 3.0) * ddot22(s_tilde, c)
    c_iso = (
        ddot44(p4, ddot44(ctilde, transpose4(p4)))
        + (2.0 / 3.0) * tr_term * proj_P_tilde(c, cinv)
        - (2.0 / 3.0) * (dyad(cinv, s_iso) + dyad(s_iso, cinv))
    )
    return c_iso


def _resolve_pressure(model, j, pressure):
    if pressure is not None:
        return float(pressure), "given"
    if model.volumetric is not None:
        return -model.volumetric.dpsi(j), "closure"
    return 0.0, "none"


def evaluate_point(
    model: MaterialModel,
    f: np.ndarray,
    state: PointState,
    dt: float,
    pressure: float | None = None,
    compute_tangent: bool = True,
    tol: float = LOCAL_TOL,
    max_iter: int = LOCAL_MAX_ITER,
) -> PointOutput:
    """Integrate internal variables to t + dt and evaluate stress and tangent.

    In the isochoric layout the pressure is an independent field: pass it
    explicitly (stress control), leave it None with a volumetric law to use
    the closure P = -dpsi(J), or leave both unset for a pure multiplier to be
    resolved by the driver.  The Helmholtz layout has no pressure variable.
    """
    if model.formulation == "helmholtz":
        return _evaluate_helmholtz(model, f, state, dt, compute_tangent, tol, max_iter)

    j, c, ct = flory_split(f)
    _, _, ct_n = flory_split(state.f)
    gammas, report, dgs = _integrate_all(model, ct_n, ct, state.gammas, dt, tol, max_iter)

    dct = decompose(ct)
    s_tilde_eq = np.zeros((3, 3))
    terms = []
    for branch in model.equilibrium:
        if compute_tangent:
            t_tilde = 2.0 * branch.mu * strain_tensor(dct, branch.strain)
            s_tilde_eq += ddot24(t_tilde, proj_Q(dct, branch.strain))
            terms.append((branch.mu, branch.strain, t_tilde))
        else:
            # equilibrium T~ is coaxial with the driving frame: contract
            # with Q by eigenvalue scaling, skipping the rank-4 assembly
            e_hat = np.array([branch.strain.value(l) for l in dct.stretches])
            s_tilde_eq += apply_q_coaxial(dct, branch.strain,
                                          2.0 * branch.mu * e_hat)

    s_tilde_neq = np.zeros((3, 3))
    q_norms = []
    dissipation = 0.0
    for branch, dg in zip(model.maxwell, dgs):
        ev = strain_tensor(dg, branch.vsf)
        t_tilde = 2.0 * branch.mu * (strain_tensor(dct, branch.strain) - ev)
        s_tilde_neq += ddot24(t_tilde, proj_Q(dct, branch.strain))
        if compute_tangent:
            terms.append((branch.mu, branch.strain, t_tilde))
        qf = ddot24(t_tilde, proj_Q(dg, branch.vsf))
        q_norms.append(norm(qf))
        qm = to_mandel6(qf)
        dissipation += float(qm @ branch.vinv_mandel() @ qm)

    p_val, p_src = _resolve_pressure(model, j, pressure)
    cinv = inv3(c)
    p4 = proj_P(c, cinv)
    jm23 = j ** (-2.0 / 3.0)
    s_eq = jm23 * ddot42(p4, s_tilde_eq)
    s_neq = jm23 * ddot42(p4, s_tilde_neq)
    s_vol = s_vol_gibbs(c, j, p_val, cinv)

    c_iso = c_vol = None
    if compute_tangent:
        c_iso = _tangent_iso(dct, c, cinv, p4, j, terms)
        if p_src == "closure":
            c_vol = c_vol_closure(c, j, model.volumetric, cinv)
        else:
            c_vol = c_vol_gibbs(c, j, p_val, cinv)

    new_state = PointState(
        t=state.t + dt, f=np.asarray(f, dtype=float).copy(), gammas=gammas, pressure=p_val
    )
    return PointOutput(
        state=new_state,
        s=s_eq + s_neq + s_vol,
        s_eq=s_eq,
        s_neq=s_neq,
        s_vol=s_vol,
        j=j,
        pressure=p_val,
        q_norms=tuple(q_norms),
        dissipation=dissipation,
        report=report,
        c_iso=c_iso,
        c_vol=c_vol,
    )


def _equilibrium_modulus(branch: HillBranch) -> np.ndarray:
    """Strain-space modulus 2 mu (I_sym - I(x)I/3) + kappa I(x)I of a type-1 branch."""
    return 2.0 * branch.mu * (identity4() - dyad(I2, I2) / 3.0) + branch.kappa * dyad(I2, I2)


def stress_helmholtz_total(
    model: MaterialModel, c: np.ndarray, gammas, compute_tangent: bool = False
):
    """Stress (and optional tangent) of the total-strain layout at given state."""
    dc = decompose(c)
    s = np.zeros((3, 3))
    c4 = np.zeros((3, 3, 3, 3)) if compute_tangent else None
    for branch in model.equilibrium:
        if compute_tangent:
            e = strain_tensor(dc, branch.strain)
            t2 = 2.0 * branch.mu * dev(e) + branch.kappa * tr(e) * I2
            qt = proj_Q(dc, branch.strain)
            s += ddot24(t2, qt)
            ee = _equilibrium_modulus(branch)
            c4 += ddot44(transpose4(qt), ddot44(ee, qt)) + ddot26(t2, proj_L(dc, branch.strain))
        else:
            e_hat = np.array([branch.strain.value(l) for l in dc.stretches])
            trace = float(e_hat.sum())
            t_hat = 2.0 * branch.mu * (e_hat - trace / 3.0) + branch.kappa * trace
            s += apply_q_coaxial(dc, branch.strain, t_hat)
    for branch, gamma in zip(model.maxwell, gammas):
        dg = decompose(gamma, spd_floor=GAMMA_SPD_FLOOR)
        ev = strain_tensor(dg, branch.vsf)
        t2 = 2.0 * branch.mu * (strain_tensor(dc, branch.strain) - ev)
        qt = proj_Q(dc, branch.strain)
        s += ddot24(t2, qt)
        if compute_tangent:
            c4 += 2.0 * branch.mu * ddot44(transpose4(qt), qt) + ddot26(
                t2, proj_L(dc, branch.strain)
            )
    return (s, c4) if compute_tangent else (s, None)


def _evaluate_helmholtz(model, f, state, dt, compute_tangent, tol, max_iter):
    j, c, _ = flory_split(f)
    cn = sym(np.asarray(state.f, dtype=float).T @ state.f)
    gammas, report, dgs = _integrate_all(model, cn, c, state.gammas, dt, tol, max_iter)

    dc = decompose(c)
    c4 = np.zeros((3, 3, 3, 3)) if compute_tangent else None
    s_eq = np.zeros((3, 3))
    for branch in model.equilibrium:
        if compute_tangent:
            e = strain_tensor(dc, branch.strain)
            t2 = 2.0 * branch.mu * dev(e) + branch.kappa * tr(e) * I2
            qt = proj_Q(dc, branch.strain)
            s_eq += ddot24(t2, qt)
            ee = _equilibrium_modulus(branch)
            c4 += ddot44(transpose4(qt), ddot44(ee, qt)) + ddot26(t2, proj_L(dc, branch.strain))
        else:
            e_hat = np.array([branch.strain.value(l) for l in dc.stretches])
            trace = float(e_hat.sum())
            t_hat = 2.0 * branch.mu * (e_hat - trace / 3.0) + branch.kappa * trace
            s_eq += apply_q_coaxial(dc, branch.strain, t_hat)

    s_neq = np.zeros((3, 3))
    q_norms = []
    dissipation = 0.0
    for branch, dg in zip(model.maxwell, dgs):
        ev = strain_tensor(dg, branch.vsf)
        t2 = 2.0 * branch.mu * (strain_tensor(dc, branch.strain) - ev)
        qt = proj_Q(dc, branch.strain)
        s_neq += ddot24(t2, qt)
        if compute_tangent:
            c4 += 2.0 * branch.mu * ddot44(transpose4(qt), qt) + ddot26(
                t2, proj_L(dc, branch.strain)
            )
        qf = ddot24(t2, proj_Q(dg, branch.vsf))
        q_norms.append(norm(qf))
        qm = to_mandel6(qf)
        dissipation += float(qm @ branch.vinv_mandel() @ qm)

    new_state = PointState(
        t=state.t + dt, f=np.asarray(f, dtype=float).copy(), gammas=gammas, pressure=0.0
    )
    return PointOutput(
        state=new_state,
        s=s_eq + s_neq,
        s_eq=s_eq,
        s_neq=s_neq,
        s_vol=np.zeros((3, 3)),
        j=j,
        pressure=0.0,
        q_norms=tuple(q_norms),
        dissipation=dissipation,
        report=report,
        c_iso=c4,
        c_vol=np.zeros((3, 3, 3, 3)) if compute_tangent else None,
    )


def isochoric_energy(model: MaterialModel, f: np.ndarray, gammas) -> float:
    """Stored isochoric energy: equilibrium mu|E~|^2 plus Maxwell mu|E~ - E_v|^2."""
    _, _, ct = flory_split(f)
    dct = decompose(ct)
    total = 0.0
    for branch in model.equilibrium:
        e = strain_tensor(dct, branch.strain)
        total += branch.mu * ddot22(e, e)
    for branch, gamma in zip(model.maxwell, gammas):
        dg = decompose(gamma, spd_floor=GAMMA_SPD_FLOOR)
        de = strain_tensor(dct, branch.strain) - strain_tensor(dg, branch.vsf)
        total += branch.mu * ddot22(de, de)
    return total
