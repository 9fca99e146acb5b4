"""Hyperelastic parameter fitting from homogeneous incompressible tests.

Supported modes (incompressible kinematics, loading stretch lambda):

    uniaxial      F = diag(lam, lam^-1/2, lam^-1/2)
    equibiaxial   F = diag(lam, lam, lam^-2)
    pure_shear    F = diag(lam, 1, lam^-1)

Model curves follow the same stress path the simulators use: evaluate the
isochoric stress at the constrained deformation, resolve the pressure from the
traction-free transverse direction, and convert to nominal (first
Piola-Kirchhoff) stress P1 = lam * S11.  No closed-form shortcut is used.

Quality of fit normalizes residuals per mode,

    chi2_mode = (1/n_mode) sum_i ((P1_model(lam_i) - P1_exp_i) / max_j |P1_exp_j|)^2
    chi2_total = sum over modes,

so multi-mode fits balance modes of different stress magnitude.  This
normalization is a documented stand-in: published chi-squared values for the
same data may use a different convention, so compare trends, not digits.

The stress path above is exactly linear in the branch moduli (the pressure
closure is linear in the isochoric stress), so fitting uses variable
projection: at every trial set of strain-family exponents the moduli are
recovered by a bounded weighted linear least-squares solve, and the outer
damped Gauss-Newton iteration (multiplicative Levenberg damping,
central-difference Jacobians, bound clipping) only searches the exponent
space.  Outer starts come from a deterministic seed grid and run in a thread
pool capped by the VISCOKIT_THREADS environment variable; results merge by
(chi2, start index), so a fixed seed gives a bitwise reproducible result.
"""

from __future__ import annotations

import csv
import json
import os
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyDataset, FitDiverged, InvalidParameters
from .hyperelastic import HillBranch
from .pointdriver import solve_pressure
from .strains import family_parameter_names, make_scale
from .viscoelastic import MaterialModel, PointState, evaluate_point, s_vol_gibbs

__all__ = [
    "MODES",
    "ExperimentDataset",
    "BranchTemplate",
    "FitResult",
    "deformation_gradient",
    "nominal_stress_homogeneous",
    "chi_squared",
    "slot_labels",
    "fit",
]

MODES = ("uniaxial", "equibiaxial", "pure_shear")

#: CSV mode codes (the file format speaks UT/ET/PS).
MODE_CODES = {"UT": "uniaxial", "ET": "equibiaxial", "PS": "pure_shear"}
_CODE_OF = {v: k for k, v in MODE_CODES.items()}

_CSV_HEADER = ["mode", "stretch", "nominal_stress"]

#: Default bounds of family exponents (admissibility plus a sane search box).
_EXP_BOUNDS = {
    "SH": (-6.0, 8.0),
    "CR": (0.0, 8.0),
    "BI": (0.0, 8.0),
    "CZ": (-2.0, 2.0),
    "DN": (1e-3, 8.0),
}
_EXP_START = 1.5


def _canonical_mode(mode) -> str:
    m = str(mode).strip()
    m = MODE_CODES.get(m.upper(), m.lower())
    if m not in MODES:
        raise InvalidParameters(
            f"unknown test mode {mode!r}; expected one of {MODES} or codes UT/ET/PS"
        )
    return m


@dataclass(frozen=True)
class ExperimentDataset:
    """Stress-stretch records of homogeneous tests: (mode, stretch, P1)."""

    records: tuple = ()
    source: str = ""

    def __post_init__(self):
        recs = []
        for mode, lam, p1 in self.records:
            mode = _canonical_mode(mode)
            lam, p1 = float(lam), float(p1)
            if not lam > 0.0:
                raise InvalidParameters(f"stretch must be positive, got {lam}")
            recs.append((mode, lam, p1))
        object.__setattr__(self, "records", tuple(recs))

    def __len__(self) -> int:
        return len(self.records)

    @property
    def modes(self) -> tuple:
        seen = []
        for mode, _, _ in self.records:
            if mode not in seen:
                seen.append(mode)
        return tuple(seen)

    def by_mode(self) -> dict:
        """Mode -> (stretch array, stress array), in record order."""
        out: dict[str, tuple[list, list]] = {}
        for mode, lam, p1 in self.records:
            out.setdefault(mode, ([], []))
            out[mode][0].append(lam)
            out[mode][1].append(p1)
        return {m: (np.asarray(ls), np.asarray(ps)) for m, (ls, ps) in out.items()}

    @staticmethod
    def load_csv(path) -> "ExperimentDataset":
        """Read ``mode,stretch,nominal_stress`` rows; ``#`` starts a comment."""
        rows = []
        with open(path, newline="") as handle:
            for raw in csv.reader(handle):
                if not raw or raw[0].lstrip().startswith("#"):
                    continue
                cells = [c.strip() for c in raw]
                if cells[:3] == _CSV_HEADER:
                    continue
                if len(cells) < 3:
                    raise InvalidParameters(f"{path}: malformed row {raw!r}")
                rows.append((cells[0], cells[1], cells[2]))
        if not rows:
            raise EmptyDataset(f"{path}: no data rows")
        return ExperimentDataset(records=tuple(rows), source=str(path))

    def save_csv(self, path) -> None:
        fd, tmp = tempfile.mkstemp(dir=os.path.dirname(os.path.abspath(path)) or ".",
                                   suffix=".tmp")
        try:
            with os.fdopen(fd, "w", newline="") as handle:
                w = csv.writer(handle)
                w.writerow(_CSV_HEADER)
                for mode, lam, p1 in self.records:
                    w.writerow([_CODE_OF[mode], f"{lam:.17g}", f"{p1:.17g}"])
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise


def deformation_gradient(mode, lam: float) -> np.ndarray:
    """Constrained incompressible deformation gradient of a test mode."""
    mode = _canonical_mode(mode)
    lam = float(lam)
    if not lam > 0.0:
        raise InvalidParameters(f"stretch must be positive, got {lam}")
    if mode == "uniaxial":
        t = lam ** -0.5
        return np.diag([lam, t, t])
    if mode == "equibiaxial":
        return np.diag([lam, lam, lam ** -2.0])
    return np.diag([lam, 1.0, 1.0 / lam])


def _nominal_stress(model: MaterialModel, mode: str, lam: float) -> float:
    f = deformation_gradient(mode, lam)
    out = evaluate_point(model, f, PointState.initial(model), 0.0,
                         pressure=0.0, compute_tangent=False)
    c = f.T @ f
    s_iso = out.s_eq + out.s_neq
    p = solve_pressure(c, out.j, s_iso)
    s = s_iso + s_vol_gibbs(c, out.j, p)
    return float(lam * s[0, 0])


def nominal_stress_homogeneous(mode, lam: float, branches) -> float:
    """Nominal stress P1 of the branch superposition in the given test mode."""
    model = MaterialModel(equilibrium=tuple(branches))
    return _nominal_stress(model, _canonical_mode(mode), float(lam))


def _groups(data: ExperimentDataset, min_per_mode: int = 1):
    if len(data) == 0:
        raise EmptyDataset("dataset has no records")
    groups = []
    for mode, (lams, ps) in data.by_mode().items():
        if len(lams) < min_per_mode:
            raise InvalidParameters(
                f"mode {mode!r} has {len(lams)} records; need at least {min_per_mode}"
            )
        scale = float(np.abs(ps).max()) or 1.0
        groups.append((mode, lams, ps, 1.0 / (np.sqrt(len(lams)) * scale)))
    return groups


def chi_squared(data: ExperimentDataset, branches):
    """Per-mode and total quality of fit (see module docstring for the metric)."""
    model = MaterialModel(equilibrium=tuple(branches))
    per_mode = {}
    for mode, lams, ps, w in _groups(data):
        r = np.array([(_nominal_stress(model, mode, l) - p) * w
                      for l, p in zip(lams, ps)])
        per_mode[mode] = float(r @ r)
    return per_mode, float(sum(per_mode.values()))


@dataclass(frozen=True)
class BranchTemplate:
    """One branch of the model being fitted.

    Numeric entries are frozen at that value; ``None`` marks a free parameter.
    ``params`` follows the family's parameter order (e.g. (m, n) for CR).
    """

    family: str = "CR"
    mu: float | None = None
    params: tuple = (None, None)

    def __post_init__(self):
        family = self.family.strip().upper()
        names = family_parameter_names(family)
        params = tuple(self.params)
        if len(params) != len(names):
            raise InvalidParameters(
                f"family {family} takes parameters {names}, template has {len(params)}"
            )
        object.__setattr__(self, "family", family)
        object.__setattr__(self, "params", params)


DEFAULT_TEMPLATES = (BranchTemplate(), BranchTemplate())


def _free_slots(templates):
    """Free-parameter descriptors in documented order: per branch, mu first."""
    slots = []
    for b, t in enumerate(templates):
        if t.mu is None:
            slots.append((b, "mu", None))
        for k, name in enumerate(family_parameter_names(t.family)):
            if t.params[k] is None:
                slots.append((b, name, k))
    return slots


def slot_labels(templates) -> tuple:
    """Labels of the free parameters, e.g. ``('0:mu', '0:m', '0:n', '1:mu', ...)``."""
    return tuple(f"{b}:{name}" for b, name, _ in _free_slots(templates))


def _build_branches(templates, slots, x):
    values = [[t.mu, list(t.params)] for t in templates]
    for (b, _, k), xv in zip(slots, x):
        if k is None:
            values[b][0] = xv
        else:
            values[b][1][k] = xv
    branches = []
    for t, (mu, params) in zip(templates, values):
        branches.append(HillBranch(mu=float(mu), strain=make_scale(t.family, params)))
    return tuple(branches)


def _flat_records(groups):
    """Flatten groups into parallel per-record tuples/arrays."""
    modes, lams, ws, wps = [], [], [], []
    for mode, lams_m, ps, w in groups:
        for lam, p1 in zip(lams_m, ps):
            modes.append(mode)
            lams.append(float(lam))
            ws.append(w)
            wps.append(w * float(p1))
    return tuple(modes), tuple(lams), np.asarray(ws), np.asarray(wps)


def _stress_column(family, params, modes, lams, ws, cache):
    """Weighted unit-modulus stress response of one branch at every record.

    Stress is linear in the modulus, so these columns are the design matrix
    of the inner least-squares problem.  ``cache`` memoizes by exact
    parameter values: a central-difference step perturbs one exponent at a
    time, leaving every other branch's column reusable.
    """
    key = (family, params)
    col = cache.get(key)
    if col is None:
        model = MaterialModel(
            equilibrium=(HillBranch(mu=1.0, strain=make_scale(family, params)),)
        )
        col = np.array([w * _nominal_stress(model, m, l)
                        for m, l, w in zip(modes, lams, ws)])
        cache[key] = col
    return col


def _bounded_lstsq(a, rhs, lo, hi):
    """Least squares ``min |a x - rhs|`` with box-clamped coefficients.

    Coefficients that leave their box are clamped to the violated edge and
    the remaining ones re-solved (simple active-set sweep; at most one pass
    per coefficient).
    """
    n = a.shape[1]
    x = np.zeros(n)
    free = list(range(n))
    for _ in range(n + 1):
        if not free:
            break
        clamped = [i for i in range(n) if i not in free]
        rhs_eff = rhs - a[:, clamped] @ x[clamped] if clamped else rhs
        sol, *_ = np.linalg.lstsq(a[:, free], rhs_eff, rcond=None)
        x[free] = sol
        out = [i for i in free if not lo[i] <= x[i] <= hi[i]]
        if not out:
            break
        for i in out:
            x[i] = lo[i] if x[i] < lo[i] else hi[i]
        free = [i for i in free if i not in out]
    return x


def _fd_jacobian(x, lo, hi, steps, eval_r, r0):
    jac = np.empty((len(r0), len(x)))
    for k in range(len(x)):
        hp = min(steps[k], hi[k] - x[k])
        hm = min(steps[k], x[k] - lo[k])
        if hp <= 0.0 and hm <= 0.0:          # pinched against both bounds
            jac[:, k] = 0.0
            continue
        if hp <= 0.0 or hm <= 0.0:           # one-sided at a bound wall
            h = max(hp, hm)
            sgn = 1.0 if hp > 0.0 else -1.0
            xk = x.copy()
            xk[k] += sgn * h
            jac[:, k] = sgn * (eval_r(xk) - r0) / h
            continue
        xp, xm = x.copy(), x.copy()
        xp[k] += hp
        xm[k] -= hm
        jac[:, k] = (eval_r(xp) - eval_r(xm)) / (hp + hm)
    return jac


def _fit_single(x0, lo, hi, steps, eval_r, max_iter):
    x = np.clip(np.asarray(x0, dtype=float), lo, hi)
    r = eval_r(x)
    chi2 = float(r @ r)
    history = [chi2]
    damping = 1e-3
    accepted = 0
    converged = chi2 <= 1e-24
    while not converged and accepted < max_iter:
        jac = _fd_jacobian(x, lo, hi, steps, eval_r, r)
        jtj = jac.T @ jac
        g = jac.T @ r
        diag = np.maximum(np.diag(jtj), 1e-30)
        step = None
        while damping <= 1e12:
            try:
                step = np.linalg.solve(jtj + damping * np.diag(diag), -g)
            except np.linalg.LinAlgError:
                damping *= 10.0
                continue
            x_new = np.clip(x + step, lo, hi)
            r_new = eval_r(x_new)
            chi2_new = float(r_new @ r_new)
            if chi2_new <= chi2:             # monotone descent only
                break
            damping *= 10.0
            step = None
        if step is None:                     # damping ceiling: no descent direction
            break
        drop = chi2 - chi2_new
        moved = float(np.linalg.norm(x_new - x))
        strong = chi2_new <= 0.25 * chi2
        x, r, chi2 = x_new, r_new, chi2_new
        history.append(chi2)
        accepted += 1
        # melt the damping quickly on strong progress: the zero-residual
        # endgame wants (near) pure Gauss-Newton steps
        damping = max(damping / (10.0 if strong else 3.0), 1e-14)
        if (chi2 <= 1e-20
                or drop <= 1e-12 * max(chi2, 1e-30)
                or moved <= 1e-12 * (1.0 + float(np.linalg.norm(x)))):
            converged = True
        elif len(history) > 12 and history[-13] - chi2 <= 1e-3 * chi2:
            # descent has stalled in a shallow valley: accept it as a local
            # minimum rather than burning the remaining iteration budget
            converged = True
    return {"x": x, "chi2": chi2, "iterations": accepted,
            "converged": bool(converged), "history": tuple(history)}


@dataclass
class FitResult:
    """Outcome of a calibration run."""

    branches: tuple
    parameters: tuple
    per_mode_chi2: dict
    total_chi2: float
    iterations: int
    converged: bool
    start_index: int
    history: tuple
    seed: int

    def to_dict(self) -> dict:
        return {
            "parameters": list(self.parameters),
            "per_mode_chi2": dict(self.per_mode_chi2),
            "total_chi2": self.total_chi2,
            "iterations": self.iterations,
            "converged": self.converged,
            "start_index": self.start_index,
            "history": list(self.history),
            "seed": self.seed,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def save(self, path) -> None:
        fd, tmp = tempfile.mkstemp(dir=os.path.dirname(os.path.abspath(path)) or ".",
                                   suffix=".tmp")
        try:
            with os.fdopen(fd, "w") as handle:
                handle.write(self.to_json())
                handle.write("\n")
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise


def _worker_count(n_starts: int) -> int:
    env = os.environ.get("VISCOKIT_THREADS", "").strip()
    if env:
        try:
            cap = int(env)
        except ValueError:
            raise InvalidParameters(f"VISCOKIT_THREADS must be an integer, got {env!r}")
        if cap > 0:
            return min(cap, n_starts)
    return min(os.cpu_count() or 1, n_starts)


def fit(
    data: ExperimentDataset,
    templates=DEFAULT_TEMPLATES,
    init=None,
    bounds=None,
    seed: int = 0,
    n_starts: int = 8,
    max_iter: int = 150,
) -> FitResult:
    """Fit the free template parameters to the dataset.

    ``init`` optionally seeds start 0 (ordered like :func:`slot_labels`;
    modulus entries are ignored because moduli are recovered by the inner
    linear solve).  ``bounds`` maps slot labels to (lo, hi) overrides.
    Raises :class:`FitDiverged` when no start converges.
    """
    templates = tuple(templates)
    groups = _groups(data, min_per_mode=3)
    slots = _free_slots(templates)
    labels = slot_labels(templates)
    if not slots:
        raise InvalidParameters("templates contain no free parameters")
    if len(slots) > 6:
        raise InvalidParameters(
            f"{len(slots)} free parameters; fits are limited to 6 (use fixed entries)"
        )
    modes, lams, ws, wps = _flat_records(groups)

    # the modulus box is a safety rail for the inner linear solve, anchored
    # on a robust stress scale (a single extreme record must not squeeze
    # plausible moduli out of the box)
    absp = np.abs(np.concatenate([ps for _, _, ps, _ in groups]))
    nonzero = absp[absp > 0.0]
    p_med = float(np.median(nonzero)) if nonzero.size else 1.0

    exp_index = [i for i, (b, name, k) in enumerate(slots) if k is not None]
    mu_branches = [b for b, name, k in slots if k is None]

    lo = np.empty(len(exp_index))
    hi = np.empty(len(exp_index))
    e0 = np.empty(len(exp_index))
    steps = np.full(len(exp_index), 1e-6)
    for j, i in enumerate(exp_index):
        b, name, k = slots[i]
        lo[j], hi[j] = _EXP_BOUNDS[templates[b].family]
        # stagger the default start across branches and parameters:
        # identical templates started at identical exponents have exactly
        # collinear design columns, which the inner solve cannot separate
        e0[j] = min(max(_EXP_START + 0.75 * b + 0.5 * k, lo[j]), hi[j])
    mu_lo = np.full(len(mu_branches), 1e-6 * p_med)
    mu_hi = np.full(len(mu_branches), 1e3 * p_med)

    if bounds:
        unknown = set(bounds) - set(labels)
        if unknown:
            raise InvalidParameters(f"bounds for unknown slots {sorted(unknown)}; have {labels}")
        for label, (blo, bhi) in bounds.items():
            i = labels.index(label)
            b, name, k = slots[i]
            if k is None:
                m = mu_branches.index(b)
                mu_lo[m], mu_hi[m] = float(blo), float(bhi)
            else:
                j = exp_index.index(i)
                lo[j], hi[j] = float(blo), float(bhi)
    if np.any(lo >= hi) or np.any(mu_lo >= mu_hi):
        raise InvalidParameters("every bound interval needs lo < hi")
    if np.any(mu_lo <= 0.0):
        raise InvalidParameters("modulus bounds must be positive")
    if init is not None:
        init = np.asarray([float(v) for v in init])
        if init.size != len(slots):
            raise InvalidParameters(f"init has {init.size} entries, expected {len(slots)}")
        e0 = init[exp_index]

    # per-branch recipe for assembling family parameters from the outer vector
    exp_of_branch = [[] for _ in templates]
    for j, i in enumerate(exp_index):
        b, name, k = slots[i]
        exp_of_branch[b].append((k, j))

    def _params_of(b, e):
        vals = list(templates[b].params)
        for k, j in exp_of_branch[b]:
            vals[k] = e[j]
        return tuple(float(v) for v in vals)

    cache: dict = {}

    def _solve(e):
        cols = [_stress_column(templates[b].family, _params_of(b, e),
                               modes, lams, ws, cache) for b in mu_branches]
        a = np.column_stack(cols) if cols else np.zeros((len(wps), 0))
        rhs = wps.copy()
        for b, t in enumerate(templates):
            if t.mu is not None:
                rhs -= t.mu * _stress_column(t.family, _params_of(b, e),
                                             modes, lams, ws, cache)
        mu = _bounded_lstsq(a, rhs, mu_lo, mu_hi)
        return a @ mu - rhs, mu

    def _assemble(e, mu):
        x = np.empty(len(slots))
        x[exp_index] = e
        for m, b in enumerate(mu_branches):
            x[slots.index((b, "mu", None))] = mu[m]
        return x

    if not exp_index:
        # all exponents frozen: the fit is a single linear solve
        r, mu = _solve(np.empty(0))
        best = {"x": _assemble(np.empty(0), mu), "chi2": float(r @ r),
                "iterations": 1, "converged": True,
                "history": (float(r @ r),)}
        start_index = 0
    else:
        rng = np.random.default_rng(seed)
        starts = [np.clip(e0, lo, hi)]
        # sample within a plausible sub-box: extreme exponents produce
        # stresses so stiff the weighted residual barely sees the rest
        s_lo = np.maximum(lo, -4.0)
        s_hi = np.minimum(hi, 4.0)
        bad = s_lo >= s_hi
        s_lo[bad], s_hi[bad] = lo[bad], hi[bad]
        for _ in range(max(0, n_starts - 1)):
            starts.append(rng.uniform(s_lo, s_hi))

        def run(e_start):
            res = _fit_single(e_start, lo, hi, steps,
                              lambda e: _solve(e)[0], max_iter)
            r, mu = _solve(res["x"])
            res["x"] = _assemble(res["x"], mu)
            return res

        with ThreadPoolExecutor(max_workers=_worker_count(len(starts))) as pool:
            results = list(pool.map(run, starts))

        done = [(res["chi2"], i, res) for i, res in enumerate(results) if res["converged"]]
        if not done:
            best_chi2 = min(res["chi2"] for res in results)
            raise FitDiverged(
                f"no start converged in {max_iter} iterations "
                f"(best chi2 reached: {best_chi2:.3e})"
            )
        _, start_index, best = min(done, key=lambda t: (t[0], t[1]))

    branches = _build_branches(templates, slots, best["x"])
    per_mode, total = chi_squared(data, branches)
    parameters = []
    for t, br in zip(templates, branches):
        entry = {"family": t.family, "mu": br.mu}
        names = family_parameter_names(t.family)
        lamvals = [getattr(br.strain, nm) for nm in names]
        entry.update({nm: float(v) for nm, v in zip(names, lamvals)})
        parameters.append(entry)
    return FitResult(
        branches=branches,
        parameters=tuple(parameters),
        per_mode_chi2=per_mode,
        total_chi2=total,
        iterations=best["iterations"],
        converged=True,
        start_index=start_index,
        history=best["history"],
        seed=seed,
    )
