"""Command-line interface: verification suites, simulation, calibration.

Subcommands
-----------
verify     run the built-in finite-difference / property suites
simulate   run a load program from a JSON config and write the CSV series
fit        calibrate branch parameters to a dataset CSV

Configs are strict JSON: unknown keys are rejected with the offending key
path, so typos fail loudly instead of being silently ignored.  Exit codes:
0 success, 1 failed verification or diverged run, 2 bad usage or config.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .calibrate import BranchTemplate, ExperimentDataset, fit as run_fit
from .errors import FitDiverged, InvalidParameters, ViscokitError
from .hyperelastic import HillBranch, VolumetricModel
from .kinbridge import MultiplicativePair, hencky_split_residual, invariant_triples
from .pointdriver import (
    Constant,
    LoadProgram,
    RampHold,
    Sinusoid,
    run_strain_controlled,
    run_stress_controlled,
)
from .projections import proj_Q, proj_Q_inv
from .spectral import decompose
from .strains import check_axioms, family_parameter_names, scale_function, strain_tensor
from .tensors import ddot42, sym
from .viscoelastic import (
    MaterialModel,
    MaxwellBranch,
    PointState,
    evaluate_point,
)

_SCHEDULES = {
    "ramp_hold": (RampHold, ("rate", "t_ramp")),
    "constant": (Constant, ("value",)),
    "sinusoid": (Sinusoid, ("amplitude", "omega")),
}


class ConfigError(Exception):
    """Config file failed validation; message carries the key path."""


def _check_keys(section: dict, allowed, path: str) -> None:
    unknown = sorted(set(section) - set(allowed))
    if unknown:
        raise ConfigError(f"{path}: unknown key(s) {unknown}; allowed: {sorted(allowed)}")


def _need(section: dict, key: str, path: str):
    if key not in section:
        raise ConfigError(f"{path}: missing required key {key!r}")
    return section[key]


def _load_json(path: str) -> dict:
    try:
        with open(path) as handle:
            return json.load(handle)
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror or exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None


def _build_branch(entry: dict, path: str, maxwell: bool):
    allowed = ("mu", "strain", "tau") if maxwell else ("mu", "strain", "kappa")
    if not isinstance(entry, dict):
        raise ConfigError(f"{path}: expected an object")
    _check_keys(entry, allowed, path)
    try:
        if maxwell:
            return MaxwellBranch(
                mu=float(_need(entry, "mu", path)),
                strain=str(_need(entry, "strain", path)),
                tau=float(_need(entry, "tau", path)),
            )
        return HillBranch(
            mu=float(_need(entry, "mu", path)),
            strain=str(_need(entry, "strain", path)),
            kappa=float(entry.get("kappa", 0.0)),
        )
    except InvalidParameters as exc:
        key = "mu" if "modulus" in str(exc) else "strain"
        if "tau" in str(exc) or "relaxation" in str(exc):
            key = "tau"
        if "kappa" in str(exc):
            key = "kappa"
        raise ConfigError(f"{path}.{key}: {exc}") from None


def build_model(section: dict, path: str = "model") -> MaterialModel:
    if not isinstance(section, dict):
        raise ConfigError(f"{path}: expected an object")
    _check_keys(section, ("formulation", "equilibrium", "maxwell", "volumetric"), path)
    equilibrium = tuple(
        _build_branch(e, f"{path}.equilibrium[{i}]", maxwell=False)
        for i, e in enumerate(_need(section, "equilibrium", path))
    )
    maxwell = tuple(
        _build_branch(e, f"{path}.maxwell[{i}]", maxwell=True)
        for i, e in enumerate(section.get("maxwell", ()))
    )
    volumetric = None
    if section.get("volumetric") is not None:
        vol = section["volumetric"]
        _check_keys(vol, ("kind", "kappa"), f"{path}.volumetric")
        try:
            volumetric = VolumetricModel(
                kind=str(_need(vol, "kind", f"{path}.volumetric")),
                kappa=float(_need(vol, "kappa", f"{path}.volumetric")),
            )
        except InvalidParameters as exc:
            raise ConfigError(f"{path}.volumetric: {exc}") from None
    try:
        return MaterialModel(
            equilibrium=equilibrium,
            maxwell=maxwell,
            volumetric=volumetric,
            formulation=str(section.get("formulation", "gibbs")),
        )
    except InvalidParameters as exc:
        raise ConfigError(f"{path}: {exc}") from None


def build_program(section: dict, path: str = "program") -> LoadProgram:
    if not isinstance(section, dict):
        raise ConfigError(f"{path}: expected an object")
    _check_keys(section, ("kind", "schedule", "t_end", "dt"), path)
    sched = _need(section, "schedule", path)
    _check_keys(sched, ("type",) + sum((f for _, f in _SCHEDULES.values()), ()), f"{path}.schedule")
    stype = str(_need(sched, "type", f"{path}.schedule"))
    if stype not in _SCHEDULES:
        raise ConfigError(
            f"{path}.schedule.type: unknown type {stype!r}; expected one of {sorted(_SCHEDULES)}"
        )
    cls, fields = _SCHEDULES[stype]
    extra = sorted(set(sched) - {"type"} - set(fields))
    if extra:
        raise ConfigError(f"{path}.schedule: key(s) {extra} do not belong to type {stype!r}")
    try:
        schedule = cls(**{f: float(_need(sched, f, f"{path}.schedule")) for f in fields})
        return LoadProgram(
            kind=str(_need(section, "kind", path)),
            schedule=schedule,
            t_end=float(_need(section, "t_end", path)),
            dt=float(_need(section, "dt", path)),
        )
    except InvalidParameters as exc:
        raise ConfigError(f"{path}: {exc}") from None


def _set_by_path(config: dict, dotted: str, value):
    """Assign into nested dicts/lists by a dotted path like model.maxwell.0.tau."""
    keys = dotted.split(".")
    node = config
    for key in keys[:-1]:
        node = node[int(key)] if isinstance(node, list) else node[key]
    leaf = keys[-1]
    if isinstance(node, list):
        node[int(leaf)] = value
    else:
        if leaf not in node:
            raise ConfigError(f"sweep.path: {dotted!r} does not address an existing key")
        node[leaf] = value


def _run_one(config: dict, out_path: str) -> None:
    model = build_model(_need(config, "model", "config"))
    program = build_program(_need(config, "program", "config"))
    if program.kind == "uniaxial_stress":
        series = run_stress_controlled(model, program)
    else:
        series = run_strain_controlled(model, program)
    series.to_csv(out_path)


def _sweep_out_path(out: str, value) -> str:
    root, ext = os.path.splitext(out)
    return f"{root}_{value:g}{ext or '.csv'}"


def cmd_simulate(args) -> int:
    config = _load_json(args.config)
    _check_keys(config, ("description", "model", "program", "sweep", "seed"), "config")
    sweep = config.get("sweep")
    if sweep is None:
        _run_one(config, args.out)
        print(f"wrote {args.out}")
        return 0
    _check_keys(sweep, ("path", "values"), "sweep")
    dotted = str(_need(sweep, "path", "sweep"))
    values = [float(v) for v in _need(sweep, "values", "sweep")]
    if not values:
        raise ConfigError("sweep.values: empty")

    def one(value: float) -> str:
        local = json.loads(json.dumps(config))  # deep copy; workers share nothing
        _set_by_path(local, dotted, value)
        out = _sweep_out_path(args.out, value)
        _run_one(local, out)
        return out

    workers = os.environ.get("VISCOKIT_THREADS", "").strip()
    max_workers = min(int(workers) if workers else (os.cpu_count() or 1), len(values))
    with ThreadPoolExecutor(max_workers=max(max_workers, 1)) as pool:
        for out in pool.map(one, values):
            print(f"wrote {out}")
    return 0


def cmd_fit(args) -> int:
    config = _load_json(args.config) if args.config else {}
    _check_keys(config, ("description", "templates", "seed", "n_starts", "max_iter",
                         "bounds", "init"), "config")
    templates = []
    for i, entry in enumerate(config.get("templates",
                                         [{"family": "CR"}, {"family": "CR"}])):
        path = f"config.templates[{i}]"
        _check_keys(entry, ("family", "mu", "params"), path)
        family = str(entry.get("family", "CR"))
        try:
            nparams = len(family_parameter_names(family))
            params = entry.get("params", [None] * nparams)
            templates.append(BranchTemplate(
                family=family,
                mu=None if entry.get("mu") is None else float(entry["mu"]),
                params=tuple(None if p is None else float(p) for p in params),
            ))
        except InvalidParameters as exc:
            raise ConfigError(f"{path}: {exc}") from None
    bounds = None
    if config.get("bounds") is not None:
        bounds = {str(k): (float(v[0]), float(v[1])) for k, v in config["bounds"].items()}

    try:
        data = ExperimentDataset.load_csv(args.data)
    except OSError as exc:
        raise ConfigError(f"{args.data}: {exc.strerror or exc}") from None
    result = run_fit(
        data,
        templates=tuple(templates),
        init=config.get("init"),
        bounds=bounds,
        seed=int(config.get("seed", 0)),
        n_starts=int(config.get("n_starts", 8)),
        max_iter=int(config.get("max_iter", 150)),
    )
    result.save(args.out)
    print(f"wrote {args.out}: chi2 = {result.total_chi2:.6e} "
          f"({result.iterations} iterations, start {result.start_index})")
    return 0


# ---------------------------------------------------------------------------
# verify suites: small self-contained checks, each returns (ok, detail)


def _suite_projections(rng) -> tuple[bool, str]:
    worst_q = worst_inv = 0.0
    for spec in ("SH:m=2", "CR:m=1.2,n=1.4", "BI:m=1.5", "CZ:m=0.7", "DN:m=1.6,n=1.1"):
        sf = scale_function(spec)
        for _ in range(6):
            a = rng.standard_normal((3, 3)) * 0.3
            c = sym(a @ a.T) + np.eye(3) * float(np.exp(rng.uniform(-0.3, 0.3)))
            d = decompose(c)
            q4 = proj_Q(d, sf)
            h = sym(rng.standard_normal((3, 3)))
            s = 1e-6
            num = (strain_tensor(decompose(c + s * h), sf)
                   - strain_tensor(decompose(c - s * h), sf)) / (2 * s)
            ana = 0.5 * ddot42(q4, h)
            worst_q = max(worst_q, float(np.abs(num - ana).max() / np.abs(ana).max()))
            ident = ddot42(np.tensordot(q4, proj_Q_inv(d, sf), axes=2), np.eye(3))
            worst_inv = max(worst_inv, float(np.abs(ident - np.eye(3)).max()))
    ok = worst_q <= 1e-5 and worst_inv <= 1e-11
    return ok, f"FD(Q) rel {worst_q:.2e}, |Q:Qinv - I| {worst_inv:.2e}"


def _suite_tangent(rng) -> tuple[bool, str]:
    model = MaterialModel(
        equilibrium=(HillBranch(mu=2.0e5, strain="CR:m=1.8,n=0.7"),),
        maxwell=(MaxwellBranch(mu=1.0e5, strain="SH:m=2", tau=2.0),),
    )
    state = PointState.initial(model)
    f = np.eye(3)
    for _ in range(3):
        f = f @ (np.eye(3) + sym(rng.standard_normal((3, 3))) * 0.08)
        state = evaluate_point(model, f, state, 0.3, pressure=0.0,
                               compute_tangent=False).state
    # dt = 0 freezes the internal state, which is what the tangent linearizes at
    out = evaluate_point(model, f, state, 0.0, pressure=0.0, compute_tangent=True)
    c = f.T @ f

    def s_iso(ctrial):
        lam, vec = np.linalg.eigh(ctrial)
        fr = vec @ np.diag(np.sqrt(lam)) @ vec.T
        o = evaluate_point(model, fr, state, 0.0, pressure=0.0, compute_tangent=False)
        return o.s_eq + o.s_neq

    worst = 0.0
    for _ in range(3):
        h = sym(rng.standard_normal((3, 3)))
        s = 1e-6
        num = (s_iso(c + s * h) - s_iso(c - s * h)) / (2 * s)
        ana = 0.5 * ddot42(out.c_iso, h)
        worst = max(worst, float(np.abs(num - ana).max() / np.abs(ana).max()))
    return worst <= 1e-5, f"FD(C_iso) rel {worst:.2e}"


def _suite_local_newton(rng) -> tuple[bool, str]:
    model = MaterialModel(
        equilibrium=(HillBranch(mu=1.5e5, strain="CR:m=1.2,n=1.4"),),
        maxwell=(MaxwellBranch(mu=3.0e5, strain="CR:m=1.2,n=1.4", tau=1.0),),
    )
    worst_iters = 0
    for _ in range(5):
        a = rng.standard_normal((3, 3)) * 0.25
        f = np.eye(3) + a
        if np.linalg.det(f) <= 0:
            f = np.eye(3) - a
        out = evaluate_point(model, f, PointState.initial(model), 0.1, pressure=0.0,
                             compute_tangent=False)
        worst_iters = max(worst_iters, max(out.report.iterations))
    return worst_iters <= 5, f"max local iterations {worst_iters}"


def _suite_dissipation(rng) -> tuple[bool, str]:
    model = MaterialModel(
        equilibrium=(HillBranch(mu=1.0e5, strain="SH:m=2"),),
        maxwell=(MaxwellBranch(mu=2.0e5, strain="CR:m=1.0,n=1.0", tau=0.5),),
    )
    state = PointState.initial(model)
    lowest = 0.0
    f0 = np.eye(3)
    for k in range(40):
        h = sym(rng.standard_normal((3, 3))) * 0.02
        f0 = f0 @ (np.eye(3) + h)
        out = evaluate_point(model, f0, state, 0.05, pressure=0.0, compute_tangent=False)
        state = out.state
        lowest = min(lowest, out.dissipation)
    return lowest >= -1e-12 * 2.0e5, f"min dissipation {lowest:.2e}"


def _suite_axioms(rng) -> tuple[bool, str]:
    worst = 0.0
    for spec in ("SH:m=2", "SH:m=0", "CR:m=1.2,n=1.4", "BI:m=1.5",
                 "CZ:m=0.7", "DN:m=1.6,n=1.1"):
        worst = max(worst, check_axioms(scale_function(spec)))
    return worst <= 1e-12, f"axiom defect {worst:.2e}"


def _suite_kinbridge(rng) -> tuple[bool, str]:
    worst_tr = worst_hy = 0.0
    for _ in range(10):
        a = rng.standard_normal((3, 3)) * 0.3
        f = np.eye(3) + a
        if np.linalg.det(f) <= 0:
            f = np.eye(3) - a
        gv = sym(rng.standard_normal((3, 3))) * 0.2
        fv = expm_half(gv)
        pair = MultiplicativePair(f=f, fv=fv)
        t1, t2 = invariant_triples(pair)
        worst_tr = max(worst_tr, max(abs(x - y) for x, y in zip(t1, t2)))
        lam_v = np.exp(rng.standard_normal(3) * 0.2)
        worst_hy = max(worst_hy, hencky_split_residual(f, lam_v))
    ok = worst_tr <= 1e-10 and worst_hy <= 1e-12
    return ok, f"invariant gap {worst_tr:.2e}, coaxial Hencky residual {worst_hy:.2e}"


def expm_half(g: np.ndarray) -> np.ndarray:
    """Symmetric matrix exponential of g/2 (an SPD square root of exp g)."""
    lam, vec = np.linalg.eigh(sym(g))
    return (vec * np.exp(0.5 * lam)) @ vec.T


_SUITES = (
    ("projections", _suite_projections),
    ("tangent", _suite_tangent),
    ("local_newton", _suite_local_newton),
    ("dissipation", _suite_dissipation),
    ("axioms", _suite_axioms),
    ("kinbridge", _suite_kinbridge),
)


def cmd_verify(args) -> int:
    failed = 0
    for name, suite in _SUITES:
        if args.filter and args.filter not in name:
            continue
        rng = np.random.default_rng(args.seed)
        try:
            ok, detail = suite(rng)
        except ViscokitError as exc:
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        print(f"{name:<14} {'PASS' if ok else 'FAIL'}  ({detail})")
        failed += 0 if ok else 1
    return 0 if failed == 0 else 1


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="viscokit",
        description="Finite-strain viscoelasticity: verify, simulate, calibrate.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_verify = sub.add_parser("verify", help="run the built-in verification suites")
    p_verify.add_argument("--seed", type=int, default=0)
    p_verify.add_argument("--filter", default="", help="only run suites whose name contains this")
    p_verify.set_defaults(func=cmd_verify)

    p_sim = sub.add_parser("simulate", help="run a load program from a JSON config")
    p_sim.add_argument("config", help="JSON run configuration")
    p_sim.add_argument("--out", required=True, help="output CSV path")
    p_sim.set_defaults(func=cmd_simulate)

    p_fit = sub.add_parser("fit", help="calibrate branch parameters to a dataset CSV")
    p_fit.add_argument("data", help="dataset CSV (mode,stretch,nominal_stress)")
    p_fit.add_argument("--config", default=None, help="JSON fit configuration")
    p_fit.add_argument("--out", required=True, help="output JSON path")
    p_fit.set_defaults(func=cmd_fit)
    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except FitDiverged as exc:
        print(f"fit diverged: {exc}", file=sys.stderr)
        return 1
    except ViscokitError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
