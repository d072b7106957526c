"""Command-line front end.

Exit codes: 0 success, 1 mathematical failure (structure, consistency,
rank or index assumptions), 2 input or usage error.
"""

from __future__ import annotations

import argparse
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .document import SystemDocument, load, report_document, save, write_report
from .exceptions import PHDAEError, ShapeError
from .index import check_index_le_one, strangeness_analysis
from .models import PRESETS, preset
from .reduce import index_one_canonical, reduce_index_one, regularize_high_index
from .sim import energy_audit, integrate
from .system import DEFAULT_GRID, DEFAULT_TOL, PHDAESystem, verify_structure

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_INPUT = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_INPUT)


def _vector(text: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in text.replace(",", " ").split()], dtype=float)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _report_path(input_path: str, out: str | None, kind: str) -> Path:
    if out:
        return Path(out)
    p = Path(input_path)
    return p.with_name(f"{p.stem}.{kind}.json")


def _print_table(title: str, rows) -> None:
    print(title)
    width = max((len(k) for k, _ in rows), default=0)
    for k, v in rows:
        if isinstance(v, float):
            v = f"{v:.3e}"
        print(f"  {k:<{width}}  {v}")


# pipeline steps shared by the commands and the demo

def _verify(system: PHDAESystem, tol: float, grid: int):
    rep = verify_structure(system, grid_points=grid, tol=tol)
    _print_table("structure", [
        ("symmetry of Q^T E", rep.skew_symmetry_residual),
        ("derivative identity", rep.derivative_identity_residual),
        ("min eig sym(Q^T E)", rep.min_eig_QTE),
        ("min eig W", rep.min_eig_W),
        ("feedthrough", rep.feedthrough_residual),
        ("result", "pass" if rep.ok else "FAIL: " + ", ".join(rep.failures())),
    ])
    return rep


def _analyze(system: PHDAESystem, mu_max: int, tol: float, include_inputs: bool):
    idx = strangeness_analysis(system, mu_max=mu_max, tol=tol, include_inputs=include_inputs)
    _print_table("index", [
        ("mu", idx.mu), ("r", idx.r), ("a", idx.a), ("d", idx.d), ("nu", idx.nu),
        ("hidden constraints", idx.n_hidden),
        ("result", "ok" if idx.success else "FAIL: " + idx.message),
    ])
    return idx


def _reduce(system: PHDAESystem, tol: float, rank_tol: float):
    """Regularize if hidden constraints exist, then eliminate algebraic states.

    Returns ``(final system, report section, lift, restrict)``. ``lift`` maps
    a state of the final system to original coordinates and ``restrict``
    projects an original state onto the consistent set (zero input) and
    maps it to the final system.
    """
    section: dict = {"input_dimension": system.n}
    reg = None
    current = system
    if system.is_constant:
        idx = strangeness_analysis(system, tol=rank_tol, include_inputs=False)
        section["index"] = idx.summary()
        if not idx.success:
            raise PHDAEError(f"index analysis failed: {idx.message}")
        if idx.n_hidden:
            with warnings.catch_warnings(record=True) as caught:
                warnings.simplefilter("always")
                reg = regularize_high_index(system, idx, tol=tol, rank_tol=rank_tol)
            section["regularization"] = {
                "removed_states": reg.k,
                "subsystem_dimension": reg.subsystem.n,
                "input_coupled_constraints": reg.input_coupling,
                "warnings": [str(w.message) for w in caught],
                "constraints": reg.constraints,
                "V": reg.V,
                **reg.report,
            }
            current = reg.subsystem
    if not check_index_le_one(current, tol=tol, rank_tol=rank_tol):
        raise PHDAEError("system does not have index at most one after regularization")
    c = index_one_canonical(current, tol=tol, rank_tol=rank_tol)
    red = reduce_index_one(c)
    section["index_one"] = {
        "differential_dimension": c.n1,
        "algebraic_dimension": c.n2,
        "residuals": c.residuals,
        "conditioning": c.conditioning,
        "fit_residual": max(c.fit_residual, red.fit_residual),
    }
    if current.is_constant:
        section["index_one"]["V"] = c.V.coeff(0)
    section["output_dimension"] = red.ode.n

    def lift(x1, u=None, t=None):
        x = red.lift(x1, u=u, t=t)
        return reg.lift(x) if reg is not None else x

    def restrict(x):
        if reg is not None:
            x = reg.restrict(reg.consistent_projection(x))
        return red.to_canonical(x, t=system.t0)[0]

    return red.ode, section, lift, restrict


def _simulate(system, x0, u, h, method, project):
    traj = integrate(system, x0, u=u, h=h, method=method, project=project)
    audit = energy_audit(traj, system)
    _print_table("simulation", [
        ("method", method), ("steps", len(traj.times) - 1),
        ("initial consistency residual", traj.info["initial_consistency_residual"]),
        ("max algebraic residual", traj.info["max_algebraic_residual"]),
        ("H(t0)", float(traj.hamiltonian[0])), ("H(tf)", float(traj.hamiltonian[-1])),
        ("supply", audit.cumulative_supply),
        ("dissipation margin", audit.dissipation_margin),
        ("max balance residual", audit.max_balance_residual),
        ("dissipation inequality", "violated" if audit.violated else "holds"),
    ])
    return traj, audit


# commands

def cmd_verify(args) -> int:
    doc = load(args.path)
    rep = _verify(doc.system, args.tol, args.grid)
    out = _report_path(args.path, args.out, "verify")
    write_report(report_document("verify", {"tol": args.tol, "grid": args.grid},
                                 structure=rep.as_dict()), out)
    print(f"report: {out}")
    return EXIT_OK if rep.ok else EXIT_FAILURE


def cmd_analyze(args) -> int:
    doc = load(args.path)
    idx = _analyze(doc.system, args.mu_max, args.tol, args.with_inputs)
    out = _report_path(args.path, args.report, "analyze")
    section = idx.summary()
    section["A3"] = idx.A3
    write_report(report_document("analyze", {"rank_tol": args.tol, "mu_max": args.mu_max},
                                 index=section), out)
    print(f"report: {out}")
    return EXIT_OK if idx.success else EXIT_FAILURE


def cmd_reduce(args) -> int:
    doc = load(args.path)
    rep = _verify(doc.system, args.tol, DEFAULT_GRID)
    if not rep.ok:
        print("input is not a pHDAE; refusing to reduce", file=sys.stderr)
        return EXIT_FAILURE
    ode, section, _, _ = _reduce(doc.system, args.tol, args.rank_tol)
    check = verify_structure(ode, tol=args.tol * 100)
    section["output_structure"] = check.as_dict()
    out = Path(args.out) if args.out else _report_path(args.path, None, "reduced")
    save(SystemDocument(ode), out)
    rpath = out.with_name(f"{out.stem}.report.json")
    write_report(report_document("reduce", {"tol": args.tol, "rank_tol": args.rank_tol},
                                 structure=rep.as_dict(), reduction=section), rpath)
    _print_table("reduction", [
        ("input dimension", doc.system.n), ("output dimension", ode.n),
        ("output structure", "pass" if check.ok else "FAIL: " + ", ".join(check.failures())),
    ])
    print(f"reduced system: {out}")
    print(f"report: {rpath}")
    return EXIT_OK if check.ok else EXIT_FAILURE


def cmd_simulate(args) -> int:
    doc = load(args.path)
    s = doc.system
    if args.tf is not None:
        s = s.replace(tf=args.tf)
    x0 = args.x0 if args.x0 is not None else (doc.x0 if doc.x0 is not None else np.zeros(s.n))
    if x0.shape != (s.n,):
        raise ShapeError(f"--x0 has {x0.size} entries, expected {s.n}")
    u = args.u if args.u is not None else doc.input_spec()
    if isinstance(u, np.ndarray) and u.shape != (s.m,):
        raise ShapeError(f"--u has {u.size} entries, expected {s.m}")
    traj, audit = _simulate(s, x0, u, args.h, args.method, args.project)
    csv_path = Path(args.csv) if args.csv else _report_path(args.path, None, "trajectory").with_suffix(".csv")
    traj.to_csv(csv_path)
    out = _report_path(args.path, args.report, "simulate")
    write_report(report_document("simulate", {"h": args.h, "method": args.method,
                                              "energy_tol": audit.tol},
                                 energy=audit.as_dict(), simulation=traj.info), out)
    print(f"trajectory: {csv_path}")
    print(f"report: {out}")
    return EXIT_FAILURE if audit.violated else EXIT_OK


def cmd_demo(args) -> int:
    s = preset(args.name)
    outdir = Path(args.out_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    save(s, outdir / f"{args.name}.json")
    print(f"preset {args.name}: n={s.n}, m={s.m}")
    rep = _verify(s, DEFAULT_TOL, DEFAULT_GRID)
    if not rep.ok:
        return EXIT_FAILURE
    idx = _analyze(s, 3, 1e-11, False)
    ode, section, lift, restrict = _reduce(s, DEFAULT_TOL, 1e-11)
    save(ode, outdir / f"{args.name}.reduced.json")
    _print_table("reduction", [("output dimension", ode.n)])
    # start from the consistent state closest to all ones
    x0 = restrict(np.ones(s.n))
    traj, audit = _simulate(ode, x0, None, args.h, "implicit-midpoint", False)
    traj.to_csv(outdir / f"{args.name}.trajectory.csv")
    lifted = lift(traj.states[-1], u=traj.inputs[-1], t=traj.times[-1])
    write_report(report_document("demo", {"tol": DEFAULT_TOL, "h": args.h},
                                 structure=rep.as_dict(), index=idx.summary(), reduction=section,
                                 energy=audit.as_dict(),
                                 simulation={**traj.info, "final_state": lifted}),
                 outdir / f"{args.name}.report.json")
    print(f"outputs in {outdir}")
    return EXIT_FAILURE if audit.violated else EXIT_OK


def cmd_export(args) -> int:
    s = preset(args.name)
    out = Path(args.out) if args.out else Path(f"{args.name}.json")
    save(s, out)
    print(f"wrote {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="phdae", description="Verify, analyze, reduce and simulate linear pHDAEs.")
    p.add_argument("--version", action="version", version=f"phdae {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    v = sub.add_parser("verify", help="check the pHDAE structure conditions")
    v.add_argument("path")
    v.add_argument("--tol", type=float, default=DEFAULT_TOL)
    v.add_argument("--grid", type=int, default=DEFAULT_GRID)
    v.add_argument("--out", help="report path (default: beside the input)")
    v.set_defaults(func=cmd_verify)

    a = sub.add_parser("analyze", help="strangeness index and hidden constraints")
    a.add_argument("path")
    a.add_argument("--mu-max", type=int, default=3)
    a.add_argument("--tol", type=float, default=1e-11, help="rank tolerance")
    a.add_argument("--with-inputs", action="store_true",
                   help="analyze the behavior system including inputs (default: u = 0)")
    a.add_argument("--report", help="report path (default: beside the input)")
    a.set_defaults(func=cmd_analyze)

    r = sub.add_parser("reduce", help="regularize and eliminate algebraic states")
    r.add_argument("path")
    r.add_argument("--out", help="reduced system document (report is written beside it)")
    r.add_argument("--tol", type=float, default=DEFAULT_TOL)
    r.add_argument("--rank-tol", type=float, default=1e-11)
    r.set_defaults(func=cmd_reduce)

    s = sub.add_parser("simulate", help="integrate an index-at-most-one system")
    s.add_argument("path")
    s.add_argument("--x0", type=_vector, help="initial state, comma separated")
    s.add_argument("--u", type=_vector, help="constant input, comma separated")
    s.add_argument("--h", type=float, default=1e-2)
    s.add_argument("--tf", type=float, help="override the final time")
    s.add_argument("--method", choices=("implicit-midpoint", "implicit-euler"),
                   default="implicit-midpoint")
    s.add_argument("--project", action="store_true",
                   help="project an inconsistent x0 onto the algebraic constraints")
    s.add_argument("--csv", help="trajectory CSV path")
    s.add_argument("--report", help="report path (default: beside the input)")
    s.set_defaults(func=cmd_simulate)

    d = sub.add_parser("demo", help="run a preset through the full pipeline")
    d.add_argument("name", choices=sorted(PRESETS))
    d.add_argument("--out-dir", default=".")
    d.add_argument("--h", type=float, default=1e-2)
    d.set_defaults(func=cmd_demo)

    e = sub.add_parser("export", help="write a preset as a system document")
    e.add_argument("name", choices=sorted(PRESETS))
    e.add_argument("--out")
    e.set_defaults(func=cmd_export)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ShapeError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except PHDAEError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    except np.linalg.LinAlgError as exc:
        print(f"error: linear algebra failure: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
