"""Command-line front end: run fixtures and emit verification reports.

Subcommands
    cap-eig         eigenpair of a polar cap (by radius or by eigenvalue)
    verify-chiti    reverse Holder pipeline on a rasterized domain
    verify-torsion  Saint-Venant and warping checks on a rasterized domain
    chiti-constant  flat-space reverse Holder constant K(p, q, lambda, n)
    isoperimetric   boundary length against the equal-volume cap

Reports are JSON by default (schema 1) with %.12e float literals and a
fixed key order, so identical invocations emit identical bytes; CSV
output flattens the result rows.  Exit codes: 0 all checks pass, 1 usage
or input error, 2 numerical failure, 3 inequality violation.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import re
import sys
import time

import numpy as np


def _apply_thread_cap() -> None:
    cap = os.environ.get("CAPSPECTRA_THREADS")
    if not cap:
        return
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                "MKL_NUM_THREADS", "NUMBA_NUM_THREADS"):
        os.environ.setdefault(var, cap)


_apply_thread_cap()

from .cap_spectral import (  # noqa: E402
    CapEigenpair,
    cap_eigenvalue,
    cap_radius_from_eigenvalue,
)
from .chiti import (  # noqa: E402
    VerificationReport,
    cap_volume_bound_report,
    chiti_constant_euclidean,
    crossing_points,
    normalize_pair,
    resolve_tolerances,
    reverse_holder_check,
)
from .domain_solver import (  # noqa: E402
    DomainSpec,
    DomainSpecError,
    build_mesh,
    domain_from_json,
    isoperimetric_check,
    measured_samples,
    solve_dirichlet_eigenpair,
    solve_torsion,
)
from .rearrangement import decreasing_rearrangement  # noqa: E402
from .torsion import (  # noqa: E402
    saint_venant_check,
    warping_comparison_check,
    warping_derivative_bound_check,
)

EXIT_PASS = 0
EXIT_USAGE = 1
EXIT_NUMERIC = 2
EXIT_VIOLATION = 3


# ---------------------------------------------------------------------------
# Canonical output
# ---------------------------------------------------------------------------


def _emit(obj, out: list) -> None:
    if obj is None:
        out.append("null")
    elif isinstance(obj, bool):
        out.append("true" if obj else "false")
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            raise ValueError("non-finite value in report")
        out.append("%.12e" % x)
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    elif isinstance(obj, (list, tuple)):
        out.append("[")
        for k, item in enumerate(obj):
            if k:
                out.append(",")
            _emit(item, out)
        out.append("]")
    elif isinstance(obj, dict):
        out.append("{")
        for k, (key, value) in enumerate(obj.items()):
            if k:
                out.append(",")
            out.append(json.dumps(str(key)))
            out.append(":")
            _emit(value, out)
        out.append("}")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def canonical_json(obj) -> str:
    """Deterministic JSON: insertion key order, %.12e floats."""
    out: list = []
    _emit(obj, out)
    return "".join(out)


def _document(command: str, inputs: dict, tolerances: dict,
              results: list[VerificationReport], extras: dict | None = None,
              timestamps: bool = False) -> dict:
    doc: dict = {"schema": 1, "command": command, "inputs": inputs,
                 "tolerances": tolerances}
    if extras:
        doc.update(extras)
    doc["results"] = [r.to_dict() for r in results]
    doc["pass"] = all(r.passed for r in results)
    if timestamps:
        doc["timestamp"] = time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())
    return doc


def _reports_csv(doc: dict) -> str:
    lines = ["name,lhs,rhs,margin,tolerance,pass"]
    for row in doc["results"]:
        lines.append(",".join([
            row["name"], "%.12e" % row["lhs"], "%.12e" % row["rhs"],
            "%.12e" % row["margin"], "%.12e" % row["tolerance"],
            "true" if row["pass"] else "false"]))
    return "\n".join(lines) + "\n"


def _write_output(doc: dict, args) -> None:
    text = _reports_csv(doc) if args.format == "csv" else canonical_json(doc) + "\n"
    if args.out:
        with open(args.out, "w") as handle:
            handle.write(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# Pure pipelines (shared with the test suite)
# ---------------------------------------------------------------------------


def _mesh_summary(mesh) -> dict:
    return {"n_lat": mesh.n_lat, "n_lon": mesh.n_lon, "dofs": mesh.dof_count,
            "volume": mesh.volume, "boundary_length": mesh.boundary_length,
            "staircase_length": mesh.staircase_length,
            "connected": mesh.connected}


def run_verify_chiti(domain: DomainSpec, p: float, qs: list[float],
                     resolution: tuple[int, int],
                     tolerances: dict[str, float] | None = None):
    """Eigenpair, rearrangement, and reverse Holder reports for a domain.

    Returns (reports, extras): the volume bound report followed by one
    reverse Holder report per exponent, plus crossing diagnostics.  The
    volume bound is reported instead of enforced so a violation surfaces
    as a failed check, not an exception.
    """
    tols = resolve_tolerances(tolerances)
    mesh = build_mesh(domain, resolution)
    lam, ufield = solve_dirichlet_eigenpair(mesh)
    u_star = decreasing_rearrangement(measured_samples(mesh, ufield))
    # the radial solver lives on the unit sphere; scale the eigenvalue over
    manifold = domain.manifold
    cap = cap_radius_from_eigenvalue(manifold.n, lam * manifold.r**2)
    pair = normalize_pair(u_star, cap, p, manifold, lam=lam,
                          claim_tol=math.inf)
    reports = [cap_volume_bound_report(pair, tols)]
    for q in qs:
        reports.append(reverse_holder_check(pair, q, tols))
    count, thetas2 = crossing_points(pair, deadband=tols["crossing_deadband"])
    extras = {"lambda": lam, "theta1": cap.theta1, "scale": pair.scale,
              "crossings": count,
              "theta2": thetas2[0] if count else None,
              "mesh": _mesh_summary(mesh)}
    return reports, extras


def run_verify_torsion(domain: DomainSpec, resolution: tuple[int, int],
                       tolerances: dict[str, float] | None = None):
    """Torsion solve plus the three comparison reports for a domain."""
    tols = resolve_tolerances(tolerances)
    mesh = build_mesh(domain, resolution)
    field = solve_torsion(mesh)
    reports = [saint_venant_check(field, tols),
               warping_comparison_check(field, tolerances=tols),
               warping_derivative_bound_check(field, tols)]
    extras = {"rigidity": field.rigidity, "sup": field.sup_w,
              "volume": field.volume, "mesh": _mesh_summary(mesh)}
    return reports, extras


def run_isoperimetric(domain: DomainSpec, resolution: tuple[int, int],
                      tolerances: dict[str, float] | None = None):
    tols = resolve_tolerances(tolerances)
    mesh = build_mesh(domain, resolution)
    return [isoperimetric_check(mesh, tols)], {"mesh": _mesh_summary(mesh)}


# ---------------------------------------------------------------------------
# Argument handling
# ---------------------------------------------------------------------------


def _parse_grid(text: str) -> tuple[int, int]:
    match = re.fullmatch(r"(\d+)x(\d+)", text)
    if not match:
        raise ValueError(f"grid must look like 256x512, got {text!r}")
    n_lat, n_lon = int(match.group(1)), int(match.group(2))
    if n_lat < 64 or n_lon < 128:
        raise ValueError("grid must be at least 64x128")
    return n_lat, n_lon


def _parse_tols(entries: list[str]) -> dict[str, float]:
    overrides: dict[str, float] = {}
    for entry in entries:
        name, sep, value = entry.partition("=")
        if not sep:
            raise ValueError(f"--tol expects NAME=VALUE, got {entry!r}")
        overrides[name] = float(value)
    return overrides


def _parse_qs(text: str) -> list[float]:
    try:
        qs = [float(part) for part in text.split(",") if part]
    except ValueError as exc:
        raise ValueError(f"bad exponent list {text!r}") from exc
    if not qs:
        raise ValueError("need at least one exponent q")
    return qs


def _load_domain(path: str) -> DomainSpec:
    with open(path) as handle:
        return domain_from_json(handle.read())


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--tol", action="append", default=[], metavar="NAME=VALUE",
                     help="override a named tolerance (repeatable)")
    sub.add_argument("--out", default=None, help="write the report here")
    sub.add_argument("--format", choices=("json", "csv"), default="json")
    sub.add_argument("--timestamps", action="store_true",
                     help="embed a UTC timestamp (breaks byte determinism)")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="capspectra",
        description="Eigenvalue and torsion comparison checks for spherical domains")
    sub = parser.add_subparsers(dest="command", required=True)

    cap = sub.add_parser("cap-eig", help="polar cap eigenpair")
    cap.add_argument("--n", type=int, required=True)
    cap.add_argument("--theta1", type=float, default=None)
    cap.add_argument("--lambda", dest="lam", type=float, default=None)
    cap.add_argument("--num", type=int, default=2049,
                     help="profile resolution")
    cap.add_argument("--profile-out", default=None,
                     help="write the (theta, value) profile as CSV")
    _add_common(cap)

    chiti = sub.add_parser("verify-chiti", help="reverse Holder pipeline")
    chiti.add_argument("domain", help="domain JSON path")
    chiti.add_argument("--p", type=float, default=1.0)
    chiti.add_argument("--q", default="2", help="comma-separated exponents")
    chiti.add_argument("--grid", default="256x512")
    _add_common(chiti)

    tors = sub.add_parser("verify-torsion", help="Saint-Venant pipeline")
    tors.add_argument("domain", help="domain JSON path")
    tors.add_argument("--grid", default="256x512")
    _add_common(tors)

    const = sub.add_parser("chiti-constant", help="flat comparison constant")
    const.add_argument("--p", type=float, required=True)
    const.add_argument("--q", type=float, required=True)
    const.add_argument("--lambda", dest="lam", type=float, required=True)
    const.add_argument("--n", type=int, required=True)
    _add_common(const)

    iso = sub.add_parser("isoperimetric", help="boundary length check")
    iso.add_argument("domain", help="domain JSON path")
    iso.add_argument("--grid", default="256x512")
    _add_common(iso)

    return parser


# ---------------------------------------------------------------------------
# Command implementations
# ---------------------------------------------------------------------------


def _cmd_cap_eig(args, tols) -> tuple[int, dict]:
    if (args.theta1 is None) == (args.lam is None):
        raise UsageError("give exactly one of --theta1 or --lambda")
    if args.theta1 is not None:
        pair = cap_eigenvalue(args.n, args.theta1, num=args.num)
    else:
        pair = cap_radius_from_eigenvalue(args.n, args.lam, num=args.num)
    if args.profile_out:
        _write_profile(pair, args.profile_out)
    inputs = {"n": args.n, "theta1": args.theta1, "lambda": args.lam,
              "num": args.num}
    extras = {"lambda": pair.lam, "theta1": pair.theta1,
              "profile_nodes": int(pair.profile.thetas.size)}
    doc = _document("cap-eig", inputs, tols, [], extras, args.timestamps)
    return EXIT_PASS, doc


def _write_profile(pair: CapEigenpair, path: str) -> None:
    lines = ["theta,value"]
    for t, v in zip(pair.profile.thetas, pair.profile.values):
        lines.append("%.12e,%.12e" % (t, v))
    with open(path, "w") as handle:
        handle.write("\n".join(lines) + "\n")


def _cmd_verify_chiti(args, tols) -> tuple[int, dict]:
    domain = _load_domain(args.domain)
    qs = _parse_qs(args.q)
    reports, extras = run_verify_chiti(domain, args.p, qs,
                                       _parse_grid(args.grid), tols)
    inputs = {"domain": domain.to_dict(), "p": args.p, "q": qs,
              "grid": list(_parse_grid(args.grid))}
    doc = _document("verify-chiti", inputs, tols, reports, extras,
                    args.timestamps)
    return (EXIT_PASS if doc["pass"] else EXIT_VIOLATION), doc


def _cmd_verify_torsion(args, tols) -> tuple[int, dict]:
    domain = _load_domain(args.domain)
    reports, extras = run_verify_torsion(domain, _parse_grid(args.grid), tols)
    inputs = {"domain": domain.to_dict(), "grid": list(_parse_grid(args.grid))}
    doc = _document("verify-torsion", inputs, tols, reports, extras,
                    args.timestamps)
    return (EXIT_PASS if doc["pass"] else EXIT_VIOLATION), doc


def _cmd_chiti_constant(args, tols) -> tuple[int, dict]:
    value = chiti_constant_euclidean(args.p, args.q, args.lam, args.n)
    inputs = {"p": args.p, "q": args.q, "lambda": args.lam, "n": args.n}
    doc = _document("chiti-constant", inputs, tols, [], {"value": value},
                    args.timestamps)
    return EXIT_PASS, doc


def _cmd_isoperimetric(args, tols) -> tuple[int, dict]:
    domain = _load_domain(args.domain)
    reports, extras = run_isoperimetric(domain, _parse_grid(args.grid), tols)
    inputs = {"domain": domain.to_dict(), "grid": list(_parse_grid(args.grid))}
    doc = _document("isoperimetric", inputs, tols, reports, extras,
                    args.timestamps)
    return (EXIT_PASS if doc["pass"] else EXIT_VIOLATION), doc


class UsageError(ValueError):
    pass


_COMMANDS = {
    "cap-eig": _cmd_cap_eig,
    "verify-chiti": _cmd_verify_chiti,
    "verify-torsion": _cmd_verify_torsion,
    "chiti-constant": _cmd_chiti_constant,
    "isoperimetric": _cmd_isoperimetric,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_PASS if exc.code in (0, None) else EXIT_USAGE
    try:
        tols = resolve_tolerances(_parse_tols(args.tol))
        if args.command in ("verify-chiti", "isoperimetric", "verify-torsion"):
            _parse_grid(args.grid)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        code, doc = _COMMANDS[args.command](args, tols)
        _write_output(doc, args)
        return code
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DomainSpecError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValueError, ArithmeticError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
