"""Command-line interface.

Subcommands ``solve``, ``glue``, ``kernel``, ``example-r6``, ``cg-verify``
and ``norms`` each print a JSON report (sorted keys, no timing data, so
identical inputs give byte-identical output) and optionally write CSV
series for plotting.

Exit codes: 0 success, 2 invalid input, 3 numerical failure (the partial
report is still written).

Discs are given as DiscMap JSON files or as inline expressions in
``zeta``, ``conj(...)``, complex literals, ``+ - *``, integer powers
(``**`` or ``^``) and division by constants; components are separated by
``;``, e.g. ``"zeta; 0.001*conj(zeta); 0"``.
"""

from __future__ import annotations

import argparse
import ast
import csv
import json
import math
import os
import sys
from pathlib import Path

import numpy as np
from scipy.signal import convolve2d
from threadpoolctl import threadpool_limits

from . import __version__
from .basis import DiscMap, DiscretizationSpec, random_map, synthesize
from .calculus import cauchy_green, cauchy_green_quadrature, d_bar, get_calculus
from .errors import (
    AdmissibilityViolation,
    CertificateError,
    ChartError,
    CoverageError,
    DiscretizationError,
    DivergenceError,
    DomainError,
    NotAStructure,
    PrecondError,
    StabilizationError,
)
from .example_r6 import b_coeffs, kernel_certificate, ode_residual, perturbed_kernel, psi_map
from .gluing import GluingConfig, HalfDiscMap, glue
from .newton import NewtonConfig, solve
from .norms import NormKind, norm
from .rightinv import kernel_dim
from .structure import ExampleR6Structure, StandardStructure, load_structure

__all__ = ["main", "parse_expression", "parse_disc", "ExpressionError"]

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC = 0, 2, 3

_VALIDATION = (ValueError, OSError, NotAStructure, ChartError, AdmissibilityViolation, json.JSONDecodeError)
_NUMERIC = (
    DivergenceError,
    StabilizationError,
    CertificateError,
    DiscretizationError,
    PrecondError,
    CoverageError,
    DomainError,
    np.linalg.LinAlgError,
)


class ExpressionError(ValueError):
    pass


class NumericalFailure(Exception):
    """Raised by a command that produced a report but did not succeed."""

    def __init__(self, message, result):
        super().__init__(message)
        self.result = result


# -- inline expressions -------------------------------------------------------------


def _padd(a, b):
    J, K = max(a.shape[0], b.shape[0]), max(a.shape[1], b.shape[1])
    out = np.zeros((J, K), dtype=complex)
    out[: a.shape[0], : a.shape[1]] += a
    out[: b.shape[0], : b.shape[1]] += b
    return out


def _const(c):
    return np.array([[complex(c)]])


def _eval(node):
    if isinstance(node, ast.Expression):
        return _eval(node.body)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float, complex)) and not isinstance(node.value, bool):
        return _const(node.value)
    if isinstance(node, ast.Name):
        if node.id in ("zeta", "z"):
            return np.array([[0.0], [1.0]], dtype=complex)
        if node.id == "i":
            return _const(1j)
        raise ExpressionError(f"unknown name {node.id!r}")
    if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
        v = _eval(node.operand)
        return -v if isinstance(node.op, ast.USub) else v
    if isinstance(node, ast.Call):
        if not (isinstance(node.func, ast.Name) and node.func.id == "conj") or len(node.args) != 1 or node.keywords:
            raise ExpressionError("the only function is conj(expr)")
        return np.conj(_eval(node.args[0])).T
    if isinstance(node, ast.BinOp):
        a, b = _eval(node.left), _eval(node.right)
        if isinstance(node.op, ast.Add):
            return _padd(a, b)
        if isinstance(node.op, ast.Sub):
            return _padd(a, -b)
        if isinstance(node.op, ast.Mult):
            return convolve2d(a, b)
        if isinstance(node.op, ast.Div):
            if b.shape != (1, 1) or b[0, 0] == 0:
                raise ExpressionError("division only by nonzero constants")
            return a / b[0, 0]
        if isinstance(node.op, ast.Pow):
            if b.shape != (1, 1) or b[0, 0].imag != 0 or b[0, 0].real != int(b[0, 0].real) or b[0, 0].real < 0:
                raise ExpressionError("powers must be non-negative integers")
            out = _const(1.0)
            for _ in range(int(b[0, 0].real)):
                out = convolve2d(out, a)
            return out
    raise ExpressionError(f"unsupported syntax: {ast.dump(node)[:60]}")


def parse_expression(text):
    """Coefficients ``c[j, k]`` of ζ^j conj(ζ)^k for a scalar expression."""
    try:
        tree = ast.parse(text.strip().replace("^", "**"), mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(f"cannot parse {text!r}: {exc.msg}") from None
    return _eval(tree)


def parse_disc(text):
    """DiscMap from ``;``-separated component expressions."""
    comps = [parse_expression(t) for t in text.split(";")]
    J = max(c.shape[0] for c in comps)
    K = max(c.shape[1] for c in comps)
    out = np.zeros((len(comps), J, K), dtype=complex)
    for a, c in enumerate(comps):
        out[a, : c.shape[0], : c.shape[1]] = c
    return DiscMap(out)


def load_disc(arg):
    p = Path(arg)
    if arg.endswith(".json") or p.is_file():
        if not p.is_file():
            raise FileNotFoundError(f"disc file {arg!r} not found")
        return DiscMap.from_json(p.read_text())
    return parse_disc(arg)


def resolve_structure(arg, n):
    if arg in ("builtin:std", "builtin:standard"):
        return StandardStructure(n)
    if arg in ("builtin:example_r6", "builtin:example-r6"):
        return ExampleR6Structure()
    p = Path(arg)
    if not p.is_file():
        raise FileNotFoundError(f"structure file {arg!r} not found")
    return load_structure(p.read_text())


def _fit(u, spec):
    """``u`` resized to the map block of ``spec``; rejects truncation."""
    J, K = spec.map_shape
    if np.any(u.coeffs[:, J:, :]) or np.any(u.coeffs[:, :, K:]):
        raise ValueError(f"disc of shape {u.shape} does not fit degree {spec.d} (block {spec.map_shape})")
    return u.resized(spec.map_shape)


def _spec(args, *maps):
    if args.degree is not None:
        return DiscretizationSpec(args.degree)
    d = max(max(m.d, m.deg_zbar - 1) for m in maps)
    return DiscretizationSpec(max(d, 8))


def _check_structure(structure, u):
    if structure.n != u.n:
        raise ValueError(f"structure has n={structure.n} but the disc has {u.n} components")


# -- output -------------------------------------------------------------------------


def _clean(x):
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer, int)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    if isinstance(x, complex):
        return [x.real, x.imag]
    return x


def dumps(obj):
    return json.dumps(_clean(obj), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def _write_csv(args, name, header, rows):
    if not args.csv_dir:
        return
    d = Path(args.csv_dir)
    d.mkdir(parents=True, exist_ok=True)
    with open(d / name, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])


# -- commands -----------------------------------------------------------------------


def _newton_cfg(args):
    return NewtonConfig(p=args.p, tol=args.tol, maxiter=args.maxiter, seed=args.seed)


def cmd_solve(args):
    phi = load_disc(args.initial)
    spec = _spec(args, phi)
    phi = _fit(phi, spec)
    structure = resolve_structure(args.structure, phi.n)
    _check_structure(structure, phi)
    try:
        rep = solve(structure, phi, _newton_cfg(args), spec)
    except DivergenceError as exc:
        raise NumericalFailure(str(exc), {"newton": exc.report.to_dict()}) from exc
    _write_csv(args, "residuals.csv", ["iteration", "residual"], enumerate(rep.residuals))
    res = {"degree": spec.d, "newton": rep.to_dict()}
    if not rep.converged:
        raise NumericalFailure(rep.message, res)
    return res


def cmd_glue(args):
    u1, u2 = load_disc(args.u1), load_disc(args.u2)
    spec = _spec(args, u1, u2)
    u1, u2 = _fit(u1, spec), _fit(u2, spec)
    if u1.n != u2.n:
        raise ValueError("the two discs have different component counts")
    structure = resolve_structure(args.structure, u1.n)
    _check_structure(structure, u1)
    cfg_n = _newton_cfg(args)
    pre = {}
    if args.correct:
        fixed = []
        for name, u in (("u1", u1), ("u2", u2)):
            try:
                r = solve(structure, u, cfg_n, spec)
            except DivergenceError as exc:
                raise NumericalFailure(f"correcting {name}: {exc}", {name: exc.report.to_dict(False)}) from exc
            pre[name] = r.to_dict(include_map=False)
            if not r.converged:
                raise NumericalFailure(f"correcting {name}: {r.message}", pre)
            fixed.append(r.u)
        u1, u2 = fixed
    cfg = GluingConfig(tau=args.tau, eps=args.eps, newton=cfg_n)
    h1 = HalfDiscMap.from_map(u1, 1, spec, args.tau)
    h2 = HalfDiscMap.from_map(u2, 2, spec, args.tau)
    try:
        rep = glue(structure, h1, h2, cfg)
    except DivergenceError as exc:
        raise NumericalFailure(str(exc), {"halves": pre, "newton": exc.report.to_dict(False)}) from exc
    _write_csv(args, "residuals.csv", ["iteration", "residual"], enumerate(rep.newton.residuals))
    res = {"degree": spec.d, "halves": pre, "glue": rep.to_dict()}
    if not rep.success:
        raise NumericalFailure("gluing did not reach the requested accuracy", res)
    return res


def _spectrum_rows(s):
    s = np.asarray(s)
    return [(i, float(v), float(v / s[0])) for i, v in enumerate(s)]


def cmd_kernel(args):
    phi = load_disc(args.initial)
    spec = _spec(args, phi)
    phi = _fit(phi, spec)
    structure = resolve_structure(args.structure, phi.n)
    _check_structure(structure, phi)
    rep = kernel_dim(structure, phi, args.threshold, spec)
    s = rep.spectrum
    _write_csv(args, "singular_values.csv", ["index", "sigma", "sigma_rel"], _spectrum_rows(s))
    return {
        "degree": spec.d,
        "kernel_dim": rep.dim,
        "regular": rep.regular,
        "threshold": rep.threshold,
        "sigma_max": float(s[0]),
        "smallest": [float(x) for x in s[::-1][: rep.dim + 2]],
        "gap": rep.gap(),
    }


def cmd_example_r6(args):
    series = b_coeffs(args.K)
    _write_csv(
        args, "b_coeffs.csv", ["k", "numerator", "denominator", "value", "bound_3_pow_minus_k"],
        [(k, b.numerator, b.denominator, float(b), 3.0**-k) for k, b in enumerate(series.b)],
    )
    _write_csv(
        args, "lambdas.csv", ["name", "value", "tail_bound"],
        [("lambda1", series.lambda1, series.lambda1_err), ("lambda2", series.lambda2, series.lambda2_err)],
    )
    ode = {"psi1": ode_residual(psi_map(1)), "psi2": ode_residual(psi_map(2, args.K))}
    res = {"series": series.to_dict(), "ode_residual": ode}
    try:
        cert = kernel_certificate(args.degree if args.degree is not None else 12, args.threshold)
    except CertificateError as exc:
        raise NumericalFailure(str(exc), res) from exc
    _write_csv(args, "singular_values.csv", ["index", "sigma", "sigma_rel"], _spectrum_rows(cert.spectrum))
    res["certificate"] = cert.to_dict()
    res["kernel_dim"] = cert.dim
    pert = perturbed_kernel(cert.d, coeff31=-1.1)
    res["perturbed_coeff31_-1.1"] = {"kernel_dim": pert.dim, "smallest_rel": [float(x / pert.spectrum[0]) for x in pert.spectrum[::-1][:4]]}
    if not cert.passed:
        raise NumericalFailure("kernel certificate checks failed", res)
    return res


def cmd_cg_verify(args):
    d = args.degree if args.degree is not None else 14
    # ∂̄ T = Id on every monomial of the field block
    worst = 0.0
    for j in range(d + 1):
        for k in range(d + 1):
            m = DiscMap.monomial(j, k, (d + 1, d + 1))
            diff = d_bar(cauchy_green(m)).resized((d + 1, d + 2)) - m.resized((d + 1, d + 2))
            worst = max(worst, float(np.abs(diff.coeffs).max()))
    rng = np.random.default_rng(args.seed)
    f = random_map(rng, 1, (min(d, 5) + 1, min(d, 5) + 1), scale=1.0)
    Tf = cauchy_green(f)
    pts = 0.85 * np.sqrt(rng.uniform(0, 1, args.points)) * np.exp(2j * np.pi * rng.uniform(0, 1, args.points))

    def fval(z):
        return synthesize(f, np.ravel(z))[:, 0].reshape(np.shape(z))

    exact = synthesize(Tf, pts)[:, 0]
    quad = np.ravel(cauchy_green_quadrature(fval, pts))
    rel = np.abs(exact - quad) / np.maximum(np.abs(quad), 1e-300)
    _write_csv(
        args, "cg_points.csv", ["re", "im", "table_re", "table_im", "quad_re", "quad_im", "rel_err"],
        [(z.real, z.imag, a.real, a.imag, b.real, b.imag, r) for z, a, b, r in zip(pts, exact, quad, rel)],
    )
    C = get_calculus(DiscretizationSpec(d))
    modal = float(np.abs(C.dbar @ C.T - np.eye(C.Y.size)).max())
    res = {
        "degree": d,
        "dbar_T_coeff_error": worst,
        "dbar_T_modal_error": modal,
        "points": args.points,
        "max_rel_err": float(rel.max()),
        "passed": bool(worst < 1e-12 and rel.max() < 1e-6),
    }
    if not res["passed"]:
        raise NumericalFailure("Cauchy-Green cross-check failed", res)
    return res


def cmd_norms(args):
    u = load_disc(args.map)
    spec = _spec(args, u)
    rows, table = [], {}
    for region in ("full", "half1", "half2", "overlap"):
        for tag in ("Lp", "W1p", "W2p", "Sup", "Holder"):
            v = norm(u, NormKind(tag, args.p, region, args.alpha, args.tau), spec)
            table[f"{tag}/{region}"] = v
            rows.append((tag, region, v))
    _write_csv(args, "norms.csv", ["norm", "region", "value"], rows)
    return {"degree": spec.d, "norms": table}


# -- entry point --------------------------------------------------------------------


def _common(p, degree=True):
    if degree:
        p.add_argument("--degree", type=int, default=None, help="polynomial degree d of the discretization")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--report", default=None, help="write the JSON report here as well as to stdout")
    p.add_argument("--csv-dir", default=None, help="directory for CSV series")


def _newton_opts(p):
    p.add_argument("--p", type=float, default=4.0)
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--maxiter", type=int, default=50)


def build_parser():
    ap = argparse.ArgumentParser(prog="pseudodisc", description="J-holomorphic discs: solve, glue, kernels.")
    ap.add_argument("--version", action="version", version=f"pseudodisc {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="Newton-Picard correction of an initial disc")
    p.add_argument("--structure", default="builtin:std")
    p.add_argument("--initial", required=True, help="DiscMap JSON file or inline expression")
    _newton_opts(p)
    _common(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("glue", help="glue two discs along the overlap |Re ζ| < τ")
    p.add_argument("--structure", default="builtin:std")
    p.add_argument("--u1", required=True)
    p.add_argument("--u2", required=True)
    p.add_argument("--tau", type=float, default=0.3)
    p.add_argument("--eps", type=float, default=0.05)
    p.add_argument("--correct", action="store_true", help="Newton-correct both discs before gluing")
    _newton_opts(p)
    _common(p)
    p.set_defaults(func=cmd_glue)

    p = sub.add_parser("kernel", help="kernel spectrum of the integral-form linearization")
    p.add_argument("--structure", default="builtin:std")
    p.add_argument("--initial", required=True)
    p.add_argument("--threshold", type=float, default=1e-6)
    _common(p)
    p.set_defaults(func=cmd_kernel)

    p = sub.add_parser("example-r6", help="series, ODE residuals and kernel certificate of the example")
    p.add_argument("--K", type=int, default=20)
    p.add_argument("--threshold", type=float, default=1e-6)
    _common(p)
    p.set_defaults(func=cmd_example_r6)

    p = sub.add_parser("cg-verify", help="Cauchy-Green table against direct quadrature")
    p.add_argument("--points", type=int, default=10)
    _common(p)
    p.set_defaults(func=cmd_cg_verify)

    p = sub.add_parser("norms", help="norm table of a disc")
    p.add_argument("--map", required=True)
    p.add_argument("--p", type=float, default=4.0)
    p.add_argument("--tau", type=float, default=0.3)
    p.add_argument("--alpha", type=float, default=0.5)
    _common(p)
    p.set_defaults(func=cmd_norms)
    return ap


def _threads():
    v = os.environ.get("PSEUDODISC_THREADS")
    if not v:
        return None
    try:
        n = int(v)
    except ValueError:
        raise ValueError(f"PSEUDODISC_THREADS must be an integer, got {v!r}") from None
    if n < 1:
        raise ValueError("PSEUDODISC_THREADS must be at least 1")
    return n


def run(argv=None):
    """Execute a command line; returns ``(exit_code, report, report_text)``."""
    args = build_parser().parse_args(argv)
    config = {k: v for k, v in vars(args).items() if k not in ("func", "report", "csv_dir")}
    report = {"command": args.command, "config": config, "version": __version__}
    try:
        n = _threads()
        with threadpool_limits(limits=n):
            report["result"] = args.func(args)
        report["status"] = "ok"
        code = EXIT_OK
    except NumericalFailure as exc:
        report.update(status="numerical_failure", error=str(exc), result=exc.result)
        code = EXIT_NUMERIC
    except _VALIDATION as exc:
        report.update(status="invalid_input", error=f"{type(exc).__name__}: {exc}")
        code = EXIT_INVALID
    except _NUMERIC as exc:
        report.update(status="numerical_failure", error=f"{type(exc).__name__}: {exc}")
        code = EXIT_NUMERIC
    text = dumps(report)
    if args.report:
        Path(args.report).write_text(text)
    return code, report, text


def main(argv=None):
    code, _, text = run(argv)
    sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
