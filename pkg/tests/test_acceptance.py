"""Acceptance suite.

Each test checks one criterion at its stated tolerance and records a single
``PASS`` / ``FAIL`` line with the measured numbers and the runtime.  The lines
are printed as the test runs (visible with ``-s``) and again in the terminal
summary.
"""

import time
from fractions import Fraction

import numpy as np
import pytest

from pseudodisc.basis import DiscMap, DiscretizationSpec, random_map, synthesize
from pseudodisc.calculus import cauchy_green, cauchy_green_quadrature, d_bar, get_calculus
from pseudodisc.cli import run
from pseudodisc.dbar import linearize
from pseudodisc.example_r6 import (
    analytic_kernel,
    b_coeffs,
    base_disc,
    kernel_certificate,
    ode_residual,
    psi_map,
)
from pseudodisc.gluing import GluingConfig, HalfDiscMap, glue, make_cutoff, preglue
from pseudodisc.newton import NewtonConfig, solve
from pseudodisc.norms import NormKind, lp_norm_values, norm
from pseudodisc.rightinv import right_inverse, substitution
from pseudodisc.structure import ExampleR6Structure, StandardStructure

from conftest import ALPHA_ZBAR, mono, r6_disc

ACCEPTANCE_LINES = []


def _record(num, title, ok, t0, limit, detail):
    dt = time.perf_counter() - t0
    ok = bool(ok and dt < limit)
    line = f"criterion {num} [{'PASS' if ok else 'FAIL'}] {title}: {detail}; {dt:.1f} s (limit {limit:.0f} s)"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


# -- 1 -------------------------------------------------------------------------


def test_criterion_1_cauchy_green():
    t0 = time.perf_counter()
    d = 14
    worst = 0.0
    for j in range(d + 1):
        for k in range(d + 1):
            m = DiscMap.monomial(j, k, (d + 1, d + 1))
            diff = d_bar(cauchy_green(m)).resized((d + 1, d + 2)) - m.resized((d + 1, d + 2))
            worst = max(worst, float(np.abs(diff.coeffs).max()))

    rng = np.random.default_rng(11)
    f = random_map(rng, 1, (5, 5))
    pts = 0.85 * np.sqrt(rng.uniform(0, 1, 10)) * np.exp(2j * np.pi * rng.uniform(0, 1, 10))
    exact = synthesize(cauchy_green(f), pts)[:, 0]
    quad = np.ravel(cauchy_green_quadrature(lambda z: synthesize(f, np.ravel(z))[:, 0].reshape(np.shape(z)), pts))
    rel = float(np.max(np.abs(exact - quad) / np.abs(quad)))

    ok = _record(
        1, "Cauchy-Green identity", worst <= 1e-14 and rel < 1e-6, t0, 30,
        f"max coeff error of dbar(T m) - m up to d={d}: {worst:.1e}; quadrature rel err {rel:.1e} (< 1e-6)",
    )
    assert ok


# -- 2 -------------------------------------------------------------------------


def test_criterion_2_standard_approximation():
    t0 = time.perf_counter()
    spec = DiscretizationSpec(8)
    sh = spec.map_shape
    phi = mono(1, 0, sh) + mono(0, 2, sh, coeff=0.05)
    rep = solve(StandardStructure(1), phi, spec=spec)
    res_u = norm(d_bar(rep.u), NormKind("Lp", 4.0), spec)
    dist = norm(rep.u - phi, NormKind("W1p", 4.0), spec)
    bound = 2.0 * rep.c0 * rep.initial_residual
    ok = _record(
        2, "standard-case approximation",
        rep.converged and rep.iterations == 1 and res_u < 1e-10 and dist <= bound, t0, 10,
        f"iterations {rep.iterations}; |F(u)|_L4 {res_u:.1e} (< 1e-10); |u - phi|_W14 {dist:.4f} <= 2 c0 |F(phi)| {bound:.4f}",
    )
    assert ok


# -- 3 -------------------------------------------------------------------------


def test_criterion_3_kernel_dimension():
    t0 = time.perf_counter()
    parts, ok = [], True
    for d in (12, 14, 16):
        cert = kernel_certificate(d)
        s = cert.spectrum
        small = int(np.sum(s < 1e-6 * s[0]))
        good = small == 2 and cert.third_ratio > 1e-3 and cert.passed
        ok = ok and good
        parts.append(f"d={d}: {small} below 1e-6, third {cert.third_ratio:.3f}, cauchy {cert.cauchy_max:.0e}")
    ok = _record(3, "kernel dimension of the example = 2", ok, t0, 120, "; ".join(parts))
    assert ok


# -- 4 -------------------------------------------------------------------------


def test_criterion_4_series():
    t0 = time.perf_counter()
    b = b_coeffs(20).b
    exact = b[1:4] == [Fraction(-1), Fraction(1, 9), Fraction(1, 135)]
    bounds = all(0 < b[k] <= Fraction(1, 3**k) for k in range(2, 21))
    r1 = ode_residual(psi_map(1))
    r2 = ode_residual(psi_map(2, 20))
    ok = _record(
        4, "example series", exact and bounds and r1 < 1e-12 and r2 < 1e-9, t0, 5,
        f"b1..b3 exact: {exact}; 0 < b_k <= 3^-k for 2..20: {bounds}; ODE residual psi1 {r1:.1e}, psi2 {r2:.1e}",
    )
    assert ok


# -- 5 -------------------------------------------------------------------------


def _identity_errors(structure, phi, spec, seed):
    Q = right_inverse(structure, phi, spec, norm_probes=0, check=False)
    L = linearize(structure, phi, spec)
    Y = get_calculus(spec).Y
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(5):
        yf = Y.from_monomial(random_map(rng, phi.n, spec.field_shape).coeffs)
        back = L.apply_coords(Q.apply_coords(yf))
        out.append(lp_norm_values(Y.values(back - yf), spec, 4.0) / lp_norm_values(Y.values(yf), spec, 4.0))
    return max(out)


def test_criterion_5_right_inverse():
    t0 = time.perf_counter()
    s8, s12 = DiscretizationSpec(8), DiscretizationSpec(12)
    near = mono(1, 0, s8.map_shape) + mono(0, 2, s8.map_shape, coeff=0.05)
    cases = [
        ("standard", StandardStructure(1), near, s8),
        ("A=0.1 conj(z)", ALPHA_ZBAR, near, s8),
        ("example-r6", ExampleR6Structure(), base_disc(s12), s12),
    ]
    errs = {name: _identity_errors(S, phi, spec, seed) for seed, (name, S, phi, spec) in enumerate(cases)}
    sub = substitution(ALPHA_ZBAR, near, s8)
    kerr = max(sub.identity_error["K_minus_I"], sub.identity_error["K0"])
    ok = all(e <= 1e-6 for e in errs.values()) and kerr <= 1e-8 and not sub.trivial
    detail = ", ".join(f"{k} {v:.1e}" for k, v in errs.items())
    ok = _record(5, "right-inverse identity", ok, t0, 120, f"rel L4 errors {detail}; max |K - I|, |K0| {kerr:.1e}")
    assert ok


# -- 6 -------------------------------------------------------------------------


def test_criterion_6_newton_bound():
    t0 = time.perf_counter()
    spec = DiscretizationSpec(8)
    sh = spec.map_shape
    rng = np.random.default_rng(2024)
    converged, worst_ratio, worst_contr, violations = 0, 0.0, 0.0, 0
    for trial in range(100):
        rho = (1e-2, 1e-3)[trial % 2]
        c = np.zeros((1, *sh), dtype=complex)
        # holomorphic base ζ + small random ζ², ζ³ terms
        c[0, 1, 0] = 1.0
        c[0, 2:4, 0] = 0.1 * (rng.standard_normal(2) + 1j * rng.standard_normal(2)) / np.sqrt(2)
        # ρ times a random polynomial in conj(ζ) of degree ≤ 3
        c[0, 0, 1:4] += rho * (rng.standard_normal(3) + 1j * rng.standard_normal(3)) / np.sqrt(2)
        rep = solve(ALPHA_ZBAR, DiscMap(c), NewtonConfig(seed=trial), spec)
        if not rep.converged:
            continue
        converged += 1
        ratio = rep.step_norm / (2.0 * rep.c0 * rep.initial_residual)
        contr = max(rep.contraction_ratios, default=0.0)
        worst_ratio, worst_contr = max(worst_ratio, ratio), max(worst_contr, contr)
        violations += ratio > 1.01 or contr > 0.75
    ok = _record(
        6, "Newton bound, 100 random discs", converged >= 95 and violations == 0, t0, 600,
        f"{converged}/100 converged; max |u - phi| / (2 c0 |F(phi)|) {worst_ratio:.3f} (<= 1.01); "
        f"max contraction {worst_contr:.1e} (<= 0.75); violations {violations}",
    )
    assert ok


# -- 7 -------------------------------------------------------------------------


def test_criterion_7_gluing():
    t0 = time.perf_counter()
    eps, tau = 0.05, 0.3
    s8 = DiscretizationSpec(8)
    u1 = mono(1, 0, s8.map_shape) + mono(2, 0, s8.map_shape, coeff=0.2)
    u2 = u1 + mono(0, 0, s8.map_shape, coeff=1e-3)
    h1, h2 = HalfDiscMap.from_map(u1, 1, s8, tau), HalfDiscMap.from_map(u2, 2, s8, tau)
    pg = preglue(StandardStructure(1), h1, h2, make_cutoff(tau))
    std = glue(StandardStructure(1), h1, h2, GluingConfig(tau=tau, eps=eps))

    S = ExampleR6Structure()
    s12 = DiscretizationSpec(12)
    base = r6_disc(s12, mono(0, 1, s12.map_shape, coeff=1e-3))
    v1 = solve(S, base, spec=s12).u
    v2 = solve(S, base + analytic_kernel(s12) * 1e-3, spec=s12).u
    r6 = glue(S, HalfDiscMap.from_map(v1, 1, s12, tau), HalfDiscMap.from_map(v2, 2, s12, tau), GluingConfig(tau=tau, eps=eps))

    ok = (
        std.success and max(std.distances) < eps and pg.outside_residual <= 1e-8
        and r6.success and r6.newton.converged and max(r6.distances) < eps
    )
    ok = _record(
        7, "gluing", ok, t0, 300,
        f"standard distances {max(std.distances):.2e} (< {eps}); residual outside overlap {pg.outside_residual:.0e}; "
        f"r6 converged {r6.newton.converged}, distances {max(r6.distances):.2e}, flags {r6.flags}",
    )
    assert ok


# -- 8 -------------------------------------------------------------------------

R6_U1 = "zeta; 0.001*conj(zeta); 0"
R6_U2 = "zeta; 0.001*conj(zeta) + 0.001*(1 - zeta^2*conj(zeta)^2); 0.001*(conj(zeta) - zeta^2*conj(zeta)^3/3)"

DETERMINISM_RUNS = [
    ("2", ["solve", "--initial", "zeta + 0.05*conj(zeta)^2", "--seed", "3"]),
    ("3", ["kernel", "--structure", "builtin:example_r6", "--initial", "zeta; 0; 0", "--degree", "12"]),
    ("3", ["example-r6", "--degree", "12", "--seed", "3"]),
    ("7", ["glue", "--u1", "zeta + 0.2*zeta^2", "--u2", "zeta + 0.2*zeta^2 + 0.001", "--seed", "3"]),
    ("7", ["glue", "--structure", "builtin:example_r6", "--u1", R6_U1, "--u2", R6_U2, "--correct", "--degree", "12", "--seed", "3"]),
]


def test_criterion_8_determinism():
    t0 = time.perf_counter()
    parts, ok = [], True
    for crit, argv in DETERMINISM_RUNS:
        a, b = run(argv), run(argv)
        same = a[2] == b[2] and a[0] == 0
        ok = ok and same
        parts.append(f"{argv[0]} (criterion {crit}): {'identical' if same else 'DIFFERENT'}, exit {a[0]}")
    ok = _record(8, "determinism", ok, t0, 600, "; ".join(parts))
    assert ok


@pytest.fixture(scope="module", autouse=True)
def _publish():
    yield
    import conftest

    conftest.ACCEPTANCE_SUMMARY.extend(ACCEPTANCE_LINES)
