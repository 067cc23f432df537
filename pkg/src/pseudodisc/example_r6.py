"""The worked three-dimensional example.

The structure on ℂ³ (real dimension 6) has a single nonzero column,

    A(z)[1, 0] = 6 z1² z3 / (3 - z1² conj(z1)²),    A(z)[2, 0] = -z2,

and φ(ζ) = (ζ, 0, 0) is a J-holomorphic disc.  Its linearization reduces
to h1 = 0, (h3)_ζ̄ = h2 and the scalar equation

    (h3)_ζ̄ζ̄ = 6ζ² / (ζ²ζ̄² - 3) · h3,

which has the two particular solutions

    ψ1(ζ) = ζ̄ - ζ²ζ̄³/3,    ψ2(ζ) = Σ_k b_k ζ^{2k} ζ̄^{2k},

with b_0 = 1 and b_k / b_{k-1} = ((k-1)(2k-3) - 3) / (3(2k-1)k).  The
linearization of the integral form has a real two-dimensional kernel,
spanned by h = (0, 1 - ζ²ζ̄², ψ1) and i·h.

Examples
--------
>>> from fractions import Fraction
>>> s = b_coeffs(3)
>>> s.b[1:] == [Fraction(-1), Fraction(1, 9), Fraction(1, 135)]
True
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .basis import DiscMap, DiscretizationSpec, synthesize
from .calculus import cauchy_boundary, d_bar, get_calculus
from .dbar import map_coords
from .errors import CertificateError
from .norms import _dense_points
from .rightinv import kernel_dim
from .structure import ExampleR6Structure

__all__ = [
    "ExampleSeries",
    "b_coeffs",
    "psi_eval",
    "psi_map",
    "psi_tail_bound",
    "ode_residual",
    "gram_condition",
    "base_disc",
    "analytic_kernel",
    "KernelCertificate",
    "kernel_certificate",
    "perturbed_kernel",
]

PROBE_POINTS = tuple(0.6 * np.exp(2j * np.pi * m / 10) * (0.5 + 0.05 * m) for m in range(10))


@dataclass
class ExampleSeries:
    """Coefficients b_0..b_K with the boundary constants.

    ``lambda1 = 2 Σ k b_k`` and ``lambda2 = Σ b_k`` are partial sums; the
    error fields bound the omitted tail using 0 < b_k ≤ 3^{-k} (k ≥ 2).
    """

    K: int
    b: list
    lambda1: float
    lambda2: float
    lambda1_err: float
    lambda2_err: float

    @property
    def b_float(self):
        return np.array([float(x) for x in self.b])

    def to_dict(self):
        return {
            "K": self.K,
            "b": [[x.numerator, x.denominator] for x in self.b],
            "b_float": [float(x) for x in self.b],
            "lambda1": self.lambda1,
            "lambda2": self.lambda2,
            "lambda1_err": self.lambda1_err,
            "lambda2_err": self.lambda2_err,
        }


def _ratio(k):
    return Fraction((k - 1) * (2 * k - 3) - 3, 3 * (2 * k - 1) * k)


def _geometric_tail(q, K):
    """Σ_{k>K} q^k and Σ_{k>K} k q^k for 0 ≤ q < 1."""
    s0 = q ** (K + 1) / (1.0 - q)
    s1 = q ** (K + 1) * ((K + 1) - K * q) / (1.0 - q) ** 2
    return s0, s1


def b_coeffs(K):
    """Exact series coefficients b_0..b_K and the constants λ1, λ2."""
    if K < 0:
        raise ValueError("K must be non-negative")
    b = [Fraction(1)]
    for k in range(1, K + 1):
        b.append(b[-1] * _ratio(k))
    lam1 = 2 * sum(k * x for k, x in enumerate(b))
    lam2 = sum(b)
    # the bound b_k ≤ 3^{-k} is only used for k ≥ 2
    Kt = max(K, 1)
    s0, s1 = _geometric_tail(1.0 / 3.0, Kt)
    return ExampleSeries(K, b, float(lam1), float(lam2), 2.0 * s1, s0)


def psi_tail_bound(K, r=1.0):
    """Bound on |ψ2 - partial sum to K| at radius r ≤ 1."""
    s0, _ = _geometric_tail(r**4 / 3.0, max(K, 1))
    return s0


def psi_eval(which, zeta, K=20):
    """ψ1 in closed form, or the K-term partial sum of ψ2."""
    z = np.asarray(zeta, dtype=complex)
    zb = np.conj(z)
    if which == 1:
        return zb - z**2 * zb**3 / 3.0
    if which == 2:
        t = (z * zb) ** 2
        out = np.zeros_like(z)
        for x in reversed(b_coeffs(K).b_float):
            out = out * t + x
        return out
    raise ValueError("which must be 1 or 2")


def psi_map(which, K=20):
    """ψ1 or the ψ2 partial sum as a scalar DiscMap."""
    if which == 1:
        c = np.zeros((1, 3, 4), dtype=complex)
        c[0, 0, 1] = 1.0
        c[0, 2, 3] = -1.0 / 3.0
        return DiscMap(c)
    if which == 2:
        c = np.zeros((1, 2 * K + 1, 2 * K + 1), dtype=complex)
        for k, x in enumerate(b_coeffs(K).b_float):
            c[0, 2 * k, 2 * k] = x
        return DiscMap(c)
    raise ValueError("which must be 1 or 2")


def _sample_points(psi, spec):
    if spec is None:
        spec = DiscretizationSpec(max(psi.d, psi.deg_zbar, 4))
    return _dense_points(spec)


def ode_residual(psi, spec=None):
    """Sup of |ψ_ζ̄ζ̄ - 6ζ²/(ζ²ζ̄² - 3) ψ| over a dense grid of the closed disc.

    The ζ̄-derivatives are exact on coefficients; the grid includes the
    boundary circle.
    """
    if psi.n != 1:
        raise ValueError("ode_residual takes a scalar map")
    pts = _sample_points(psi, spec)
    lhs = synthesize(d_bar(d_bar(psi)), pts)[:, 0]
    val = synthesize(psi, pts)[:, 0]
    z2 = pts**2
    rhs = 6.0 * z2 / (z2 * np.conj(z2) - 3.0) * val
    return float(np.abs(lhs - rhs).max())


def gram_condition(K=20, spec=None):
    """Condition number of the real Gram matrix of ψ1, ψ2 on the grid."""
    spec = spec or DiscretizationSpec(12)
    w = spec.weights
    v = [psi_eval(1, spec.nodes), psi_eval(2, spec.nodes, K)]
    G = np.array([[np.sum(w * np.real(np.conj(a) * b)) for b in v] for a in v])
    return float(np.linalg.cond(G))


def base_disc(spec):
    """φ(ζ) = (ζ, 0, 0) in the map block of ``spec``."""
    sh = spec.map_shape
    z = DiscMap.zeros(1, sh)
    return DiscMap.stack([DiscMap.monomial(1, 0, sh), z, z])


def analytic_kernel(spec):
    """h = (0, 1 - ζ²ζ̄², ψ1); the kernel is span_ℝ{h, i h}."""
    sh = spec.map_shape
    h2 = DiscMap.monomial(0, 0, sh) - DiscMap.monomial(2, 2, sh)
    h3 = DiscMap.monomial(0, 1, sh) - DiscMap.monomial(2, 3, sh, coeff=1.0 / 3.0)
    return DiscMap.stack([DiscMap.zeros(1, sh), h2, h3])


@dataclass
class KernelCertificate:
    d: int
    dim: int
    expected: int
    spectrum: np.ndarray = field(repr=False)
    third_ratio: float
    cauchy_max: float
    first_component_max: float
    span_error: float
    cauchy_ok: bool
    first_component_ok: bool
    span_ok: bool

    @property
    def passed(self):
        return self.dim == self.expected and self.cauchy_ok and self.first_component_ok

    def to_dict(self):
        s = self.spectrum
        return {
            "d": self.d,
            "dim": self.dim,
            "expected": self.expected,
            "sigma_max": float(s[0]),
            "smallest": [float(x) for x in s[::-1][:4]],
            "third_ratio": self.third_ratio,
            "cauchy_max": self.cauchy_max,
            "first_component_max": self.first_component_max,
            "span_error": self.span_error,
            "cauchy_ok": self.cauchy_ok,
            "first_component_ok": self.first_component_ok,
            "span_ok": self.span_ok,
            "passed": self.passed,
        }


def kernel_certificate(d=12, threshold=1e-6, boundary_points=256, cauchy_tol=1e-6, first_tol=1e-8, span_tol=1e-8):
    """Numeric kernel count at (ζ, 0, 0) with boundary-integral cross-checks.

    The kernel vectors of the integral-form linearization must have vanishing
    boundary Cauchy integral (their holomorphic part is zero), a vanishing
    first component, and together span {h, i h} from :func:`analytic_kernel`.

    Raises
    ------
    CertificateError
        If the numeric kernel dimension differs from 2.
    """
    if d < 10:
        raise ValueError("kernel_certificate needs d ≥ 10")
    spec = DiscretizationSpec(d)
    rep = kernel_dim(ExampleR6Structure(), base_disc(spec), threshold, spec)
    s = rep.spectrum
    third = float(s[-3] / s[0])
    if rep.dim != 2:
        raise CertificateError(f"numeric kernel dimension {rep.dim} at d={d}, expected 2")

    X = get_calculus(spec).X
    vecs = rep.kernel_maps_coords()
    circle = np.exp(2j * np.pi * np.arange(boundary_points) / boundary_points)
    cauchy, first = 0.0, 0.0
    for v in vecs:
        bvals = X.values_at(v, circle).T
        for z in PROBE_POINTS:
            cauchy = max(cauchy, float(np.abs(cauchy_boundary(bvals, z)).max() / (2.0 * np.pi)))
        first = max(first, float(np.abs(X.values(v[0])).max()))

    # distance of h and i h from the numeric kernel span, in modal coordinates
    h = map_coords(analytic_kernel(spec), spec).ravel()
    B = np.array([np.concatenate([v.ravel().real, v.ravel().imag]) for v in vecs]).T
    span = 0.0
    for t in (h, 1j * h):
        tr = np.concatenate([t.real, t.imag])
        c, *_ = np.linalg.lstsq(B, tr, rcond=None)
        span = max(span, float(np.linalg.norm(B @ c - tr) / np.linalg.norm(tr)))

    return KernelCertificate(
        d=d, dim=rep.dim, expected=2, spectrum=s, third_ratio=third, cauchy_max=cauchy,
        first_component_max=first, span_error=span, cauchy_ok=cauchy < cauchy_tol,
        first_component_ok=first < first_tol, span_ok=span < span_tol,
    )


def perturbed_kernel(d=12, coeff31=-1.1, scale21=1.0, threshold=1e-6):
    """Kernel report of the example with modified structure constants."""
    spec = DiscretizationSpec(d)
    return kernel_dim(ExampleR6Structure(scale21, coeff31), base_disc(spec), threshold, spec)
