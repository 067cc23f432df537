"""Discretization of the unit disc.

Maps Δ → ℂⁿ are stored as truncated bi-monomial series

    u(ζ) = Σ_{j,k} c[a, j, k] ζ^j conj(ζ)^k

in a :class:`DiscMap`.  Grid work (quadrature, pseudo-spectral products) uses a
tensor grid of Gauss-Legendre nodes in s = r² and uniform angles, so that the
area element r dr dθ = ds dθ / 2 is integrated exactly for polynomials.

Two coefficient blocks appear throughout:

* the *field* block of degree d, shape ``(d+1, d+1)``;
* the *map* block, shape ``(d+1, d+2)``, which is closed under the
  Cauchy-Green operator applied to fields.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.signal import convolve2d

from .errors import DiscretizationError, DomainError

__all__ = [
    "DiscretizationSpec",
    "DiscMap",
    "synthesize",
    "analyze",
    "multiply",
    "l2_norm_exact",
    "random_map",
    "grid_values",
]


@dataclass(frozen=True)
class DiscretizationSpec:
    """Degree and quadrature grid.

    Parameters
    ----------
    d : int
        Maximal exponent of ζ (and of conj(ζ) for fields).
    nr : int, optional
        Radial Gauss nodes, default ``d + 4``.
    ntheta : int, optional
        Uniform angular nodes, default ``4 d + 8``.
    """

    d: int = 12
    nr: int = 0
    ntheta: int = 0

    def __post_init__(self):
        if self.d < 0:
            raise DiscretizationError("degree must be non-negative")
        if not self.nr:
            object.__setattr__(self, "nr", self.d + 4)
        if not self.ntheta:
            object.__setattr__(self, "ntheta", 4 * self.d + 8)
        if self.ntheta < 2 * (2 * self.d + 1):
            raise DiscretizationError(
                f"ntheta={self.ntheta} < 2(2d+1)={2 * (2 * self.d + 1)}: quadratic terms alias"
            )
        if self.nr < self.d + 1:
            raise DiscretizationError(f"nr={self.nr} < d+1={self.d + 1}")

    @property
    def field_shape(self):
        return (self.d + 1, self.d + 1)

    @property
    def map_shape(self):
        return (self.d + 1, self.d + 2)

    @cached_property
    def _radial(self):
        x, w = np.polynomial.legendre.leggauss(self.nr)
        s = 0.5 * (x + 1.0)
        ws = 0.5 * w
        return s, ws

    @property
    def s(self):
        return self._radial[0]

    @property
    def ws(self):
        """Gauss weights in s = r² on (0, 1); they sum to one."""
        return self._radial[1]

    @cached_property
    def r(self):
        return np.sqrt(self.s)

    @cached_property
    def theta(self):
        return 2.0 * np.pi * np.arange(self.ntheta) / self.ntheta

    @cached_property
    def nodes(self):
        """Grid nodes, flattened radial-major: index ``ir * ntheta + m``."""
        z = self.r[:, None] * np.exp(1j * self.theta[None, :])
        z.setflags(write=False)
        return z.ravel()

    @cached_property
    def weights(self):
        w = np.repeat(np.pi * self.ws / self.ntheta, self.ntheta)
        w.setflags(write=False)
        return w

    @property
    def npoints(self):
        return self.nr * self.ntheta

    @property
    def quadrature(self):
        return list(zip(self.nodes.tolist(), self.weights.tolist()))

    def integrate(self, values):
        """Quadrature of grid samples over Δ (last axis indexes nodes)."""
        return np.asarray(values) @ self.weights


@dataclass(frozen=True, eq=False)
class DiscMap:
    """Coefficient tensor ``coeffs[a, j, k]`` of Σ c ζ^j conj(ζ)^k.

    ``d`` is the ζ-degree; the conj(ζ)-degree is ``coeffs.shape[2] - 1`` and
    may exceed it by one for maps produced by the Cauchy-Green operator.
    """

    coeffs: np.ndarray = field(repr=False)

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=complex)
        if c.ndim == 2:
            c = c[None]
        if c.ndim != 3:
            raise ValueError(f"coeffs must have 3 axes [a][j][k], got shape {c.shape}")
        if not np.all(np.isfinite(c)):
            raise ValueError("non-finite coefficient")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    def __repr__(self):
        return f"DiscMap(n={self.n}, shape={self.shape})"

    @property
    def n(self):
        return self.coeffs.shape[0]

    @property
    def shape(self):
        return self.coeffs.shape[1:]

    @property
    def d(self):
        return self.coeffs.shape[1] - 1

    @property
    def deg_zbar(self):
        return self.coeffs.shape[2] - 1

    @classmethod
    def zeros(cls, n, shape):
        return cls(np.zeros((n, *shape), dtype=complex))

    @classmethod
    def monomial(cls, j, k, shape, n=1, component=0, coeff=1.0):
        c = np.zeros((n, *shape), dtype=complex)
        c[component, j, k] = coeff
        return cls(c)

    @classmethod
    def stack(cls, maps):
        shape = (max(m.shape[0] for m in maps), max(m.shape[1] for m in maps))
        return cls(np.concatenate([m.resized(shape).coeffs for m in maps], axis=0))

    def component(self, a):
        return DiscMap(self.coeffs[a : a + 1])

    def resized(self, shape):
        """Zero-pad or truncate to ``shape``."""
        out = np.zeros((self.n, *shape), dtype=complex)
        J = min(shape[0], self.shape[0])
        K = min(shape[1], self.shape[1])
        out[:, :J, :K] = self.coeffs[:, :J, :K]
        return DiscMap(out)

    def conj(self):
        """Pointwise complex conjugate; swaps the roles of ζ and conj(ζ)."""
        return DiscMap(self.coeffs.conj().transpose(0, 2, 1))

    def _binary(self, other, op):
        if isinstance(other, DiscMap):
            if other.n != self.n:
                raise ValueError("component count mismatch")
            shape = (max(self.shape[0], other.shape[0]), max(self.shape[1], other.shape[1]))
            return DiscMap(op(self.resized(shape).coeffs, other.resized(shape).coeffs))
        return NotImplemented

    def __add__(self, other):
        return self._binary(other, np.add)

    def __sub__(self, other):
        return self._binary(other, np.subtract)

    def __neg__(self):
        return DiscMap(-self.coeffs)

    def __mul__(self, scalar):
        if isinstance(scalar, DiscMap):
            return NotImplemented
        return DiscMap(self.coeffs * scalar)

    __rmul__ = __mul__

    def max_abs(self):
        return float(np.abs(self.coeffs).max()) if self.coeffs.size else 0.0

    # -- serialization -------------------------------------------------------

    def to_dict(self):
        return {
            "n": int(self.n),
            "d": int(self.d),
            "coeffs": [
                [[[float(v.real), float(v.imag)] for v in row] for row in comp]
                for comp in self.coeffs
            ],
        }

    @classmethod
    def from_dict(cls, data):
        arr = np.asarray(data["coeffs"], dtype=float)
        if arr.ndim != 4 or arr.shape[-1] != 2:
            raise ValueError("coeffs must be nested [a][j][k][re, im]")
        c = arr[..., 0] + 1j * arr[..., 1]
        if c.shape[0] != int(data["n"]) or c.shape[1] != int(data["d"]) + 1:
            raise ValueError("n/d do not match the coefficient array")
        return cls(c)

    def to_json(self):
        return json.dumps(self.to_dict(), separators=(",", ":")) + "\n"

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def _as_points(pts):
    z = np.atleast_1d(np.asarray(pts, dtype=complex))
    if np.any(np.abs(z) > 1.0 + 1e-12):
        raise DomainError(f"point outside the closed unit disc: max |z| = {np.abs(z).max():.6g}")
    return z


def synthesize(m, pts):
    """Evaluate ``m`` at points of the closed disc; returns shape ``(len(pts), n)``."""
    z = _as_points(pts)
    J, K = m.shape
    zj = z[:, None] ** np.arange(J)
    zk = np.conj(z)[:, None] ** np.arange(K)
    return np.einsum("pj,ajk,pk->pa", zj, m.coeffs, zk)


def grid_values(m, spec):
    """Samples of ``m`` at the grid nodes, shape ``(n, npoints)``."""
    from .modal import monomial_synthesis

    S = monomial_synthesis(spec, m.shape)
    return m.coeffs.reshape(m.n, -1) @ S.T


def analyze(samples, spec, shape=None):
    """Weighted least-squares fit of grid samples in a bi-monomial block.

    Parameters
    ----------
    samples : array_like
        ``(npoints,)``, ``(n, npoints)`` or ``(n, nr, ntheta)`` values at the
        grid nodes.
    spec : DiscretizationSpec
    shape : tuple, optional
        Coefficient block, default ``spec.field_shape``.

    Returns
    -------
    DiscMap, float
        Fitted map and relative quadrature-L² residual of the fit.
    """
    from .modal import get_frame

    f = np.asarray(samples, dtype=complex)
    if f.ndim == 1:
        f = f[None]
    f = f.reshape(f.shape[0], -1)
    if f.shape[1] != spec.npoints:
        raise DiscretizationError(f"expected {spec.npoints} samples per component, got {f.shape[1]}")
    frame = get_frame(spec, shape or spec.field_shape)
    y = frame.project(f)
    fitted = frame.values(y)
    resid = _relative_residual(f, fitted, spec)
    return DiscMap(frame.to_monomial(y)), resid


def _relative_residual(f, fitted, spec):
    num = spec.integrate(np.sum(np.abs(f - fitted) ** 2, axis=0))
    den = spec.integrate(np.sum(np.abs(f) ** 2, axis=0))
    if den == 0.0:
        return 0.0
    return float(np.sqrt(num / den))


def l2_norm_exact(coeffs):
    """Exact L²(Δ) norm of a coefficient block (any leading component axis)."""
    c = np.asarray(coeffs, dtype=complex)
    if c.ndim == 2:
        c = c[None]
    _, J, K = c.shape
    total = 0.0
    for l in range(-(K - 1), J):
        ks = np.arange(max(0, -l), min(K, J - l))
        if ks.size == 0:
            continue
        deg = 2 * ks + l  # j + k along the diagonal j - k = l
        gram = 2.0 * np.pi / (deg[:, None] + deg[None, :] + 2.0)
        v = c[:, ks + l, ks]
        total += float(np.real(np.einsum("ai,ij,aj->", v.conj(), gram, v)))
    return float(np.sqrt(max(total, 0.0)))


def multiply(f, g):
    """Truncated coefficient convolution of two maps (componentwise).

    Returns the product in ``f``'s block and the L²(Δ) norm of what was cut.
    """
    if f.n != g.n:
        raise ValueError("component count mismatch")
    J, K = f.shape
    full = np.stack([convolve2d(f.coeffs[a], g.coeffs[a]) for a in range(f.n)])
    kept = np.zeros((f.n, J, K), dtype=complex)
    kept[:, :J, :K] = full[:, :J, :K]
    tail = full.copy()
    tail[:, :J, :K] = 0.0
    return DiscMap(kept), l2_norm_exact(tail)


def random_map(rng, n, shape, scale=1.0, decay=0.5):
    """Random coefficients with geometric decay ``decay**(j+k)``."""
    J, K = shape
    jj, kk = np.meshgrid(np.arange(J), np.arange(K), indexing="ij")
    env = scale * decay ** (jj + kk)
    c = (rng.standard_normal((n, J, K)) + 1j * rng.standard_normal((n, J, K))) * env
    return DiscMap(c)
