"""Quadrature-orthonormal disc polynomials.

Monomial coefficients are badly conditioned as coordinates: the map from
grid values to coefficients of ζ^j conj(ζ)^k has condition number ~1e9 at
d = 12.  Every dense operator in the library is therefore assembled in the
coordinates of the disc (Zernike-type) polynomials

    q_{j,k}(ζ) = N e^{i l θ} r^{|l|} P_i^{(0,|l|)}(2r² - 1),   l = j - k, i = min(j, k),

which span exactly the same block as the monomials and are orthonormal for
the grid quadrature.  Their values and derivatives are computed directly, so
projection, differentiation and the Cauchy-Green operator are all well
conditioned in these coordinates.  Coordinates keep the ``(J, K)`` layout of
the monomial block they replace.
"""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache
from math import factorial

import numpy as np
from scipy.special import eval_jacobi

from .errors import DiscretizationError


def _poch(a, n):
    out = Fraction(1)
    for t in range(n):
        out *= a + t
    return out


@lru_cache(maxsize=None)
def shifted_jacobi_coeffs(n, beta):
    """Power-series coefficients of P_n^{(0,beta)}(2s - 1) in s, exact."""
    pre = Fraction((-1) ** n) * _poch(beta + 1, n) / factorial(n)
    return tuple(
        pre * _poch(-n, t) * _poch(n + beta + 1, t) / (_poch(beta + 1, t) * factorial(t))
        for t in range(n + 1)
    )


@lru_cache(maxsize=None)
def monomial_synthesis(spec, shape):
    """Matrix of ζ^j conj(ζ)^k at the grid nodes, columns flattened ``j*K + k``."""
    J, K = shape
    z = spec.nodes
    S = (z[:, None, None] ** np.arange(J)[None, :, None]) * (
        np.conj(z)[:, None, None] ** np.arange(K)[None, None, :]
    )
    S = S.reshape(len(z), J * K)
    S.setflags(write=False)
    return S


class ModalFrame:
    """Orthonormal coordinates for the ``shape`` block on ``spec``'s grid."""

    def __init__(self, spec, shape):
        J, K = shape
        if J + K - 2 >= spec.ntheta:
            raise DiscretizationError(
                f"ntheta={spec.ntheta} cannot separate {J + K - 1} angular modes"
            )
        if min(J, K) > spec.nr:
            raise DiscretizationError(
                f"nr={spec.nr} radial nodes cannot resolve {min(J, K)} radial functions"
            )
        self.spec = spec
        self.shape = (J, K)
        self.size = J * K

        jj, kk = np.meshgrid(np.arange(J), np.arange(K), indexing="ij")
        self.j = jj.ravel()
        self.k = kk.ravel()
        self.l = self.j - self.k
        self.i = np.minimum(self.j, self.k)
        beta = np.abs(self.l)
        self.norm = np.sqrt((2 * self.i + beta + 1) / np.pi)

        r = spec.r[:, None]
        x = 2.0 * spec.s[:, None] - 1.0
        P = eval_jacobi(self.i[None, :], 0, beta[None, :], x)
        dP = np.where(
            self.i[None, :] > 0,
            0.5 * (self.i + beta + 1)[None, :] * eval_jacobi(np.maximum(self.i - 1, 0)[None, :], 1, beta[None, :] + 1, x),
            0.0,
        )
        rb = r ** beta[None, :]
        rb1 = r ** (beta[None, :] - 1)
        self.rho = self.norm[None, :] * rb * P
        self.rho_zbar = 0.5 * self.norm[None, :] * rb1 * ((beta - self.l)[None, :] * P + 4.0 * r**2 * dP)
        self.rho_z = 0.5 * self.norm[None, :] * rb1 * ((beta + self.l)[None, :] * P + 4.0 * r**2 * dP)

        th = spec.theta
        nt = spec.ntheta

        def grid(rad, modes):
            ph = np.exp(1j * th[:, None] * modes[None, :])
            return (rad[:, None, :] * ph[None, :, :]).reshape(spec.nr * nt, -1)

        self.V = grid(self.rho, self.l)
        self.Vz = grid(self.rho_z, self.l - 1)
        self.Vzb = grid(self.rho_zbar, self.l + 1)
        for M in (self.V, self.Vz, self.Vzb):
            M.setflags(write=False)
        self._proj_weights = np.pi * spec.ws[:, None] * self.rho
        self._mode_cols = np.mod(self.l, nt)

    # -- transforms -------------------------------------------------------------

    @property
    def P(self):
        """Dense orthogonal projection grid values -> coordinates."""
        if not hasattr(self, "_P"):
            P = (self.V.conj() * self.spec.weights[:, None]).T
            P.setflags(write=False)
            self._P = P
        return self._P

    def project(self, f):
        """Grid values ``(..., npoints)`` -> coordinates ``(..., J, K)``.

        Fast transform in the angle, quadrature-weighted radial projection.
        """
        f = np.asarray(f, dtype=complex)
        lead = f.shape[:-1]
        fh = np.fft.fft(f.reshape(*lead, self.spec.nr, self.spec.ntheta), axis=-1)
        fh /= self.spec.ntheta
        y = np.einsum("...ri,ri->...i", fh[..., :, self._mode_cols], self._proj_weights)
        return y.reshape(*lead, *self.shape)

    def values(self, y):
        y = np.asarray(y, dtype=complex)
        return y.reshape(*y.shape[: y.ndim - 2], self.size) @ self.V.T

    def values_dz(self, y):
        y = np.asarray(y, dtype=complex)
        return y.reshape(*y.shape[: y.ndim - 2], self.size) @ self.Vz.T

    def values_dzbar(self, y):
        y = np.asarray(y, dtype=complex)
        return y.reshape(*y.shape[: y.ndim - 2], self.size) @ self.Vzb.T

    def basis_at(self, pts):
        """Basis functions at arbitrary points, ``(npts, size)``."""
        z = np.atleast_1d(np.asarray(pts, dtype=complex))
        r, th = np.abs(z)[:, None], np.angle(z)[:, None]
        beta = np.abs(self.l)[None, :]
        rad = self.norm[None, :] * r**beta * eval_jacobi(self.i[None, :], 0, beta, 2.0 * r**2 - 1.0)
        return rad * np.exp(1j * self.l[None, :] * th)

    def values_at(self, y, pts):
        """Values of coordinates ``(..., J, K)`` at ``pts``; returns ``(..., npts)``."""
        y = np.asarray(y, dtype=complex)
        return y.reshape(*y.shape[: y.ndim - 2], self.size) @ self.basis_at(pts).T

    @property
    def to_mono_matrix(self):
        if not hasattr(self, "_C"):
            J, K = self.shape
            C = np.zeros((self.size, self.size))
            for col in range(self.size):
                l, i = int(self.l[col]), int(self.i[col])
                for t, a in enumerate(shifted_jacobi_coeffs(i, abs(l))):
                    j, k = (l + t, t) if l >= 0 else (t, -l + t)
                    C[j * K + k, col] = self.norm[col] * float(a)
            C.setflags(write=False)
            self._C = C
        return self._C

    @property
    def from_mono_matrix(self):
        if not hasattr(self, "_F"):
            F = self.P @ monomial_synthesis(self.spec, self.shape)
            # ζ^j conj(ζ)^k lies in the modes with l = j - k and i ≤ min(j, k);
            # drop the quadrature noise outside that support
            F = np.where((self.l[:, None] == self.l[None, :]) & (self.i[:, None] <= self.i[None, :]), F, 0.0)
            F.setflags(write=False)
            self._F = F
        return self._F

    def to_monomial(self, y):
        y = np.asarray(y, dtype=complex)
        lead = y.shape[:-2]
        return (y.reshape(*lead, self.size) @ self.to_mono_matrix.T).reshape(*lead, *self.shape)

    def from_monomial(self, c):
        c = np.asarray(c, dtype=complex)
        lead = c.shape[:-2]
        return (c.reshape(*lead, self.size) @ self.from_mono_matrix.T).reshape(*lead, *self.shape)


@lru_cache(maxsize=32)
def get_frame(spec, shape):
    return ModalFrame(spec, tuple(shape))


# -- real-linear operators --------------------------------------------------------
#
# A real-linear map on complex coordinate vectors is held as a pair (M1, M2)
# acting by x -> M1 x + M2 conj(x).  Real coordinates stack [Re x; Im x].


def realify(M1, M2=None):
    """Real block matrix of x -> M1 x + M2 conj(x)."""
    if M2 is None:
        M2 = np.zeros_like(M1)
    top = np.hstack([(M1 + M2).real, (M2 - M1).imag])
    bot = np.hstack([(M1 + M2).imag, (M1 - M2).real])
    return np.vstack([top, bot])


def to_real(x):
    x = np.asarray(x, dtype=complex).ravel()
    return np.concatenate([x.real, x.imag])


def to_complex(v):
    v = np.asarray(v, dtype=float)
    h = v.shape[0] // 2
    return v[:h] + 1j * v[h:]
