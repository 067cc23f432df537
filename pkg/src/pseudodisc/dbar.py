"""The operator ℱ(u) = u_ζ̄ + A(u) conj(u_ζ), its linearization and the
integral form 𝒢(u) = u + T(A(u) conj(u_ζ)).

Nonlinear terms are evaluated pointwise on the grid and projected back
(pseudo-spectral).  Internally maps are held as modal coordinate arrays of
shape ``(n, d+1, d+2)`` and fields as ``(n, d+1, d+1)``; see
:mod:`pseudodisc.modal`.  The public functions take and return
:class:`~pseudodisc.basis.DiscMap`.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .basis import DiscMap, DiscretizationSpec
from .calculus import cauchy_green, d_bar, get_calculus
from .errors import DiscretizationError
from .modal import realify

__all__ = [
    "apply_F",
    "apply_G",
    "linearize",
    "LinearizedOp",
    "map_coords",
    "field_coords",
    "spec_for",
]

MAX_TAIL = 1e-4


def spec_for(u, spec=None):
    """Grid used for ``u``: the given spec, else the default one of degree ``u.d``."""
    if spec is not None:
        return spec
    return DiscretizationSpec(max(u.d, u.deg_zbar - 1))


def map_coords(u, spec):
    """Modal coordinates of ``u`` in the map block, ``(n, d+1, d+2)``."""
    C = get_calculus(spec)
    c = u.resized(spec.map_shape).coeffs
    if u.shape[0] > spec.map_shape[0] or u.shape[1] > spec.map_shape[1]:
        if np.any(u.coeffs[:, spec.map_shape[0]:, :]) or np.any(u.coeffs[:, :, spec.map_shape[1]:]):
            raise DiscretizationError(f"map of shape {u.shape} exceeds the block {spec.map_shape}")
    return C.X.from_monomial(c)


def field_coords(f, spec):
    C = get_calculus(spec)
    J, K = spec.field_shape
    if np.any(f.coeffs[:, J:, :]) or np.any(f.coeffs[:, :, K:]):
        raise DiscretizationError(f"field of shape {f.shape} exceeds the block {spec.field_shape}")
    return C.Y.from_monomial(f.resized(spec.field_shape).coeffs)


def _to_map(y, frame):
    return DiscMap(frame.to_monomial(y))


@dataclass
class GridState:
    """Samples of u, u_ζ, u_ζ̄ at the nodes, each ``(npoints, n)``."""

    u: np.ndarray
    uz: np.ndarray
    uzb: np.ndarray


def grid_state(y, spec):
    X = get_calculus(spec).X
    return GridState(X.values(y).T, X.values_dz(y).T, X.values_dzbar(y).T)


def nonlinear_term(structure, g):
    """A(u) conj(u_ζ) at the nodes, ``(npoints, n)``."""
    structure.check_domain(g.u)
    A = structure.A(g.u)
    return np.einsum("pab,pb->pa", A, np.conj(g.uz))


def _l2(vals, spec):
    return float(np.sqrt(spec.integrate(np.sum(np.abs(vals) ** 2, axis=0))))


def _project_term(term, spec, max_tail, u=None):
    """Project grid samples of a nonlinear term to field coordinates.

    The truncation tail is the L² norm of what the projection drops, taken
    relative to ‖u‖ + ‖term‖ (the size of the map being processed).
    """
    Y = get_calculus(spec).Y
    vals = term.T
    y = Y.project(vals)
    size = _l2(vals, spec)
    if size == 0.0:
        return y, 0.0
    ref = size + (0.0 if u is None else _l2(u.T, spec))
    tail = _l2(vals - Y.values(y), spec) / ref
    if max_tail is not None and tail > max_tail:
        raise DiscretizationError(
            f"nonlinear term not resolved at d={spec.d}: relative tail {tail:.2e} > {max_tail:.0e}"
        )
    return y, tail


def residual_coords(structure, y, spec, max_tail=MAX_TAIL):
    """ℱ in modal field coordinates; returns ``(coords, tail)``."""
    C = get_calculus(spec)
    g = grid_state(y, spec)
    term = nonlinear_term(structure, g)
    yt, tail = _project_term(term, spec, max_tail, g.u)
    out = np.einsum("ij,aj->ai", C.dbar, y.reshape(y.shape[0], -1))
    return out.reshape(yt.shape) + yt, tail


def integral_coords(structure, y, spec, max_tail=MAX_TAIL):
    """𝒢 in modal map coordinates."""
    C = get_calculus(spec)
    g = grid_state(y, spec)
    yt, tail = _project_term(nonlinear_term(structure, g), spec, max_tail, g.u)
    corr = np.einsum("ij,aj->ai", C.T, yt.reshape(yt.shape[0], -1))
    return y + corr.reshape(y.shape), tail


def _monomial_term(structure, u, spec, max_tail):
    """Grid term A(u) conj(u_ζ) analyzed back to a field DiscMap.

    The public functions combine it with the exact coefficient derivatives,
    so that an exactly vanishing term stays exactly zero.
    """
    g = grid_state(map_coords(u, spec), spec)
    term = nonlinear_term(structure, g)
    yt, tail = _project_term(term, spec, max_tail, g.u)
    if not np.any(term):
        return DiscMap.zeros(u.n, spec.field_shape), 0.0
    return _to_map(yt, get_calculus(spec).Y), tail


def apply_F(structure, u, spec=None, max_tail=MAX_TAIL, return_tail=False):
    """ℱ(u) as a field of degree ``d`` in both variables.

    Raises
    ------
    DomainError
        If u leaves the region where the structure is defined.
    DiscretizationError
        If the nonlinear term is not resolved by the grid.
    """
    spec = spec_for(u, spec)
    term, tail = _monomial_term(structure, u, spec, max_tail)
    out = (d_bar(u) + term).resized(spec.field_shape)
    return (out, tail) if return_tail else out


def apply_G(structure, u, spec=None, max_tail=MAX_TAIL):
    """𝒢(u) = u + T(A(u) conj(u_ζ)) in the map block."""
    spec = spec_for(u, spec)
    term, _ = _monomial_term(structure, u, spec, max_tail)
    return (u + cauchy_green(term)).resized(spec.map_shape)


@dataclass
class LinearizedOp:
    """d_φℱ(h) = h_ζ̄ + P conj(h_ζ) + B1 h + B2 conj(h).

    ``P``, ``B1``, ``B2`` are matrix fields sampled at the nodes, shape
    ``(npoints, n, n)``.  ``P = A(φ)``, and

        B1[a, j] = Σ_b ∂A_ab/∂z_j(φ) conj(φ_ζ)_b,
        B2[a, j] = Σ_b ∂A_ab/∂conj(z_j)(φ) conj(φ_ζ)_b.
    """

    spec: DiscretizationSpec
    P: np.ndarray
    B1: np.ndarray
    B2: np.ndarray
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def n(self):
        return self.P.shape[1]

    def apply_coords(self, yh):
        """Apply to map coordinates ``(n, J, K+1)``; returns field coordinates."""
        C = get_calculus(self.spec)
        yt = C.Y.project(self._term(grid_state(yh, self.spec)).T)
        out = np.einsum("ij,aj->ai", C.dbar, yh.reshape(yh.shape[0], -1))
        return out.reshape(yt.shape) + yt

    def apply(self, h):
        C = get_calculus(self.spec)
        g = grid_state(map_coords(h, self.spec), self.spec)
        term = self._term(g)
        lower = _to_map(C.Y.project(term.T), C.Y) if np.any(term) else DiscMap.zeros(h.n, self.spec.field_shape)
        return (d_bar(h) + lower).resized(self.spec.field_shape)

    def _term(self, g):
        return (
            np.einsum("pab,pb->pa", self.P, np.conj(g.uz))
            + np.einsum("pab,pb->pa", self.B1, g.u)
            + np.einsum("pab,pb->pa", self.B2, np.conj(g.u))
        )

    def complex_pair(self):
        """(M1, M2) with d_φℱ(h) = M1 h + M2 conj(h) on stacked modal coordinates."""
        if "pair" not in self._cache:
            C = get_calculus(self.spec)
            X, Y = C.X, C.Y
            n, nx, ny = self.n, X.size, Y.size
            M1 = np.zeros((n * ny, n * nx), dtype=complex)
            M2 = np.zeros_like(M1)
            PY = Y.P
            cV, cVz = np.conj(X.V), np.conj(X.Vz)
            for a in range(n):
                M1[a * ny:(a + 1) * ny, a * nx:(a + 1) * nx] += C.dbar
                for b in range(n):
                    blk = (slice(a * ny, (a + 1) * ny), slice(b * nx, (b + 1) * nx))
                    if np.any(self.B1[:, a, b]):
                        M1[blk] += PY @ (self.B1[:, a, b, None] * X.V)
                    if np.any(self.P[:, a, b]):
                        M2[blk] += PY @ (self.P[:, a, b, None] * cVz)
                    if np.any(self.B2[:, a, b]):
                        M2[blk] += PY @ (self.B2[:, a, b, None] * cV)
            self._cache["pair"] = (M1, M2)
        return self._cache["pair"]

    @property
    def assembled(self):
        """Dense real matrix on ``[Re; Im]`` of the stacked modal coordinates."""
        if "real" not in self._cache:
            self._cache["real"] = realify(*self.complex_pair())
        return self._cache["real"]

    @property
    def max_abs_P(self):
        return float(np.abs(self.P).max()) if self.P.size else 0.0


def linearize_coords(structure, y, spec):
    g = grid_state(y, spec)
    structure.check_domain(g.u)
    P = structure.A(g.u)
    dz, dzb = structure.dA(g.u)
    cz = np.conj(g.uz)
    B1 = np.einsum("pabj,pb->paj", dz, cz)
    B2 = np.einsum("pabj,pb->paj", dzb, cz)
    return LinearizedOp(spec, P, B1, B2)


def linearize(structure, phi, spec=None):
    """Linearization of ℱ at ``phi``."""
    spec = spec_for(phi, spec)
    return linearize_coords(structure, map_coords(phi, spec), spec)
