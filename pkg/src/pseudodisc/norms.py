"""Discrete L^p, W^{1,p}, W^{2,p}, sup and Hölder norms.

Conventions
-----------
* pointwise size is the Euclidean norm on ℂⁿ;
* ‖u‖_{W^{1,p}} = ‖u‖_p + ‖u_ζ‖_p + ‖u_ζ̄‖_p, and W^{2,p} adds
  ‖u_ζζ‖_p + ‖u_ζζ̄‖_p + ‖u_ζ̄ζ̄‖_p;
* L^p integrals use the grid quadrature, restricted to the nodes of a
  sub-domain when asked (no chord-fitted quadrature);
* sup and Hölder norms are sampled on a grid four times denser than the
  quadrature grid, including the boundary circle.  They are lower bounds.

Restrictions, for an overlap half-width τ:
``full`` (Δ), ``half1`` (Re ζ > -τ), ``half2`` (Re ζ < τ), ``overlap`` (|Re ζ| < τ).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .basis import DiscMap, grid_values, synthesize
from .calculus import d_bar, d_z, get_calculus
from .dbar import spec_for
from .errors import DomainError

__all__ = ["NormKind", "norm", "region_mask", "lp_norm_values", "sobolev_norm_coords"]

_TAGS = ("Lp", "W1p", "W2p", "Sup", "Holder")
_REGIONS = ("full", "half1", "half2", "overlap")


@dataclass(frozen=True)
class NormKind:
    tag: str = "Lp"
    p: float = 4.0
    restriction: str = "full"
    alpha: float = 0.5
    tau: float = 0.3

    def __post_init__(self):
        if self.tag not in _TAGS:
            raise ValueError(f"unknown norm tag {self.tag!r}")
        if self.restriction not in _REGIONS:
            raise ValueError(f"unknown restriction {self.restriction!r}")
        if self.p < 1:
            raise ValueError("p must be at least 1")
        if self.tag == "Holder" and not 0 < self.alpha < 1:
            raise ValueError("Hölder exponent must lie in (0, 1)")


def region_mask(z, restriction="full", tau=0.3):
    x = np.real(z)
    if restriction == "full":
        return np.ones(np.shape(z), dtype=bool)
    if restriction == "half1":
        return x > -tau
    if restriction == "half2":
        return x < tau
    if restriction == "overlap":
        return np.abs(x) < tau
    raise ValueError(f"unknown restriction {restriction!r}")


def lp_norm_values(vals, spec, p=4.0, mask=None):
    """L^p norm of node samples ``(n, npoints)`` or ``(npoints,)``."""
    v = np.asarray(vals)
    if v.ndim == 1:
        v = v[None]
    mag = np.sqrt(np.sum(np.abs(v) ** 2, axis=0))
    w = spec.weights if mask is None else np.where(mask, spec.weights, 0.0)
    return float(np.sum(w * mag**p) ** (1.0 / p))


def sobolev_norm_coords(y, spec, p=4.0, order=1, mask=None):
    """W^{k,p} norm (k ≤ 1) of a map given by modal coordinates."""
    X = get_calculus(spec).X
    out = lp_norm_values(X.values(y), spec, p, mask)
    if order >= 1:
        out += lp_norm_values(X.values_dz(y), spec, p, mask)
        out += lp_norm_values(X.values_dzbar(y), spec, p, mask)
    return out


def _derivatives(m, order):
    out = [m]
    if order >= 1:
        out += [d_z(m), d_bar(m)]
    if order >= 2:
        out += [d_z(d_z(m)), d_z(d_bar(m)), d_bar(d_bar(m))]
    return out


def _dense_points(spec):
    radii = np.linspace(0.0, 1.0, 2 * spec.nr + 1)[1:]
    ang = 2.0 * np.pi * np.arange(2 * spec.ntheta) / (2 * spec.ntheta)
    pts = (radii[:, None] * np.exp(1j * ang)[None, :]).ravel()
    return np.concatenate([[0.0 + 0.0j], pts])


def _holder_seminorm(pts, vals, alpha, chunk=512):
    best = 0.0
    for s in range(0, len(pts), chunk):
        dz = np.abs(pts[s:s + chunk, None] - pts[None, :])
        dv = np.sqrt(np.sum(np.abs(vals[s:s + chunk, None, :] - vals[None, :, :]) ** 2, axis=-1))
        with np.errstate(divide="ignore", invalid="ignore"):
            q = np.where(dz > 0, dv / dz**alpha, 0.0)
        best = max(best, float(q.max()))
    return best


def norm(f, kind=None, spec=None):
    """Norm of a DiscMap, or of raw node samples (L^p and sup only).

    Parameters
    ----------
    f : DiscMap or ndarray
        A map, or samples ``(n, npoints)`` / ``(npoints,)`` at ``spec``'s nodes.
    kind : NormKind, optional
        Default L⁴ on the full disc.
    spec : DiscretizationSpec, optional
        Grid; defaults to the one matching the map's degree.

    Raises
    ------
    DomainError
        If the restriction contains no nodes.
    """
    kind = kind or NormKind()
    if not isinstance(f, DiscMap):
        if spec is None:
            raise ValueError("node samples need their DiscretizationSpec")
        if kind.tag not in ("Lp", "Sup"):
            raise ValueError(f"{kind.tag} needs derivatives; pass a DiscMap")
        vals = np.asarray(f)
        vals = vals[None] if vals.ndim == 1 else vals
        mask = region_mask(spec.nodes, kind.restriction, kind.tau)
        if not mask.any():
            raise DomainError(f"restriction {kind.restriction!r} contains no nodes")
        if kind.tag == "Lp":
            return lp_norm_values(vals, spec, kind.p, mask)
        return float(np.sqrt(np.sum(np.abs(vals[:, mask]) ** 2, axis=0)).max())

    spec = spec_for(f, spec)
    if kind.tag in ("Sup", "Holder"):
        pts = _dense_points(spec)
        pts = pts[region_mask(pts, kind.restriction, kind.tau)]
        if pts.size == 0:
            raise DomainError(f"restriction {kind.restriction!r} contains no sample points")
        vals = synthesize(f, pts)
        sup = float(np.sqrt(np.sum(np.abs(vals) ** 2, axis=1)).max())
        if kind.tag == "Sup":
            return sup
        return sup + _holder_seminorm(pts, vals, kind.alpha)

    mask = region_mask(spec.nodes, kind.restriction, kind.tau)
    if not mask.any():
        raise DomainError(f"restriction {kind.restriction!r} contains no nodes")
    order = {"Lp": 0, "W1p": 1, "W2p": 2}[kind.tag]
    return float(sum(lp_norm_values(grid_values(g, spec), spec, kind.p, mask) for g in _derivatives(f, order)))
