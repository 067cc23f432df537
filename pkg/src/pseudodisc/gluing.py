"""Gluing two J-holomorphic half-discs.

The halves are Δ₁ = Δ ∩ {Re ζ > -τ} and Δ₂ = Δ ∩ {Re ζ < τ}.  Given
J-holomorphic maps u_j on Δ_j, the pre-gluing

    φ = χ u₁ + (1 - χ) u₂

with a cutoff χ(ζ) depending on Re ζ only (χ = 1 for Re ζ ≥ τ, χ = 0 for
Re ζ ≤ -τ) is J-holomorphic outside the overlap.  There

    ℱ(φ) = I + II,
    I  = χ_ζ̄ (u₁ - u₂) + A(φ) conj(χ_ζ (u₁ - u₂)),
    II = χ (A(φ) - A(u₁)) conj(u₁_ζ) + (1 - χ)(A(φ) - A(u₂)) conj(u₂_ζ),

and both parts are controlled by the mismatch ‖u₁ - u₂‖_{W^{1,p}(Δ₁∩Δ₂)}.
A Newton correction of φ then gives the glued disc.

Half-disc data are samples at the grid nodes of the half (values and
derivatives up to order two).  Norms on halves use the quadrature nodes that
fall inside them.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .basis import DiscMap, DiscretizationSpec, analyze, synthesize
from .calculus import d_bar, d_z, get_calculus
from .dbar import spec_for
from .errors import CoverageError
from .newton import NewtonConfig, solve
from .norms import lp_norm_values, region_mask

__all__ = ["Cutoff", "make_cutoff", "GluingConfig", "HalfDiscMap", "Pregluing", "preglue", "GlueReport", "glue"]

_ORDERS = ("u", "z", "zb", "zz", "zzb", "zbzb")


def _smoothstep(t):
    t = np.clip(t, 0.0, 1.0)
    return t**3 * (10.0 - 15.0 * t + 6.0 * t * t)


def _smoothstep_d1(t):
    inside = (t > 0.0) & (t < 1.0)
    return np.where(inside, 30.0 * t * t * (1.0 - t) ** 2, 0.0)


def _smoothstep_d2(t):
    inside = (t > 0.0) & (t < 1.0)
    return np.where(inside, 60.0 * t * (1.0 - t) * (1.0 - 2.0 * t), 0.0)


@dataclass(frozen=True)
class Cutoff:
    """χ(ζ) = S((τ - Re ζ) / (2τ)) with the quintic smoothstep S."""

    tau: float
    c1: float
    kind: str = "quintic"

    def _t(self, z):
        return (self.tau - np.real(z)) / (2.0 * self.tau)

    def __call__(self, z):
        return _smoothstep(self._t(z))

    def dx(self, z):
        return -_smoothstep_d1(self._t(z)) / (2.0 * self.tau)

    def dxx(self, z):
        return _smoothstep_d2(self._t(z)) / (4.0 * self.tau**2)

    def dz(self, z):
        """χ_ζ = χ_ζ̄ = χ'/2 since χ is real and depends on Re ζ only."""
        return 0.5 * self.dx(z)

    def dzz(self, z):
        """χ_ζζ = χ_ζζ̄ = χ_ζ̄ζ̄ = χ''/4."""
        return 0.25 * self.dxx(z)


def make_cutoff(tau, kind="quintic", samples=200001):
    """Cutoff on [-τ, τ] and c1 = max(sup|χ|, sup|Dχ|, sup|D²χ|) by dense sampling."""
    if not 0.0 < tau < 1.0:
        raise ValueError("τ must lie in (0, 1)")
    if kind != "quintic":
        raise ValueError(f"unknown cutoff kind {kind!r}")
    proto = Cutoff(tau, 0.0, kind)
    x = np.linspace(-1.0, 1.0, samples)
    c1 = max(float(np.abs(proto(x)).max()), float(np.abs(proto.dx(x)).max()), float(np.abs(proto.dxx(x)).max()))
    return Cutoff(tau, c1, kind)


@dataclass
class GluingConfig:
    """Gluing settings.

    ``M`` defaults to twice the larger W^{2,p} norm of the two halves, so that
    each half lies in the ball of radius M/2.  ``delta1`` is the slack of the
    W^{2,p} ball (the pre-gluing is checked directly against M + 3 c1 mismatch).
    """

    tau: float = 0.3
    eps: float = 0.05
    M: float | None = None
    cutoff: str = "quintic"
    delta1: float = 1.0
    newton: NewtonConfig = field(default_factory=NewtonConfig)

    def __post_init__(self):
        if not 0.0 < self.tau < 1.0:
            raise ValueError("τ must lie in (0, 1)")
        if not self.eps > 0:
            raise ValueError("ε must be positive")

    def to_dict(self):
        return {
            "tau": self.tau,
            "eps": self.eps,
            "M": self.M,
            "cutoff": self.cutoff,
            "delta1": self.delta1,
            "newton": self.newton.to_dict(),
        }


def _derivative_samples(m, pts):
    d1z, d1b = d_z(m), d_bar(m)
    maps = (m, d1z, d1b, d_z(d1z), d_z(d1b), d_bar(d1b))
    return {k: synthesize(g, pts) for k, g in zip(_ORDERS, maps)}


@dataclass
class HalfDiscMap:
    """Samples ``(count, n)`` of a map and its derivatives on the nodes of one half."""

    which: int
    spec: DiscretizationSpec
    tau: float
    mask: np.ndarray
    samples: dict
    provenance: str = ""

    @classmethod
    def from_map(cls, u, which, spec=None, tau=0.3, provenance="restriction of a global map"):
        if which not in (1, 2):
            raise ValueError("which must be 1 or 2")
        spec = spec_for(u, spec)
        mask = region_mask(spec.nodes, f"half{which}", tau)
        s = _derivative_samples(u, spec.nodes[mask])
        if not all(np.all(np.isfinite(v)) for v in s.values()):
            raise ValueError("half-disc samples must be finite")
        return cls(which, spec, tau, mask, s, provenance)

    @property
    def n(self):
        return self.samples["u"].shape[1]

    def on(self, mask, key="u"):
        """Samples on the nodes of ``mask`` (which must lie inside this half)."""
        if np.any(mask & ~self.mask):
            raise CoverageError(f"half {self.which} has no data on some requested nodes")
        full = np.full((self.spec.npoints, self.n), np.nan + 0j)
        full[self.mask] = self.samples[key]
        return full[mask]

    def w_norm(self, order=1, p=4.0):
        keys = _ORDERS[: 1 + 2 * order] if order < 2 else _ORDERS
        return _restricted_norm([self.samples[k] for k in keys], self.spec, self.mask, p)


def _restricted_norm(sample_list, spec, mask, p):
    """Σ ‖·‖_{L^p} over sample arrays ``(count, n)`` on the nodes of ``mask``."""
    w = spec.weights[mask]
    total = 0.0
    for s in sample_list:
        mag = np.sqrt(np.sum(np.abs(s) ** 2, axis=1))
        total += float(np.sum(w * mag**p) ** (1.0 / p))
    return total


@dataclass
class Pregluing:
    phi: DiscMap
    phi_samples: dict
    fit_residual: float
    mismatch: float
    residual: np.ndarray
    part_I: np.ndarray
    part_II: np.ndarray
    norm_I: float
    norm_II: float
    split_error: float
    outside_residual: float
    w2p: float
    cutoff: Cutoff


def preglue(structure, u1, u2, chi, p=4.0):
    """Blend two half-disc maps and split the residual.

    Raises
    ------
    CoverageError
        If a half lacks data on nodes of its domain, or the overlap is empty.
    """
    spec, tau = u1.spec, chi.tau
    if u2.spec != spec:
        raise ValueError("halves live on different grids")
    z = spec.nodes
    need1 = region_mask(z, "half1", tau)
    need2 = region_mask(z, "half2", tau)
    over = need1 & need2
    if np.any(need1 & ~u1.mask) or np.any(need2 & ~u2.mask):
        raise CoverageError("a half-disc map does not cover its half")
    if not over.any():
        raise CoverageError("the halves do not overlap on any node")

    n = u1.n
    only1 = need1 & ~need2
    only2 = need2 & ~need1
    x = chi(z)[:, None]
    cz = chi.dz(z)[:, None]
    czz = chi.dzz(z)[:, None]

    def blended(key):
        out = np.zeros((spec.npoints, n), dtype=complex)
        out[only1] = u1.on(only1, key)
        out[only2] = u2.on(only2, key)
        out[over] = x[over] * u1.on(over, key) + (1.0 - x[over]) * u2.on(over, key)
        return out

    def diff(key):
        out = np.zeros((spec.npoints, n), dtype=complex)
        out[over] = u1.on(over, key) - u2.on(over, key)
        return out

    D, Dz, Dzb = diff("u"), diff("z"), diff("zb")
    ph = {k: blended(k) for k in _ORDERS}
    ph["z"] = ph["z"] + cz * D
    ph["zb"] = ph["zb"] + cz * D
    ph["zz"] = ph["zz"] + 2.0 * cz * Dz + czz * D
    ph["zzb"] = ph["zzb"] + cz * (Dz + Dzb) + czz * D
    ph["zbzb"] = ph["zbzb"] + 2.0 * cz * Dzb + czz * D

    A_phi = structure.A(ph["u"])
    F = ph["zb"] + np.einsum("pab,pb->pa", A_phi, np.conj(ph["z"]))

    I = cz * D + np.einsum("pab,pb->pa", A_phi, np.conj(cz * D))
    II = np.zeros_like(I)
    u1o, u2o = u1.on(over), u2.on(over)
    A1, A2 = structure.A(u1o), structure.A(u2o)
    II[over] = x[over] * np.einsum("pab,pb->pa", A_phi[over] - A1, np.conj(u1.on(over, "z"))) + (
        1.0 - x[over]
    ) * np.einsum("pab,pb->pa", A_phi[over] - A2, np.conj(u2.on(over, "z")))
    own = np.zeros_like(F)
    F1 = u1.on(over, "zb") + np.einsum("pab,pb->pa", A1, np.conj(u1.on(over, "z")))
    F2 = u2.on(over, "zb") + np.einsum("pab,pb->pa", A2, np.conj(u2.on(over, "z")))
    own[over] = x[over] * F1 + (1.0 - x[over]) * F2
    split_error = float(np.abs((F - own - I - II)[over]).max())

    mismatch = _restricted_norm([D[over], Dz[over], Dzb[over]], spec, over, p)
    outside = ~over
    out_res = float(np.abs(F[outside]).max()) if outside.any() else 0.0
    fit, resid = analyze(ph["u"].T, spec, shape=spec.map_shape)
    all_nodes = np.ones(spec.npoints, dtype=bool)
    w2p = _restricted_norm([ph[k] for k in _ORDERS], spec, all_nodes, p)
    return Pregluing(
        phi=fit,
        phi_samples=ph,
        fit_residual=resid,
        mismatch=mismatch,
        residual=F,
        part_I=I,
        part_II=II,
        norm_I=lp_norm_values(I.T, spec, p),
        norm_II=lp_norm_values(II.T, spec, p),
        split_error=split_error,
        outside_residual=out_res,
        w2p=w2p,
        cutoff=chi,
    )


@dataclass
class GlueReport:
    tau: float
    eps: float
    M: float
    c0: float
    c1: float
    c2: float
    c3: float
    delta0: float
    delta1: float
    delta2: float
    mismatch: float
    mismatch_ok: bool
    norm_I: float
    norm_II: float
    split_error: float
    outside_residual: float
    preglue_w2p: float
    preglue_w2p_bound: float
    preglue_fit_residual: float
    u_minus_phi: float
    phi_minus_u: list
    distances: list
    triangle_ok: bool
    cutoff_bound_ok: bool
    success: bool
    newton: object
    u: DiscMap = None
    flags: list = field(default_factory=list)

    def to_dict(self, include_map=True):
        out = {
            k: getattr(self, k)
            for k in (
                "tau", "eps", "M", "c0", "c1", "c2", "c3", "delta0", "delta1", "delta2",
                "mismatch", "mismatch_ok", "norm_I", "norm_II", "split_error", "outside_residual",
                "preglue_w2p", "preglue_w2p_bound", "preglue_fit_residual", "u_minus_phi",
                "phi_minus_u", "distances", "triangle_ok", "cutoff_bound_ok", "success",
            )
        }
        out["flags"] = list(self.flags)
        out["newton"] = self.newton.to_dict(include_map=False)
        if include_map and self.u is not None:
            out["u"] = self.u.to_dict()
        return out


def _safe_div(a, b):
    return a / b if b > 0 else np.inf


def glue(structure, u1, u2, cfg=None):
    """Glue two J-holomorphic half-discs.

    Returns
    -------
    GlueReport
        Constants c1, c2, c3, δ0, the residual split, and the distances
        ‖u - u_j‖_{W^{1,p}(Δ_j)}.

    Raises
    ------
    CoverageError
    DivergenceError
    """
    cfg = cfg or GluingConfig()
    p = cfg.newton.p
    if abs(u1.tau - cfg.tau) > 0 or abs(u2.tau - cfg.tau) > 0:
        raise ValueError("half-disc maps were cut with a different τ")
    chi = make_cutoff(cfg.tau, cfg.cutoff)
    pg = preglue(structure, u1, u2, chi, p)
    spec = u1.spec
    M = cfg.M if cfg.M is not None else 2.0 * max(u1.w_norm(2, p), u2.w_norm(2, p))
    flags = []

    rep = solve(structure, pg.phi, cfg.newton, spec)

    m = pg.mismatch
    c2 = _safe_div(pg.norm_I, m) if m > 0 else 0.0
    c3 = _safe_div(pg.norm_II, m) if m > 0 else 0.0
    c0, c1 = rep.c0, chi.c1
    d1, d2 = cfg.delta1, rep.delta
    cc = c2 + c3
    delta0 = min(
        d1 / (3.0 * c1),
        _safe_div(d2, cc),
        _safe_div(cfg.eps, 4.0 * c0 * cc),
        cfg.eps / (2.0 * (1.0 + c1)),
    )
    mismatch_ok = m < delta0
    if not mismatch_ok:
        flags.append("mismatch exceeds δ0")
    w2p_bound = M + 3.0 * c1 * m
    if pg.w2p >= w2p_bound:
        flags.append("pre-gluing outside the W^{2,p} ball")

    X = get_calculus(spec).X
    y = rep.u_coords
    u_s = {"u": X.values(y).T, "z": X.values_dz(y).T, "zb": X.values_dzbar(y).T}
    u_phi = _restricted_norm(
        [u_s[k] - pg.phi_samples[k] for k in ("u", "z", "zb")], spec, np.ones(spec.npoints, bool), p
    )
    dists, phis = [], []
    for h in (u1, u2):
        mk = h.mask
        dists.append(_restricted_norm([u_s[k][mk] - h.samples[k] for k in ("u", "z", "zb")], spec, mk, p))
        phis.append(_restricted_norm([pg.phi_samples[k][mk] - h.samples[k] for k in ("u", "z", "zb")], spec, mk, p))
    slack = 1e-12 * (1.0 + max(dists))
    triangle_ok = all(dj <= u_phi + pj + slack for dj, pj in zip(dists, phis))
    cutoff_ok = all(pj <= (1.0 + c1) * m + 1e-14 for pj in phis)
    success = bool(rep.converged and max(dists) < cfg.eps)
    return GlueReport(
        tau=cfg.tau, eps=cfg.eps, M=M, c0=c0, c1=c1, c2=c2, c3=c3, delta0=delta0, delta1=d1, delta2=d2,
        mismatch=m, mismatch_ok=mismatch_ok, norm_I=pg.norm_I, norm_II=pg.norm_II, split_error=pg.split_error,
        outside_residual=pg.outside_residual, preglue_w2p=pg.w2p, preglue_w2p_bound=w2p_bound,
        preglue_fit_residual=pg.fit_residual, u_minus_phi=u_phi, phi_minus_u=phis, distances=dists,
        triangle_ok=triangle_ok, cutoff_bound_ok=cutoff_ok, success=success, newton=rep, u=rep.u, flags=flags,
    )
