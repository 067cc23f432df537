"""Newton-Picard correction of a near-holomorphic disc.

Iterates x_{k+1} = x_k - Q_φ ℱ(x_k) with the right inverse frozen at the
initial disc φ.  With c0 ≥ max(‖dφ‖_{L^p}, ‖Q_φ‖) and c a Lipschitz
constant of φ̃ ↦ d_φ̃ℱ, the choice

    η = min(1, 1/(2 c c0)),    δ = η / (4 c0)

guarantees convergence to a zero u of ℱ with ‖u - φ‖_{W^{1,p}} ≤ 2 c0 ‖ℱ(φ)‖_{L^p}
whenever ‖ℱ(φ)‖_{L^p} < δ.  The solver runs outside that regime too and flags it.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .basis import DiscMap, random_map
from .calculus import get_calculus
from .dbar import linearize_coords, map_coords, residual_coords, spec_for
from .errors import DiscretizationError, DivergenceError, DomainError
from .norms import lp_norm_values, sobolev_norm_coords
from .rightinv import right_inverse_coords

log = logging.getLogger(__name__)

__all__ = ["NewtonConfig", "NewtonReport", "estimate_lipschitz", "solve"]


@dataclass(frozen=True)
class NewtonConfig:
    """Solver settings.

    ``max_step`` caps the W^{1,p} size of a single correction (trust region);
    ``refresh_q`` recomputes the right inverse at every iterate (full Newton).
    """

    p: float = 4.0
    tol: float = 1e-9
    maxiter: int = 50
    lipschitz_probes: int = 8
    norm_probes: int = 16
    max_step: float | None = None
    refresh_q: bool = False
    seed: int = 0
    threshold: float = 1e-6
    eps_adm: float = 1e-6
    max_tail: float = 1e-4
    growth_limit: int = 3

    def __post_init__(self):
        if not self.p > 2:
            raise ValueError("p must exceed 2")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.maxiter < 0 or self.lipschitz_probes < 1:
            raise ValueError("maxiter must be ≥ 0 and lipschitz_probes ≥ 1")

    def to_dict(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


@dataclass
class NewtonReport:
    c0: float
    c: float
    eta: float
    delta: float
    dphi_norm: float
    q_norm: float
    initial_residual: float
    residuals: list = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    u: DiscMap = None
    u_coords: np.ndarray = field(default=None, repr=False)
    step_norm: float = float("nan")
    bound: float = float("nan")
    bound_ok: bool = False
    hypothesis_ok: bool = False
    kernel_rank: int = 0
    flags: list = field(default_factory=list)
    message: str = ""

    @property
    def contraction_ratios(self):
        r = self.residuals
        return [r[k + 1] / r[k] if r[k] > 0 else 0.0 for k in range(len(r) - 1)]

    @property
    def final_residual(self):
        return self.residuals[-1] if self.residuals else float("nan")

    def to_dict(self, include_map=True):
        out = {
            "c0": self.c0,
            "c": self.c,
            "eta": self.eta,
            "delta": self.delta,
            "dphi_norm": self.dphi_norm,
            "q_norm": self.q_norm,
            "initial_residual": self.initial_residual,
            "residuals": list(self.residuals),
            "contraction_ratios": self.contraction_ratios,
            "iterations": self.iterations,
            "converged": self.converged,
            "step_norm": self.step_norm,
            "bound": self.bound,
            "bound_ok": self.bound_ok,
            "hypothesis_ok": self.hypothesis_ok,
            "stabilizer_rank": self.kernel_rank,
            "flags": list(self.flags),
            "message": self.message,
        }
        if include_map and self.u is not None:
            out["u"] = self.u.to_dict()
        return out


def _random_direction(rng, n, spec, p):
    """Random smooth map of unit W^{1,p} norm, in modal coordinates."""
    J, K = spec.map_shape
    m = random_map(rng, n, (min(J, 4), min(K, 4)))
    y = map_coords(m.resized(spec.map_shape), spec)
    return y / sobolev_norm_coords(y, spec, p)


def _fixed_directions(n, spec, p):
    """Unit W^{1,p} maps c·ζ^j conj(ζ)^k, j + k ≤ 1, c ∈ {1, i}, one component each."""
    out = []
    for a in range(n):
        for j, k in ((0, 0), (1, 0), (0, 1)):
            for c in (1.0, 1j):
                m = DiscMap.monomial(j, k, spec.map_shape, n=n, component=a, coeff=c)
                yv = map_coords(m, spec)
                out.append(yv / sobolev_norm_coords(yv, spec, p))
    return out


def _lipschitz_coords(structure, y, spec, probes=8, p=4.0, seed=0, sizes=(0.1, 0.01)):
    if structure.is_standard():
        return 0.0
    rng = np.random.default_rng(seed)
    n = y.shape[0]
    L = linearize_coords(structure, y, spec)
    Y = get_calculus(spec).Y
    fixed = _fixed_directions(n, spec, p)
    rand = [(_random_direction(rng, n, spec, p), _random_direction(rng, n, spec, p)) for _ in range(probes)]
    groups = [(dl, fixed) for dl in fixed] + [(dl, [h]) for dl, h in rand]
    base = {}
    best = 0.0
    for dlt, hs in groups:
        for s in sizes:
            Lt = linearize_coords(structure, y + s * dlt, spec)
            for h in hs:
                key = id(h)
                if key not in base:
                    base[key] = L.apply_coords(h)
                diff = Lt.apply_coords(h) - base[key]
                best = max(best, lp_norm_values(Y.values(diff), spec, p) / s)
    return 2.0 * best


def estimate_lipschitz(structure, phi, probes=8, p=4.0, seed=0, spec=None):
    """Safety factor 2 times the largest observed ‖(d_φ̃ℱ - d_φℱ)h‖ / (‖φ̃ - φ‖ ‖h‖).

    Perturbations have W^{1,p} size 0.1 and 0.01.  Besides ``probes``
    random smooth pairs, all pairs of the unit maps c, cζ, c conj(ζ)
    (c ∈ {1, i}, one component at a time) are tried, which makes the estimate
    largely seed independent.  The standard structure gives exactly 0.
    """
    spec = spec_for(phi, spec)
    return _lipschitz_coords(structure, map_coords(phi, spec), spec, probes, p, seed)


def _field_norm(yf, spec, p):
    return lp_norm_values(get_calculus(spec).Y.values(yf), spec, p)


def solve_coords(structure, y0, spec, cfg):
    p = cfg.p
    X = get_calculus(spec).X
    F, _ = residual_coords(structure, y0, spec, cfg.max_tail)
    r0 = _field_norm(F, spec, p)

    Q = right_inverse_coords(
        structure, y0, spec, p=p, threshold=cfg.threshold, norm_probes=cfg.norm_probes, seed=cfg.seed, eps_adm=cfg.eps_adm
    )
    dphi = lp_norm_values(X.values_dz(y0), spec, p) + lp_norm_values(X.values_dzbar(y0), spec, p)
    c0 = max(dphi, Q.norm_estimate)
    c = _lipschitz_coords(structure, y0, spec, cfg.lipschitz_probes, p, cfg.seed)
    eta = 1.0 if c == 0 else min(1.0, 1.0 / (2.0 * c * c0))
    delta = eta / (4.0 * c0)

    rep = NewtonReport(c0=c0, c=c, eta=eta, delta=delta, dphi_norm=dphi, q_norm=Q.norm_estimate, initial_residual=r0)
    rep.residuals.append(r0)
    rep.hypothesis_ok = r0 < delta
    rep.kernel_rank = Q.rank
    if not rep.hypothesis_ok:
        rep.flags.append("outside guaranteed regime")

    y = y0.copy()
    growth = 0
    try:
        while rep.residuals[-1] >= cfg.tol and rep.iterations < cfg.maxiter:
            if cfg.refresh_q and rep.iterations > 0:
                Q = right_inverse_coords(structure, y, spec, p=p, threshold=cfg.threshold, norm_probes=0, check=False)
            step = Q.apply_coords(F)
            if cfg.max_step is not None:
                size = sobolev_norm_coords(step, spec, p)
                if size > cfg.max_step:
                    step = step * (cfg.max_step / size)
            y = y - step
            F, _ = residual_coords(structure, y, spec, cfg.max_tail)
            r = _field_norm(F, spec, p)
            rep.iterations += 1
            growth = growth + 1 if r > rep.residuals[-1] else 0
            rep.residuals.append(r)
            if growth >= cfg.growth_limit:
                rep.message = f"residual grew on {growth} consecutive steps"
                _finish(rep, y, y0, spec, p, X)
                raise DivergenceError(rep.message, rep)
    except (DomainError, DiscretizationError) as exc:
        rep.message = f"iteration left the admissible set: {exc}"
        _finish(rep, y, y0, spec, p, X)
        raise DivergenceError(rep.message, rep) from exc

    rep.converged = rep.residuals[-1] < cfg.tol
    if not rep.converged:
        rep.message = f"no convergence in {cfg.maxiter} iterations"
    _finish(rep, y, y0, spec, p, X)
    return rep


def _finish(rep, y, y0, spec, p, X):
    rep.u_coords = y
    rep.u = DiscMap(X.to_monomial(y))
    rep.step_norm = sobolev_norm_coords(y - y0, spec, p)
    rep.bound = 2.0 * rep.c0 * rep.initial_residual
    rep.bound_ok = bool(rep.converged and rep.step_norm <= rep.bound)
    if any(t > 0.75 for t in rep.contraction_ratios):
        rep.flags.append("contraction ratio above 0.75")


def solve(structure, phi, cfg=None, spec=None):
    """Correct ``phi`` to a J-holomorphic disc.

    Returns
    -------
    NewtonReport

    Raises
    ------
    DivergenceError
        If the residual grows on ``cfg.growth_limit`` consecutive steps or the
        iterate leaves the region of the structure; the partial report is
        attached as ``exc.report``.
    """
    cfg = cfg or NewtonConfig()
    spec = spec_for(phi, spec)
    return solve_coords(structure, map_coords(phi, spec), spec, cfg)
