"""Bounded right inverse of the linearized operator.

For a linearization L = d_φℱ with no conj(h_ζ) term (P = A(φ) = 0) the
integral form

    Φ(h) = T(L h) + (I - T ∂̄) h = h + T(B1 h + B2 conj(h))

maps the map block to itself and satisfies ∂̄ Φ = L.  It is Fredholm of
index zero, so it is square after discretization.  Its kernel is removed by a
finite-rank stabilizer Σ g_i <v_i, ·> whose images g_i are holomorphic, which
leaves ∂̄ Φ̃ = L intact; then Q = Φ̃^{-1} T satisfies L Q = I.

When A(φ) ≠ 0 the pointwise real-linear substitution N(u) = u + A(φ) conj(u)
is applied first.  With B = (I - A conj(A))^{-1},

    N^{-1}(v) = B (v - A conj(v)),

and ℱ(N^{-1} v) = K v_ζ̄ + K0 conj(v_ζ) + K1 v + K2 conj(v), where K = I and
K0 = 0 at ψ = N(φ).  The linearization of ℱ∘N^{-1} at ψ therefore has no
conj(v_ζ) term, and Q_φ = N^{-1} ∘ Φ̃_ψ^{-1} ∘ T.

All matrices act on real coordinates ``[Re y; Im y]`` of the stacked modal
coordinates (component-major).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.optimize import minimize

from .basis import DiscMap, random_map
from .calculus import get_calculus
from .dbar import field_coords, grid_state, linearize_coords, map_coords, spec_for
from .errors import PrecondError, StabilizationError
from .modal import realify, to_complex, to_real
from .structure import check_admissible

log = logging.getLogger(__name__)

__all__ = [
    "SubstitutionData",
    "substitution",
    "assemble_phi",
    "Stabilized",
    "stabilize",
    "RightInverse",
    "right_inverse",
    "KernelReport",
    "kernel_dim",
    "LinearMap",
    "cauchy_green_map",
    "op_norm",
    "hilbert_norm",
]

P_ZERO_TOL = 1e-12


def _block_real(M, n):
    """Real form of the block-diagonal complex-linear map diag(M, ..., M)."""
    return realify(np.kron(np.eye(n), M))


def _pair_real(D1, D2, frame):
    """Real matrix of y -> P (D1 ⊙ V y + D2 ⊙ conj(V y)) for pointwise matrix fields.

    ``D1``, ``D2`` have shape ``(npoints, n, n)``; ``frame`` is the block the
    map acts on (values in, projection out).
    """
    n = D1.shape[1]
    s = frame.size
    M1 = np.zeros((n * s, n * s), dtype=complex)
    M2 = np.zeros_like(M1)
    V, cV, PX = frame.V, np.conj(frame.V), frame.P
    for a in range(n):
        for b in range(n):
            blk = (slice(a * s, (a + 1) * s), slice(b * s, (b + 1) * s))
            if np.any(D1[:, a, b]):
                M1[blk] = PX @ (D1[:, a, b, None] * V)
            if np.any(D2[:, a, b]):
                M2[blk] = PX @ (D2[:, a, b, None] * cV)
    return realify(M1, M2)


# -- substitution ----------------------------------------------------------------


@dataclass
class SubstitutionData:
    """Fields of the substitution N(u) = u + A(φ) conj(u), sampled at the nodes.

    ``K``, ``K0``, ``K1``, ``K2`` are evaluated at ψ = N(φ);
    ``identity_error`` holds max |K - I| and max |K0|.
    """

    spec: object
    A_phi: np.ndarray
    B: np.ndarray
    K: np.ndarray
    K0: np.ndarray
    K1: np.ndarray
    K2: np.ndarray
    psi: DiscMap
    psi_tail: float
    identity_error: dict

    @property
    def trivial(self):
        return not np.any(self.A_phi)

    def N_values(self, u):
        """Pointwise N on node samples ``(npoints, n)``."""
        return u + np.einsum("pab,pb->pa", self.A_phi, np.conj(u))

    def N_inv_values(self, v):
        w = v - np.einsum("pab,pb->pa", self.A_phi, np.conj(v))
        return np.einsum("pab,pb->pa", self.B, w)

    def N(self, u):
        X = get_calculus(self.spec).X
        y = map_coords(u, self.spec)
        return DiscMap(X.to_monomial(X.project(self.N_values(X.values(y).T).T)))

    def N_inv(self, v):
        X = get_calculus(self.spec).X
        y = map_coords(v, self.spec)
        return DiscMap(X.to_monomial(X.project(self.N_inv_values(X.values(y).T).T)))

    def n_inv_matrix(self):
        """Real matrix of N^{-1} on the map block (projected)."""
        X = get_calculus(self.spec).X
        BA = self.B @ self.A_phi
        return _pair_real(self.B, -BA, X)


def substitution(structure, phi, spec=None, eps_adm=1e-6):
    """Substitution data along ``phi``.

    Raises
    ------
    AdmissibilityViolation
        If det(I - A(φ) conj(A(φ))) falls below ``eps_adm`` at a node.
    """
    spec = spec_for(phi, spec)
    return _substitution_coords(structure, map_coords(phi, spec), spec, eps_adm)


def _substitution_coords(structure, y, spec, eps_adm=1e-6):
    C = get_calculus(spec)
    g = grid_state(y, spec)
    structure.check_domain(g.u)
    A = structure.A(g.u)
    check_admissible(A, points=spec.nodes, eps=eps_adm)
    n = A.shape[1]
    I = np.eye(n)
    Ab = np.conj(A)
    B = np.linalg.inv(I - A @ Ab)

    dz, dzb = structure.dA(g.u)
    # ζ- and conj(ζ)-derivatives of the field A(φ(ζ))
    A_z = np.einsum("pabj,pj->pab", dz, g.uz) + np.einsum("pabj,pj->pab", dzb, np.conj(g.uzb))
    A_zb = np.einsum("pabj,pj->pab", dz, g.uzb) + np.einsum("pabj,pj->pab", dzb, np.conj(g.uz))
    B_z = B @ (A_z @ Ab + A @ np.conj(A_zb)) @ B
    B_zb = B @ (A_zb @ Ab + A @ np.conj(A_z)) @ B
    BA_z = B_z @ A + B @ A_z
    BA_zb = B_zb @ A + B @ A_zb

    psi_vals = g.u + np.einsum("pab,pb->pa", A, np.conj(g.u))
    back = np.einsum("pab,pb->pa", B, psi_vals - np.einsum("pab,pb->pa", A, np.conj(psi_vals)))
    A_back = structure.A(back)
    K = B - A_back @ np.conj(B) @ Ab
    K0 = -B @ A + A_back @ np.conj(B)
    K1 = B_zb - A_back @ np.conj(BA_z)
    K2 = -BA_zb + A_back @ np.conj(B_z)
    err = {
        "K_minus_I": float(np.abs(K - I).max()),
        "K0": float(np.abs(K0).max()),
        "roundtrip": float(np.abs(back - g.u).max()),
    }
    ypsi = C.X.project(psi_vals.T)
    fitted = C.X.values(ypsi)
    num = np.sqrt(spec.integrate(np.sum(np.abs(psi_vals.T - fitted) ** 2, axis=0)))
    den = np.sqrt(spec.integrate(np.sum(np.abs(psi_vals) ** 2, axis=1)))
    tail = float(num / den) if den > 0 else 0.0
    psi = DiscMap(C.X.to_monomial(ypsi)) if np.any(A) else DiscMap(C.X.to_monomial(y))
    return SubstitutionData(spec, A, B, K, K0, K1, K2, psi, tail, err)


# -- Φ and stabilization ------------------------------------------------------------


def _phi_from_real(Lreal, spec, n, pure_dbar=False):
    C = get_calculus(spec)
    if pure_dbar:
        # T ∂̄ + (I - T ∂̄) is the identity by definition
        return np.eye(2 * n * C.X.size)
    return _block_real(C.T, n) @ Lreal + _block_real(C.hol_proj, n)


def _is_pure_dbar(L):
    return not (np.any(L.P) or np.any(L.B1) or np.any(L.B2))


def assemble_phi(L_op):
    """Dense real matrix of Φ(h) = h + T(B1 h + B2 conj(h)) on the map block.

    Raises
    ------
    PrecondError
        If the linearization has a conj(h_ζ) term; use the substitution path.
    """
    if L_op.max_abs_P > P_ZERO_TOL:
        raise PrecondError(
            f"linearization has a conj(h_ζ) term (max |A(φ)| = {L_op.max_abs_P:.3g}); substitute first"
        )
    return _phi_from_real(L_op.assembled, L_op.spec, L_op.n, _is_pure_dbar(L_op))


@dataclass
class Stabilized:
    """Φ̃ = Φ + Σ scale · g_i v_iᵀ and a description of the added part."""

    matrix: np.ndarray
    rank: int
    spectrum: np.ndarray
    generators: list = field(default_factory=list)
    generator_vectors: list = field(default_factory=list)
    right_vectors: list = field(default_factory=list)
    scale: float = 0.0
    cond: float = 1.0


def holomorphic_generators(spec, n):
    """Real coordinate vectors of ζ^m and iζ^m per component, lowest degree first.

    Returns a list of ``(label, index)`` with ``label = (m, component, phase)``.
    """
    C = get_calculus(spec)
    nx = C.X.size
    half = n * nx
    out = []
    for m, col in enumerate(C.holomorphic_columns()):
        for a in range(n):
            idx = a * nx + col
            out.append(((m, a, "1"), idx))
            out.append(((m, a, "i"), half + idx))
    return out


def stabilize(Phi, threshold=1e-6, generators=None, max_cond=1e6, min_overlap=1e-2):
    """Make Φ invertible by a finite-rank addition with prescribed images.

    Parameters
    ----------
    Phi : ndarray
        Square real matrix.
    threshold : float
        Singular values below ``threshold * σ_max`` count as kernel.
    generators : list of (label, vector or index), optional
        Candidate images, tried in order.  Default: unit vectors.

    Raises
    ------
    StabilizationError
        If no admissible choice of images makes Φ̃ well conditioned.
    """
    Phi = np.asarray(Phi, dtype=float)
    m = Phi.shape[0]
    U, s, Vt = np.linalg.svd(Phi)
    smax = s[0] if s.size and s[0] > 0 else 1.0
    r = int(np.sum(s < threshold * smax))
    if r == 0:
        return Stabilized(Phi, 0, s, cond=float(s[0] / s[-1]) if s[-1] > 0 else np.inf)

    if generators is None:
        generators = [((k,), k) for k in range(m)]
    Ur = U[:, m - r:]
    scale = smax * 1e-2
    chosen, vecs = [], []
    for label, g in generators:
        if np.isscalar(g) or isinstance(g, (int, np.integer)):
            v = np.zeros(m)
            v[int(g)] = 1.0
        else:
            v = np.asarray(g, dtype=float)
            v = v / np.linalg.norm(v)
        trial = np.column_stack(vecs + [v])
        sv = np.linalg.svd(Ur.T @ trial, compute_uv=False)
        if sv[-1] >= min_overlap:
            chosen.append(label)
            vecs.append(v)
            if len(vecs) == r:
                break
    if len(vecs) < r:
        raise StabilizationError(f"found only {len(vecs)} of {r} usable stabilizer images")
    Vr = Vt[m - r:].T
    G = np.column_stack(vecs)
    Phit = Phi + scale * G @ Vr.T
    st = np.linalg.svd(Phit, compute_uv=False)
    cond = float(st[0] / st[-1]) if st[-1] > 0 else np.inf
    if cond >= max_cond:
        raise StabilizationError(f"stabilized operator has condition number {cond:.3g} ≥ {max_cond:.0e}")
    return Stabilized(Phit, r, s, chosen, vecs, [Vr[:, i] for i in range(r)], scale, cond)


# -- linear maps fields -> maps and their norms -----------------------------------


@dataclass
class LinearMap:
    """A real-linear map from field coordinates to map coordinates."""

    matrix: np.ndarray
    spec: object
    n: int

    def apply_coords(self, yf):
        v = self.matrix @ to_real(yf)
        C = get_calculus(self.spec)
        return to_complex(v).reshape(self.n, *C.X.shape)


def cauchy_green_map(spec, n=1):
    """T as a :class:`LinearMap`."""
    return LinearMap(_block_real(get_calculus(spec).T, n), spec, n)


def _lp(vals, w, p):
    mag = np.sqrt(np.sum(np.abs(vals) ** 2, axis=0))
    return float(np.sum(w * mag**p) ** (1.0 / p))


def _lp_grad(vals, w, p, N):
    """Real gradient (as complex array) of the L^p norm w.r.t. the samples."""
    if N == 0.0:
        return np.zeros_like(vals)
    mag = np.sqrt(np.sum(np.abs(vals) ** 2, axis=0))
    return (N ** (1.0 - p)) * (w * mag ** (p - 2.0))[None, :] * vals


class _RatioObjective:
    """‖Q f‖_{W^{1,p}} / ‖f‖_{L^p} and its gradient on real field coordinates."""

    def __init__(self, Q, p):
        C = get_calculus(Q.spec)
        self.Q, self.p, self.n = Q, p, Q.n
        self.X, self.Y = C.X, C.Y
        self.w = Q.spec.weights

    def _values(self, x):
        n = self.n
        yf = to_complex(x).reshape(n, self.Y.size)
        yu = to_complex(self.Q.matrix @ x).reshape(n, self.X.size)
        return yf @ self.Y.V.T, [yu @ self.X.V.T, yu @ self.X.Vz.T, yu @ self.X.Vzb.T]

    def ratio(self, x):
        f, us = self._values(x)
        Nf = _lp(f, self.w, self.p)
        return sum(_lp(u, self.w, self.p) for u in us) / Nf if Nf > 0 else 0.0

    def neg_log_and_grad(self, x):
        p, w = self.p, self.w
        f, us = self._values(x)
        Nf = _lp(f, w, p)
        Nus = [_lp(u, w, p) for u in us]
        W = sum(Nus)
        gf = _lp_grad(f, w, p, Nf) @ np.conj(self.Y.V)
        gx_f = to_real(gf)
        gu = sum(_lp_grad(u, w, p, N) @ np.conj(M) for u, N, M in zip(us, Nus, (self.X.V, self.X.Vz, self.X.Vzb)))
        gx_u = self.Q.matrix.T @ to_real(gu)
        val = -np.log(W) + np.log(Nf)
        return val, -gx_u / W + gx_f / Nf


def op_norm(Q, p=4.0, probes=16, seed=0, ascent_steps=60):
    """Lower estimate of ‖Q‖ as a map L^p → W^{1,p}.

    Random probes in orthonormal coordinates, then L-BFGS ascent of the
    norm ratio from the best probe.

    Parameters
    ----------
    Q : LinearMap or RightInverse
    """
    if p < 2:
        raise ValueError("p must be at least 2")
    Q = getattr(Q, "operator", Q)
    obj = _RatioObjective(Q, p)
    rng = np.random.default_rng(seed)
    dim = Q.matrix.shape[1]
    best, bx = -np.inf, None
    for _ in range(max(1, probes)):
        x = rng.standard_normal(dim)
        ratio = obj.ratio(x)
        if ratio > best:
            best, bx = ratio, x
    if ascent_steps > 0:
        res = minimize(obj.neg_log_and_grad, bx, jac=True, method="L-BFGS-B", options={"maxiter": ascent_steps})
        best = max(best, obj.ratio(res.x))
    return float(best)


def hilbert_norm(Q):
    """Largest singular value of Q from L² to the norm (‖u‖² + ‖u_ζ‖² + ‖u_ζ̄‖²)^{1/2}.

    At p = 2 the W^{1,2} sum norm is at most √3 times this.
    """
    Q = getattr(Q, "operator", Q)
    C = get_calculus(Q.spec)
    X, w = C.X, Q.spec.weights
    G = sum((M.conj().T * w) @ M for M in (X.V, X.Vz, X.Vzb))
    Gr = _block_real(G, Q.n)
    lam = sla.eigvalsh(Q.matrix.T @ Gr @ Q.matrix)
    return float(np.sqrt(max(lam[-1], 0.0)))


# -- right inverse ------------------------------------------------------------------


@dataclass
class RightInverse:
    """Q_φ with d_φℱ Q_φ = I on the field block."""

    spec: object
    n: int
    operator: LinearMap
    rank: int
    generators: list
    spectrum: np.ndarray
    cond: float
    uses_substitution: bool
    identity_error: float = float("nan")
    norm_estimate: float = float("nan")
    p: float = 4.0
    substitution: SubstitutionData = None

    def apply_coords(self, yf):
        return self.operator.apply_coords(yf)

    def apply(self, f):
        X = get_calculus(self.spec).X
        return DiscMap(X.to_monomial(self.apply_coords(field_coords(f, self.spec))))


def _linear_real(structure, y, spec, eps_adm):
    """Real matrix of d_φℱ and the substitution data (None when A(φ) = 0)."""
    L = linearize_coords(structure, y, spec)
    check_admissible(L.P, points=spec.nodes, eps=eps_adm)
    if L.max_abs_P <= P_ZERO_TOL:
        return L, L.assembled, None, None
    sub = _substitution_coords(structure, y, spec, eps_adm)
    Ninv = sub.n_inv_matrix()
    return L, L.assembled @ Ninv, Ninv, sub


def right_inverse_coords(structure, y, spec, p=4.0, threshold=1e-6, norm_probes=16, check=True, seed=0, eps_adm=1e-6):
    n = y.shape[0]
    C = get_calculus(spec)
    L, Lpsi, Ninv, sub = _linear_real(structure, y, spec, eps_adm)
    Phi = _phi_from_real(Lpsi, spec, n, _is_pure_dbar(L))
    st = stabilize(Phi, threshold, generators=holomorphic_generators(spec, n))
    Tr = _block_real(C.T, n)
    if _is_pure_dbar(L):
        Qm = Tr.copy()
    else:
        Qm = sla.lu_solve(sla.lu_factor(st.matrix), Tr)
        if Ninv is not None:
            Qm = Ninv @ Qm
    op = LinearMap(Qm, spec, n)
    out = RightInverse(
        spec, n, op, st.rank, st.generators, st.spectrum, st.cond, Ninv is not None, p=p, substitution=sub
    )
    if check:
        out.identity_error = _identity_error(L, op, spec, n, p, seed)
        if not out.identity_error <= 1e-6:
            raise StabilizationError(f"right-inverse identity fails: relative error {out.identity_error:.3g}")
    if norm_probes:
        out.norm_estimate = op_norm(op, p, norm_probes, seed)
    return out


def _identity_error(L, op, spec, n, p, seed, k=5):
    C = get_calculus(spec)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(k):
        f = random_map(rng, n, spec.field_shape)
        yf = C.Y.from_monomial(f.coeffs)
        back = L.apply_coords(op.apply_coords(yf))
        num = _lp(C.Y.values(back - yf), spec.weights, p)
        den = _lp(C.Y.values(yf), spec.weights, p)
        worst = max(worst, num / den)
    return float(worst)


def right_inverse(structure, phi, spec=None, p=4.0, threshold=1e-6, norm_probes=16, check=True, seed=0, eps_adm=1e-6):
    """Right inverse Q_φ of d_φℱ.

    Parameters
    ----------
    structure : StructureSpec
    phi : DiscMap
    p : float
        Exponent for the attached norm estimate and the identity check.
    threshold : float
        Relative singular-value threshold for the stabilizer.
    norm_probes : int
        Probes for :func:`op_norm`; 0 skips the estimate.
    check : bool
        Verify d_φℱ(Q f) = f on 5 random fields.

    Raises
    ------
    AdmissibilityViolation, StabilizationError
    """
    spec = spec_for(phi, spec)
    return right_inverse_coords(structure, map_coords(phi, spec), spec, p, threshold, norm_probes, check, seed, eps_adm)


# -- kernel ------------------------------------------------------------------------


@dataclass
class KernelReport:
    dim: int
    spectrum: np.ndarray
    threshold: float
    vectors: np.ndarray
    spec: object
    n: int

    @property
    def regular(self):
        return self.dim == 0

    def kernel_maps_coords(self):
        """Kernel vectors as complex modal coordinates ``(dim, n, J, K+1)``."""
        C = get_calculus(self.spec)
        return np.array([to_complex(v).reshape(self.n, *C.X.shape) for v in self.vectors.T])

    def gap(self):
        """Ratio of the first retained singular value to σ_max."""
        s = self.spectrum
        return float(s[-self.dim - 1] / s[0]) if self.dim < len(s) else 0.0


def kernel_dim(structure, phi, threshold=1e-6, spec=None):
    """Count of singular values of d_φ𝒢 = T d_φℱ + (I - T∂̄) below ``threshold σ_max``."""
    spec = spec_for(phi, spec)
    return kernel_dim_coords(structure, map_coords(phi, spec), spec, threshold)


def kernel_dim_coords(structure, y, spec, threshold=1e-6):
    n = y.shape[0]
    L = linearize_coords(structure, y, spec)
    Phi = _phi_from_real(L.assembled, spec, n, _is_pure_dbar(L))
    _, s, Vt = np.linalg.svd(Phi)
    k = int(np.sum(s < threshold * s[0]))
    return KernelReport(k, s, threshold, Vt[len(s) - k:].T, spec, n)
