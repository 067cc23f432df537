import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pseudodisc.basis import DiscMap, DiscretizationSpec, random_map
from pseudodisc.calculus import get_calculus
from pseudodisc.dbar import LinearizedOp, linearize, map_coords
from pseudodisc.errors import PrecondError, StabilizationError
from pseudodisc.norms import lp_norm_values, sobolev_norm_coords
from pseudodisc.rightinv import (
    _block_real,
    assemble_phi,
    cauchy_green_map,
    hilbert_norm,
    holomorphic_generators,
    kernel_dim,
    op_norm,
    right_inverse,
    stabilize,
    substitution,
)
from pseudodisc.structure import ExampleR6Structure, PolynomialStructure, StandardStructure

from conftest import ALPHA_ZBAR, POLY2, mono, r6_disc

CONST02 = PolynomialStructure(1, {(0, 0): [(0.2, (0,), (0,))]})


def _residual_identity(structure, phi, spec, seed=0, k=3):
    """Worst relative L⁴ error of d_φℱ(Q f) = f over random fields, in modal coordinates."""
    Q = right_inverse(structure, phi, spec, norm_probes=0, check=False)
    L = linearize(structure, phi, spec)
    Y = get_calculus(spec).Y
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(k):
        yf = Y.from_monomial(random_map(rng, phi.n, spec.field_shape).coeffs)
        back = L.apply_coords(Q.apply_coords(yf))
        worst = max(worst, lp_norm_values(Y.values(back - yf), spec) / lp_norm_values(Y.values(yf), spec))
    return worst, Q


# -- substitution --------------------------------------------------------------


def test_substitution_trivial_standard(spec8):
    sub = substitution(StandardStructure(1), mono(1, 0, spec8.map_shape), spec8)
    assert sub.trivial
    assert sub.identity_error["K_minus_I"] == 0.0 and sub.identity_error["K0"] == 0.0


def test_substitution_trivial_r6_base(spec12):
    assert substitution(ExampleR6Structure(), r6_disc(spec12), spec12).trivial


def test_substitution_constant(spec8):
    # A = 0.2: ψ = ζ + 0.2 conj(ζ), B = 1/(1 - 0.04)
    sub = substitution(CONST02, mono(1, 0, spec8.map_shape), spec8)
    ref = mono(1, 0, sub.psi.shape) + mono(0, 1, sub.psi.shape, coeff=0.2)
    # monomial coefficients at d = 8 carry ~1e-11 conversion noise
    assert np.abs(sub.psi.coeffs - ref.coeffs).max() < 1e-9
    assert np.abs(sub.B - 1.0 / 0.96).max() < 1e-14
    assert sub.identity_error["K_minus_I"] < 1e-14


def test_substitution_identities_nonconstant(spec8):
    phi = mono(1, 0, spec8.map_shape) + mono(0, 2, spec8.map_shape, coeff=0.05)
    sub = substitution(ALPHA_ZBAR, phi, spec8)
    assert not sub.trivial
    assert sub.identity_error["K_minus_I"] < 1e-8
    assert sub.identity_error["K0"] < 1e-8
    assert sub.identity_error["roundtrip"] < 1e-12


def test_substitution_N_inverse(spec8, rng):
    phi = mono(1, 0, spec8.map_shape)
    sub = substitution(ALPHA_ZBAR, phi, spec8)
    u = random_map(rng, 1, (3, 3)).resized(spec8.map_shape)
    X = get_calculus(spec8).X
    vals = X.values(map_coords(u, spec8)).T
    back = sub.N_inv_values(sub.N_values(vals))
    assert np.abs(back - vals).max() < 1e-13


# -- Φ and stabilization -------------------------------------------------------


def test_assemble_phi_standard_is_identity(spec8):
    L = linearize(StandardStructure(2), DiscMap.zeros(2, spec8.map_shape), spec8)
    Phi = assemble_phi(L)
    assert np.array_equal(Phi, np.eye(Phi.shape[0]))


def test_assemble_phi_rejects_conj_term(spec8):
    L = linearize(ALPHA_ZBAR, mono(1, 0, spec8.map_shape), spec8)
    with pytest.raises(PrecondError):
        assemble_phi(L)


def test_assemble_phi_small_lower_order_well_conditioned(spec8):
    # A = 0.1 z2 in the (0, 0) entry vanishes along φ = (ζ, 0) but B1 does not
    S = PolynomialStructure(2, {(0, 0): [(0.1, (0, 1), (0, 0))]})
    sh = spec8.map_shape
    phi = DiscMap.stack([mono(1, 0, sh), DiscMap.zeros(1, sh)])
    L = linearize(S, phi, spec8)
    assert not np.any(L.P) and np.any(L.B1)
    Phi = assemble_phi(L)
    assert np.linalg.cond(Phi) < 10


@given(st.integers(0, 10_000))
def test_assemble_phi_random_small_fields(seed):
    # pointwise matrix fields B1, B2 of norm 0.1, A(φ) = 0
    spec = DiscretizationSpec(8)
    rng = np.random.default_rng(seed)
    n, npts = 2, spec.npoints
    fields = []
    for _ in range(2):
        B = rng.standard_normal((npts, n, n)) + 1j * rng.standard_normal((npts, n, n))
        fields.append(0.1 * B / np.linalg.norm(B, ord=2, axis=(1, 2))[:, None, None])
    L = LinearizedOp(spec, np.zeros((npts, n, n), complex), *fields)
    assert np.linalg.cond(assemble_phi(L)) < 10


def test_phi_solves_dbar(spec12):
    # ∂̄ Φ h = d_φℱ h for the r6 base disc
    L = linearize(ExampleR6Structure(), r6_disc(spec12), spec12)
    Phi = assemble_phi(L)
    C = get_calculus(spec12)
    D = _block_real(C.dbar, 3)
    assert np.abs(D @ Phi - L.assembled).max() < 1e-11


def test_stabilize_regular():
    st = stabilize(np.diag([3.0, 2.0, 1.0]))
    assert st.rank == 0 and st.cond == pytest.approx(3.0)


def test_stabilize_rank_one_projector():
    v = np.array([1.0, 2.0, 2.0]) / 3.0
    Phi = np.eye(3) - np.outer(v, v)
    st = stabilize(Phi)
    assert st.rank == 1
    assert np.linalg.matrix_rank(st.matrix) == 3
    assert st.cond < 1e3


def test_stabilize_no_generators():
    Phi = np.diag([1.0, 0.0])
    with pytest.raises(StabilizationError):
        stabilize(Phi, generators=[("e1", 0)])


def test_holomorphic_generators(spec8):
    C = get_calculus(spec8)
    D = _block_real(C.dbar, 2)
    gens = holomorphic_generators(spec8, 2)
    assert len(gens) == 2 * 2 * (spec8.d + 1)
    for _, idx in gens:
        e = np.zeros(D.shape[1])
        e[idx] = 1.0
        assert np.abs(D @ e).max() < 1e-12


def test_r6_stabilizer_rank_two(spec12):
    _, Q = _residual_identity(ExampleR6Structure(), r6_disc(spec12), spec12)
    assert Q.rank == 2
    assert all(g[0] >= 0 for g in Q.generators)


# -- right inverse -------------------------------------------------------------


def test_right_inverse_standard_is_T(spec8):
    Q = right_inverse(StandardStructure(1), mono(1, 0, spec8.map_shape), spec8, norm_probes=0)
    assert np.array_equal(Q.operator.matrix, cauchy_green_map(spec8).matrix)
    assert Q.rank == 0 and not Q.uses_substitution


@pytest.mark.parametrize(
    "structure, n",
    [(StandardStructure(2), 2), (ALPHA_ZBAR, 1), (POLY2, 2)],
)
def test_right_inverse_identity(structure, n, spec8):
    sh = spec8.map_shape
    rng = np.random.default_rng(5)
    phi = DiscMap.stack([mono(1, 0, sh) * (0.5 + 0.1 * a) for a in range(n)])
    phi = phi + random_map(rng, n, (2, 2), scale=0.02).resized(sh)
    err, Q = _residual_identity(structure, phi, spec8)
    assert err < 1e-9
    assert Q.uses_substitution == (not structure.is_standard())


def test_right_inverse_r6(spec12):
    err, Q = _residual_identity(ExampleR6Structure(), r6_disc(spec12), spec12)
    assert err < 1e-9
    assert not Q.uses_substitution


def test_right_inverse_reports_identity_error(spec8):
    Q = right_inverse(ALPHA_ZBAR, mono(1, 0, spec8.map_shape), spec8, norm_probes=0)
    assert Q.identity_error < 1e-9


# -- kernel --------------------------------------------------------------------


def test_kernel_standard(spec8):
    rep = kernel_dim(StandardStructure(1), mono(1, 0, spec8.map_shape), spec=spec8)
    assert rep.dim == 0 and rep.regular


@pytest.mark.parametrize("d", [12, 14, 16])
def test_kernel_r6(d):
    spec = DiscretizationSpec(d)
    rep = kernel_dim(ExampleR6Structure(), r6_disc(spec), spec=spec)
    assert rep.dim == 2
    assert rep.gap() > 1e-3


def test_kernel_r6_scaled_baseline(spec12):
    rep = kernel_dim(ExampleR6Structure(0.5), r6_disc(spec12), spec=spec12)
    assert rep.dim == 0


def test_kernel_vectors_are_null(spec12):
    rep = kernel_dim(ExampleR6Structure(), r6_disc(spec12), spec=spec12)
    L = linearize(ExampleR6Structure(), r6_disc(spec12), spec12)
    Phi = assemble_phi(L)
    assert np.abs(Phi @ rep.vectors).max() < 1e-6 * rep.spectrum[0]
    assert rep.kernel_maps_coords().shape == (2, 3, *get_calculus(spec12).X.shape)


# -- norms of linear maps ------------------------------------------------------


def test_op_norm_T_stable_in_d():
    vals = [op_norm(cauchy_green_map(DiscretizationSpec(d))) for d in (10, 12, 14)]
    assert max(vals) / min(vals) < 1.2


def test_op_norm_standard_Q_equals_T(spec8):
    Q = right_inverse(StandardStructure(1), mono(1, 0, spec8.map_shape), spec8)
    assert Q.norm_estimate == op_norm(cauchy_green_map(spec8))


def test_op_norm_p2_below_hilbert(spec8):
    T = cauchy_green_map(spec8)
    assert op_norm(T, p=2.0) <= np.sqrt(3.0) * hilbert_norm(T) * (1 + 1e-12)


def test_op_norm_is_lower_bound_of_random_ratios(spec8, rng):
    T = cauchy_green_map(spec8)
    est = op_norm(T)
    Y = get_calculus(spec8).Y
    for _ in range(10):
        f = random_map(rng, 1, spec8.field_shape)
        yf = Y.from_monomial(f.coeffs)
        ratio = sobolev_norm_coords(T.apply_coords(yf), spec8, 4.0) / lp_norm_values(Y.values(yf), spec8, 4.0)
        assert ratio <= est * (1 + 1e-9)


def test_q_norm_continuous_in_phi():
    spec = DiscretizationSpec(10)
    sh = spec.map_shape
    phi = mono(1, 0, sh)
    dl = mono(0, 1, sh) + mono(2, 0, sh, coeff=0.5)
    n0 = right_inverse(ALPHA_ZBAR, phi, spec).norm_estimate
    for t in (1e-2, 1e-3):
        nt = right_inverse(ALPHA_ZBAR, phi + dl * t, spec).norm_estimate
        # the estimator is an ascent; its own noise is about 1e-3 relative
        assert abs(nt - n0) <= 2e-3 * n0
