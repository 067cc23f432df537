import numpy as np
import pytest

from pseudodisc.basis import DiscretizationSpec, synthesize
from pseudodisc.dbar import apply_F
from pseudodisc.errors import DivergenceError
from pseudodisc.newton import NewtonConfig, estimate_lipschitz, solve
from pseudodisc.norms import NormKind, norm
from pseudodisc.structure import ExampleR6Structure, PolynomialStructure, StandardStructure

from conftest import ALPHA_ZBAR, mono, r6_disc

PROBES = np.array([0.3 + 0.2j, -0.5j, 0.1 - 0.7j, 0.0])


def test_standard_one_step(spec8):
    sh = spec8.map_shape
    phi = mono(1, 0, sh) + mono(0, 2, sh, coeff=0.05)
    rep = solve(StandardStructure(1), phi, spec=spec8)
    assert rep.converged and rep.iterations == 1
    assert rep.final_residual < 1e-10
    assert rep.c == 0.0 and rep.eta == 1.0
    assert rep.bound_ok and rep.step_norm <= 2 * rep.c0 * rep.initial_residual
    # the holomorphic projection drops the ζ̄² term
    v = synthesize(rep.u, PROBES)[:, 0]
    assert np.abs(v - PROBES).max() < 1e-12


def test_holomorphic_input_zero_steps(spec12):
    rep = solve(ExampleR6Structure(), r6_disc(spec12), spec=spec12)
    assert rep.iterations == 0 and rep.converged and rep.initial_residual == 0.0


def test_alpha_zbar_converges(spec8):
    sh = spec8.map_shape
    phi = mono(1, 0, sh) + mono(0, 2, sh, coeff=0.01)
    rep = solve(ALPHA_ZBAR, phi, spec=spec8)
    assert rep.converged
    assert max(rep.contraction_ratios) < 0.75
    assert rep.bound_ok
    F = apply_F(ALPHA_ZBAR, rep.u, spec8)
    assert norm(F, NormKind("Lp", 4.0), spec8) < 1e-9


def test_report_serializes(spec8):
    sh = spec8.map_shape
    rep = solve(StandardStructure(1), mono(1, 0, sh) + mono(0, 1, sh, coeff=0.01), spec=spec8)
    d = rep.to_dict()
    assert d["iterations"] == 1 and "u" in d
    assert "u" not in rep.to_dict(include_map=False)


def test_r6_consistent_across_degree():
    vals = []
    for d in (12, 16):
        spec = DiscretizationSpec(d)
        rep = solve(ExampleR6Structure(), r6_disc(spec, mono(0, 1, spec.map_shape, coeff=1e-3)), spec=spec)
        assert rep.converged
        vals.append(synthesize(rep.u, PROBES))
    assert np.abs(vals[0] - vals[1]).max() < 1e-5


def test_lipschitz_standard_zero(spec8):
    assert estimate_lipschitz(StandardStructure(1), mono(1, 0, spec8.map_shape), spec=spec8) == 0.0


def test_lipschitz_seed_stability(spec8):
    phi = mono(1, 0, spec8.map_shape)
    est = [estimate_lipschitz(ALPHA_ZBAR, phi, seed=s, spec=spec8) for s in range(3)]
    assert est[0] > 0
    assert max(est) / min(est) < 1.3


def test_lipschitz_scales_with_structure(spec8):
    phi = mono(1, 0, spec8.map_shape)
    S2 = PolynomialStructure(1, {(0, 0): [(0.2, (0,), (1,))]})
    a = estimate_lipschitz(ALPHA_ZBAR, phi, spec=spec8)
    b = estimate_lipschitz(S2, phi, spec=spec8)
    assert b == pytest.approx(2 * a, rel=1e-10)


def test_divergence_reports(spec8):
    sh = spec8.map_shape
    S = PolynomialStructure(1, {(0, 0): [(0.9, (0,), (3,))]})
    with pytest.raises(DivergenceError) as info:
        solve(S, mono(1, 0, sh) + mono(0, 2, sh, coeff=0.5), NewtonConfig(maxiter=30), spec8)
    rep = info.value.report
    assert not rep.converged and rep.message
    assert rep.residuals[0] > 0


def test_maxiter_zero_reports_unconverged(spec8):
    sh = spec8.map_shape
    rep = solve(StandardStructure(1), mono(1, 0, sh) + mono(0, 1, sh, coeff=0.1), NewtonConfig(maxiter=0), spec8)
    assert not rep.converged and rep.iterations == 0 and "no convergence" in rep.message


@pytest.mark.parametrize("kw", [{"p": 2.0}, {"tol": 0.0}, {"maxiter": -1}, {"lipschitz_probes": 0}])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        NewtonConfig(**kw)
