import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from pseudodisc.basis import DiscMap, DiscretizationSpec
from pseudodisc.structure import PolynomialStructure

settings.register_profile(
    "pkg",
    max_examples=25,
    deadline=None,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("pkg")

ACCEPTANCE_SUMMARY = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_SUMMARY:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_SUMMARY:
            terminalreporter.write_line(line)

ALPHA_ZBAR = PolynomialStructure(1, {(0, 0): [(0.1, (0,), (1,))]})
POLY2 = PolynomialStructure(
    2,
    {
        (0, 1): [(0.08 + 0.03j, (1, 0), (0, 0)), (0.05, (0, 0), (0, 1))],
        (1, 0): [(-0.06j, (0, 1), (1, 0))],
        (1, 1): [(0.04, (0, 0), (1, 1))],
    },
)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def spec8():
    return DiscretizationSpec(8)


@pytest.fixture(scope="session")
def spec12():
    return DiscretizationSpec(12)


def mono(j, k, shape, coeff=1.0, n=1, component=0):
    return DiscMap.monomial(j, k, shape, n=n, component=component, coeff=coeff)


def r6_disc(spec, second=None, third=None):
    """(ζ, second, third) in the map block of ``spec``."""
    sh = spec.map_shape
    z = DiscMap.zeros(1, sh)
    return DiscMap.stack([mono(1, 0, sh), second or z, third or z])
