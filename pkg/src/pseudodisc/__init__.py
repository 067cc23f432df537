"""Pseudoholomorphic discs in ℂⁿ: a Cauchy-Green based Newton-Picard solver.

A map u of the closed unit disc is J-holomorphic for an almost complex
structure with complex matrix A when

    ℱ(u) = u_ζ̄ + A(u) conj(u_ζ) = 0.

The package discretizes maps by polynomials in ζ and ζ̄, builds a bounded
right inverse of the linearization from the Cauchy-Green operator, corrects
approximate discs by a frozen-derivative Newton iteration and glues
J-holomorphic half discs.
"""

from .basis import DiscMap, DiscretizationSpec, analyze, random_map, synthesize
from .calculus import cauchy_green, d_bar, d_z
from .dbar import apply_F, apply_G, linearize
from .errors import (
    AdmissibilityViolation,
    CertificateError,
    ChartError,
    CoverageError,
    DiscretizationError,
    DivergenceError,
    DomainError,
    NotAStructure,
    PrecondError,
    PseudodiscError,
    StabilizationError,
)
from .gluing import GluingConfig, HalfDiscMap, glue, make_cutoff, preglue
from .newton import NewtonConfig, estimate_lipschitz, solve
from .norms import NormKind, norm
from .rightinv import kernel_dim, op_norm, right_inverse
from .structure import (
    ExampleR6Structure,
    PolynomialStructure,
    StandardStructure,
    a_to_j,
    j_to_a,
    load_structure,
)

__version__ = "0.1.0"

__all__ = [
    "DiscMap",
    "DiscretizationSpec",
    "analyze",
    "random_map",
    "synthesize",
    "cauchy_green",
    "d_bar",
    "d_z",
    "apply_F",
    "apply_G",
    "linearize",
    "AdmissibilityViolation",
    "CertificateError",
    "ChartError",
    "CoverageError",
    "DiscretizationError",
    "DivergenceError",
    "DomainError",
    "NotAStructure",
    "PrecondError",
    "PseudodiscError",
    "StabilizationError",
    "GluingConfig",
    "HalfDiscMap",
    "glue",
    "make_cutoff",
    "preglue",
    "NewtonConfig",
    "estimate_lipschitz",
    "solve",
    "NormKind",
    "norm",
    "kernel_dim",
    "op_norm",
    "right_inverse",
    "ExampleR6Structure",
    "PolynomialStructure",
    "StandardStructure",
    "a_to_j",
    "j_to_a",
    "load_structure",
]
