"""Second fundamental forms, curvature integrals and tube-volume quadrature."""

from .crofton import CroftonResult, crofton_check
from .gauss import gauss_degree_empirical
from .integrals import (
    CurvatureReport,
    curvature_integrals,
    normal_sphere_nodes,
    tube_upper_bound_from_K,
    tube_volume_quadrature,
)
from .sampling import (
    Ball,
    Box,
    HalfSpace,
    ManifoldPatch,
    sample_implicit_surface,
    sample_manifold,
    sample_points,
    sample_reference,
    trace_implicit_curve,
)
from .sff import (
    PsiCoefficients,
    SecondFundamentalForm,
    psi_coefficients,
    second_fundamental_form,
    shape_operators_many,
)

__all__ = [
    "Ball",
    "Box",
    "CroftonResult",
    "CurvatureReport",
    "HalfSpace",
    "ManifoldPatch",
    "PsiCoefficients",
    "SecondFundamentalForm",
    "crofton_check",
    "curvature_integrals",
    "gauss_degree_empirical",
    "normal_sphere_nodes",
    "psi_coefficients",
    "sample_implicit_surface",
    "sample_manifold",
    "sample_points",
    "sample_reference",
    "second_fundamental_form",
    "shape_operators_many",
    "trace_implicit_curve",
    "tube_upper_bound_from_K",
    "tube_volume_quadrature",
]
