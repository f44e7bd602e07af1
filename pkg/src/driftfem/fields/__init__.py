"""Coefficient fields, presets, quadrature norms and the analytic constants."""
from .coefficients import (
    Bump,
    Checkerboard,
    Constant,
    ConstantMatrix,
    ConstantVector,
    CounterexampleW,
    DriftSpec,
    Field,
    GradientOf,
    GriddedMatrix,
    GriddedScalar,
    GriddedVector,
    IdentityMatrix,
    ManufacturedLoad,
    MatrixField,
    NegGradLog,
    PerimeterWave,
    PresetPhi,
    ProductSine,
    ScalarField,
    ScaledScalar,
    ScaledVector,
    SkewExample,
    SumVector,
    TransposedMatrix,
    VectorField,
    ZeroVector,
    preset_counterexample,
    preset_gradient_bump,
    preset_skew_example,
)
from .constants import (
    AdmissibleRadius,
    ElementScalar,
    Shift,
    admissible_radius,
    as_field,
    form_bound_K,
    lp_norm,
    poincare_constant,
    sample_magnitudes,
    select_shift,
    shift_threshold,
    sobolev_constant,
    tail_phi,
    weak_divergence_residual,
)
from .mollify import eta, mollifier_stencil, mollify
from .quadrature import grundmann_moeller, quadrature_points, rule

__all__ = [name for name in dir() if not name.startswith("_")]
