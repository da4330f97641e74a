"""Off-diagonal Bergman kernel expansion: exact operator calculus and model checks."""
from .expansion import (
    build_L_inverse_image,
    combined_p_inverse_coefficient,
    compute_J2,
    kappa_half_inverse_quadratic,
    reference_J2,
    structure_check,
)
from .fit import ExpansionFit, FitError, fit_half_powers, rate_estimate
from .manifolds import CP1, FlatTorus, numeric_curvature, rescaled_kernel
from .model_calculus import (
    ModelGaussian,
    NormalOrderedKernel,
    OffDiagPolynomial,
    adjoint,
    apply_b,
    apply_b_plus,
    evaluate,
    inverse_L_on_complement,
    normal_order,
    resolve_against_P,
)
from .tensor_ring import CurvatureData, TensorScalar, TensorSymbol, canonicalize, conjugate, substitute

__version__ = "0.1.0"
