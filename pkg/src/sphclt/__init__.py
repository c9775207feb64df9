"""Numerics for Gaussian random eigenfunctions on the unit d-sphere:
variance asymptotics of Hermite functionals, spectral contraction norms with
explicit Berry-Esseen bounds, and Monte Carlo verification of the
quantitative central limit theorems (including excursion areas)."""

__version__ = "0.1.0"

from .specfun import (
    GegenbauerCtx,
    HilbApprox,
    SphereDim,
    bessel_j,
    bessel_j_zeros,
    dim_harmonics,
    gegenbauer,
    gegenbauer_value,
    hermite,
    hilb_leading,
    sphere_volume,
)
from .moments import (
    BesselConstant,
    DivergentIntegralError,
    MomentResult,
    RateMismatchError,
    SlopeRecord,
    ToleranceNotMetError,
    asymptotic_ratio,
    bessel_constant,
    gegenbauer_moment,
    log_divergence_check,
    variance_h,
)
from .contractions import (
    BoundRecord,
    ContractionTable,
    SpectralCoeffs,
    berry_esseen_bound,
    contraction_norm,
    contraction_table,
    cross_contraction,
    expand_power,
    kernel_contraction,
    mc_kernel_contraction,
    poly_bound,
    poly_rate,
    rate_theoretical,
)
from .simulate import (
    FieldRealization,
    FunctionalSample,
    SphereGrid,
    build_grid,
    excursion_variance,
    functional_excursion,
    functional_h,
    functional_Z,
    hermite_projection,
    monomial_to_hermite,
    recover_harmonic_coeffs,
    sample_field,
)
from .clt import (
    CLT_EXCLUDED_PAIRS,
    CltReport,
    CltRow,
    RateFit,
    clt_sweep,
    kolmogorov_distance,
    normal_quantile,
    rate_fit,
    wasserstein_distance,
)
