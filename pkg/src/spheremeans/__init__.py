"""Frechet-mean statistics on hyperspheres.

Geometry and sampling (``sphere``), the rotational Frechet function and its
derivatives (``profile``), critical angles and hole radii (``critical``),
sample means and scaling experiments (``estimator``), landmark pre-shapes
(``shapes``), and lat/lon ingestion (``geodata``).
"""

__version__ = "0.1.0"

from .critical import (
    alpha_for_flat_hessian,
    beta0_uniqueness_radius,
    beta_m2,
    beta_m4,
    critical_report,
    curse_bounds,
    hole_model,
    numerical_lipschitz,
    theta_m2,
    theta_m4,
)
from .estimator import (
    MeanOptions,
    MeanResult,
    ScalingCurve,
    bootstrap_k_of_n,
    empirical_frechet,
    frechet_mean,
    fss_magnitude,
    northern_cap_options,
    ring_fss_theory,
    variance_scaling,
)
from .geodata import GeoSample, latlon_to_unit, parse_latlon_csv, unit_to_latlon
from .profile import (
    DerivativeProfile,
    SmearinessFit,
    derivative_profile,
    f2_closed,
    f4_closed,
    fit_smeariness_order,
    flat_hessian_alpha,
    frechet_F,
    hemisphere_c_m,
    hole_d2_closed,
    hole_d4_closed,
    population_variance,
    ring_fj,
    smeariness_fit_for,
    sphere_volume,
    verify_cap_model,
    wallis,
)
from .shapes import (
    LandmarkConfig,
    PreShape,
    augment_to_six,
    preshape_project,
    quadrangle_mixture,
    simulate_quadrangles,
)
from .sphere import (
    Annulus,
    Cap,
    Interval,
    RadialMixture,
    Ring,
    TangentVector,
    UnitVector,
    exp_map,
    geodesic_distance,
    log_map,
    pole,
    rotate_pole_to,
    sample,
)
