"""The rotational Frechet function F(psi) and its derivatives up to order 4.

For a rotation-symmetric distribution on S^m (pole atom of weight 1 - alpha
plus a radial law in the polar angle), the expected squared distance to a
probe point depends only on the probe's polar angle psi.  This module
evaluates F(psi) and d^j F / d psi^j, j <= 4, two ways:

* by tensor quadrature of the angular integrands (the general route), and
* by closed forms at psi = 0 (fast route, also the oracle for the other).

The angular integrands live on an (angle, azimuth) rectangle and involve

    h  = cos(psi) cos(theta) + sin(psi) sin(theta) cos(phi)
    h' = d h / d psi
    a  = arccos(h)                 (distance between probe and mass point)
    s  = sin(theta) sin(phi)

with the exact identity 1 - h^2 = h'^2 + s^2, which is also how all
denominators are computed: a sum of squares never cancels.
"""

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import (
    InvalidWindowError,
    NoValidAlphaError,
    ValidationError,
    ValidityError,
)
from .quadrature import integrate, integrate_batch
from .sphere import Annulus, Cap, Interval, RadialMixture, Ring

# Below this distance from h = 1 the ratio arccos(h)/sqrt(1-h^2) is evaluated
# by its series to dodge the arccos precision loss at the branch point.
_SERIES_CUTOFF = 1e-8

_PHI_TOL = 1e-10
_THETA_TOL = 1e-9
_PHI_DEPTH = 4
_THETA_DEPTH = 3

# Smallest sphere dimension for which the j-th derivative may be pulled
# under the angular integrals; one lower if the polar angles stay away from
# the antipode (theta + psi bounded below pi).
_STRICT_DIM = {1: 2, 2: 3, 3: 4, 4: 5}


# ---------------------------------------------------------------------------
# Constants of the sphere
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def wallis(m):
    """The sine-power integral over [0, pi], by its exact recursion."""
    if m < 0:
        raise ValidationError("sine-power integrals need a nonnegative exponent")
    if m == 0:
        return math.pi
    if m == 1:
        return 2.0
    return (m - 1) / m * wallis(m - 2)


def sphere_volume(m):
    """Surface volume of the unit sphere S^m."""
    if m < 1:
        raise ValidationError("sphere dimension must be >= 1")
    return 2.0 * math.pi ** ((m + 1) / 2) / math.gamma((m + 1) / 2)


def hemisphere_c_m(alpha, m):
    """Fourth derivative of F at the pole for the hemisphere mixture.

    This is the quartic coefficient that keeps the pole a minimum when the
    Hessian is tuned to zero; it is positive for m >= 2.
    """
    return alpha * sphere_volume(m + 1) / sphere_volume(m) * (m - 1) / (m + 2)


# ---------------------------------------------------------------------------
# Angular integrands
# ---------------------------------------------------------------------------


def integrand_h(psi, theta, phi):
    return np.cos(psi) * np.cos(theta) + np.sin(psi) * np.sin(theta) * np.cos(phi)


def integrand_h_prime(psi, theta, phi):
    return -np.sin(psi) * np.cos(theta) + np.cos(psi) * np.sin(theta) * np.cos(phi)


def integrand_s(theta, phi):
    return np.sin(theta) * np.sin(phi)


def arccos_ratio(h, d):
    """arccos(h) / sqrt(d) with d = 1 - h^2 supplied as a sum of squares.

    Near h = 1 the quotient is the removable limit 1; a two-term series in
    u = 1 - h takes over inside the cutoff.
    """
    h = np.asarray(h, dtype=float)
    d = np.asarray(d, dtype=float)
    u = 1.0 - h
    near = u < _SERIES_CUTOFF
    safe_d = np.where(d > 0.0, d, 1.0)
    with np.errstate(invalid="ignore"):
        direct = np.arccos(np.clip(h, -1.0, 1.0)) / np.sqrt(safe_d)
    series = 1.0 + u / 3.0 + 2.0 * u * u / 15.0
    return np.where(near, series, direct)


def _phi_integrand(j, psi, theta, phi, m):
    """Azimuthal integrand of order j with all lone sin(theta) powers removed.

    Orders 0..2 carry the measure sin^(m-2)(phi), orders 3..4 carry
    sin^m(phi); the matching sin(theta) powers are restored by the callers,
    which keeps the integrand finite for theta -> 0.
    """
    h = integrand_h(psi, theta, phi)
    hp = integrand_h_prime(psi, theta, phi)
    s = integrand_s(theta, phi)
    s2 = s * s
    d = hp * hp + s2
    sphi = np.sin(phi)
    if j == 0:
        a = np.arccos(np.clip(h, -1.0, 1.0))
        return sphi ** (m - 2) * a * a
    A = arccos_ratio(h, d)
    with np.errstate(divide="ignore", invalid="ignore"):
        if j == 1:
            val = -hp * A
        elif j == 2:
            val = (hp * hp) / d + h * (s2 / d) * A
        elif j == 3:
            val = hp * (-3.0 * h + (1.0 + 2.0 * h * h) * A) / (d * d)
        elif j == 4:
            h2 = h * h
            val = (
                3.0 * s2 * h2
                - 4.0 * (1.0 + 2.0 * h2) * hp * hp
                + (4.0 * (2.0 + h2) * hp * hp - s2 * (1.0 + 2.0 * h2)) * h * A
            ) / (d * d * d)
        else:
            raise ValidationError(f"derivative order {j} not supported")
    power = m - 2 if j <= 2 else m
    return sphi**power * np.where(np.isfinite(val), val, 0.0)


def _phi_profile(j, thetas, psi, m, tol=_PHI_TOL, depth=_PHI_DEPTH):
    """Azimuthal integral of order j for a vector of polar angles."""
    thetas = np.atleast_1d(np.asarray(thetas, dtype=float))

    def fcn(phis):
        return _phi_integrand(j, psi, thetas[:, None], phis[None, :], m)

    # graded start: the only hard spot is the antipodal end phi = pi
    cut = 0.75 * np.pi
    return integrate_batch(fcn, 0.0, cut, tol / 2, depth) + integrate_batch(
        fcn, cut, np.pi, tol / 2, depth
    )


def check_dimension(j, m, theta_max, psi=0.0, allow_restricted=False):
    """Refuse derivative orders outside their integrable dimension range."""
    need = _STRICT_DIM[j]
    if m >= need:
        return
    if (
        allow_restricted
        and m >= need - 1
        and theta_max + psi <= np.pi - 1e-9
    ):
        return
    raise ValidityError(
        f"order-{j} derivative integrand is not integrable on S^{m} over the "
        f"full angle range; need m >= {need}, or m >= {need - 1} with the "
        f"angles bounded away from the antipode (opt in via allow_restricted)"
    )


def ring_fj(j, theta, psi, m, allow_restricted=False):
    """Half the j-th psi-derivative of the unnormalized ring integral.

    For the uniform distribution on the subsphere at polar angle theta this
    is the quantity whose radial integrals build all mixture derivatives;
    the fully normalized ring derivative is 2 g(theta) times this, with
    g(theta) the inverse ring mass.
    """
    if j not in (1, 2, 3, 4):
        raise ValidationError("derivative order must be in {1, 2, 3, 4}")
    check_dimension(j, m, theta, psi, allow_restricted)
    phi_val = float(_phi_profile(j, np.array([theta]), psi, m)[0])
    power = m - 1 if j <= 2 else m + 1
    return np.sin(theta) ** power * phi_val


def f2_closed(theta, m):
    """Closed form of the order-2 ring quantity at psi = 0."""
    if m < 2:
        raise ValidationError("need sphere dimension >= 2")
    theta = np.asarray(theta, dtype=float)
    return wallis(m) * np.sin(theta) ** (m - 2) * (
        np.sin(theta) / (m - 1) + theta * np.cos(theta)
    )


def f4_closed(theta, m, normalized=False):
    """Closed form of the order-4 ring quantity at psi = 0.

    With ``normalized`` the conventional prefactor I_m/(m+2) is divided out,
    which makes the value at theta = pi/2 exactly -4 in every dimension.
    """
    if m < 4:
        raise ValidationError("need sphere dimension >= 4")
    theta = np.asarray(theta, dtype=float)
    st, ct = np.sin(theta), np.cos(theta)
    s2 = st * st
    val = st ** (m - 3) * ((3 * m - 9) - (3 * m - 5) * s2) - theta * ct * st ** (
        m - 4
    ) * ((3 * m - 9) - (2 * m - 2) * s2)
    if normalized:
        return val
    return wallis(m) / (m + 2) * val


def _ring_d2_at_zero(theta, m):
    """Normalized ring second derivative at psi = 0; smooth down to theta = 0."""
    theta = np.asarray(theta, dtype=float)
    im2 = wallis(m - 2)
    with np.errstate(divide="ignore", invalid="ignore"):
        tcot = theta * np.cos(theta) / np.sin(theta)
    tcot = np.where(theta < 1e-12, 1.0, tcot)
    return 2.0 * wallis(m) / im2 * (1.0 / (m - 1) + tcot)


def _ring_d4_at_zero(theta, m):
    """Normalized ring fourth derivative at psi = 0 (vanishes at theta = 0)."""
    theta = np.asarray(theta, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        val = 2.0 * f4_closed(theta, m) / (wallis(m - 2) * np.sin(theta) ** (m - 1))
    return np.where(theta < 1e-7, 0.0, val)


# ---------------------------------------------------------------------------
# Radial averaging
# ---------------------------------------------------------------------------


@lru_cache(maxsize=256)
def sin_power_mass(m, lo, hi):
    """Integral of sin^(m-1) over [lo, hi] (the area normalizer)."""
    return integrate(lambda t: np.sin(t) ** (m - 1), lo, hi, tol=1e-13, max_depth=2)


def _radial_average(dist, fun, split_at=None, tol=_THETA_TOL, depth=_THETA_DEPTH):
    """Expectation of fun(theta) under the normalized radial law.

    ``split_at`` marks an interior angle of reduced smoothness (the polar
    angle antipodal to the probe point); panels never straddle it.
    """
    law = dist.radial
    if isinstance(law, Ring):
        return float(np.atleast_1d(fun(np.array([law.theta_star])))[0])

    def pieces(lo, hi):
        if split_at is not None and lo < split_at < hi:
            return [(lo, split_at), (split_at, hi)]
        return [(lo, hi)]

    if isinstance(law, (Annulus, Cap)):
        lo, hi = law.support
        mass = sin_power_mass(dist.m, lo, hi)

        def weighted(t):
            return np.sin(t) ** (dist.m - 1) * fun(t)

        total = sum(
            integrate(weighted, a, b, tol=tol, max_depth=depth) for a, b in pieces(lo, hi)
        )
        return total / mass

    if isinstance(law, Interval):
        width = law.hi - law.lo
        total = sum(
            integrate(fun, a, b, tol=tol, max_depth=depth)
            for a, b in pieces(law.lo, law.hi)
        ) / width
        if law.atom_weight:
            atom = float(np.atleast_1d(fun(np.array([law.atom_angle])))[0])
            return (1.0 - law.atom_weight) * total + law.atom_weight * atom
        return total

    raise ValidationError(f"unknown radial law {type(law).__name__}")


def radial_support_max(dist):
    law = dist.radial
    if isinstance(law, (Annulus, Cap)):
        return law.support[1]
    if isinstance(law, Ring):
        return law.theta_star
    if isinstance(law, Interval):
        hi = law.hi
        if law.atom_weight:
            hi = max(hi, law.atom_angle)
        return hi
    raise ValidationError(f"unknown radial law {type(law).__name__}")


def radial_second_moment(dist):
    """E[theta^2] under the normalized radial law (the off-pole part)."""
    return _radial_average(dist, lambda t: t * t)


def population_variance(dist):
    """Expected squared distance from the pole, alpha * E[theta^2]."""
    return dist.alpha * radial_second_moment(dist)


# ---------------------------------------------------------------------------
# The Frechet function and its derivatives
# ---------------------------------------------------------------------------


def frechet_F(dist: RadialMixture, psi):
    """F(psi): expected squared distance from the probe at polar angle psi."""
    psi = float(psi)
    if not 0.0 <= psi <= np.pi:
        raise ValidationError("probe angle must lie in [0, pi]")
    if psi == 0.0:
        return dist.alpha * radial_second_moment(dist)
    im2 = wallis(dist.m - 2)

    def ring_value(thetas):
        return _phi_profile(0, thetas, psi, dist.m) / im2

    point_term = (1.0 - dist.alpha) * psi * psi
    if dist.alpha == 0.0:
        return point_term
    split = np.pi - psi
    return point_term + dist.alpha * _radial_average(dist, ring_value, split_at=split)


def _derivative_at(dist, j, psi, allow_restricted=False, force_quadrature=False):
    """d^j F / d psi^j at one probe angle."""
    m = dist.m
    theta_max = radial_support_max(dist)
    if psi == 0.0 and not force_quadrature:
        if j in (1, 3):
            return 0.0
        check_dimension(j, m, theta_max, 0.0, allow_restricted)
        rd = _ring_d2_at_zero if j == 2 else _ring_d4_at_zero
        base = 2.0 * (1.0 - dist.alpha) if j == 2 else 0.0
        if dist.alpha == 0.0:
            return base
        return base + dist.alpha * _radial_average(dist, lambda t: rd(t, m))
    check_dimension(j, m, theta_max, psi, allow_restricted)
    im2 = wallis(m - 2)

    def ring_deriv(thetas):
        prof = _phi_profile(j, thetas, psi, m)
        if j >= 3:
            prof = prof * np.sin(thetas) ** 2
        return 2.0 * prof / im2

    if j == 1:
        base = 2.0 * (1.0 - dist.alpha) * psi
    elif j == 2:
        base = 2.0 * (1.0 - dist.alpha)
    else:
        base = 0.0
    if dist.alpha == 0.0:
        return base
    split = np.pi - psi if psi > 0.0 else None
    return base + dist.alpha * _radial_average(dist, ring_deriv, split_at=split)


@dataclass
class DerivativeProfile:
    """Sampled F and psi-derivatives of a radial mixture on a probe grid."""

    dist: RadialMixture
    psi_grid: np.ndarray
    values: dict          # order -> array over the grid; order 0 is F itself
    method: list          # per grid entry: "closed-form" or "quadrature"

    def column(self, order):
        return self.values[order]

    def to_csv(self, path):
        cols = ["psi", "F", "dF", "d2F", "d3F", "d4F", "method"]
        with open(path, "w", newline="") as fh:
            fh.write("# psi: radians; F: radians^2; d^jF: radians^(2-j)\n")
            fh.write(",".join(cols) + "\n")
            for i, psi in enumerate(self.psi_grid):
                row = [repr(float(psi))]
                for order in range(5):
                    if order in self.values:
                        row.append(repr(float(self.values[order][i])))
                    else:
                        row.append("")
                row.append(self.method[i])
                fh.write(",".join(row) + "\n")


def derivative_profile(
    dist: RadialMixture,
    psi_grid,
    orders=(1, 2, 3, 4),
    allow_restricted=False,
    force_quadrature=False,
) -> DerivativeProfile:
    """Evaluate F and the requested psi-derivatives over a probe grid.

    At psi = 0 the closed forms of the ring quantities are used (tagged
    "closed-form"); everywhere else, and with ``force_quadrature``, the
    full tensor quadrature runs.
    """
    orders = tuple(sorted(set(int(o) for o in orders)))
    if any(o not in (1, 2, 3, 4) for o in orders):
        raise ValidationError("orders must be a subset of {1, 2, 3, 4}")
    psi_grid = np.atleast_1d(np.asarray(psi_grid, dtype=float))
    values = {o: np.empty_like(psi_grid) for o in orders}
    values[0] = np.empty_like(psi_grid)
    method = []
    for i, psi in enumerate(psi_grid):
        psi = float(psi)
        fast = psi == 0.0 and not force_quadrature
        method.append("closed-form" if fast else "quadrature")
        values[0][i] = frechet_F(dist, psi)
        for o in orders:
            values[o][i] = _derivative_at(
                dist, o, psi, allow_restricted=allow_restricted,
                force_quadrature=force_quadrature,
            )
    return DerivativeProfile(dist, psi_grid, values, method)


# ---------------------------------------------------------------------------
# Closed forms for the annulus ("hole") family
# ---------------------------------------------------------------------------


def hole_b2(beta, m):
    """Sign function whose first zero is the largest hole radius with a
    flattenable Hessian."""
    return np.pi / 2 - (np.pi - beta) * np.sin(beta) ** (m - 1)


def hole_b4(beta, m):
    """Sign function whose first zero bounds the hole radii with positive
    quartic term at the pole."""
    sb = np.sin(beta)
    return (
        np.pi / 2
        + 2.0 * (np.pi - beta) * sb ** (m - 1)
        - 3.0 * np.cos(beta) * sb ** (m - 2)
        - 3.0 * (np.pi - beta) * sb ** (m - 3)
    )


def _check_hole_params(beta, m, order):
    if not 0.0 <= beta < np.pi / 2:
        raise ValidationError(f"hole radius beta={beta} outside [0, pi/2)")
    need = 3 if order == 2 else 5
    if beta > 0.0:
        need -= 1
    if m < need:
        raise ValidityError(
            f"order-{order} closed form needs m >= {need} for hole radius {beta}"
        )


def hole_d2_closed(alpha, beta, m):
    """Second derivative of F at the pole for the annulus mixture."""
    _check_hole_params(beta, m, 2)
    g = 1.0 / (wallis(m - 2) * sin_power_mass(m, np.pi / 2, np.pi - beta))
    return 2.0 * (1.0 - alpha) - 2.0 * alpha * wallis(m) * g / (m - 1) * hole_b2(beta, m)


def hole_d4_closed(alpha, beta, m):
    """Fourth derivative of F at the pole for the annulus mixture."""
    _check_hole_params(beta, m, 4)
    g = 1.0 / (wallis(m - 2) * sin_power_mass(m, np.pi / 2, np.pi - beta))
    return 2.0 * alpha * wallis(m) * g / (m + 2) * hole_b4(beta, m)


def flat_hessian_alpha(radial, m):
    """Off-pole mass that zeroes the Hessian of F at the pole.

    Works for any radial law: the Hessian is affine in the mass, so the
    critical value is solved in closed form from the ring second
    derivatives.  Raises NoValidAlphaError when no weight in (0, 1] works
    (the off-pole part does not pull hard enough).
    """
    probe = RadialMixture(m=m, alpha=1.0, radial=radial)
    kbar = _radial_average(probe, lambda t: _ring_d2_at_zero(t, m))
    if kbar >= 0.0:
        raise NoValidAlphaError(
            f"radial law keeps the Hessian positive for every mass (mean ring "
            f"curvature {kbar:.4f} >= 0)"
        )
    return 2.0 / (2.0 - kbar)


# ---------------------------------------------------------------------------
# Cap construction: prescribed antipodal density without smeariness
# ---------------------------------------------------------------------------


@dataclass
class CapModelReport:
    """Verification record for the point-mass-plus-antipodal-cap mixture."""

    delta: float
    m: int
    alpha: float
    psi_grid: np.ndarray
    min_excess: float       # min of F(psi) - F(0) over the positive grid
    hessian: float          # d2F/dpsi2 at 0, by symmetric differences of F
    south_density: float    # attained density at the south pole
    density_bound: float    # guaranteed lower bound for that density
    excess_positive: bool
    hessian_positive: bool
    density_ok: bool


def verify_cap_model(delta, m, psi_grid=None) -> CapModelReport:
    """Check that the antipodal-cap mixture has a sharp minimum at the pole.

    The mixture puts mass sin(delta)/(4 pi) uniformly on the ball of radius
    delta around the south pole and the rest on the north pole.  Despite an
    antipodal density that diverges as delta -> 0, the pole stays a
    non-degenerate minimum: F exceeds F(0) on the whole grid and the
    Hessian is positive.
    """
    if not 0.0 < delta <= np.pi / 2:
        raise ValidationError("cap radius must lie in (0, pi/2]")
    if m < 2:
        raise ValidationError("need sphere dimension >= 2")
    if psi_grid is None:
        psi_grid = np.linspace(0.0, np.pi, 129)[1:]
    psi_grid = np.asarray(psi_grid, dtype=float)
    alpha = math.sin(delta) / (4.0 * math.pi)
    dist = RadialMixture(m=m, alpha=alpha, radial=Cap(delta))
    f0 = frechet_F(dist, 0.0)
    excess = np.array([frechet_F(dist, p) for p in psi_grid if p > 0.0]) - f0
    # symmetric-difference Hessian: valid in every dimension, no integral
    # interchange needed
    step = 1e-3
    hessian = 2.0 * (frechet_F(dist, step) - f0) / step**2
    im2 = wallis(m - 2)
    density = alpha / (im2 * sin_power_mass(m, np.pi - delta, np.pi))
    bound = m / (4.0 * math.pi**2 * im2 * delta ** (m - 1))
    return CapModelReport(
        delta=delta,
        m=m,
        alpha=alpha,
        psi_grid=psi_grid,
        min_excess=float(np.min(excess)),
        hessian=float(hessian),
        south_density=float(density),
        density_bound=float(bound),
        excess_positive=bool(np.min(excess) > 0.0),
        hessian_positive=bool(hessian > 0.0),
        density_ok=bool(density >= bound),
    )


# ---------------------------------------------------------------------------
# Growth-order fit
# ---------------------------------------------------------------------------


@dataclass
class SmearinessFit:
    """Power-law fit of F(psi) - F(0) near the minimum."""

    kappa: float
    c_fit: float
    window: tuple

    @property
    def is_smeary(self):
        return self.kappa > 2.5


def fit_smeariness_order(psis, f_values, f0) -> SmearinessFit:
    """Least-squares growth exponent of F - F(0) on a log-log window."""
    psis = np.asarray(psis, dtype=float)
    f_values = np.asarray(f_values, dtype=float)
    if psis.size < 8:
        raise ValidationError("need at least 8 probe angles for a stable fit")
    diffs = f_values - f0
    if np.any(diffs <= 0.0):
        raise InvalidWindowError(
            "F(psi) - F(0) must be positive on the whole fit window"
        )
    slope, intercept = np.polyfit(np.log(psis), np.log(diffs), 1)
    return SmearinessFit(
        kappa=float(slope),
        c_fit=float(np.exp(intercept)),
        window=(float(psis.min()), float(psis.max())),
    )


def smeariness_fit_for(dist, lo=1e-3, hi=1e-1, points=16) -> SmearinessFit:
    """Fit the growth order of a mixture's Frechet function near the pole.

    Uses identical quadrature nodes for every probe angle (possible while
    the radial support stays clear of the probe antipodes), so the tiny
    differences near the minimum survive in floating point.
    """
    window = np.logspace(np.log10(lo), np.log10(hi), points)
    f0 = frechet_F(dist, 0.0)
    values = np.array([frechet_F(dist, p) for p in window])
    return fit_smeariness_order(window, values, f0)
