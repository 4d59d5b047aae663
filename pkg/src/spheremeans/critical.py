"""Critical polar angles and hole radii of the annulus family.

Four numbers organize the smeariness landscape on S^m:

* theta_m2 / theta_m4: polar angles where a single ring's contribution to
  the second / fourth derivative of F at the pole changes sign.
* beta_m2 / beta_m4: largest hole radii of the annulus family that still
  admit a flat Hessian / a positive quartic term at the pole.

Each root comes with proven two-sided bounds; every computed value is
checked against them and a violation raises InternalConsistencyError (it
would mean the implementation disagrees with its own analysis).
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import InternalConsistencyError, NoValidAlphaError, ValidationError
from .profile import (
    _phi_integrand,
    check_dimension,
    f2_closed,
    f4_closed,
    flat_hessian_alpha,
    frechet_F,
    hemisphere_c_m,
    hole_b2,
    hole_b4,
    hole_d2_closed,
    sin_power_mass,
    wallis,
)
from .quadrature import bisect_root, gl_nodes
from .sphere import Annulus, RadialMixture

ROOT_TOL = 1e-12


@dataclass
class BoundCheck:
    name: str
    lower: float
    value: float
    upper: float

    @property
    def passed(self):
        return self.lower <= self.value <= self.upper

    @property
    def margin(self):
        return min(self.value - self.lower, self.upper - self.value)


def _guard(check: BoundCheck):
    if not check.passed:
        raise InternalConsistencyError(
            f"{check.name}: value {check.value!r} violates proven bounds "
            f"[{check.lower!r}, {check.upper!r}]"
        )
    return check


@lru_cache(maxsize=None)
def theta_m2(m):
    """Zero crossing of the ring Hessian contribution, in (pi/2, pi)."""
    if m < 2:
        raise ValidationError("need sphere dimension >= 2")
    root = bisect_root(
        lambda t: np.sin(t) / (m - 1) + t * np.cos(t), np.pi / 2, np.pi, tol=ROOT_TOL
    )
    _guard(
        BoundCheck(
            f"theta_{m},2",
            np.pi / 2 + 1.0 / (3 * (m - 1)),
            root,
            np.pi / 2 + 1.0 / (m - 1),
        )
    )
    return root


@lru_cache(maxsize=None)
def theta_m4(m):
    """Zero crossing of the ring quartic contribution, in (pi/2, pi)."""
    if m < 4:
        raise ValidationError("need sphere dimension >= 4")
    root = bisect_root(
        lambda t: float(f4_closed(t, m)), np.pi / 2, np.pi - 1e-3, tol=ROOT_TOL
    )
    _guard(
        BoundCheck(
            f"theta_{m},4",
            theta_m2(m),
            root,
            np.pi / 2 + 16.0 / (np.pi * (m - 3)),
        )
    )
    return root


@lru_cache(maxsize=None)
def beta_m2(m):
    """Largest hole radius with a flattenable Hessian (first zero of b2)."""
    if m < 2:
        raise ValidationError("need sphere dimension >= 2")
    hi = np.pi / 2 - 1.0 / (2 * (m - 1))
    root = bisect_root(lambda b: hole_b2(b, m), 1e-12, hi, tol=ROOT_TOL)
    _guard(
        BoundCheck(
            f"beta_{m},2",
            np.pi / 2 - 6.0 / (np.pi * (m - 1)),
            root,
            hi,
        )
    )
    return root


@lru_cache(maxsize=None)
def beta_m4(m):
    """Largest hole radius keeping the quartic term positive at zero Hessian.

    The asserted upper bound is the weaker hi/2-style one actually derived
    in the underlying estimate: pi/2 - 1/(2(m-3)); together with the
    ordering beta_m4 <= beta_m2.
    """
    if m < 4:
        raise ValidationError("need sphere dimension >= 4")
    hi = np.pi / 2 - 1.0 / (2 * (m - 3))
    root = bisect_root(lambda b: hole_b4(b, m), 1e-12, hi, tol=ROOT_TOL)
    _guard(
        BoundCheck(
            f"beta_{m},4",
            np.pi / 2 - 6.0 * (6.0 + np.pi) / (np.pi * (m - 3)),
            root,
            min(hi, beta_m2(m)),
        )
    )
    return root


def alpha_for_flat_hessian(beta, m):
    """Pole-atom complement weight that zeroes the Hessian of the annulus
    mixture at the pole; defined for hole radii below beta_m2."""
    if not 0.0 <= beta < np.pi / 2:
        raise ValidationError(f"hole radius beta={beta} outside [0, pi/2)")
    if m < 2:
        raise ValidationError("need sphere dimension >= 2")
    b2 = hole_b2(beta, m)
    if b2 < 0.0:
        raise NoValidAlphaError(
            f"no flat-Hessian weight exists for beta={beta} on S^{m} "
            f"(largest admissible hole radius is {beta_m2(m):.6f})"
        )
    mass = sin_power_mass(m, np.pi / 2, np.pi - beta)
    return 1.0 / (1.0 + b2 / (m * mass))


def _alpha_flat_derivative(beta, m):
    """d alpha_beta / d beta, from the closed form."""
    sb, cb = np.sin(beta), np.cos(beta)
    mass = sin_power_mass(m, np.pi / 2, np.pi - beta)
    b2 = hole_b2(beta, m)
    b2p = sb ** (m - 1) - (np.pi - beta) * (m - 1) * sb ** (m - 2) * cb
    massp = -(sb ** (m - 1))
    u = b2 / (m * mass)
    up = (b2p * mass - b2 * massp) / (m * mass * mass)
    return -up / (1.0 + u) ** 2


# ---------------------------------------------------------------------------
# Numerical Lipschitz constants in the hole radius
# ---------------------------------------------------------------------------


_PHI_PANELS = ((0.0, 0.75 * np.pi), (0.75 * np.pi, np.pi))


def _fj_grid(j, thetas, psis, m, nphi=64):
    """f_j on a (psi, theta) grid with a fixed two-panel azimuthal rule.

    Accuracy here only needs to support an upper estimate; the declared
    safety factor absorbs the quadrature slack.
    """
    pieces = []
    for a, b in _PHI_PANELS:
        phis, wts = gl_nodes(nphi, a, b)
        vals = _phi_integrand(
            j, psis[:, None, None], thetas[None, :, None], phis[None, None, :], m
        )
        pieces.append(vals @ wts)
    prof = sum(pieces)
    power = m - 1 if j <= 2 else m + 1
    return prof * np.sin(thetas)[None, :] ** power


def _mixed_derivative_grid(j, betas, psis, m, ntheta=64):
    """|d/d beta of d^j F / d psi^j| along the flat-Hessian family."""
    im2 = wallis(m - 2)
    out = np.empty((len(betas), len(psis)))
    for i, beta in enumerate(betas):
        alpha = alpha_for_flat_hessian(beta, m)
        alphap = _alpha_flat_derivative(beta, m)
        mass = sin_power_mass(m, np.pi / 2, np.pi - beta)
        g = 1.0 / (im2 * mass)
        gp = np.sin(beta) ** (m - 1) / (im2 * mass * mass)
        thetas, wts = gl_nodes(ntheta, np.pi / 2, np.pi - beta)
        fj = _fj_grid(j, thetas, psis, m)              # (npsi, ntheta)
        integral = fj @ wts                            # (npsi,)
        edge = _fj_grid(j, np.array([np.pi - beta]), psis, m)[:, 0]
        term = 2.0 * g * alphap * integral + 2.0 * alpha * gp * integral
        term -= 2.0 * alpha * g * edge
        if j == 2:
            term -= 2.0 * alphap
        out[i] = np.abs(term)
    return out


def numerical_lipschitz(j, m, grid=64, safety=1.5):
    """Upper estimate of the Lipschitz constant of d^j F / d psi^j in the
    hole radius, along the flat-Hessian family.

    Grid maximization of the mixed derivative over radius x probe angle,
    refined once around the maximum, then inflated by the safety factor.
    No closed form exists, so this is an estimate by construction.
    """
    if j not in (2, 3, 4):
        raise ValidationError("Lipschitz estimates cover orders 2, 3, 4")
    check_dimension(j, m, np.pi)
    bmax = beta_m4(m) if m >= 4 else beta_m2(m)
    betas = np.linspace(0.0, bmax, grid)
    psis = np.linspace(0.0, np.pi, grid)
    coarse = _mixed_derivative_grid(j, betas, psis, m)
    bi, pi_ = np.unravel_index(np.argmax(coarse), coarse.shape)
    blo, bhi = betas[max(bi - 1, 0)], betas[min(bi + 1, grid - 1)]
    plo, phi_ = psis[max(pi_ - 1, 0)], psis[min(pi_ + 1, grid - 1)]
    fine = _mixed_derivative_grid(
        j, np.linspace(blo, bhi, 9), np.linspace(plo, phi_, 9), m
    )
    return safety * float(max(coarse.max(), fine.max()))


# ---------------------------------------------------------------------------
# Certified hole radius for a unique minimum
# ---------------------------------------------------------------------------


@dataclass
class UniquenessReport:
    m: int
    beta0: float
    quartic_at_pole: float     # fourth derivative of the hemisphere model
    lipschitz_2: float
    lipschitz_4: float
    hessian_at_third: float    # hemisphere Hessian at psi = pi/3
    checked_beta: float
    min_excess: float          # min of F - F(0) for the checked radius
    unique_minimum: bool


def beta0_uniqueness_radius(m, check_beta=None, grid_points=200) -> UniquenessReport:
    """Hole radius below which the pole minimum is certifiably unique.

    Combines the hemisphere quartic coefficient with numerical Lipschitz
    constants; since the Lipschitz values are upper estimates, the returned
    radius is a lower estimate.  The decisive evidence is the grid check:
    F exceeds F(0) everywhere on a dense probe grid for the checked radius.
    """
    if m < 5:
        raise ValidationError("the quartic Lipschitz bound needs m >= 5")
    alpha0 = alpha_for_flat_hessian(0.0, m)
    c_m = hemisphere_c_m(alpha0, m)
    l2 = numerical_lipschitz(2, m)
    l4 = numerical_lipschitz(4, m)
    from .profile import _derivative_at  # local import to avoid cycle at import time

    hemi = RadialMixture(m=m, alpha=alpha0, radial=Annulus(0.0))
    d2_third = _derivative_at(hemi, 2, np.pi / 3)
    beta0 = min(c_m / (2.0 * l4), d2_third / l2)
    checked = beta0 if check_beta is None else check_beta
    if checked > beta0:
        raise ValidationError(f"requested radius {checked} exceeds beta0={beta0}")
    dist = RadialMixture(
        m=m, alpha=alpha_for_flat_hessian(checked, m), radial=Annulus(checked)
    )
    psis = np.linspace(0.0, np.pi, grid_points + 1)[1:]
    f0 = frechet_F(dist, 0.0)
    excess = np.array([frechet_F(dist, p) for p in psis]) - f0
    return UniquenessReport(
        m=m,
        beta0=float(beta0),
        quartic_at_pole=float(c_m),
        lipschitz_2=float(l2),
        lipschitz_4=float(l4),
        hessian_at_third=float(d2_third),
        checked_beta=float(checked),
        min_excess=float(np.min(excess)),
        unique_minimum=bool(np.min(excess) > 0.0),
    )


# ---------------------------------------------------------------------------
# Dimension dependence of the thresholds
# ---------------------------------------------------------------------------


@lru_cache(maxsize=1)
def _theta4_rate_fit():
    ms = np.arange(10, 101)
    gaps = np.array([theta_m4(int(mm)) - np.pi / 2 for mm in ms])
    slope = np.polyfit(1.0 / ms, gaps, 1)[0]
    return float(slope)


@dataclass
class CurseReport:
    """How fast the smeariness thresholds close in on the equator."""

    m: int
    theta_threshold: float     # pi/2 + 16 / (pi (m-3))
    beta_threshold: float      # pi/2 - 6 (6+pi) / (pi (m-3))
    theta_m4: float
    beta_m4: float
    theta_ok: bool             # theta_m4 <= theta_threshold
    beta_ok: bool              # beta_m4 >= beta_threshold (when applicable)
    beta_applicable: bool      # threshold can be negative in low dimension
    rate_slope: float          # slope of (theta_m4 - pi/2) against 1/m


def curse_bounds(m) -> CurseReport:
    """Threshold angles for dimension m plus the 1/m approach-rate fit."""
    if m < 4:
        raise ValidationError("need sphere dimension >= 4")
    theta_thr = np.pi / 2 + 16.0 / (np.pi * (m - 3))
    beta_thr = np.pi / 2 - 6.0 * (6.0 + np.pi) / (np.pi * (m - 3))
    t4 = theta_m4(m)
    b4 = beta_m4(m)
    applicable = beta_thr > 0.0
    return CurseReport(
        m=m,
        theta_threshold=float(theta_thr),
        beta_threshold=float(beta_thr),
        theta_m4=float(t4),
        beta_m4=float(b4),
        theta_ok=bool(t4 <= theta_thr),
        beta_ok=bool(b4 >= beta_thr) if applicable else True,
        beta_applicable=bool(applicable),
        rate_slope=_theta4_rate_fit(),
    )


# ---------------------------------------------------------------------------
# Consolidated report and CSV export
# ---------------------------------------------------------------------------


@dataclass
class CriticalAngleReport:
    m: int
    theta_m2: float
    theta_m4: float            # None below dimension 4
    beta_m2: float
    beta_m4: float             # None below dimension 4
    alpha_beta: float          # None unless a hole radius was requested
    checks: list               # BoundCheck records

    @property
    def bounds_pass(self):
        return all(c.passed for c in self.checks)


def critical_report(m, beta=None) -> CriticalAngleReport:
    """All critical angles for dimension m, with their bound checks."""
    t2 = theta_m2(m)
    b2 = beta_m2(m)
    checks = [
        BoundCheck(
            "theta2_bounds",
            np.pi / 2 + 1.0 / (3 * (m - 1)),
            t2,
            np.pi / 2 + 1.0 / (m - 1),
        ),
        BoundCheck(
            "beta2_bounds",
            np.pi / 2 - 6.0 / (np.pi * (m - 1)),
            b2,
            np.pi / 2 - 1.0 / (2 * (m - 1)),
        ),
    ]
    t4 = b4 = None
    if m >= 4:
        t4 = theta_m4(m)
        b4 = beta_m4(m)
        checks.append(
            BoundCheck(
                "theta4_bounds", t2, t4, np.pi / 2 + 16.0 / (np.pi * (m - 3))
            )
        )
        checks.append(
            BoundCheck(
                "beta4_bounds",
                np.pi / 2 - 6.0 * (6.0 + np.pi) / (np.pi * (m - 3)),
                b4,
                b2,
            )
        )
    alpha = alpha_for_flat_hessian(beta, m) if beta is not None else None
    return CriticalAngleReport(
        m=m, theta_m2=t2, theta_m4=t4, beta_m2=b2, beta_m4=b4,
        alpha_beta=alpha, checks=checks,
    )


def critical_angles_csv(m_values, path):
    """Write the threshold curves for a range of dimensions (all radians)."""
    cols = [
        "m",
        "theta_m2", "theta_m2_lower", "theta_m2_upper",
        "theta_m4", "theta_m4_upper",
        "beta_m2", "beta_m2_lower", "beta_m2_upper",
        "beta_m4", "beta_m4_lower",
        "min_margin",
    ]
    with open(path, "w", newline="") as fh:
        fh.write("# all angle columns in radians\n")
        fh.write(",".join(cols) + "\n")
        for m in m_values:
            rep = critical_report(int(m))
            vals = {c.name: c for c in rep.checks}
            row = [str(int(m))]
            t2c = vals["theta2_bounds"]
            row += [repr(rep.theta_m2), repr(t2c.lower), repr(t2c.upper)]
            if rep.theta_m4 is not None:
                row += [repr(rep.theta_m4), repr(vals["theta4_bounds"].upper)]
            else:
                row += ["", ""]
            b2c = vals["beta2_bounds"]
            row += [repr(rep.beta_m2), repr(b2c.lower), repr(b2c.upper)]
            if rep.beta_m4 is not None:
                row += [repr(rep.beta_m4), repr(vals["beta4_bounds"].lower)]
            else:
                row += ["", ""]
            row.append(repr(min(c.margin for c in rep.checks)))
            fh.write(",".join(row) + "\n")


def hole_model(beta, m, alpha=None) -> RadialMixture:
    """The annulus mixture at a given hole radius; alpha defaults to the
    flat-Hessian weight (the smeary member of the family)."""
    if alpha is None:
        alpha = alpha_for_flat_hessian(beta, m)
    return RadialMixture(m=m, alpha=alpha, radial=Annulus(beta))


def _self_test_flat_hessian(beta, m):
    """The defining identity of the flat-Hessian weight, for the test suite."""
    return hole_d2_closed(alpha_for_flat_hessian(beta, m), beta, m)
