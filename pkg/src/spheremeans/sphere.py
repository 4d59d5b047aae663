"""Exact geometry of the unit sphere S^m and rotation-symmetric sampling.

Points are unit vectors in R^(m+1); the pole of every rotation-symmetric
distribution is the last coordinate axis e_(m+1).  Distances are geodesic
(arc length), so everything is in radians.
"""

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import (
    CutLocusError,
    DimensionMismatchError,
    ValidationError,
)
from .quadrature import gl_nodes

UNIT_NORM_TOL = 1e-12
TANGENCY_TOL = 1e-10
CUT_LOCUS_TOL = 1e-9

_CDF_TABLE_NODES = 1024


def pole(m):
    """North pole e_(m+1) of S^m."""
    e = np.zeros(m + 1)
    e[-1] = 1.0
    return e


@dataclass(frozen=True)
class UnitVector:
    """A point on S^m, stored as a unit vector in R^(m+1)."""

    coords: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coords, dtype=float)
        object.__setattr__(self, "coords", c)
        if c.ndim != 1 or c.size < 2:
            raise ValidationError("a sphere point needs at least 2 coordinates")
        if abs(np.linalg.norm(c) - 1.0) > UNIT_NORM_TOL:
            raise ValidationError(
                f"norm {np.linalg.norm(c)!r} is not 1 within {UNIT_NORM_TOL}"
            )

    @property
    def m(self):
        """Dimension of the sphere the point lives on."""
        return self.coords.size - 1

    @staticmethod
    def normalized(vec):
        """Project an arbitrary nonzero vector onto the sphere."""
        v = np.asarray(vec, dtype=float)
        n = np.linalg.norm(v)
        if n == 0.0:
            raise ValidationError("cannot normalize the zero vector")
        return UnitVector(v / n)


@dataclass(frozen=True)
class TangentVector:
    """A vector in the tangent space at ``base``; length is arc length."""

    base: UnitVector
    components: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.components, dtype=float)
        object.__setattr__(self, "components", c)
        if c.shape != self.base.coords.shape:
            raise DimensionMismatchError("tangent components must match the base point")
        if abs(np.dot(self.base.coords, c)) > TANGENCY_TOL:
            raise ValidationError(
                f"components are not tangent at base (inner product "
                f"{np.dot(self.base.coords, c):.3e})"
            )

    @property
    def norm(self):
        return float(np.linalg.norm(self.components))


# ---------------------------------------------------------------------------
# Rotation-symmetric distributions: pole atom + radial law in the polar angle
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Annulus:
    """Uniform (surface area) on polar angles [pi/2, pi - beta].

    The support is the closed southern hemisphere with a hole of radius
    ``beta`` around the south pole; beta = 0 is the full hemisphere.
    """

    beta: float

    def __post_init__(self):
        if not 0.0 <= self.beta < np.pi / 2:
            raise ValidationError(f"hole radius beta={self.beta} outside [0, pi/2)")

    @property
    def support(self):
        return (np.pi / 2, np.pi - self.beta)


@dataclass(frozen=True)
class Cap:
    """Uniform (surface area) on a ball of radius delta around the south pole."""

    delta: float

    def __post_init__(self):
        if not 0.0 < self.delta <= np.pi / 2:
            raise ValidationError(f"cap radius delta={self.delta} outside (0, pi/2]")

    @property
    def support(self):
        return (np.pi - self.delta, np.pi)


@dataclass(frozen=True)
class Ring:
    """All mass on the subsphere at one fixed polar angle."""

    theta_star: float

    def __post_init__(self):
        if not 0.0 < self.theta_star < np.pi:
            raise ValidationError(f"ring angle {self.theta_star} outside (0, pi)")


@dataclass(frozen=True)
class Interval:
    """Uniform in the polar angle on [lo, hi], plus an optional angular atom.

    The continuous part is uniform in theta itself (not in surface area);
    ``atom_weight`` is the fraction of the radial mass sitting at
    ``atom_angle``.
    """

    lo: float
    hi: float
    atom_angle: float = None
    atom_weight: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.lo < self.hi <= np.pi:
            raise ValidationError(f"bad angular interval [{self.lo}, {self.hi}]")
        if self.atom_weight:
            if self.atom_angle is None or not 0.0 < self.atom_angle < np.pi:
                raise ValidationError("atom angle must lie in (0, pi)")
            if not 0.0 <= self.atom_weight < 1.0:
                raise ValidationError("atom weight must lie in [0, 1)")


RADIAL_LAWS = (Annulus, Cap, Ring, Interval)


@dataclass(frozen=True)
class RadialMixture:
    """Point mass at the pole (weight 1 - alpha) plus a radial component.

    ``alpha`` is the total mass off the pole; the radial law describes how
    that mass is spread over polar angles.  Directions at a given polar
    angle are always uniform on the subsphere.
    """

    m: int
    alpha: float
    radial: object

    def __post_init__(self):
        if self.m < 1:
            raise ValidationError("sphere dimension must be >= 1")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValidationError(f"off-pole mass alpha={self.alpha} outside [0, 1]")
        if not isinstance(self.radial, RADIAL_LAWS):
            raise ValidationError(f"unknown radial law {type(self.radial).__name__}")

    def describe(self):
        """Flat parameter dict, for experiment sidecars."""
        out = {"m": self.m, "alpha": self.alpha, "radial": type(self.radial).__name__}
        for k, v in vars(self.radial).items():
            if v is not None:
                out[k] = v
        return out


# ---------------------------------------------------------------------------
# Geometry
# ---------------------------------------------------------------------------


def _coords(p):
    return p.coords if isinstance(p, UnitVector) else np.asarray(p, dtype=float)


def geodesic_distance(p, q):
    """Arc-length distance arccos<p, q> in [0, pi]."""
    pc, qc = _coords(p), _coords(q)
    if pc.shape != qc.shape:
        raise DimensionMismatchError(
            f"points live on different spheres: {pc.shape} vs {qc.shape}"
        )
    return float(np.arccos(np.clip(np.dot(pc, qc), -1.0, 1.0)))


def exp_map(v: TangentVector) -> UnitVector:
    """Follow the geodesic from the base point for arc length |v|."""
    t = v.norm
    if t == 0.0:
        return v.base
    direction = v.components / t
    out = np.cos(t) * v.base.coords + np.sin(t) * direction
    return UnitVector(out / np.linalg.norm(out))


def log_map(p, q) -> TangentVector:
    """Inverse of the exponential map at p, defined away from -p."""
    pc, qc = _coords(p), _coords(q)
    if pc.shape != qc.shape:
        raise DimensionMismatchError("points live on different spheres")
    dot = float(np.clip(np.dot(pc, qc), -1.0, 1.0))
    ang = np.arccos(dot)
    if ang > np.pi - CUT_LOCUS_TOL:
        raise CutLocusError(
            f"point is within {np.pi - ang:.2e} of the antipode; logarithm undefined"
        )
    residual = qc - dot * pc
    rnorm = np.linalg.norm(residual)
    base = p if isinstance(p, UnitVector) else UnitVector(pc)
    if rnorm == 0.0:
        return TangentVector(base, np.zeros_like(pc))
    return TangentVector(base, (ang / rnorm) * residual)


def rotate_pole_to(p) -> np.ndarray:
    """Special orthogonal matrix taking the pole e_(m+1) to p.

    Rotates only inside the plane spanned by the pole and p, so applied to
    samples it preserves all pairwise distances and radial laws.
    """
    pc = _coords(p)
    d = pc.size
    e = np.zeros(d)
    e[-1] = 1.0
    c = float(np.clip(np.dot(e, pc), -1.0, 1.0))
    if c > 1.0 - 1e-15:
        return np.eye(d)
    if c < -1.0 + 1e-15:
        # rotate by pi in the plane spanned by the pole and the first axis
        u = np.zeros(d)
        u[0] = 1.0
        return np.eye(d) - 2.0 * np.outer(e, e) - 2.0 * np.outer(u, u)
    u = pc - c * e
    u = u / np.linalg.norm(u)
    s = np.sqrt(max(0.0, 1.0 - c * c))
    eye = np.eye(d)
    return (
        eye
        + s * (np.outer(u, e) - np.outer(e, u))
        + (c - 1.0) * (np.outer(e, e) + np.outer(u, u))
    )


# Vectorized row-wise variants used by the estimator; points are (n, m+1).


def distances_to(points, q):
    return np.arccos(np.clip(points @ _coords(q), -1.0, 1.0))


def log_rows(base, points):
    """Log map of every row of ``points`` at ``base``; rows near the antipode
    of the base are the caller's problem (check with distances_to first)."""
    b = _coords(base)
    dots = np.clip(points @ b, -1.0, 1.0)
    ang = np.arccos(dots)
    residual = points - dots[:, None] * b
    rnorm = np.linalg.norm(residual, axis=1)
    safe = np.where(rnorm > 0.0, rnorm, 1.0)
    return (ang / safe)[:, None] * residual


def exp_at(base, tangent):
    b = _coords(base)
    t = np.linalg.norm(tangent)
    if t == 0.0:
        return b.copy()
    out = np.cos(t) * b + np.sin(t) * (tangent / t)
    return out / np.linalg.norm(out)


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------


@lru_cache(maxsize=128)
def _sin_power_cdf_table(m, lo, hi):
    """Cumulative integral of sin^(m-1) on a uniform grid over [lo, hi].

    Grid spacing is fine enough that a linear density model inside each
    cell keeps the inverse-CDF bias far below Monte-Carlo resolution.
    """
    grid = np.linspace(lo, hi, _CDF_TABLE_NODES + 1)
    dens = np.sin(grid) ** (m - 1)
    # per-cell 5-node Gauss-Legendre, exact to ~1e-15 for these integrands
    x, w = gl_nodes(5, 0.0, 1.0)
    cells = grid[:-1, None] + np.diff(grid)[:, None] * x[None, :]
    cell_ints = (np.sin(cells) ** (m - 1)) @ w * np.diff(grid)
    cdf = np.concatenate([[0.0], np.cumsum(cell_ints)])
    return grid, dens, cdf


def radial_cdf(dist: RadialMixture, theta):
    """CDF of the polar angle of the off-pole (continuous) component."""
    theta = np.asarray(theta, dtype=float)
    law = dist.radial
    if isinstance(law, (Annulus, Cap)):
        lo, hi = law.support
        grid, _, cdf = _sin_power_cdf_table(dist.m, lo, hi)
        vals = np.interp(theta, grid, cdf / cdf[-1])
        return np.clip(vals, 0.0, 1.0)
    if isinstance(law, Interval):
        return np.clip((theta - law.lo) / (law.hi - law.lo), 0.0, 1.0)
    if isinstance(law, Ring):
        return (theta >= law.theta_star).astype(float)
    raise ValidationError(f"unknown radial law {type(law).__name__}")


def _sample_sin_power_angles(m, lo, hi, n, rng):
    """Inverse-CDF draws from the density sin^(m-1) restricted to [lo, hi]."""
    grid, dens, cdf = _sin_power_cdf_table(m, lo, hi)
    total = cdf[-1]
    if not np.isfinite(total) or total <= 0.0:
        raise ValidationError("degenerate radial support")
    u = rng.random(n) * total
    idx = np.searchsorted(cdf, u, side="right") - 1
    idx = np.clip(idx, 0, len(cdf) - 2)
    # invert a linear density model inside the cell (solve the quadratic)
    h = grid[1] - grid[0]
    r = u - cdf[idx]
    f0 = dens[idx]
    f1 = dens[idx + 1]
    slope = (f1 - f0) / h
    with np.errstate(invalid="ignore"):
        disc = np.sqrt(np.maximum(f0 * f0 + 2.0 * slope * r, 0.0))
        t = np.where(np.abs(slope) > 1e-14 * np.maximum(f0, f1), (disc - f0) / slope, r / np.maximum(f0, 1e-300))
    return grid[idx] + np.clip(t, 0.0, h)


def _sample_polar_angles(dist: RadialMixture, n, rng):
    law = dist.radial
    if isinstance(law, (Annulus, Cap)):
        lo, hi = law.support
        return _sample_sin_power_angles(dist.m, lo, hi, n, rng)
    if isinstance(law, Ring):
        return np.full(n, law.theta_star)
    if isinstance(law, Interval):
        angles = law.lo + (law.hi - law.lo) * rng.random(n)
        if law.atom_weight:
            at_atom = rng.random(n) < law.atom_weight
            angles[at_atom] = law.atom_angle
        return angles
    raise ValidationError(f"unknown radial law {type(law).__name__}")


def sample(dist: RadialMixture, n, rng) -> np.ndarray:
    """Draw n i.i.d. points from the mixture, one per row.

    With probability 1 - alpha a draw is the pole itself; otherwise the
    polar angle comes from the radial law and the direction is uniform on
    the subsphere at that angle (a normalized Gaussian in the orthogonal
    complement of the pole).
    """
    if n < 1:
        raise ValidationError("need at least one sample")
    m = dist.m
    out = np.zeros((n, m + 1))
    out[:, -1] = 1.0
    off = rng.random(n) < dist.alpha if dist.alpha < 1.0 else np.ones(n, bool)
    k = int(np.count_nonzero(off))
    if k == 0:
        return out
    theta = _sample_polar_angles(dist, k, rng)
    gauss = rng.standard_normal((k, m))
    gauss /= np.linalg.norm(gauss, axis=1, keepdims=True)
    out[off, :m] = np.sin(theta)[:, None] * gauss
    out[off, m] = np.cos(theta)
    return out


def as_unit_vectors(points):
    """Wrap an (n, m+1) array of rows as UnitVector objects."""
    return [UnitVector(row) for row in np.asarray(points, dtype=float)]
