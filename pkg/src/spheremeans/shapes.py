"""Oriented landmark pre-shapes and the simulated quadrangle families.

A configuration of k planar landmarks, after removing translation and
scale (but keeping orientation), is a point on the sphere S^(2k-3): the
centered coordinates are expressed in a fixed Helmert basis and normalized.
The simulated families put nearly all mass in a tight cone around a base
quadrangle plus a small atom almost antipodal to it, tuned so the mean's
Hessian is barely positive: samples of moderate size then behave as if the
mean were smeary.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import ModelError, ValidationError
from .profile import _radial_average, _ring_d2_at_zero
from .sphere import Interval, RadialMixture, UnitVector, rotate_pole_to, sample

CONE_HALF_ANGLE = 0.05 * np.pi
ATOM_ANGLE = 0.95 * np.pi


@dataclass(frozen=True)
class LandmarkConfig:
    """k >= 3 labelled planar landmarks (any length units)."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        object.__setattr__(self, "points", pts)
        if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 3:
            raise ValidationError("landmarks must be a (k, 2) array with k >= 3")
        centered = pts - pts.mean(axis=0)
        if np.linalg.norm(centered) == 0.0:
            raise ValidationError("all landmarks coincide")

    @property
    def k(self):
        return self.points.shape[0]


@dataclass(frozen=True)
class PreShape:
    """A unit vector on S^(2k-3) plus the centering basis that produced it."""

    vector: UnitVector
    basis: np.ndarray

    @property
    def k(self):
        return self.basis.shape[1]


@lru_cache(maxsize=32)
def helmert_basis(k):
    """Orthonormal rows spanning the centered subspace of R^k.

    Row j has j entries 1/sqrt(j(j+1)) followed by -j/sqrt(j(j+1)); rows
    are orthogonal to the all-ones vector, which is what removes
    translations deterministically.
    """
    h = np.zeros((k - 1, k))
    for j in range(1, k):
        scale = 1.0 / np.sqrt(j * (j + 1))
        h[j - 1, :j] = scale
        h[j - 1, j] = -j * scale
    return h


def preshape_project(cfg) -> PreShape:
    """Translation- and scale-free representative of a landmark configuration.

    Rotation is deliberately not removed: the shapes are oriented with
    respect to a fixed frame, so rotating the input moves the pre-shape.
    """
    if not isinstance(cfg, LandmarkConfig):
        cfg = LandmarkConfig(np.asarray(cfg, dtype=float))
    basis = helmert_basis(cfg.k)
    centered = cfg.points - cfg.points.mean(axis=0)
    reduced = basis @ centered          # (k-1, 2), same Frobenius norm
    flat = reduced.reshape(-1)
    norm = np.linalg.norm(flat)
    if norm == 0.0:
        raise ValidationError("degenerate configuration has no pre-shape")
    return PreShape(vector=UnitVector(flat / norm), basis=basis)


def augment_to_six(cfg) -> LandmarkConfig:
    """Insert the midpoints of the first and third quadrangle edges.

    Input order (p1, p2, p3, p4) becomes (p1, m12, p2, p3, m34, p4); the
    construction is linear, so it commutes with translation and scaling.
    """
    if not isinstance(cfg, LandmarkConfig):
        cfg = LandmarkConfig(np.asarray(cfg, dtype=float))
    if cfg.k != 4:
        raise ValidationError("edge-midpoint augmentation expects 4 landmarks")
    p = cfg.points
    m12 = 0.5 * (p[0] + p[1])
    m34 = 0.5 * (p[2] + p[3])
    return LandmarkConfig(np.stack([p[0], m12, p[1], p[2], m34, p[3]]))


UNIT_SQUARE = LandmarkConfig(np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]))


def base_preshape(k) -> PreShape:
    """Distribution center used by the simulations: the unit square's
    pre-shape (k = 4) or that of its midpoint augmentation (k = 6)."""
    if k == 4:
        return preshape_project(UNIT_SQUARE)
    if k == 6:
        return preshape_project(augment_to_six(UNIT_SQUARE))
    raise ValidationError("simulated families exist for k in {4, 6}")


def critical_atom_weight(m) -> float:
    """Atom mass at which the mean's Hessian vanishes for the cone+atom law.

    The law is uniform in the polar angle on [0, 0.05 pi] with an atom at
    0.95 pi; the Hessian at the pole is affine in the atom weight, positive
    without it and strongly negative at the atom, so one weight in (0, 1)
    flattens it.
    """
    cone = RadialMixture(m=m, alpha=1.0, radial=Interval(0.0, CONE_HALF_ANGLE))
    near = _radial_average(cone, lambda t: _ring_d2_at_zero(t, m))
    far = float(_ring_d2_at_zero(np.array([ATOM_ANGLE]), m)[0])
    if far >= 0.0 or near <= 0.0:
        raise ModelError("cone+atom family cannot flatten the Hessian here")
    w = near / (near - far)
    if not 0.0 < w < 1.0:
        raise ModelError(f"critical atom weight {w} outside (0, 1)")
    return w


def quadrangle_mixture(k, alpha_factor) -> RadialMixture:
    """The simulated pre-shape law on S^(2k-3) in polar-angle form.

    ``alpha_factor`` scales the critical atom weight; below 1 the Hessian
    at the mean stays slightly positive, which is the regime where finite
    samples mimic smeariness.
    """
    if k not in (4, 6):
        raise ValidationError("simulated families exist for k in {4, 6}")
    if not 0.0 < alpha_factor < 1.0:
        raise ValidationError("alpha_factor must lie in (0, 1)")
    m = 2 * k - 3
    weight = alpha_factor * critical_atom_weight(m)
    radial = Interval(0.0, CONE_HALF_ANGLE, atom_angle=ATOM_ANGLE, atom_weight=weight)
    return RadialMixture(m=m, alpha=1.0, radial=radial)


@dataclass
class SimulatedShapes:
    """Sampled pre-shape coordinates plus the generating model."""

    points: np.ndarray        # (n, 2k-2) rows on S^(2k-3)
    dist: RadialMixture
    base: PreShape
    atom_weight: float


def simulate_quadrangles(k, alpha_factor, n, rng) -> SimulatedShapes:
    """Draw n pre-shapes around the base quadrangle (k=4: S^5, k=6: S^9)."""
    if n < 1:
        raise ValidationError("need at least one sample")
    dist = quadrangle_mixture(k, alpha_factor)
    base = base_preshape(k)
    rot = rotate_pole_to(base.vector)
    pts = sample(dist, n, rng) @ rot.T
    return SimulatedShapes(
        points=pts,
        dist=dist,
        base=base,
        atom_weight=dist.radial.atom_weight,
    )
