"""Sample Frechet means and the Monte-Carlo / bootstrap harnesses.

The mean search is the tangent-space fixed-point iteration: pull the data
into the tangent space at the current iterate, average, follow the
exponential map, halve the step when the objective fails to decrease.
Everything downstream (variance-scaling curves, k-out-of-n bootstrap,
finite-sample-smeariness magnitude) is built from many such means with
deterministic per-replicate seeding.
"""

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ConvergenceError, ExperimentError, ValidationError
from .sphere import (
    RadialMixture,
    UnitVector,
    distances_to,
    exp_at,
    log_rows,
    pole,
    sample,
)

_ANTIPODE_MARGIN = 1e-9


@dataclass
class MeanOptions:
    tol: float = 1e-10
    max_iter: int = 10_000
    restarts: int = 5
    # optional geodesic-ball restriction of the search (local means)
    cap_center: np.ndarray = None
    cap_radius: float = None


@dataclass
class MeanResult:
    mean: UnitVector
    frechet_value: float
    iterations: int
    gradient_norm: float
    restarts: int


def _as_points(sample_points):
    if isinstance(sample_points, np.ndarray):
        pts = np.asarray(sample_points, dtype=float)
    else:
        rows = [
            p.coords if isinstance(p, UnitVector) else np.asarray(p, dtype=float)
            for p in sample_points
        ]
        if not rows:
            raise ValidationError("empty sample")
        pts = np.stack(rows)
    if pts.ndim != 2 or pts.shape[0] < 1:
        raise ValidationError("sample must be a nonempty set of points")
    return pts


def empirical_frechet(sample_points, p) -> float:
    """Mean squared geodesic distance of the sample to the probe point."""
    pts = _as_points(sample_points)
    d = distances_to(pts, p)
    return float(np.mean(d * d))


def _clip_to_cap(mu, opts):
    if opts.cap_center is None:
        return mu
    c = opts.cap_center
    ang = float(np.arccos(np.clip(np.dot(mu, c), -1.0, 1.0)))
    if ang <= opts.cap_radius:
        return mu
    residual = mu - np.dot(mu, c) * c
    rnorm = np.linalg.norm(residual)
    if rnorm == 0.0:
        return c.copy()
    return exp_at(c, (opts.cap_radius / rnorm) * residual)


_PURE_STEP_THRESHOLD = 1e-6


def _eval_state(points, mu):
    """One pass over the data: objective, polar angles, tangent mean."""
    dots = np.clip(points @ mu, -1.0, 1.0)
    ang = np.arccos(dots)
    fval = float(np.mean(ang * ang))
    residual = points - dots[:, None] * mu
    rnorm = np.linalg.norm(residual, axis=1)
    scale = np.where(rnorm > 0.0, ang / np.where(rnorm > 0.0, rnorm, 1.0), 0.0)
    grad = (scale[:, None] * residual).mean(axis=0)
    return fval, float(np.max(ang)), grad


def _iterate(points, mu0, opts):
    """One fixed-point run; returns (mu, fval, grad_norm, iterations, hit_cut).

    Far from the minimum each step must decrease the objective (halving the
    step until it does); once the tangent mean is small the pure fixed-point
    step takes over, because objective differences there drown in float
    noise while the iteration itself still contracts.
    """
    mu = mu0 / np.linalg.norm(mu0)
    fval, max_ang, grad = _eval_state(points, mu)
    gnorm = float(np.linalg.norm(grad))
    it = 0
    for it in range(1, opts.max_iter + 1):
        if max_ang > np.pi - _ANTIPODE_MARGIN:
            return mu, fval, gnorm, it, True
        if gnorm < opts.tol:
            return mu, fval, gnorm, it, False
        if gnorm < _PURE_STEP_THRESHOLD:
            mu = _clip_to_cap(exp_at(mu, grad), opts)
            fval, max_ang, grad = _eval_state(points, mu)
            gnorm = float(np.linalg.norm(grad))
            continue
        step = 1.0
        improved = False
        for _ in range(40):
            cand = _clip_to_cap(exp_at(mu, step * grad), opts)
            fcand, cand_max, cand_grad = _eval_state(points, cand)
            if fcand < fval:
                mu, fval, max_ang, grad = cand, fcand, cand_max, cand_grad
                gnorm = float(np.linalg.norm(grad))
                improved = True
                break
            step *= 0.5
        if not improved:
            # cannot decrease the objective at float resolution: fall back
            # to pure fixed-point steps from here on
            mu = _clip_to_cap(exp_at(mu, grad), opts)
            fval, max_ang, grad = _eval_state(points, mu)
            gnorm = float(np.linalg.norm(grad))
    return mu, fval, gnorm, it, False


def frechet_mean(sample_points, opts: MeanOptions = None, rng=None) -> MeanResult:
    """Best local minimizer of the empirical Frechet function.

    Starts from the normalized extrinsic average (or a random data point
    when that average nearly vanishes) and restarts from perturbed data
    points on non-convergence or when the iterate's antipode touches the
    sample.  Raises ConvergenceError, carrying the best iterate, only if
    every attempt fails.
    """
    pts = _as_points(sample_points)
    opts = opts or MeanOptions()
    rng = rng or np.random.default_rng(0x5D0)
    extrinsic = pts.mean(axis=0)
    if np.linalg.norm(extrinsic) < 1e-3:
        mu0 = pts[rng.integers(pts.shape[0])]
    else:
        mu0 = extrinsic / np.linalg.norm(extrinsic)
    mu0 = _clip_to_cap(mu0, opts)
    best = None
    total_it = 0
    for attempt in range(opts.restarts + 1):
        mu, fval, gnorm, its, hit_cut = _iterate(pts, mu0, opts)
        total_it += its
        if best is None or fval < best[1]:
            best = (mu, fval, gnorm, attempt)
        if gnorm < opts.tol and not hit_cut:
            return MeanResult(
                mean=UnitVector.normalized(mu),
                frechet_value=fval,
                iterations=total_it,
                gradient_norm=gnorm,
                restarts=attempt,
            )
        seed_pt = pts[rng.integers(pts.shape[0])]
        noise = rng.standard_normal(pts.shape[1])
        noise -= np.dot(noise, seed_pt) * seed_pt
        mu0 = _clip_to_cap(exp_at(seed_pt, 0.05 * noise), opts)
    mu, fval, gnorm, _ = best
    raise ConvergenceError(
        f"mean search did not reach gradient norm {opts.tol} "
        f"(best {gnorm:.3e} after {opts.restarts + 1} attempts)",
        best=MeanResult(
            mean=UnitVector.normalized(mu),
            frechet_value=fval,
            iterations=total_it,
            gradient_norm=gnorm,
            restarts=opts.restarts,
        ),
    )


# ---------------------------------------------------------------------------
# Scaling experiments
# ---------------------------------------------------------------------------


@dataclass
class ScalingCurve:
    """Variance of replicate means against sample (or resample) size.

    ``rescaled_variance`` is size * variance, the quantity that is flat
    under standard square-root asymptotics and grows under smeariness.
    """

    sizes: np.ndarray
    variance: np.ndarray
    replicates: int
    seed: int
    slope: float
    slope_se: float
    failures: np.ndarray
    size_label: str = "n"
    meta: dict = field(default_factory=dict)

    @property
    def rescaled_variance(self):
        return self.sizes * self.variance

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            fh.write("# var, rescaled_var: radians^2; size: count\n")
            fh.write("size,var,rescaled_var,n_failures\n")
            for s, v, r, f in zip(
                self.sizes, self.variance, self.rescaled_variance, self.failures
            ):
                fh.write(f"{int(s)},{v!r},{r!r},{int(f)}\n")

    def sidecar(self, path, extra=None):
        payload = {
            "size_label": self.size_label,
            "replicates": int(self.replicates),
            "seed": int(self.seed),
            "slope": self.slope,
            "slope_se": self.slope_se,
            "sizes": [int(s) for s in self.sizes],
            **self.meta,
        }
        if extra:
            payload.update(extra)
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")


def _loglog_slope(sizes, variance):
    if len(sizes) < 2:
        return float("nan"), float("nan")
    x = np.log(np.asarray(sizes, dtype=float))
    y = np.log(np.asarray(variance, dtype=float))
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    dof = max(len(x) - 2, 1)
    se = float(np.sqrt(np.sum(resid**2) / dof / np.sum((x - x.mean()) ** 2)))
    return float(slope), se


def _variance_of_means(means, center, opts):
    """Frechet variance of replicate means, about ``center`` or (default)
    about their own Frechet mean."""
    if center is None:
        center = frechet_mean(means, opts).mean.coords
    else:
        center = np.asarray(center, dtype=float)
    d = distances_to(means, center)
    return float(np.mean(d * d))


def _replicate_means(task, count, seed_seq, workers):
    """Run ``task(rng) -> mean row`` for every replicate, deterministically.

    Each replicate gets its own spawned seed, so the result is identical
    whatever the worker count; failures come back as None rows.
    """
    rngs = [np.random.default_rng(s) for s in seed_seq.spawn(count)]

    def run(idx):
        try:
            return task(rngs[idx])
        except ConvergenceError:
            return None

    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(run, range(count)))
    else:
        rows = [run(i) for i in range(count)]
    means = [r for r in rows if r is not None]
    return means, count - len(means)


def variance_scaling(
    dist: RadialMixture,
    n_grid,
    replicates,
    seed,
    opts: MeanOptions = None,
    center=None,
    workers=1,
    max_failure_rate=0.05,
) -> ScalingCurve:
    """Monte-Carlo curve of Var[sample mean] against the sample size.

    For each size, ``replicates`` independent samples are drawn and their
    means computed; the variance is the Frechet variance of those means
    (about their own mean, or about ``center`` when the population mean is
    known).  The log-log slope of variance against size is fitted on the
    raw variances.
    """
    n_grid = [int(n) for n in n_grid]
    if sorted(n_grid) != n_grid:
        raise ValidationError("sample sizes must be ascending")
    if replicates < 50:
        raise ValidationError("need at least 50 replicates per size")
    opts = opts or MeanOptions()
    root = np.random.SeedSequence(seed)
    per_size = root.spawn(len(n_grid))
    variance = np.empty(len(n_grid))
    failures = np.zeros(len(n_grid), dtype=int)
    for i, n in enumerate(n_grid):

        def task(rng, n=n):
            pts = sample(dist, n, rng)
            return frechet_mean(pts, opts, rng=rng).mean.coords

        means, failed = _replicate_means(task, replicates, per_size[i], workers)
        failures[i] = failed
        if failed > max_failure_rate * replicates:
            raise ExperimentError(
                f"{failed}/{replicates} replicates failed to converge at n={n}"
            )
        variance[i] = _variance_of_means(np.stack(means), center, opts)
    slope, se = _loglog_slope(n_grid, variance)
    return ScalingCurve(
        sizes=np.array(n_grid),
        variance=variance,
        replicates=replicates,
        seed=seed,
        slope=slope,
        slope_se=se,
        failures=failures,
        size_label="n",
        meta={"model": dist.describe()},
    )


def bootstrap_k_of_n(
    sample_points,
    k_grid,
    replicates,
    seed,
    opts: MeanOptions = None,
    center=None,
    workers=1,
    max_failure_rate=0.05,
) -> ScalingCurve:
    """k-out-of-n bootstrap curve: Var[mean of k resampled points] vs k.

    Resampling is with replacement, so k may exceed the sample size; the
    rescaled curve k * Var is flat for well-behaved samples and grows when
    the sample inherits smeariness from its population.
    """
    pts = _as_points(sample_points)
    n = pts.shape[0]
    k_grid = [int(k) for k in k_grid]
    if sorted(k_grid) != k_grid:
        raise ValidationError("resample sizes must be ascending")
    if any(k < 1 or k > 10 * n for k in k_grid):
        raise ValidationError("resample sizes must lie in [1, 10 n]")
    if replicates < 50:
        raise ValidationError("need at least 50 replicates per size")
    opts = opts or MeanOptions()
    root = np.random.SeedSequence(seed)
    per_size = root.spawn(len(k_grid))
    variance = np.empty(len(k_grid))
    failures = np.zeros(len(k_grid), dtype=int)
    for i, k in enumerate(k_grid):

        def task(rng, k=k):
            idx = rng.integers(0, n, size=k)
            return frechet_mean(pts[idx], opts, rng=rng).mean.coords

        means, failed = _replicate_means(task, replicates, per_size[i], workers)
        failures[i] = failed
        if failed > max_failure_rate * replicates:
            raise ExperimentError(
                f"{failed}/{replicates} bootstrap replicates failed at k={k}"
            )
        variance[i] = _variance_of_means(np.stack(means), center, opts)
    slope, se = _loglog_slope(k_grid, variance)
    return ScalingCurve(
        sizes=np.array(k_grid),
        variance=variance,
        replicates=replicates,
        seed=seed,
        slope=slope,
        slope_se=se,
        failures=failures,
        size_label="k",
        meta={"n": int(n)},
    )


# ---------------------------------------------------------------------------
# Finite sample smeariness
# ---------------------------------------------------------------------------


def fss_magnitude(curve: ScalingCurve, var_x) -> float:
    """Largest observed ratio of rescaled mean variance to data variance.

    A grid maximum, hence a lower bound for the true supremum over all
    sizes; values near 1 mean Euclidean-like behavior.
    """
    if curve.sizes.size == 0:
        raise ValidationError("empty scaling curve")
    if var_x <= 0.0:
        raise ValidationError("data variance must be positive")
    return float(np.max(curve.rescaled_variance) / var_x)


def ring_fss_theory(alpha, alpha0) -> float:
    """Limit of n Var[mean] / Var[data] for the single-ring mixture.

    ``alpha0`` is the ring mass that flattens the Hessian; the ratio blows
    up as the actual mass approaches it from below.
    """
    if not 0.0 < alpha < alpha0 <= 1.0:
        raise ValidationError(
            "need 0 < alpha < alpha0 <= 1 (Hessian positive below alpha0)"
        )
    return (alpha0 / (alpha0 - alpha)) ** 2


def northern_cap_options(m, radius=np.pi / 2, **kwargs) -> MeanOptions:
    """Mean-search options restricted to the geodesic ball around the pole
    (the local-mean reading of the ring experiments)."""
    return MeanOptions(cap_center=pole(m), cap_radius=radius, **kwargs)
