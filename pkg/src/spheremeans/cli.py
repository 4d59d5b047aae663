"""Command line surface: one subcommand per experiment family.

Every experiment writes a CSV of plot-ready numbers plus a JSON sidecar
recording the seed, the model parameters, and library versions; identical
configuration and seed reproduce the files byte for byte.
"""

import argparse
import json
import os
import sys

import numpy as np
import scipy

from . import __version__
from .critical import alpha_for_flat_hessian, critical_angles_csv
from .errors import (
    AccuracyError,
    ConvergenceError,
    InternalConsistencyError,
    ValidationError,
)
from .estimator import (
    MeanOptions,
    bootstrap_k_of_n,
    empirical_frechet,
    frechet_mean,
    fss_magnitude,
    northern_cap_options,
    variance_scaling,
)
from .geodata import parse_latlon_csv
from .profile import (
    derivative_profile,
    flat_hessian_alpha,
    population_variance,
    verify_cap_model,
)
from .shapes import quadrangle_mixture
from .sphere import Annulus, Cap, RadialMixture, Ring, pole


def _versions():
    return {
        "spheremeans": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "python": ".".join(str(v) for v in sys.version_info[:3]),
    }


def _write_sidecar(out_path, payload):
    side = os.path.splitext(out_path)[0] + ".json"
    payload = {"versions": _versions(), **payload}
    with open(side, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _parse_int_list(text, name):
    """Accept '2:100' (inclusive range), 'a:b:count' (log-spaced), or a
    comma list."""
    text = text.strip()
    try:
        if ":" in text:
            parts = [int(p) for p in text.split(":")]
            if len(parts) == 2:
                lo, hi = parts
                return list(range(lo, hi + 1))
            if len(parts) == 3:
                lo, hi, count = parts
                vals = np.unique(
                    np.round(np.logspace(np.log10(lo), np.log10(hi), count)).astype(int)
                )
                return [int(v) for v in vals]
            raise ValueError
        return [int(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise ValidationError(
            f"{name}: expected 'lo:hi', 'lo:hi:count' or a comma list, got {text!r}"
        )


def _parse_float_list(text, name):
    try:
        return [float(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise ValidationError(f"{name}: expected a comma list of numbers, got {text!r}")


def _build_mixture(args):
    model = args.model
    if model in ("hole", "hemisphere"):
        beta = 0.0 if model == "hemisphere" else args.beta
        if beta is None:
            raise ValidationError("model.beta: hole model needs --beta")
        radial = Annulus(beta)
        auto = lambda: alpha_for_flat_hessian(beta, args.m)
    elif model == "cap":
        if args.delta is None:
            raise ValidationError("model.delta: cap model needs --delta")
        radial = Cap(args.delta)
        auto = None
    elif model == "ring":
        if args.theta_star is None:
            raise ValidationError("model.theta_star: ring model needs --theta-star")
        radial = Ring(args.theta_star)
        auto = lambda: flat_hessian_alpha(radial, args.m)
    else:
        raise ValidationError(f"model: unknown model {model!r}")
    if args.alpha == "auto":
        if auto is None:
            raise ValidationError("model.alpha: no automatic weight for this model")
        alpha = auto()
    else:
        try:
            alpha = float(args.alpha)
        except ValueError:
            raise ValidationError(f"model.alpha: expected number or 'auto', got {args.alpha!r}")
    if args.alpha_scale is not None:
        alpha *= args.alpha_scale
    return RadialMixture(m=args.m, alpha=alpha, radial=radial)


# ---------------------------------------------------------------------------
# Subcommand bodies
# ---------------------------------------------------------------------------


def _cmd_critical_angles(args):
    ms = _parse_int_list(args.m_range, "m_range")
    critical_angles_csv(ms, args.out)
    _write_sidecar(args.out, {"command": "critical-angles", "m_values": ms})
    print(f"wrote {args.out} ({len(ms)} dimensions)")
    return 0


def _cmd_profile(args):
    dist = _build_mixture(args)
    if args.psi is not None:
        grid = _parse_float_list(args.psi, "psi")
    else:
        grid = list(np.linspace(0.0, np.pi - 0.05, args.psi_points))
    orders = tuple(_parse_int_list(args.orders, "orders"))
    prof = derivative_profile(
        dist, grid, orders=orders, allow_restricted=args.allow_restricted
    )
    prof.to_csv(args.out)
    _write_sidecar(
        args.out,
        {"command": "profile", "model": dist.describe(), "orders": list(orders)},
    )
    print(f"wrote {args.out} ({len(grid)} probe angles)")
    return 0


def _cmd_verify_cap(args):
    grid = np.linspace(0.0, np.pi, args.psi_points + 1)[1:]
    report = verify_cap_model(args.delta, args.m, grid)
    payload = {
        "command": "verify-cap",
        "delta": report.delta,
        "m": report.m,
        "alpha": report.alpha,
        "min_excess": report.min_excess,
        "hessian": report.hessian,
        "south_density": report.south_density,
        "density_bound": report.density_bound,
        "excess_positive": report.excess_positive,
        "hessian_positive": report.hessian_positive,
        "density_ok": report.density_ok,
    }
    with open(args.out, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    ok = report.excess_positive and report.hessian_positive and report.density_ok
    print(f"verify-cap: {'pass' if ok else 'FAIL'} (details in {args.out})")
    return 0 if ok else 4


def _cmd_variance_scaling(args):
    dist = _build_mixture(args)
    opts = (
        northern_cap_options(args.m, tol=args.tol)
        if args.cap_search
        else MeanOptions(tol=args.tol)
    )
    center = pole(args.m) if args.center_pole else None
    curve = variance_scaling(
        dist,
        _parse_int_list(args.n_grid, "n_grid"),
        args.B,
        args.seed,
        opts=opts,
        center=center,
        workers=args.threads,
    )
    curve.to_csv(args.out)
    var_x = population_variance(dist)
    extra = {
        "command": "variance-scaling",
        "var_x": var_x,
        "s_fs": fss_magnitude(curve, var_x) if var_x > 0 else None,
        "center": "pole" if args.center_pole else "frechet-mean-of-means",
    }
    curve.sidecar(os.path.splitext(args.out)[0] + ".json", extra={**extra, "versions": _versions()})
    print(f"wrote {args.out} (slope {curve.slope:+.3f} +- {curve.slope_se:.3f})")
    return 0


def _load_points(args):
    geo = parse_latlon_csv(args.input)
    if geo.rejected:
        print(f"note: rejected {len(geo.rejected)} rows: {geo.rejected[:5]}...", file=sys.stderr)
    return geo.points


def _cmd_bootstrap(args):
    pts = _load_points(args)
    curve = bootstrap_k_of_n(
        pts,
        _parse_int_list(args.k, "k"),
        args.B,
        args.seed,
        opts=MeanOptions(tol=args.tol),
        workers=args.threads,
    )
    curve.to_csv(args.out)
    mean = frechet_mean(pts, MeanOptions(tol=args.tol))
    var_x = empirical_frechet(pts, mean.mean)
    curve.sidecar(
        os.path.splitext(args.out)[0] + ".json",
        extra={
            "command": "bootstrap",
            "input": args.input,
            "var_x": var_x,
            "s_fs": fss_magnitude(curve, var_x),
            "versions": _versions(),
        },
    )
    print(f"wrote {args.out} (slope {curve.slope:+.3f} +- {curve.slope_se:.3f})")
    return 0


def _cmd_shapes_sim(args):
    dist = quadrangle_mixture(args.k, args.alpha_factor)
    curve = variance_scaling(
        dist,
        _parse_int_list(args.n_grid, "n_grid"),
        args.B,
        args.seed,
        opts=MeanOptions(tol=args.tol),
        workers=args.threads,
    )
    curve.to_csv(args.out)
    curve.sidecar(
        os.path.splitext(args.out)[0] + ".json",
        extra={
            "command": "shapes-sim",
            "landmarks": args.k,
            "alpha_factor": args.alpha_factor,
            "versions": _versions(),
        },
    )
    print(f"wrote {args.out} (slope {curve.slope:+.3f} +- {curve.slope_se:.3f})")
    return 0


def _cmd_fss(args):
    pts = _load_points(args)
    curve = bootstrap_k_of_n(
        pts,
        _parse_int_list(args.k, "k"),
        args.B,
        args.seed,
        opts=MeanOptions(tol=args.tol),
        workers=args.threads,
    )
    mean = frechet_mean(pts, MeanOptions(tol=args.tol))
    var_x = empirical_frechet(pts, mean.mean)
    s_fs = fss_magnitude(curve, var_x)
    curve.to_csv(args.out)
    curve.sidecar(
        os.path.splitext(args.out)[0] + ".json",
        extra={
            "command": "fss",
            "input": args.input,
            "var_x": var_x,
            "s_fs": s_fs,
            "versions": _versions(),
        },
    )
    print(f"S_fs = {s_fs:.3f} (curve in {args.out})")
    return 0


# ---------------------------------------------------------------------------
# Parser assembly
# ---------------------------------------------------------------------------


def _add_model_flags(sub):
    sub.add_argument("--model", default="hole",
                     choices=["hole", "hemisphere", "cap", "ring"])
    sub.add_argument("--m", type=int, required=True, help="sphere dimension")
    sub.add_argument("--beta", type=float, help="hole radius (radians)")
    sub.add_argument("--delta", type=float, help="cap radius (radians)")
    sub.add_argument("--theta-star", type=float, help="ring polar angle (radians)")
    sub.add_argument("--alpha", default="auto",
                     help="off-pole mass, or 'auto' for the flat-Hessian weight")
    sub.add_argument("--alpha-scale", type=float,
                     help="multiply the (auto) mass, e.g. 0.5 for a control model")


def _add_run_flags(sub):
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--B", type=int, default=300, help="replicates per size")
    sub.add_argument("--tol", type=float, default=1e-9, help="mean-search tolerance")
    sub.add_argument("--threads", type=int,
                     default=int(os.environ.get("SPHEREMEANS_THREADS", "1")))


def build_parser():
    parser = argparse.ArgumentParser(
        prog="spheremeans",
        description="Frechet-mean statistics on spheres: profiles, critical "
                    "angles, scaling experiments, bootstrap diagnostics",
    )
    parser.add_argument("--config", help="TOML or JSON file with option defaults")
    subs = parser.add_subparsers(dest="command", required=True)

    sub = subs.add_parser("critical-angles", help="threshold curves vs dimension")
    sub.add_argument("--m-range", default="2:100")
    sub.add_argument("--out", required=True)
    sub.set_defaults(fn=_cmd_critical_angles)

    sub = subs.add_parser("profile", help="F and its derivatives on a probe grid")
    _add_model_flags(sub)
    sub.add_argument("--psi", help="comma list of probe angles (radians)")
    sub.add_argument("--psi-points", type=int, default=65)
    sub.add_argument("--orders", default="1,2,3,4")
    sub.add_argument("--allow-restricted", action="store_true",
                     help="permit one dimension lower when angles avoid the antipode")
    sub.add_argument("--out", required=True)
    sub.set_defaults(fn=_cmd_profile)

    sub = subs.add_parser(
        "verify-cap",
        help="check the antipodal-cap construction: high density, sharp minimum",
    )
    sub.add_argument("--delta", type=float, required=True)
    sub.add_argument("--m", type=int, required=True)
    sub.add_argument("--psi-points", type=int, default=128)
    sub.add_argument("--out", required=True)
    sub.set_defaults(fn=_cmd_verify_cap)

    sub = subs.add_parser("variance-scaling", help="Var[mean] against sample size")
    _add_model_flags(sub)
    _add_run_flags(sub)
    sub.add_argument("--n-grid", default="100:10000:5")
    sub.add_argument("--center-pole", action="store_true",
                     help="measure variance about the true pole")
    sub.add_argument("--cap-search", action="store_true",
                     help="restrict the mean search to the northern hemisphere")
    sub.add_argument("--out", required=True)
    sub.set_defaults(fn=_cmd_variance_scaling)

    sub = subs.add_parser("bootstrap", help="k-out-of-n bootstrap of a lat/lon sample")
    _add_run_flags(sub)
    sub.add_argument("--input", required=True, help="CSV with lat,lon columns")
    sub.add_argument("--k", default="1:1000:20", help="resample sizes")
    sub.add_argument("--out", required=True)
    sub.set_defaults(fn=_cmd_bootstrap)

    sub = subs.add_parser("shapes-sim", help="variance scaling of simulated pre-shapes")
    _add_run_flags(sub)
    sub.add_argument("--k", dest="k", type=int, default=4, choices=[4, 6],
                     help="landmark count")
    sub.add_argument("--alpha-factor", type=float, default=0.95)
    sub.add_argument("--n-grid", default="100:10000:5")
    sub.add_argument("--out", required=True)
    sub.set_defaults(fn=_cmd_shapes_sim)

    sub = subs.add_parser("fss", help="finite-sample-smeariness magnitude of a sample")
    _add_run_flags(sub)
    sub.add_argument("--input", required=True, help="CSV with lat,lon columns")
    sub.add_argument("--k", default="1:1000:20")
    sub.add_argument("--out", required=True)
    sub.set_defaults(fn=_cmd_fss)

    return parser


def _load_config(path):
    if path.endswith(".json"):
        with open(path) as fh:
            return json.load(fh)
    try:
        import tomllib as toml
    except ModuleNotFoundError:
        import tomli as toml
    with open(path, "rb") as fh:
        return toml.load(fh)


def _apply_config(parser, argv):
    """Install config-file values as subcommand defaults before parsing."""
    if "--config" not in argv:
        return argv
    idx = argv.index("--config")
    if idx + 1 >= len(argv):
        raise ValidationError("--config needs a file path")
    cfg = _load_config(argv[idx + 1])
    if not isinstance(cfg, dict):
        raise ValidationError("config: top level must be a table/object")
    commands = [a for a in argv if not a.startswith("-") and a != argv[idx + 1]]
    if not commands:
        raise ValidationError("config: no subcommand on the command line")
    command = commands[0]
    actions = {
        a.dest: a
        for sp in parser._subparsers._group_actions
        for name, p in sp.choices.items()
        if name == command
        for a in p._actions
    }
    section = cfg.get(command, cfg)
    defaults = {}
    for key, value in section.items():
        if isinstance(value, dict):
            continue
        dest = key.replace("-", "_")
        if dest not in actions:
            raise ValidationError(f"config: unknown field '{command}.{key}'")
        defaults[dest] = value
    for sp in parser._subparsers._group_actions:
        for name, p in sp.choices.items():
            if name == command:
                p.set_defaults(**defaults)
    return argv


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv = _apply_config(parser, argv)
        args = parser.parse_args(argv)
        return args.fn(args)
    except (ValidationError,) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ConvergenceError, AccuracyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except InternalConsistencyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
