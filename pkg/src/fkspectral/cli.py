"""Command-line entry point: ``fkspectral <subcommand> [options]``.

Exit codes: 0 success, 2 assumption check failed, 3 numerical error,
4 a validation suite did not pass, 64 usage error, 65 model file could not be
read or parsed, 66 parameter out of range.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
import tempfile
import time
import warnings
from pathlib import Path

import numpy as np

from . import __version__, branching, hermite, qprocess, qsd, spectral
from .grid import Grid
from .model import AssumptionViolation, ModelFileError, QuadratureError, load_model, reduce, spec_from_config
from .model import validate_assumptions
from .rng import stream
from .semigroup import ConsistencyError, KernelEvaluator, TruncationWarning

EXIT_OK = 0
EXIT_ASSUMPTION = 2
EXIT_NUMERICAL = 3
EXIT_VALIDATION = 4
EXIT_USAGE = 64
EXIT_MODEL = 65
EXIT_PARAMS = 66

CSV_SCHEMA = 1
OUT_ENV = "FKSPECTRAL_OUT"

NUMERICAL_ERRORS = (
    branching.NumericalError,
    branching.EmptySampleError,
    ConsistencyError,
    spectral.NearDegenerateError,
    QuadratureError,
    qsd.DegenerateEvolutionError,
    FloatingPointError,
    OverflowError,
    np.linalg.LinAlgError,
)


class UsageError(Exception):
    pass


class ParamError(ValueError):
    pass


class ValidationFailed(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


# --- output helpers -----------------------------------------------------------


def _atomic_write(path: Path, data: bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def _json_bytes(obj) -> bytes:
    return (json.dumps(obj, indent=2, sort_keys=True, allow_nan=True) + "\n").encode()


def _csv_bytes(config: dict, columns: list[str], rows) -> bytes:
    buf = io.StringIO()
    buf.write(f"# fkspectral-csv v{CSV_SCHEMA} config={json.dumps(config, sort_keys=True)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in r])
    return buf.getvalue().encode()


class Outputs:
    """Collects artifacts and writes them atomically, each with a timestamped side file."""

    def __init__(self, out_dir: Path, config: dict):
        self.dir = out_dir
        self.config = config
        self.started = time.time()

    def json(self, name: str, payload: dict) -> Path:
        path = self.dir / name
        _atomic_write(path, _json_bytes({"config": self.config, "result": payload}))
        self._meta(path)
        return path

    def csv(self, name: str, columns: list[str], rows) -> Path:
        path = self.dir / name
        _atomic_write(path, _csv_bytes(self.config, columns, rows))
        self._meta(path)
        return path

    def table(self, stem: str, fmt: str, columns: list[str], rows) -> Path:
        rows = [list(r) for r in rows]
        if fmt == "json":
            return self.json(f"{stem}.json", {"columns": columns, "rows": [[_plain(v) for v in r] for r in rows]})
        return self.csv(f"{stem}.csv", columns, rows)

    def _meta(self, path: Path) -> None:
        meta = {
            "artifact": path.name,
            "created_unix": time.time(),
            "created_utc": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
            "elapsed_s": time.time() - self.started,
            "version": __version__,
        }
        _atomic_write(path.with_name(path.name + ".meta.json"), _json_bytes(meta))


def _plain(v):
    if isinstance(v, (np.floating, float)):
        return float(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return _plain(obj)


# --- model and basis ----------------------------------------------------------


def _model_config(args) -> dict:
    if args.model is not None:
        return {"file": str(args.model)}
    cfg = {"kind": "builtin_hermite" if args.builtin == "hermite" else "builtin_oscillator", "sigma": args.sigma}
    if args.builtin == "hermite":
        cfg["c"] = args.c
    return cfg


def _resolve_model(args):
    if args.model is not None:
        spec, grid, raw = load_model(args.model)
    else:
        raw = _model_config(args)
        spec, grid = spec_from_config(raw)
    if args.L is not None or args.n_grid is not None:
        grid = Grid(args.L if args.L is not None else grid.L, args.n_grid if args.n_grid is not None else grid.n)
    return spec, grid, raw


def _cache_key(raw: dict, grid: Grid, K: int, stencil: int) -> str:
    blob = json.dumps({"model": raw, "grid": grid.to_dict(), "K": K, "stencil": stencil}, sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:20]


def _basis_dir(out_dir: Path) -> Path:
    return out_dir / "basis"


def _get_basis(args, out_dir: Path, spec, grid, raw, K: int | None = None):
    """Load the cached basis for (model, grid, K, stencil) or solve and store it."""
    K = args.K if K is None else K
    key = _cache_key(raw, grid, K, args.stencil)
    stem = _basis_dir(out_dir) / f"basis-{key}"
    if stem.with_suffix(".npz").exists() and stem.with_suffix(".json").exists():
        return spectral.load_basis(stem), key, True
    report = validate_assumptions(spec, grid)
    if not report.passed:
        details = "; ".join(
            f"{name} (worst at x={report.checks[name].worst_node}, excess {report.checks[name].worst_value})"
            for name in report.failed()
        )
        raise AssumptionViolation(f"model fails {details}")
    basis = spectral.solve_eigen(reduce(spec, grid), grid, K=K, stencil=args.stencil)
    stem.parent.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory(dir=stem.parent) as tmp:
        basis.save(Path(tmp) / "b")
        # json last: a dump counts as present only once both files exist
        os.replace(Path(tmp) / "b.npz", stem.with_suffix(".npz"))
        os.replace(Path(tmp) / "b.json", stem.with_suffix(".json"))
    return basis, key, False


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ParamError(message)


def _base_config(args, raw: dict, grid: Grid) -> dict:
    cfg = {
        k: _jsonable(v)
        for k, v in vars(args).items()
        if k not in ("func", "model", "out", "sigma", "c", "builtin", "L", "n_grid")
    }
    cfg.update(model=raw, grid=grid.to_dict(), version=__version__)
    cfg.setdefault("seed", None)
    return cfg


# --- subcommands --------------------------------------------------------------


def cmd_spectrum(args, out: Outputs, ctx) -> dict:
    basis = ctx["basis"]()
    rows = []
    for k in range(basis.K):
        rows.append([k, float(basis.lambdas[k]), float(np.abs(basis.psis[k]).max()), spectral.sign_changes(basis.psis[k])])
    out.table("spectrum", args.format, ["k", "lambda", "max_abs_psi", "sign_changes"], rows)
    return {"K": basis.K}


def cmd_kernel(args, out: Outputs, ctx) -> dict:
    _require(all(t > 0 for t in args.t), "--t values must be positive")
    basis = ctx["basis"]()
    kern = KernelEvaluator(basis, tail_tol=args.tail_tol)
    rows = []
    for t in args.t:
        for x in args.x:
            for y in args.y:
                rows.append([t, x, y] + [float(getattr(kern, f"kernel_{k}")(t, x, y)) for k in ("ptilde", "p", "r", "q")])
    out.table("kernel", args.format, ["t", "x", "y", "ptilde", "p", "r", "q"], rows)
    return {"rows": len(rows)}


def cmd_gap(args, out: Outputs, ctx) -> dict:
    _require(args.kappa >= 0, "--kappa must be nonnegative")
    _require(args.t_min > 0 and args.t_max > args.t_min, "need 0 < --t-min < --t-max")
    basis = ctx["basis"]()
    kern = KernelEvaluator(basis, tail_tol=args.tail_tol)
    g = np.exp(args.g_rate * np.abs(basis.x))
    times = np.linspace(args.t_min, args.t_max, args.n_times)
    rep = kern.gap_decay(g, args.kappa, times)
    out.json("gap.json", _jsonable(rep.to_dict()))
    return {"fitted_rate": rep.fitted_rate}


def _battery(x: np.ndarray, n: int = 20) -> list[np.ndarray]:
    """Bounded test functions: bumps, plateaus, oscillations, a constant."""
    fs = [np.ones_like(x)]
    centers = np.linspace(-3, 3, 7)
    fs += [np.exp(-((x - m) ** 2)) for m in centers]
    fs += [np.tanh(x - m) for m in (-1.0, 0.0, 1.0)]
    fs += [np.cos(w * x) for w in (0.5, 1.0, 2.0, 3.0)]
    fs += [np.sin(w * x) for w in (0.5, 1.0, 2.0)]
    fs += [1.0 / (1.0 + x * x), np.exp(-np.abs(x))]
    return fs[:n]


def cmd_qsd(args, out: Outputs, ctx) -> dict:
    basis = ctx["basis"]()
    kern = KernelEvaluator(basis, tail_tol=args.tail_tol)
    nu = qsd.build_qsd(basis)
    fns = _battery(basis.x)
    fixed = [qsd.check_qsd_fixed_point(nu, kern, t, fns) for t in args.t]
    mu0 = qsd.point_mass(basis.grid, args.bump, width=args.bump_width)
    att = qsd.attraction(kern, nu, mu0, args.attraction_times)
    stride = max(1, args.stride)
    idx = np.arange(0, basis.grid.n, stride)
    out.table("qsd", args.format, ["x", "density"], zip(basis.x[idx], nu.density[idx]))
    payload = {
        "Z": nu.Z,
        "mean": nu.mean(),
        "fixed_point": fixed,
        "attraction": att.to_dict(),
        "passed": all(f["passed"] for f in fixed),
    }
    out.json("qsd_report.json", _jsonable(payload))
    return {"passed": payload["passed"]}


def _mc_params(args) -> None:
    _require(args.T > 0, "--T must be positive")
    _require(0 < args.dt <= 1e-2, "--dt must lie in (0, 1e-2]")
    _require(args.reps >= 100, "--reps must be at least 100")
    _require(args.seed >= 0, "--seed must be nonnegative")


def cmd_simulate_branching(args, out: Outputs, ctx) -> dict:
    _mc_params(args)
    spec = ctx["spec"]
    _require(spec.has_rates, "model has no birth/death rates")
    est = branching.estimate_mass(spec, args.x0, args.T, args.dt, args.reps, args.seed, cap=args.cap)
    payload = {"mass": est.to_dict()}
    if not args.no_kernel:
        basis = ctx["basis"]()
        kern = KernelEvaluator(basis, tail_tol=args.tail_tol)
        m = float(kern.mass(args.T, args.x0))
        payload["kernel_mass"] = m
        payload["z_score"] = est.z_score(m)
        payload["scaled_kernel_mass"] = m * math.exp(basis.lambdas[0] * args.T)
    out.json("branching.json", _jsonable(payload))
    return payload


def cmd_simulate_q(args, out: Outputs, ctx) -> dict:
    _require(args.T - args.burn_in >= 100, "need --T - --burn-in >= 100")
    _require(0 < args.dt <= 1e-2, "--dt must lie in (0, 1e-2]")
    _require(args.paths >= 1, "--paths must be positive")
    _require(args.seed >= 0, "--seed must be nonnegative")
    basis = ctx["basis"]()
    model = qprocess.build_q_model(basis, sde_clip=args.sde_clip)
    rep = qprocess.invariant_occupation_check(
        model, args.T, args.dt, args.burn_in, stream(args.seed, 0), n_paths=args.paths, x0=args.x0,
        subsample=args.subsample,
    )
    samples = rep.pop("samples")
    edges = np.linspace(-4, 4, 81)
    hist, _ = np.histogram(samples, bins=edges, density=False)
    emp = hist / (samples.size * np.diff(edges))
    mid = 0.5 * (edges[1:] + edges[:-1])
    target = np.interp(mid, basis.x, basis.psis[0] ** 2)
    out.table("q_occupation", args.format, ["x", "empirical_density", "psi0_squared"], zip(mid, emp, target))
    out.json("q_report.json", _jsonable(rep))
    return {"ks": rep["ks"]}


def cmd_spine_reversal(args, out: Outputs, ctx) -> dict:
    _mc_params(args)
    _require(0 < args.t_lag < args.T, "need 0 < --t-lag < --T")
    spec = ctx["spec"]
    _require(spec.has_rates, "model has no birth/death rates")
    basis = ctx["basis"]()
    kern = KernelEvaluator(basis, tail_tol=args.tail_tol)
    rep = branching.reversed_spine_transition_check(
        spec, basis, args.T, args.t_lag, args.dt, args.reps, args.seed, kern=kern, cap=args.cap,
        short_lag=args.short_lag, target_ess=args.target_ess,
    )
    half = 0.5 * (args.T - args.t_lag)
    chain = branching.reversed_density_chain(kern, args.T, args.t_lag, half, 0.0, np.linspace(-2, 2, 9))
    rep["identity_chain_max_gap"] = chain["max_gap"]
    out.json("spine_report.json", _jsonable(rep))
    return rep


def hermite_validate(sigma: float, c: float, grid: Grid | None = None, K: int = 32, stencil: int = 5) -> dict:
    """Run the closed-form validation suites for the Hermite model; returns a JSON-ready report."""
    grid = grid or Grid()
    model = hermite.HermiteModel(sigma, c)
    suites = {}

    def suite(name, passed, **details):
        suites[name] = {"passed": bool(passed), **_jsonable(details)}

    osc = spectral.solve_eigen(reduce(hermite.oscillator_spec(sigma), grid), grid, K=K, stencil=stencil)
    kk = np.arange(11)
    rel = np.abs(osc.lambdas[kk] / ((kk + 0.5) / sigma) - 1)
    suite("oscillator_eigenvalues", rel.max() <= 1e-4, max_rel_error=rel.max(), tol=1e-4)
    ferr = []
    for k in kk:
        ref = hermite.closed_eigen(model, int(k))[1](osc.x)
        ref *= np.sign(np.dot(ref, osc.psis[k]))
        ferr.append(np.abs(osc.psis[k] - ref).max() / np.abs(ref).max())
    suite("oscillator_eigenfunctions", max(ferr) <= 1e-4, max_rel_error=max(ferr), tol=1e-4)

    red = spectral.solve_eigen(reduce(hermite.reduced_spec(model), grid), grid, K=K, stencil=stencil)
    lam_ref = np.array([hermite.closed_eigen_reduced(model, int(k))[0] for k in kk])
    err = np.abs(red.lambdas[kk] - lam_ref)
    suite("reduced_eigenvalues", err.max() <= 1e-4, max_abs_error=err.max(), tol=1e-4)
    lam0 = float(red.lambdas[0])
    suite("lambda0", abs(lam0 - hermite.closed_lambda0_original(model)) <= 1e-4, lambda0=lam0,
          closed=hermite.closed_lambda0_original(model), regime=hermite.regime(model))

    nu = qsd.build_qsd(red)
    y = sigma * red.x
    ref = hermite.closed_qsd(model, y)
    err = np.abs(nu.density / sigma - ref).max() / ref.max()
    suite("qsd", err <= 1e-6, max_rel_error=err, tol=1e-6)

    kern = KernelEvaluator(red)
    t = 8.0 / sigma
    ys = np.array([-1.0, 0.0, 1.0])
    lim = math.exp(lam0 * t) * np.asarray(kern.mass(t, ys / sigma))
    ref = hermite.closed_mass_limit(model, ys)
    err = np.abs(lim / ref - 1).max()
    suite("mass_limit", err <= 5e-3, t=t, y=ys, value=lim, closed=ref, max_rel_error=err, tol=5e-3)

    qm = qprocess.build_q_model(red)
    yy = np.linspace(-3, 3, 61)
    drift = sigma * qm.drift(yy / sigma)
    err = np.abs(drift - hermite.closed_q_drift(model, yy)).max()
    suite("q_drift", err <= 1e-4, max_abs_error=err, tol=1e-4)

    sup = spectral.check_sup_bound(osc, sharper=(math.pi * sigma) ** -0.25, rtol=1e-9)
    suite("sup_bound", sup.passed, worst_margin=sup.margins().min())
    for b in (spectral.check_growth_bound(red), spectral.check_decay_bound(red, 1.0),
              spectral.check_derivative_bound(red, k_max=20)):
        m = b.margins()
        suite(b.name, b.passed, worst_margin=m.min() if m.size else None, notes=b.notes)
    return {
        "sigma": sigma,
        "c": c,
        "suites": suites,
        "passed": all(s["passed"] for s in suites.values()),
    }


def cmd_hermite_validate(args, out: Outputs, ctx) -> dict:
    _require(args.sigma > 0, "--sigma must be positive")
    grid = Grid(args.L if args.L is not None else 12.0, args.n_grid if args.n_grid is not None else 12001)
    rep = hermite_validate(args.sigma, args.c, grid, K=args.K, stencil=args.stencil)
    out.json("hermite_validate.json", rep)
    if not rep["passed"]:
        failed = [k for k, s in rep["suites"].items() if not s["passed"]]
        raise ValidationFailed(f"suites failed: {', '.join(failed)}")
    return rep


# --- parser and dispatch -----------------------------------------------------


def _floats(s: str) -> list[float]:
    try:
        return [float(v) for v in s.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {s!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="fkspectral", description="Spectral and Monte Carlo tools for branching diffusions.")
    p.add_argument("--version", action="version", version=__version__)
    common = _Parser(add_help=False)
    common.add_argument("--out", type=Path, default=None, help=f"output directory (else ${OUT_ENV}, else ./fkspectral_out)")
    common.add_argument("--model", type=Path, default=None, help="JSON model file")
    common.add_argument("--builtin", choices=["oscillator", "hermite"], default="oscillator",
                        help="built-in model when --model is absent")
    common.add_argument("--sigma", type=float, default=1.0)
    common.add_argument("--c", type=float, default=0.0)
    common.add_argument("--L", type=float, default=None, help="grid half-width (default 12)")
    common.add_argument("--n-grid", type=int, default=None, help="grid node count, odd (default 12001)")
    common.add_argument("--K", type=int, default=32, help="number of modes")
    common.add_argument("--stencil", type=int, choices=[3, 5], default=5)
    common.add_argument("--format", choices=["csv", "json"], default="csv")
    common.add_argument("--tail-tol", type=float, default=1e-10)

    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("spectrum", parents=[common], help="eigenpairs; stores the reusable basis")
    s.set_defaults(func=cmd_spectrum)

    s = sub.add_parser("kernel", parents=[common], help="ptilde, p, r, q at (t, x, y)")
    s.add_argument("--t", type=_floats, default=[1.0])
    s.add_argument("--x", type=_floats, default=[0.0])
    s.add_argument("--y", type=_floats, default=[0.0])
    s.set_defaults(func=cmd_kernel)

    s = sub.add_parser("gap", parents=[common], help="spectral-gap decay of e^{lambda_0 t} P_t g")
    s.add_argument("--kappa", type=float, default=0.5)
    s.add_argument("--g-rate", type=float, default=0.5, help="g(x) = exp(rate |x|)")
    s.add_argument("--t-min", type=float, default=1.0)
    s.add_argument("--t-max", type=float, default=4.0)
    s.add_argument("--n-times", type=int, default=13)
    s.set_defaults(func=cmd_gap)

    s = sub.add_parser("qsd", parents=[common], help="QSD density, fixed-point and attraction checks")
    s.add_argument("--t", type=_floats, default=[0.5, 1.0, 3.0])
    s.add_argument("--bump", type=float, default=2.0)
    s.add_argument("--bump-width", type=float, default=0.3)
    s.add_argument("--attraction-times", type=_floats, default=[1.0, 2.0, 4.0])
    s.add_argument("--stride", type=int, default=10, help="write every stride-th grid node")
    s.set_defaults(func=cmd_qsd)

    for name, func, help_ in (
        ("simulate-branching", cmd_simulate_branching, "branching MC estimate of the mean mass"),
        ("spine-reversal", cmd_spine_reversal, "reversed-spine statistics against nu and q"),
    ):
        s = sub.add_parser(name, parents=[common], help=help_)
        s.add_argument("--T", type=float, default=3.0 if name == "simulate-branching" else 2.0)
        s.add_argument("--dt", type=float, default=1e-2)
        s.add_argument("--reps", type=int, default=10**5 if name == "simulate-branching" else 20000)
        s.add_argument("--seed", type=int, default=0)
        s.add_argument("--cap", type=int, default=10**6)
        s.set_defaults(func=func)
        if name == "simulate-branching":
            s.add_argument("--x0", type=float, default=0.0)
            s.add_argument("--no-kernel", action="store_true", help="skip the kernel comparison")
        else:
            s.add_argument("--t-lag", type=float, default=0.5)
            s.add_argument("--short-lag", type=float, default=None)
            s.add_argument("--target-ess", type=float, default=None)

    s = sub.add_parser("simulate-q", parents=[common], help="Q-process occupation against Psi_0^2")
    s.add_argument("--x0", type=float, default=0.0)
    s.add_argument("--T", type=float, default=1000.0)
    s.add_argument("--dt", type=float, default=1e-2)
    s.add_argument("--burn-in", type=float, default=50.0)
    s.add_argument("--paths", type=int, default=32)
    s.add_argument("--subsample", type=float, default=1.0)
    s.add_argument("--sde-clip", type=float, default=50.0)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_simulate_q)

    s = sub.add_parser("hermite-validate", parents=[common], help="closed-form validation of the Hermite model")
    s.set_defaults(func=cmd_hermite_validate)
    return p


def _out_dir(args) -> Path:
    if args.out is not None:
        return args.out
    env = os.environ.get(OUT_ENV)
    return Path(env) if env else Path("fkspectral_out")


def run(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    out_dir = _out_dir(args)
    try:
        _require(args.K >= 3, "--K must be at least 3")
        if args.command == "hermite-validate":
            raw, grid = {"kind": "builtin_hermite", "sigma": args.sigma, "c": args.c}, None
            ctx = {}
            cfg = _base_config(args, raw, Grid())
            cfg.update(sigma=args.sigma, c=args.c)
        else:
            spec, grid, raw = _resolve_model(args)
            ctx = {"spec": spec}
            cache = {}

            def basis():
                if "b" not in cache:
                    cache["b"], cache["key"], cache["hit"] = _get_basis(args, out_dir, spec, grid, raw)
                return cache["b"]

            ctx["basis"] = basis
            cfg = _base_config(args, raw, grid)
        out = Outputs(out_dir, cfg)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always", TruncationWarning)
            args.func(args, out, ctx)
        for msg in sorted({str(w.message) for w in caught if issubclass(w.category, TruncationWarning)}):
            print(f"warning: {msg}", file=sys.stderr)
    except ModelFileError as exc:
        print(f"model error: {exc}", file=sys.stderr)
        return EXIT_MODEL
    except AssumptionViolation as exc:
        print(f"assumption check failed: {exc}", file=sys.stderr)
        return EXIT_ASSUMPTION
    except ValidationFailed as exc:
        print(f"validation failed: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NUMERICAL_ERRORS as exc:
        print(f"numerical error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"invalid parameter: {exc}", file=sys.stderr)
        return EXIT_PARAMS
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
