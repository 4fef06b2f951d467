"""Command-line driver: ``qtldp {profile,rate,verify,simulate} --config FILE``.

A job is described by a YAML document with sections ``model``, ``form``,
``quadrature``, ``grids``, ``verify``, ``simulate`` and ``output``. ``--config``
accepts a path or the name of a bundled preset (``example1``, ``example2``,
``normal2d``). Exit status: 0 success, 1 numerical or domain failure,
2 configuration error.
"""

import argparse
import math
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from . import chain, oracle, rate, scgf
from .errors import ConfigError, QtldpError

PRESETS = ("example1", "example2", "normal2d")

PROFILE_HEADER = ("lambda", "phi", "phi_prime", "f_lambda", "min_eig_L", "min_eig_R")
RATE_HEADER = ("w", "I", "branch")
GC_HEADER = ("w", "defect")
VERIFY_HEADER = ("n", "lambda", "finite_cgf", "phi", "abs_diff", "mc_estimate", "mc_std_error")
XI_HEADER = ("n", "xi_min", "xi_max")
HISTOGRAM_HEADER = (
    "bin_left", "bin_right", "count", "density", "empirical_rate", "rate",
)


# --------------------------------------------------------------------------
# configuration


@dataclass
class JobConfig:
    model: chain.DriftModel
    form: chain.QuadraticForm
    form_kind: str
    n_theta: int = None
    tol: float = scgf.DEFAULT_TOL
    cap: float = scgf.DEFAULT_CAP
    lambda_grid: dict = None
    w_grid: dict = None
    verify: dict = field(default_factory=dict)
    simulate: dict = field(default_factory=dict)
    seed: int = 0
    threads: int = 1
    out: Path = Path("out")


def _matrix(value, name, dim=None):
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        value = [[value]]
    if not isinstance(value, list) or not value:
        raise ConfigError(f"{name}: expected a matrix as a list of rows")
    rows = [r if isinstance(r, list) else [r] for r in value]
    width = len(rows[0])
    for i, row in enumerate(rows, start=1):
        if len(row) != width:
            raise ConfigError(f"{name}: row {i} has length {len(row)}, expected {width}")
        for x in row:
            if isinstance(x, bool) or not isinstance(x, (int, float)):
                raise ConfigError(f"{name}: row {i} has a non-numeric entry {x!r}")
    if len(rows) != width:
        raise ConfigError(f"{name}: matrix must be square, got {len(rows)}x{width}")
    if dim is not None and width != dim:
        raise ConfigError(f"{name}: expected a {dim}x{dim} matrix, got {width}x{width}")
    return np.array(rows, dtype=float)


def _section(doc, key):
    sec = doc.get(key) or {}
    if not isinstance(sec, dict):
        raise ConfigError(f"{key}: expected a mapping")
    return sec


def _number(sec, key, name, default, kind=float, positive=False):
    value = sec.get(key, default)
    if value is None:
        return None
    if isinstance(value, str):
        try:
            value = float(value)
        except ValueError:
            raise ConfigError(f"{name}: expected a number, got {value!r}") from None
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{name}: expected a number, got {value!r}")
    if kind is int and value != int(value):
        raise ConfigError(f"{name}: expected an integer, got {value!r}")
    value = kind(value)
    if positive and not value > 0:
        raise ConfigError(f"{name}: must be positive, got {value!r}")
    return value


def _grid(sec, key):
    g = sec.get(key)
    if g is None:
        return None
    if not isinstance(g, dict):
        raise ConfigError(f"grids.{key}: expected a mapping with min, max, points")
    lo = _number(g, "min", f"grids.{key}.min", None)
    hi = _number(g, "max", f"grids.{key}.max", None)
    pts = _number(g, "points", f"grids.{key}.points", 41, int)
    if lo is None or hi is None or not lo < hi or pts < 2:
        raise ConfigError(f"grids.{key}: need min < max and points >= 2")
    return {"min": lo, "max": hi, "points": pts}


def _list(sec, key, name, default, kind=float):
    value = sec.get(key, default)
    if not isinstance(value, list):
        value = [value]
    return [_number({"x": v}, "x", name, None, kind) for v in value]


def _read_document(source):
    if source in PRESETS:
        text = resources.files("qtldp.presets").joinpath(f"{source}.yaml").read_text()
        origin = f"preset {source}"
    else:
        path = Path(source)
        if not path.is_file():
            raise ConfigError(f"config file not found: {source} (presets: {', '.join(PRESETS)})")
        text = path.read_text()
        origin = str(path)
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f" line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise ConfigError(f"{origin}:{where} {getattr(exc, 'problem', exc)}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{origin}: top level must be a mapping")
    return doc


def _build_form(sec, model):
    kind = sec.get("kind", "entropy")
    d = model.dim
    if kind == "entropy":
        return chain.entropy_production_form(model), kind
    if kind == "scalar-square":
        return chain.scalar_square_form(d), kind
    if kind == "explicit":
        mats = {}
        for key in ("l", "u", "r", "v"):
            if key not in sec:
                raise ConfigError(f"form.{key}: required for kind 'explicit'")
            mats[key] = _matrix(sec[key], f"form.{key}", d)
        try:
            form = chain.QuadraticForm(mats["l"], mats["u"], mats["r"], mats["v"])
        except ValueError as exc:
            raise ConfigError(f"form: {exc}") from None
        return form, kind
    raise ConfigError(f"form.kind: unknown kind {kind!r} (entropy, scalar-square, explicit)")


def load_config(source, overrides=None):
    """Parse and validate a job description; raise :class:`ConfigError` on bad input."""
    doc = _read_document(source)
    model_sec = _section(doc, "model")
    if "s" not in model_sec:
        raise ConfigError("model.s: required")
    s = _matrix(model_sec["s"], "model.s")
    sigma = model_sec.get("sigma_o", "stationary")
    sigma_o = None if sigma == "stationary" else _matrix(sigma, "model.sigma_o", s.shape[0])
    try:
        model = chain.DriftModel(s, sigma_o)
    except (ValueError, QtldpError) as exc:
        raise ConfigError(f"model: {exc}") from None
    form, kind = _build_form(_section(doc, "form"), model)

    quad = _section(doc, "quadrature")
    grids = _section(doc, "grids")
    ver = _section(doc, "verify")
    sim = _section(doc, "simulate")
    out = _section(doc, "output")
    cfg = JobConfig(
        model=model,
        form=form,
        form_kind=kind,
        n_theta=_number(quad, "n_theta", "quadrature.n_theta", None, int, True),
        tol=_number(quad, "tol", "quadrature.tol", scgf.DEFAULT_TOL, positive=True),
        cap=_number(quad, "cap", "quadrature.cap", scgf.DEFAULT_CAP, positive=True),
        lambda_grid=_grid(grids, "lambda"),
        w_grid=_grid(grids, "w"),
        verify={
            "n": _list(ver, "n", "verify.n", [100, 400], int),
            "lambda": _list(ver, "lambda", "verify.lambda", [0.0]),
            "tolerance": _number(ver, "tolerance", "verify.tolerance", None, positive=True),
            "mc_samples": _number(ver, "mc_samples", "verify.mc_samples", 0, int),
            "mc_sigmas": _number(ver, "mc_sigmas", "verify.mc_sigmas", 4.0, positive=True),
            "xi": bool(ver.get("xi", True)),
        },
        simulate={
            "n": _number(sim, "n", "simulate.n", 500, int, True),
            "samples": _number(sim, "samples", "simulate.samples", 10_000, int, True),
            "bins": _number(sim, "bins", "simulate.bins", 40, int, True),
            "overlay": bool(sim.get("overlay", True)),
        },
        seed=_number(doc, "seed", "seed", 0, int),
        threads=_number(doc, "threads", "threads", 1, int, True),
        out=Path(out.get("dir", "out")),
    )
    if any(n < 1 for n in cfg.verify["n"]):
        raise ConfigError("verify.n: entries must be >= 1")
    if cfg.verify["mc_samples"] and cfg.verify["mc_samples"] < 100:
        raise ConfigError("verify.mc_samples: use 0 to disable or at least 100")
    if cfg.simulate["n"] < 2:
        raise ConfigError("simulate.n: must be >= 2")
    for key, value in (overrides or {}).items():
        if value is not None:
            setattr(cfg, key, Path(value) if key == "out" else value)
    if cfg.threads < 1:
        raise ConfigError("threads: must be >= 1")
    return cfg


# --------------------------------------------------------------------------
# output helpers


def _fmt(x):
    if isinstance(x, str):
        return x
    if x is None:
        return "none"
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return "%.17g" % x


def write_csv(path, header, rows):
    lines = [",".join(header)]
    lines += [",".join(_fmt(x) for x in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")


def write_report(path, items):
    path.write_text("".join(f"{k}={_fmt(v)}\n" for k, v in items.items()))


def _profile(cfg):
    return scgf.build_profile(cfg.model, cfg.form, cfg.tol, cfg.cap, cfg.n_theta)


def _finite_or(x, fallback):
    return x if math.isfinite(x) else fallback


# --------------------------------------------------------------------------
# subcommands


def cmd_profile(cfg):
    prof = _profile(cfg)
    lo, hi = prof.lambda_minus, prof.lambda_plus
    if cfg.lambda_grid:
        grid = np.linspace(cfg.lambda_grid["min"], cfg.lambda_grid["max"], cfg.lambda_grid["points"])
    else:
        a, b = _finite_or(lo, -2.0), _finite_or(hi, 2.0)
        pad = 1e-3 * (b - a)
        grid = np.linspace(a + pad, b - pad, 41)
    rows = []
    for lam in grid:
        if not prof.contains(lam):
            continue
        f, l_min, r_min = scgf.domain_diagnostics(cfg.model, cfg.form, lam, cfg.n_theta)
        rows.append((lam, prof.phi(lam), prof.phi_prime(lam), f, l_min, r_min))
    write_csv(cfg.out / "profile.csv", PROFILE_HEADER, rows)
    summary = prof.summary()
    summary["all_lambda_domain"] = math.isinf(lo) and math.isinf(hi)
    summary["phi_prime_0"] = prof.phi_prime(0.0)
    summary["lln_mean"] = chain.lln_mean(cfg.form, cfg.model)
    write_report(cfg.out / "endpoints.txt", summary)
    return 0


def _w_grid(cfg, prof):
    if cfg.w_grid:
        return np.linspace(cfg.w_grid["min"], cfg.w_grid["max"], cfg.w_grid["points"])
    m = chain.lln_mean(cfg.form, cfg.model)
    half = 2.0 * (1.0 + abs(m))
    return np.linspace(m - half, m + half, 41)


def cmd_rate(cfg):
    prof = _profile(cfg)
    w = _w_grid(cfg, prof)
    pairs = [rate.rate_at(prof, x) for x in w]
    write_csv(cfg.out / "rate.csv", RATE_HEADER, [(x, v, b) for x, (v, b) in zip(w, pairs)])
    if cfg.form_kind == "entropy":
        top = float(np.max(np.abs(w)))
        ws = np.linspace(0.0, top, max(len(w) // 2 + 1, 2))
        defect = rate.gc_defect(cfg.model, ws, prof)
        write_csv(cfg.out / "gc.csv", GC_HEADER, zip(ws, defect))
    return 0


def cmd_verify(cfg):
    """Finite-n oracle table; exits 1 if a configured tolerance is violated."""
    prof = _profile(cfg)
    ver = cfg.verify
    n_list = sorted(ver["n"])
    rows, failures = [], []
    for lam in ver["lambda"]:
        inside = prof.contains(lam)
        limit = prof.phi(lam) if inside else math.inf
        for n in n_list:
            rep = oracle.finite_cgf(cfg.model, cfg.form, lam, n, extremes=False)
            diff = abs(rep.value - limit) if math.isfinite(rep.value) and inside else math.nan
            mc_est, mc_se = math.nan, math.nan
            # the standard error needs a finite second moment of exp(lam W)
            if ver["mc_samples"] and prof.contains(2.0 * lam):
                mc = oracle.mc_cgf(cfg.model, cfg.form, lam, n + 2, ver["mc_samples"],
                                   cfg.seed, threads=cfg.threads)
                mc_est, mc_se = mc.estimate, mc.std_error
                if abs(mc_est - rep.value) > ver["mc_sigmas"] * mc_se:
                    failures.append(f"n={n} lambda={lam}: Monte Carlo off by "
                                    f"{abs(mc_est - rep.value) / mc_se:.1f} std errors")
            rows.append((n, lam, rep.value, limit, diff, mc_est, mc_se))
            if n == n_list[-1] and ver["tolerance"] is not None:
                if inside and not diff <= ver["tolerance"]:
                    failures.append(f"n={n} lambda={lam}: |finite - phi| = {diff:.3e}")
    write_csv(cfg.out / "verify.csv", VERIFY_HEADER, rows)
    if ver["xi"]:
        curve = oracle.xi_extremes_curve(cfg.model, cfg.form, n_list)
        write_csv(cfg.out / "xi.csv", XI_HEADER, curve)
    for msg in failures:
        print(f"tolerance violated: {msg}", file=sys.stderr)
    return 1 if failures else 0


def cmd_simulate(cfg):
    sim = cfg.simulate
    n = sim["n"]
    w = chain.sample_w(cfg.model, cfg.form, n, sim["samples"], cfg.seed, threads=cfg.threads) / n
    counts, edges = np.histogram(w, bins=sim["bins"])
    total = counts.sum()
    width = np.diff(edges)
    prof = _profile(cfg) if sim["overlay"] else None
    rows = []
    for k, c in enumerate(counts):
        emp = -math.log(c / total) / n if c else math.inf
        theory = math.nan
        if prof is not None:
            theory = rate.rate_at(prof, 0.5 * (edges[k] + edges[k + 1]))[0]
        rows.append((edges[k], edges[k + 1], int(c), c / (total * width[k]), emp, theory))
    write_csv(cfg.out / "histogram.csv", HISTOGRAM_HEADER, rows)
    write_report(cfg.out / "summary.txt", {
        "n": n,
        "samples": sim["samples"],
        "seed": cfg.seed,
        "mean": float(np.mean(w)),
        "std_error": float(np.std(w, ddof=1) / math.sqrt(len(w))) if len(w) > 1 else math.nan,
        "lln_mean": chain.lln_mean(cfg.form, cfg.model),
    })
    return 0


COMMANDS = {
    "profile": cmd_profile,
    "rate": cmd_rate,
    "verify": cmd_verify,
    "simulate": cmd_simulate,
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="qtldp",
        description="Large deviations of quadratic functionals of Gauss-Markov chains.",
    )
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True,
                        help=f"YAML job file or preset name ({', '.join(PRESETS)})")
    parser.add_argument("--out", help="output directory (overrides output.dir)")
    parser.add_argument("--seed", type=int, help="random seed (overrides seed)")
    parser.add_argument("--threads", type=int, help="Monte Carlo worker threads")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, {"out": args.out, "seed": args.seed, "threads": args.threads})
        cfg.out.mkdir(parents=True, exist_ok=True)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"config error: output: {exc}", file=sys.stderr)
        return 2
    try:
        return COMMANDS[args.command](cfg)
    except (QtldpError, np.linalg.LinAlgError, ArithmeticError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
