"""Command-line front end.

Subcommands drive the computational modules and emit CSV tables plus a JSON
manifest per run.  Configuration comes from an optional line-oriented file
(`key = value`, `#` comments) merged with flags; flags win, unknown keys are
rejected, and the manifest echoes every resolved value so a run can be
reproduced from its manifest alone.

Reproducibility rules: all randomness flows from one master seed (drawn from
OS entropy and recorded when --seed is absent); --threads only caps workers
and is deliberately kept out of the manifest, so reruns with the same seed
are byte-identical whatever the worker count.  No timestamps are written.

Exit codes: 0 all requested checks passed, 1 a check or tolerance failed,
2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import secrets
import sys
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from . import __version__
from .clt import CltReport, _dense_degree_cap, clt_sweep, rate_fit
from .contractions import berry_esseen_bound, contraction_table, rate_theoretical
from .moments import (
    DivergentIntegralError,
    RateMismatchError,
    ToleranceNotMetError,
    bessel_constant,
    gegenbauer_moment,
    log_divergence_check,
    variance_h,
)
from .simulate import (
    build_grid,
    excursion_variance,
    functional_excursion,
    functional_h,
    functional_Z,
    sample_field,
)
from .specfun import SphereDim, dim_harmonics

FORMAT_VERSION = "1"


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    """Resolved parameters of one CLI run (defaults all explicit)."""

    command: str
    d: int = 2
    q: int | None = None
    ell: tuple[int, ...] = ()
    replicas: int = 2000
    seed: int | None = None
    threads: int = 1
    z: float | None = None
    betas: tuple[float, ...] | None = None
    kind: str | None = None
    out_dir: str = "."
    ratio_tol: float = 0.05
    slope_tol: float = 0.10
    allow_odd: bool = False
    excursion_q_max: int = 8
    format_version: str = FORMAT_VERSION


_FIELD_TYPES = {f.name: f for f in fields(RunConfig)}

# keys each subcommand accepts (config-file keys outside this set are errors)
_COMMAND_KEYS = {
    "moments": {"d", "q", "ell", "ratio_tol", "slope_tol", "out_dir", "threads"},
    "contractions": {"d", "q", "ell", "out_dir", "threads"},
    "simulate": {"kind", "d", "q", "betas", "z", "ell", "replicas", "seed", "out_dir",
                 "threads", "allow_odd", "excursion_q_max"},
    "clt": {"kind", "d", "q", "betas", "z", "ell", "replicas", "seed", "out_dir",
            "threads", "allow_odd", "excursion_q_max"},
    "excursion": {"d", "z", "ell", "replicas", "seed", "out_dir", "threads",
                  "allow_odd", "excursion_q_max"},
}


def parse_ell_spec(text: str) -> tuple[int, ...]:
    """Multipole list: '16,64,128' or dyadic range '256..8192'."""
    text = text.strip()
    if ".." in text:
        lo_s, hi_s = text.split("..", 1)
        lo, hi = int(lo_s), int(hi_s)
        if lo < 1 or hi < lo:
            raise UsageError(f"bad multipole range {text!r}")
        out = []
        val = lo
        while val <= hi:
            out.append(val)
            val *= 2
        return tuple(out)
    try:
        return tuple(int(tok) for tok in text.split(",") if tok.strip())
    except ValueError as exc:
        raise UsageError(f"bad multipole list {text!r}") from exc


def parse_betas_spec(text: str) -> tuple[float, ...]:
    """Monomial coefficients b_0,b_1,...,b_Q as a comma list."""
    try:
        return tuple(float(tok) for tok in text.split(","))
    except ValueError as exc:
        raise UsageError(f"bad coefficient list {text!r}") from exc


def _coerce(key: str, raw: str):
    if key == "ell":
        return parse_ell_spec(raw)
    if key == "betas":
        return parse_betas_spec(raw)
    if key == "allow_odd":
        return raw.strip().lower() in ("1", "true", "yes", "on")
    target = _FIELD_TYPES[key].type
    if key in ("z", "ratio_tol", "slope_tol"):
        return float(raw)
    if key in ("d", "q", "replicas", "seed", "threads", "excursion_q_max"):
        return int(raw)
    if key in ("kind", "out_dir"):
        return raw.strip()
    raise UsageError(f"config key {key!r} not settable ({target})")


def read_config_file(path: str, command: str) -> dict:
    values = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise UsageError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, raw = (part.strip() for part in stripped.split("=", 1))
        if key not in _COMMAND_KEYS[command]:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r} for command {command!r}")
        values[key] = _coerce(key, raw)
    return values


def build_config(command: str, args: argparse.Namespace) -> RunConfig:
    values = {}
    if getattr(args, "config", None):
        values.update(read_config_file(args.config, command))
    for key in _COMMAND_KEYS[command]:
        flag_val = getattr(args, key, None)
        if flag_val is not None:
            values[key] = flag_val
    cfg = RunConfig(command=command, **values)
    if cfg.seed is None and command in ("simulate", "clt", "excursion"):
        cfg = replace(cfg, seed=secrets.randbits(63))
    return cfg


# ------------------------------------------------------------------
# output helpers
# ------------------------------------------------------------------

def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, bool):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(x) for x in row])


def write_manifest(path: Path, cfg: RunConfig, outputs, checks, summary=None):
    config_echo = {
        f.name: getattr(cfg, f.name)
        for f in fields(RunConfig)
        if f.name != "threads"  # execution detail; kept out for byte-identical reruns
    }
    doc = {
        "format_version": cfg.format_version,
        "tool": {"name": "sphclt", "version": __version__},
        "command": cfg.command,
        "config": config_echo,
        "outputs": sorted(str(o) for o in outputs),
        "checks": checks,
        "all_passed": all(c["passed"] for c in checks) if checks else True,
    }
    if summary is not None:
        doc["summary"] = summary
    path.write_text(json.dumps(doc, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(obj):
    if isinstance(obj, tuple):
        return list(obj)
    raise TypeError(f"not JSON serializable: {type(obj)}")


def _check(name: str, passed: bool, detail: str) -> dict:
    return {"name": name, "passed": bool(passed), "detail": detail}


# ------------------------------------------------------------------
# subcommands
# ------------------------------------------------------------------

def cmd_moments(cfg: RunConfig) -> int:
    if cfg.q is None or cfg.q < 2:
        raise UsageError("moments requires --q >= 2 (q = 0, 1 are identically degenerate)")
    if not cfg.ell:
        raise UsageError("moments requires --ell")
    d, q = cfg.d, cfg.q
    dim = SphereDim(d)
    checks = []

    try:
        const = bessel_constant(q, d)  # closed form at q = 2, quadrature beyond
    except DivergentIntegralError:
        const = None  # the (2, 4) log-divergent case: no constant exists

    rows = []
    for ell in cfg.ell:
        if q == 2:
            half = dim.mu_d / (2.0 * dim.mu_dm1 * dim_harmonics(ell, d))
            moment, err = half, 0.0
        else:
            try:
                res = gegenbauer_moment(ell, q, d, "half")
                moment, err = res.value, res.err_est
            except ToleranceNotMetError as exc:
                moment, err = exc.value, exc.err_est
                checks.append(_check(f"quadrature_tolerance_ell{ell}", False, str(exc)))
        variance = variance_h(ell, q, d)
        c_val = const.value if const is not None else None
        ratio = None
        if const is not None and const.value != 0.0 and q >= 3:
            ratio = float(ell) ** d * moment / const.value
        rows.append(("moment", d, q, ell, moment, err, variance, c_val, ratio))

    if const is not None and q >= 3 and rows[-1][8] is not None:
        final_ratio = rows[-1][8]
        checks.append(_check(
            "asymptotic_ratio_final",
            abs(final_ratio - 1.0) <= cfg.ratio_tol,
            f"ell^d * moment / c = {final_ratio:.6f} at ell={cfg.ell[-1]} (tol {cfg.ratio_tol})",
        ))

    summary = {}
    ells = list(cfg.ell)
    dyadic = (len(ells) >= 3 and all(l & (l - 1) == 0 for l in ells)
              and ells == sorted(set(ells)) and max(ells) >= 4096)
    if (d, q) == (2, 4) and dyadic:
        rec = log_divergence_check(ells)
        rows.append(("log_slope", d, q, None, rec.slope, rec.stderr, None, None, None))
        checks.append(_check(
            "log_divergence_slope",
            abs(rec.slope - 576.0) <= cfg.slope_tol * 576.0,
            f"slope of Var*ell^2 vs log(ell) = {rec.slope:.2f} (target 576 +- {cfg.slope_tol:.0%})",
        ))
        summary["log_slope"] = {"slope": rec.slope, "stderr": rec.stderr, "intercept": rec.intercept}

    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"moments_d{d}_q{q}.csv"
    write_csv(csv_path, ("kind", "d", "q", "ell", "moment", "err_est", "variance", "c_qd", "ratio"), rows)
    if const is not None:
        summary["c_qd"] = {"value": const.value, "mode": const.convergence_mode,
                           "zeros_used": const.zeros_used, "err_est": const.err_est}
    write_manifest(out / f"moments_d{d}_q{q}.manifest.json", cfg, [csv_path.name], checks, summary)
    return 0 if all(c["passed"] for c in checks) else 1


def cmd_contractions(cfg: RunConfig) -> int:
    if cfg.q is None or cfg.q < 2:
        raise UsageError("contractions requires --q >= 2")
    if not cfg.ell:
        raise UsageError("contractions requires --ell")
    d, q = cfg.d, cfg.q
    dim = SphereDim(d)
    checks = []
    rows = []
    for ell in cfg.ell:
        table = contraction_table(ell, q, d)
        try:
            bound = berry_esseen_bound(ell, q, d)
            tv, k, w = bound.bound_tv, bound.bound_k, bound.bound_w
        except Exception:
            tv = k = w = None
        rate = rate_theoretical(ell, q, d)
        for r in range(1, q):
            rows.append((d, q, r, ell, float(table.K_values[r - 1]), tv, k, w, rate))
        if q == 2:
            exact = dim.mu_d ** 4 / dim_harmonics(ell, d) ** 3
            rel = abs(float(table.K_values[0]) / exact - 1.0)
            checks.append(_check(
                f"contraction_closed_form_ell{ell}", rel <= 1e-10,
                f"K(2;1) vs mu^4/n^3 relative deviation {rel:.3e}",
            ))

    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"contractions_d{d}_q{q}.csv"
    write_csv(csv_path, ("d", "q", "r", "ell", "K", "bound_tv", "bound_k", "bound_w", "rate_theoretical"), rows)
    write_manifest(out / f"contractions_d{d}_q{q}.manifest.json", cfg, [csv_path.name], checks)
    return 0 if all(c["passed"] for c in checks) else 1


def _require_kind(cfg: RunConfig) -> str:
    kind = cfg.kind or "h"
    if kind not in ("h", "Z", "S"):
        raise UsageError(f"kind must be one of h, Z, S; got {kind!r}")
    if kind == "h" and (cfg.q is None or cfg.q < 0):
        raise UsageError("kind h requires --q")
    if kind == "Z" and not cfg.betas:
        raise UsageError("kind Z requires --betas (monomial coefficients b0,b1,...)")
    if kind == "S" and cfg.z is None:
        raise UsageError("kind S requires --z")
    return kind


def cmd_simulate(cfg: RunConfig) -> int:
    kind = _require_kind(cfg)
    if len(cfg.ell) != 1:
        raise UsageError("simulate runs one multipole at a time; pass --ell with a single value")
    ell = cfg.ell[0]
    if ell % 2 and not cfg.allow_odd:
        raise UsageError("odd multipole; pass --allow-odd to simulate it anyway")
    d = cfg.d
    if kind == "h":
        degree = cfg.q * ell
    elif kind == "Z":
        degree = (len(cfg.betas) - 1) * ell
    else:
        degree = 4 * ell
    if d > 2:
        degree = min(degree, _dense_degree_cap(d))  # dense sampler node budget
    grid = build_grid(d, degree)

    pred_var = excursion_variance(ell, d, cfg.z, cfg.excursion_q_max) if kind == "S" else None
    normalize_h = kind == "h" and cfg.q >= 2 and variance_h(ell, cfg.q, d) > 0
    rows = []
    for rep in range(cfg.replicas):
        field = sample_field(d, ell, grid, cfg.seed, rep)
        if kind == "h":
            sample = functional_h(field, cfg.q, normalize=normalize_h)
        elif kind == "Z":
            sample = functional_Z(field, cfg.betas)
        else:
            sample = functional_excursion(field, cfg.z, predicted_variance=pred_var)
        rows.append((rep, d, sample.kind, ell, cfg.z, sample.raw, sample.normalized))

    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"simulate_{kind}_d{d}_ell{ell}.csv"
    write_csv(csv_path, ("replica", "d", "q_or_kind", "ell", "z", "raw", "normalized"), rows)
    summary = {"grid": {"d": d, "n_nodes": grid.n_nodes, "exact_degree": grid.exact_degree,
                        "weight_sum": float(grid.weights.sum())}}
    write_manifest(out / f"simulate_{kind}_d{d}_ell{ell}.manifest.json", cfg, [csv_path.name], [], summary)
    return 0


def _report_rows(report: CltReport):
    for r in report.rows:
        yield (report.kind, report.d, report.q, report.z, r.ell, r.replicas,
               r.empirical_dK, r.empirical_dW, r.mc_stderr_scale, r.theoretical_rate,
               r.explicit_bound, r.exact_quadrature, r.sample_mean, r.sample_var,
               r.predicted_mean, r.predicted_var)


_REPORT_HEADER = ("kind", "d", "q", "z", "ell", "replicas", "empirical_dK", "empirical_dW",
                  "mc_stderr_scale", "theoretical_rate", "explicit_bound", "exact_quadrature",
                  "sample_mean", "sample_var", "predicted_mean", "predicted_var")


def _run_sweep(cfg: RunConfig, kind: str) -> CltReport:
    return clt_sweep(
        kind, cfg.d, list(cfg.ell), cfg.replicas, cfg.seed,
        q=cfg.q, betas=cfg.betas, z=cfg.z, threads=cfg.threads,
        allow_odd=cfg.allow_odd, excursion_q_max=cfg.excursion_q_max,
    )


def _write_sweep_outputs(cfg: RunConfig, report: CltReport, base: str, checks):
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"{base}.csv"
    write_csv(csv_path, _REPORT_HEADER, _report_rows(report))
    outputs = [csv_path.name]
    for metric, attr in (("dk", "empirical_dK"), ("dw", "empirical_dW")):
        dat_path = out / f"{base}_log{metric}.dat"
        lines = [
            f"{repr(math.log(r.ell))} {repr(math.log(getattr(r, attr)))}"
            for r in report.rows if getattr(r, attr) > 0.0
        ]
        dat_path.write_text("\n".join(lines) + "\n")
        outputs.append(dat_path.name)

    summary = {"warnings": list(report.warnings)}
    try:
        fit = rate_fit(report)
        summary["rate_fit"] = {
            "slope": fit.slope, "stderr": fit.stderr, "theory_slope": fit.theory_slope,
            "decays_at_least_as_fast": fit.decays_at_least_as_fast,
            "n_used": fit.n_used, "n_below_floor": fit.n_below_floor,
        }
    except ValueError as exc:
        summary["rate_fit"] = {"skipped": str(exc)}
    write_manifest(out / f"{base}.manifest.json", cfg, outputs, checks, summary)


def cmd_clt(cfg: RunConfig) -> int:
    kind = _require_kind(cfg)
    if not cfg.ell:
        raise UsageError("clt requires --ell")
    report = _run_sweep(cfg, kind)
    checks = []
    for r in report.rows:
        if r.explicit_bound is not None:
            ok = r.empirical_dK <= r.explicit_bound + 3.0 * r.mc_stderr_scale
            checks.append(_check(
                f"bound_consistency_ell{r.ell}", ok,
                f"dK = {r.empirical_dK:.4f} vs bound {r.explicit_bound:.4f} + 3*floor",
            ))
    name_part = f"q{cfg.q}" if kind == "h" else ("poly" if kind == "Z" else f"z{cfg.z:g}")
    _write_sweep_outputs(cfg, report, f"clt_{kind}_d{cfg.d}_{name_part}", checks)
    return 0 if all(c["passed"] for c in checks) else 1


def cmd_excursion(cfg: RunConfig) -> int:
    if cfg.z is None:
        raise UsageError("excursion requires --z")
    if not cfg.ell:
        raise UsageError("excursion requires --ell")
    report = _run_sweep(cfg, "S")
    checks = []
    for r in report.rows:
        mean_se = math.sqrt(r.sample_var / r.replicas)
        var_se = r.sample_var * math.sqrt(2.0 / (r.replicas - 1))
        checks.append(_check(
            f"excursion_mean_ell{r.ell}",
            abs(r.sample_mean - r.predicted_mean) <= 4.0 * mean_se,
            f"sample mean {r.sample_mean:.6f} vs mu_d*Phi(z) = {r.predicted_mean:.6f} (4se = {4 * mean_se:.6f})",
        ))
        checks.append(_check(
            f"excursion_variance_ell{r.ell}",
            abs(r.sample_var - r.predicted_var) <= 4.0 * var_se,
            f"sample var {r.sample_var:.6f} vs chaos prediction {r.predicted_var:.6f} (4se = {4 * var_se:.6f})",
        ))
    _write_sweep_outputs(cfg, report, f"excursion_d{cfg.d}_z{cfg.z:g}", checks)
    return 0 if all(c["passed"] for c in checks) else 1


# ------------------------------------------------------------------
# argument parsing
# ------------------------------------------------------------------

def _add_common(p):
    p.add_argument("--config", help="line-oriented config file (key = value); flags win")
    p.add_argument("--out-dir", dest="out_dir", help="output directory (default .)")
    p.add_argument("--threads", type=int, help="worker cap; outputs do not depend on it")


def _add_sim_common(p):
    p.add_argument("--seed", type=int, help="master seed; drawn from entropy and recorded if absent")
    p.add_argument("--reps", dest="replicas", type=int, help="replicas per multipole (default 2000)")
    p.add_argument("--allow-odd", dest="allow_odd", action="store_const", const=True,
                   help="permit odd multipoles (odd chaoses vanish there)")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sphclt",
        description="Variance asymptotics and quantitative CLTs for random spherical eigenfunctions",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("moments", help="Gegenbauer moment integrals, variances, limiting constants")
    p.add_argument("--d", type=int, help="sphere dimension (default 2)")
    p.add_argument("--q", type=int, help="power of the Gegenbauer polynomial (>= 2)")
    p.add_argument("--ell", type=parse_ell_spec, help="multipoles: '16,64' or dyadic '256..8192'")
    p.add_argument("--ratio-tol", dest="ratio_tol", type=float,
                   help="tolerance for the final ell^d*moment/c ratio (default 0.05)")
    p.add_argument("--slope-tol", dest="slope_tol", type=float,
                   help="relative tolerance for the (2,4) log-slope check (default 0.10)")
    _add_common(p)

    p = sub.add_parser("contractions", help="contraction norms and Berry-Esseen bound tables")
    p.add_argument("--d", type=int, help="sphere dimension (default 2)")
    p.add_argument("--q", type=int, help="chaos order (>= 2)")
    p.add_argument("--ell", type=parse_ell_spec, help="multipoles")
    _add_common(p)

    p = sub.add_parser("simulate", help="replica-level functional samples at one multipole")
    p.add_argument("--kind", choices=("h", "Z", "S"), help="functional family (default h)")
    p.add_argument("--d", type=int, help="sphere dimension (default 2)")
    p.add_argument("--q", type=int, help="Hermite order for kind h")
    p.add_argument("--betas", type=parse_betas_spec, help="monomial coefficients b0,b1,... for kind Z")
    p.add_argument("--z", type=float, help="excursion level for kind S")
    p.add_argument("--ell", type=parse_ell_spec, help="single multipole")
    _add_sim_common(p)
    _add_common(p)

    p = sub.add_parser("clt", help="CLT sweep: empirical distances vs rates and bounds")
    p.add_argument("--kind", choices=("h", "Z", "S"), help="functional family (default h)")
    p.add_argument("--d", type=int, help="sphere dimension (default 2)")
    p.add_argument("--q", type=int, help="Hermite order for kind h")
    p.add_argument("--betas", type=parse_betas_spec, help="monomial coefficients for kind Z")
    p.add_argument("--z", type=float, help="excursion level for kind S")
    p.add_argument("--ell", type=parse_ell_spec, help="multipole list")
    p.add_argument("--excursion-qmax", dest="excursion_q_max", type=int,
                   help="chaos truncation order for the excursion variance (default 8)")
    _add_sim_common(p)
    _add_common(p)

    p = sub.add_parser("excursion", help="excursion-area CLT sweep with mean/variance checks")
    p.add_argument("--d", type=int, help="sphere dimension (default 2)")
    p.add_argument("--z", type=float, help="excursion level")
    p.add_argument("--ell", type=parse_ell_spec, help="multipole list")
    p.add_argument("--excursion-qmax", dest="excursion_q_max", type=int,
                   help="chaos truncation order for the variance prediction (default 8)")
    _add_sim_common(p)
    _add_common(p)

    return parser


_DISPATCH = {
    "moments": cmd_moments,
    "contractions": cmd_contractions,
    "simulate": cmd_simulate,
    "clt": cmd_clt,
    "excursion": cmd_excursion,
}


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        cfg = build_config(args.command, args)
        return _DISPATCH[args.command](cfg)
    except UsageError as exc:
        print(f"sphclt {args.command}: {exc}", file=sys.stderr)
        return 2
    except (RateMismatchError, DivergentIntegralError, ValueError) as exc:
        print(f"sphclt {args.command}: {exc}", file=sys.stderr)
        return 2
    except ToleranceNotMetError as exc:
        print(f"sphclt {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
