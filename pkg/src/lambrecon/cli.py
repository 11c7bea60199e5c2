"""Command-line front end.

Subcommands: reconstruct, verify, propagate, protocol, sweep, families.
Curve data goes to CSV or JSON (17 significant digits, LF endings, no locale
dependence); verification/propagation reports go to JSON; figures are
rendered alongside the data unless --no-plot is given.  Identical
configurations produce byte-identical output files.

Exit codes: 0 success, 1 validation failure, 2 numeric failure
(quadrature/propagation), 3 verification-threshold failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np

from . import figures
from .exprparse import ExprError, parse
from .prefactor import (
    LINE,
    RADIAL,
    NodalPrefactorError,
    Prefactor,
    PrefactorDomainError,
    builtin_families,
    from_expression,
)
from .propagate import PropagationConfig, cn_propagate, lamb_protocol
from .reconstruct import (
    DEFAULT_CLIP,
    DEFAULT_QUAD_TOL,
    ClipError,
    Grid1D,
    ReconstructedState,
    ReconstructionConfig,
    default_grid,
    reconstruct,
)
from .verify import VerifyTolerances, verify_state

__all__ = ["RunConfig", "ValidationError", "run", "emit_curve", "main", "entry"]

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_NUMERIC = 2
EXIT_CHECKS = 3

COMMANDS = ("reconstruct", "verify", "propagate", "protocol", "sweep", "families")
FAMILIES = ("free", "gaussian", "well", "hydrogen", "expr")

_DEFAULT_N = 2001
_DEFAULT_DT = 1e-3
_DEFAULT_STEPS = 500


class ValidationError(ValueError):
    """Bad flags, config file or parameter combination."""


@dataclass
class RunConfig:
    command: str
    family: str = None
    expr_text: str = None
    geometry: str = LINE
    C: float = 0.0
    C_list: list = None
    E: float = None
    x_lo: float = None
    x_hi: float = None
    n: int = None
    x0: float = None
    clip: float = None
    quad_tol: float = None
    dt: float = None
    steps: int = None
    e_ref: float = None
    out_dir: str = "out"
    format: str = "csv"
    plot: bool = True
    tol_residual: float = None
    tol_recon: float = None
    tol_current: float = None


# --- output ------------------------------------------------------------------

_CURVE_HEADER = "x,R,S,V,re_psi,im_psi,rho"


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def _curve_columns(state: ReconstructedState):
    xs = state.grid.points()
    cols = (
        xs,
        state.R,
        state.S,
        state.V,
        state.psi.real,
        state.psi.imag,
        state.rho,
    )
    for col in cols:
        if not np.all(np.isfinite(col)):
            raise ArithmeticError("refusing to emit non-finite curve data")
    return cols


def emit_curve(state: ReconstructedState, fmt: str, path, meta: dict = None):
    """Write one curve file: CSV rows or a JSON object with parallel arrays."""
    path = Path(path)
    cols = _curve_columns(state)
    try:
        if fmt == "csv":
            with open(path, "w", newline="\n", encoding="utf-8") as fh:
                fh.write(_CURVE_HEADER + "\n")
                for row in zip(*cols):
                    fh.write(",".join(_fmt(v) for v in row) + "\n")
        elif fmt == "json":
            obj = {"meta": meta or {}}
            for name, col in zip(_CURVE_HEADER.split(","), cols):
                obj[name] = [float(v) for v in col]
            with open(path, "w", newline="\n", encoding="utf-8") as fh:
                json.dump(obj, fh, indent=1)
                fh.write("\n")
        else:
            raise ValidationError(f"unknown format {fmt!r}")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


def _write_json(path, obj):
    path = Path(path)
    try:
        with open(path, "w", newline="\n", encoding="utf-8") as fh:
            json.dump(obj, fh, indent=1)
            fh.write("\n")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


def _report_dict(report):
    return {
        "times": [float(v) for v in report.times],
        "norm": [float(v) for v in report.norm_t],
        "fidelity": [float(v) for v in report.fidelity_t],
        "phase_error": [float(v) for v in report.phase_err_t],
        "fitted_E": float(report.fitted_E),
    }


def _verify_dict(report):
    return {
        "residual_real_max": report.residual_real_max,
        "residual_imag_max": report.residual_imag_max,
        "recon_condition_max": report.recon_condition_max,
        "current_dev_max": report.current_dev_max,
        "norm": report.norm,
        "scale": report.scale,
        "passes": dict(report.passes),
        "ok": report.ok,
    }


# --- config assembly -----------------------------------------------------------


def _build_prefactor(cfg: RunConfig) -> Prefactor:
    if cfg.family is None:
        raise ValidationError("--family is required for this command")
    if cfg.family == "expr":
        if not cfg.expr_text:
            raise ValidationError("--expr is required when --family expr")
        if cfg.x_lo is None or cfg.x_hi is None:
            raise ValidationError("--x-lo and --x-hi are required when --family expr")
        expr = parse(cfg.expr_text)
        return from_expression(
            expr,
            (cfg.x_lo, cfg.x_hi),
            geometry=cfg.geometry,
            E=cfg.E if cfg.E is not None else 0.0,
            x0=cfg.x0 if cfg.x0 is not None else 0.5 * (cfg.x_lo + cfg.x_hi),
        )
    if cfg.expr_text:
        raise ValidationError("--expr is only valid with --family expr")
    families = builtin_families()
    if cfg.family not in families:
        raise ValidationError(f"unknown family {cfg.family!r}")
    return families[cfg.family]


def _build_grid(cfg: RunConfig, pref: Prefactor) -> Grid1D:
    n = cfg.n if cfg.n is not None else _DEFAULT_N
    clip = cfg.clip if cfg.clip is not None else DEFAULT_CLIP
    if (cfg.x_lo is None) != (cfg.x_hi is None):
        raise ValidationError("--x-lo and --x-hi must be given together")
    if cfg.x_lo is not None:
        if not cfg.x_lo < cfg.x_hi:
            raise ValidationError(f"empty grid [{cfg.x_lo}, {cfg.x_hi}]")
        return Grid1D(cfg.x_lo, cfg.x_hi, n)
    return default_grid(pref, n=n, clip=clip)


def _recon_config(cfg: RunConfig, grid: Grid1D, C: float) -> ReconstructionConfig:
    return ReconstructionConfig(
        C=C,
        grid=grid,
        E=cfg.E,
        x0=cfg.x0,
        clip=cfg.clip if cfg.clip is not None else DEFAULT_CLIP,
        quad_tol=cfg.quad_tol if cfg.quad_tol is not None else DEFAULT_QUAD_TOL,
    )


def _prop_config(cfg: RunConfig, fallback_e: float) -> PropagationConfig:
    return PropagationConfig(
        dt=cfg.dt if cfg.dt is not None else _DEFAULT_DT,
        steps=cfg.steps if cfg.steps is not None else _DEFAULT_STEPS,
        E_ref=cfg.e_ref if cfg.e_ref is not None else fallback_e,
    )


def _tolerances(cfg: RunConfig) -> VerifyTolerances:
    base = VerifyTolerances()
    return VerifyTolerances(
        residual=cfg.tol_residual if cfg.tol_residual is not None else base.residual,
        recon_condition=cfg.tol_recon if cfg.tol_recon is not None else base.recon_condition,
        current=cfg.tol_current if cfg.tol_current is not None else base.current,
    )


def _meta(cfg: RunConfig, grid: Grid1D, C: float, E: float, x0: float) -> dict:
    return {
        "command": cfg.command,
        "family": cfg.family,
        "expr_text": cfg.expr_text,
        "geometry": cfg.geometry,
        "C": C,
        "E": E,
        "x_lo": grid.x_lo,
        "x_hi": grid.x_hi,
        "n": grid.n,
        "x0": x0,
        "clip": cfg.clip if cfg.clip is not None else DEFAULT_CLIP,
        "quad_tol": cfg.quad_tol if cfg.quad_tol is not None else DEFAULT_QUAD_TOL,
        "format": cfg.format,
    }


def _stem(cfg: RunConfig, C: float) -> str:
    return f"{cfg.family}_C{C:g}"


def _sweep_workers(n_jobs: int) -> int:
    env = os.environ.get("LAMBRECON_THREADS")
    if env is not None:
        try:
            k = int(env)
        except ValueError as exc:
            raise ValidationError(f"LAMBRECON_THREADS={env!r} is not an integer") from exc
        if k < 1:
            raise ValidationError("LAMBRECON_THREADS must be a positive integer")
    else:
        k = min(4, os.cpu_count() or 1)
    return max(1, min(k, n_jobs))


# --- commands --------------------------------------------------------------------


def _cmd_families() -> int:
    for name, pref in builtin_families().items():
        e_txt = "C^2/2" if pref.default_E is None else _fmt(pref.default_E)
        print(
            f"{name:9s} geometry={pref.geometry:6s} "
            f"domain=({pref.x_lo:g}, {pref.x_hi:g}) default_E={e_txt} "
            f"x0={pref.default_x0:g} window=({pref.window[0]:g}, {pref.window[1]:g})"
        )
    return EXIT_OK


def _reconstruct_one(cfg: RunConfig, pref: Prefactor, grid: Grid1D, C: float):
    state = reconstruct(pref, _recon_config(cfg, grid, C))
    return state


def _cmd_reconstruct(cfg: RunConfig, out: Path) -> int:
    pref = _build_prefactor(cfg)
    grid = _build_grid(cfg, pref)
    state = _reconstruct_one(cfg, pref, grid, cfg.C)
    stem = _stem(cfg, cfg.C)
    meta = _meta(cfg, grid, cfg.C, state.E, cfg.x0 if cfg.x0 is not None else pref.default_x0)
    path = emit_curve(state, cfg.format, out / f"{stem}.{cfg.format}", meta)
    print(f"wrote {path}")
    if cfg.plot:
        fig = figures.state_figure(state, title=f"{cfg.family}, C={cfg.C:g}")
        figures.save_figure(fig, out / f"{stem}.png")
        print(f"wrote {out / (stem + '.png')}")
    return EXIT_OK


def _cmd_verify(cfg: RunConfig, out: Path) -> int:
    pref = _build_prefactor(cfg)
    grid = _build_grid(cfg, pref)
    state = _reconstruct_one(cfg, pref, grid, cfg.C)
    report = verify_state(state, tolerances=_tolerances(cfg))
    stem = _stem(cfg, cfg.C)
    meta = _meta(cfg, grid, cfg.C, state.E, cfg.x0 if cfg.x0 is not None else pref.default_x0)
    emit_curve(state, cfg.format, out / f"{stem}.{cfg.format}", meta)
    path = _write_json(out / f"{stem}_verify.json", {"meta": meta, **_verify_dict(report)})
    print(f"wrote {path}")
    for name, okay in report.passes.items():
        print(f"{name}: {'pass' if okay else 'FAIL'}")
    return EXIT_OK if report.ok else EXIT_CHECKS


def _cmd_propagate(cfg: RunConfig, out: Path) -> int:
    pref = _build_prefactor(cfg)
    grid = _build_grid(cfg, pref)
    state = _reconstruct_one(cfg, pref, grid, cfg.C)
    pcfg = _prop_config(cfg, state.E)
    _, report = cn_propagate(state.psi, state.V, grid, pcfg)
    stem = _stem(cfg, cfg.C)
    meta = _meta(cfg, grid, cfg.C, state.E, cfg.x0 if cfg.x0 is not None else pref.default_x0)
    meta["dt"] = pcfg.dt
    meta["steps"] = pcfg.steps
    emit_curve(state, cfg.format, out / f"{stem}.{cfg.format}", meta)
    path = _write_json(out / f"{stem}_prop.json", {"meta": meta, **_report_dict(report)})
    print(f"wrote {path}")
    if cfg.plot:
        fig = figures.propagation_figure(report, title=f"{cfg.family}, C={cfg.C:g}")
        figures.save_figure(fig, out / f"{stem}_trace.png")
    print(f"final fidelity {report.fidelity_t[-1]:.6f}")
    return EXIT_OK


def _cmd_protocol(cfg: RunConfig, out: Path) -> int:
    pref = _build_prefactor(cfg)
    grid = _build_grid(cfg, pref)
    rcfg = _recon_config(cfg, grid, cfg.C)
    pcfg = _prop_config(cfg, cfg.E if cfg.E is not None else None)
    result = lamb_protocol(pref, rcfg, pcfg)
    stem = _stem(cfg, cfg.C)
    meta = _meta(cfg, grid, cfg.C, result.state.E,
                 cfg.x0 if cfg.x0 is not None else pref.default_x0)
    meta["dt"] = pcfg.dt
    meta["steps"] = pcfg.steps
    obj = {
        "meta": meta,
        "kick_error": result.kick_error,
        "prep": _report_dict(result.prep),
        "final": _report_dict(result.final),
    }
    path = _write_json(out / f"{stem}_protocol.json", obj)
    print(f"wrote {path}")
    if cfg.plot:
        fig = figures.propagation_figure(result.final, title=f"protocol {cfg.family}, C={cfg.C:g}")
        figures.save_figure(fig, out / f"{stem}_protocol.png")
    print(
        f"prep fidelity {result.prep.fidelity_t[-1]:.6f}, "
        f"kick error {result.kick_error:.3g}, "
        f"final fidelity {result.final.fidelity_t[-1]:.6f}"
    )
    return EXIT_OK


def _cmd_sweep(cfg: RunConfig, out: Path) -> int:
    if not cfg.C_list:
        raise ValidationError("--C-list is required for sweep")
    pref = _build_prefactor(cfg)
    grid = _build_grid(cfg, pref)
    tol = _tolerances(cfg)

    def work(c: float):
        state = _reconstruct_one(cfg, pref, grid, c)
        return state, verify_state(state, tolerances=tol)

    workers = _sweep_workers(len(cfg.C_list))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(work, cfg.C_list))

    entries = []
    states = []
    for c, (state, report) in zip(cfg.C_list, results):
        stem = _stem(cfg, c)
        meta = _meta(cfg, grid, c, state.E, cfg.x0 if cfg.x0 is not None else pref.default_x0)
        path = emit_curve(state, cfg.format, out / f"{stem}.{cfg.format}", meta)
        entries.append({"C": c, "file": path.name, **_verify_dict(report)})
        states.append(state)
        print(f"wrote {path}")
    summary = {
        "command": "sweep",
        "family": cfg.family,
        "C_list": list(cfg.C_list),
        "format": cfg.format,
        "results": entries,
    }
    path = _write_json(out / f"{cfg.family}_sweep.json", summary)
    print(f"wrote {path}")
    if cfg.plot:
        labels = [f"C={c:g}" for c in cfg.C_list]
        fig = figures.sweep_figure(states, labels, title=f"{cfg.family} sweep")
        figures.save_figure(fig, out / f"{cfg.family}_sweep.png")
    return EXIT_OK if all(e["ok"] for e in entries) else EXIT_CHECKS


def run(cfg: RunConfig) -> int:
    """Dispatch one RunConfig; returns the process exit status."""
    if cfg.command == "families":
        return _cmd_families()
    if cfg.command not in COMMANDS:
        raise ValidationError(f"unknown command {cfg.command!r}")
    if cfg.format not in ("csv", "json"):
        raise ValidationError(f"unknown format {cfg.format!r}")
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    handler = {
        "reconstruct": _cmd_reconstruct,
        "verify": _cmd_verify,
        "propagate": _cmd_propagate,
        "protocol": _cmd_protocol,
        "sweep": _cmd_sweep,
    }[cfg.command]
    return handler(cfg, out)


# --- argument parsing ---------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    # spec'd exit codes: any command-line validation failure is status 1
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_VALIDATION, f"{self.prog}: error: {message}\n")


def _float_list(text: str) -> list:
    try:
        values = [float(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad float list {text!r}") from exc
    if not values:
        raise argparse.ArgumentTypeError("empty C list")
    return values


def _add_common(sub):
    sub.add_argument("--family", choices=FAMILIES, default=None)
    sub.add_argument("--expr", dest="expr_text", default=None,
                     help="prefactor expression in x (with --family expr)")
    sub.add_argument("--geometry", choices=(LINE, RADIAL), default=None)
    sub.add_argument("--C", type=float, default=None, help="current constant")
    sub.add_argument("--E", type=float, default=None, help="energy override (pure gauge shift)")
    sub.add_argument("--x-lo", type=float, default=None)
    sub.add_argument("--x-hi", type=float, default=None)
    sub.add_argument("--n", type=int, default=None)
    sub.add_argument("--x0", type=float, default=None, help="phase integral origin")
    sub.add_argument("--clip", type=float, default=None,
                     help="relative amplitude threshold for grid clipping")
    sub.add_argument("--quad-tol", type=float, default=None)
    sub.add_argument("--out-dir", default=None)
    sub.add_argument("--format", choices=("csv", "json"), default=None)
    sub.add_argument("--plot", action=argparse.BooleanOptionalAction, default=None)
    sub.add_argument("--config", default=None, help="JSON file with RunConfig keys")


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lambrecon", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    subs = parser.add_subparsers(dest="command", required=True)
    for name in ("reconstruct", "verify", "propagate", "protocol", "sweep"):
        sub = subs.add_parser(name)
        _add_common(sub)
        if name == "sweep":
            sub.add_argument("--C-list", dest="C_list", type=_float_list, default=None,
                             help="comma-separated current constants")
        if name in ("propagate", "protocol"):
            sub.add_argument("--dt", type=float, default=None)
            sub.add_argument("--steps", type=int, default=None)
            sub.add_argument("--e-ref", type=float, default=None)
        if name in ("verify", "sweep"):
            sub.add_argument("--tol-residual", type=float, default=None)
            sub.add_argument("--tol-recon", type=float, default=None)
            sub.add_argument("--tol-current", type=float, default=None)
    subs.add_parser("families")
    return parser


_CONFIG_KEYS = {f.name for f in fields(RunConfig)}


def _load_config_file(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ValidationError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ValidationError(f"config {path} must hold a JSON object")
    unknown = sorted(set(data) - _CONFIG_KEYS)
    if unknown:
        raise ValidationError(f"config {path} has unknown keys: {', '.join(unknown)}")
    return data


def _assemble(args: argparse.Namespace) -> RunConfig:
    from_file = _load_config_file(args.config) if getattr(args, "config", None) else {}
    cfg = RunConfig(command=args.command)
    for f in fields(RunConfig):
        if f.name == "command":
            continue
        cli_value = getattr(args, f.name, None)
        if cli_value is not None:
            setattr(cfg, f.name, cli_value)
        elif f.name in from_file and from_file[f.name] is not None:
            setattr(cfg, f.name, from_file[f.name])
        # else: keep the dataclass default
    if cfg.C_list is not None and not isinstance(cfg.C_list, list):
        raise ValidationError("C_list must be a list of numbers")
    if cfg.C_list is not None:
        cfg.C_list = [float(c) for c in cfg.C_list]
    return cfg


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = _assemble(args)
        return run(cfg)
    except ArithmeticError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValidationError, ExprError, NodalPrefactorError, PrefactorDomainError,
            ClipError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


def entry():
    raise SystemExit(main())


if __name__ == "__main__":
    raise SystemExit(main())
