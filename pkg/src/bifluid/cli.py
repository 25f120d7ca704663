"""Configuration parsing, run orchestration, persistence, and the CLI.

Config files are flat INI-style text with named blocks (grid, params,
viscosity, continuation, output).  Unknown keys are hard errors with the
offending line number.  Runs write monitor.csv / monitor.json, periodic
field snapshots, and a manifest; identical configs produce byte-identical
monitor CSVs (the manifest carries the only timestamp, isolated on its own
line).
"""

from __future__ import annotations

import argparse
import configparser
import io
import json
import math
import os
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__, backend_name
from .diagnostics import MONITOR_COLUMNS, estimate_monitor
from .errors import ConfigError, MalformedFileError
from .fixed_point import ContinuationConfig, MixtureState, run_continuation
from .grid import Field, Grid, VectorField, build_grid
from .model import (
    MixtureParams,
    ViscosityMatrices,
    VISCOSITY_PRESETS,
    validate_parameters,
)
from .solvers import LinearSolveSpec
from .verification import SOLVER_TARGETS, convergence_study, manufactured_case

_KNOWN_KEYS = {
    "grid": ("dim", "extents", "cells"),
    "params": ("gamma", "m", "a", "masses", "forcing", "forcing_magnitude",
               "theta_hat", "theta_hat_value", "allow_unproven"),
    "viscosity": ("preset", "lambda", "mu"),
    "continuation": ("lambda_schedule", "eps_schedule", "damping",
                     "damping_safety", "fp_tol", "fp_max_iters", "rel_tol",
                     "max_iters", "halt_on_failure"),
    "output": ("directory", "snapshot_every", "formats"),
}

_FORCING_PRESETS = ("none", "constant", "trig")
_THETA_PRESETS = ("constant", "perturbed")


@dataclass
class RunConfig:
    """Validated run configuration; defaults match an equilibrium run."""

    dim: int = 3
    extents: tuple = (1.0, 1.0, 1.0)
    cells: tuple = (8, 8, 8)
    gamma: float = 4.0
    m: float = 4.0
    a: float = 1.0
    masses: tuple = (1.0, 1.0)
    forcing: str = "none"
    forcing_magnitude: float = 0.0
    theta_hat: str = "constant"
    theta_hat_value: float = 1.0
    allow_unproven: bool = False
    viscosity_preset: str | None = "symmetric_coupling"
    lam: tuple = (1.0, -1.0, -1.0, 1.0)
    mu: tuple = (2.0, 0.5, 0.5, 1.0)
    lambda_schedule: tuple = (0.1, 0.25, 0.5, 0.75, 1.0)
    eps_schedule: tuple = (1.0, 0.5, 0.25, 0.125, 0.0625, 0.03125, 0.015625)
    damping: float = 0.5
    damping_safety: float = 0.8
    fp_tol: float = 1e-6
    fp_max_iters: int = 500
    rel_tol: float = 1e-10
    max_iters: int = 5000
    halt_on_failure: bool = False
    directory: str = "out"
    snapshot_every: int = 1
    formats: tuple = ("dat",)

    # -- conversion to module-level objects --------------------------------

    def grid(self) -> Grid:
        return build_grid(self.dim, self.extents, self.cells)

    def forcing_fn(self):
        amp = self.forcing_magnitude
        if self.forcing == "none" or amp == 0.0:
            return None
        if self.forcing == "constant":
            def fn(pts):
                out = np.zeros_like(pts)
                out[:, 0] = amp
                return out
            return fn
        extents = self.extents

        def fn(pts):
            out = np.empty_like(pts)
            for k in range(pts.shape[1]):
                out[:, k] = amp * np.sin(2.0 * math.pi * pts[:, k] / extents[k])
            return out
        return fn

    def theta_hat_fn(self):
        val = self.theta_hat_value
        if self.theta_hat == "constant":
            return val, val
        extents = self.extents

        def fn(pts):
            pert = np.ones(pts.shape[0])
            for k in range(pts.shape[1]):
                pert *= np.cos(math.pi * pts[:, k] / extents[k])
            return val * (1.0 + 0.1 * pert)
        return fn, 1.1 * val

    def params(self) -> MixtureParams:
        f = self.forcing_fn()
        that, bound = self.theta_hat_fn()
        p = MixtureParams(gamma=self.gamma, m=self.m, a=self.a,
                          masses=self.masses, forcing=(f, f), theta_hat=that,
                          allow_unproven=self.allow_unproven)
        p._theta_hat_bound = bound
        return p

    def viscosity(self) -> ViscosityMatrices:
        if self.viscosity_preset is not None:
            return VISCOSITY_PRESETS[self.viscosity_preset]
        return ViscosityMatrices(lam=np.array(self.lam).reshape(2, 2),
                                 mu=np.array(self.mu).reshape(2, 2))

    def continuation(self) -> ContinuationConfig:
        return ContinuationConfig(
            lambda_schedule=self.lambda_schedule,
            eps_schedule=self.eps_schedule,
            damping=self.damping,
            damping_safety=self.damping_safety,
            fp_tol=self.fp_tol,
            fp_max_iters=self.fp_max_iters,
            solve_spec=LinearSolveSpec(rel_tol=self.rel_tol,
                                       max_iters=self.max_iters),
            halt_on_failure=self.halt_on_failure,
        )

    # -- serialization -------------------------------------------------------

    def to_text(self) -> str:
        def seq(vals):
            return ", ".join(repr(v) if isinstance(v, float) else str(v)
                             for v in vals)
        lines = [
            "[grid]",
            f"dim = {self.dim}",
            f"extents = {seq(self.extents)}",
            f"cells = {seq(self.cells)}",
            "",
            "[params]",
            f"gamma = {self.gamma!r}",
            f"m = {self.m!r}",
            f"a = {self.a!r}",
            f"masses = {seq(self.masses)}",
            f"forcing = {self.forcing}",
            f"forcing_magnitude = {self.forcing_magnitude!r}",
            f"theta_hat = {self.theta_hat}",
            f"theta_hat_value = {self.theta_hat_value!r}",
            f"allow_unproven = {str(self.allow_unproven).lower()}",
            "",
            "[viscosity]",
        ]
        if self.viscosity_preset is not None:
            lines.append(f"preset = {self.viscosity_preset}")
        else:
            lines.append(f"lambda = {seq(self.lam)}")
            lines.append(f"mu = {seq(self.mu)}")
        lines += [
            "",
            "[continuation]",
            f"lambda_schedule = {seq(self.lambda_schedule)}",
            f"eps_schedule = {seq(self.eps_schedule)}",
            f"damping = {self.damping!r}",
            f"damping_safety = {self.damping_safety!r}",
            f"fp_tol = {self.fp_tol!r}",
            f"fp_max_iters = {self.fp_max_iters}",
            f"rel_tol = {self.rel_tol!r}",
            f"max_iters = {self.max_iters}",
            f"halt_on_failure = {str(self.halt_on_failure).lower()}",
            "",
            "[output]",
            f"directory = {self.directory}",
            f"snapshot_every = {self.snapshot_every}",
            f"formats = {', '.join(self.formats)}",
            "",
        ]
        return "\n".join(lines)


def _key_line(text: str, section: str, key: str) -> int:
    """1-based line of a key inside a section, for error messages."""
    current = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if stripped.startswith("[") and stripped.endswith("]"):
            current = stripped[1:-1].strip().lower()
        elif current == section and "=" in stripped:
            if stripped.split("=", 1)[0].strip().lower() == key:
                return lineno
    return 0


def parse_config(text: str) -> RunConfig:
    """Parse and validate a run configuration; unknown keys are errors."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config parse error: {exc}") from exc

    problems = []
    for section in parser.sections():
        sec = section.lower()
        if sec not in _KNOWN_KEYS:
            problems.append(f"unknown block [{section}]")
            continue
        for key in parser[section]:
            if key.lower() not in _KNOWN_KEYS[sec]:
                line = _key_line(text, sec, key.lower())
                problems.append(f"unknown key '{key}' in [{section}] (line {line})")
    if problems:
        raise ConfigError("; ".join(problems))

    cfg = RunConfig()

    def get(section, key, cast, default):
        if parser.has_option(section, key):
            raw = parser.get(section, key)
            try:
                return cast(raw)
            except (TypeError, ValueError) as exc:
                line = _key_line(text, section, key)
                raise ConfigError(
                    f"bad value for '{key}' in [{section}] (line {line}): {exc}"
                ) from exc
        return default

    def floats(raw):
        return tuple(float(x) for x in raw.replace(",", " ").split())

    def ints(raw):
        return tuple(int(x) for x in raw.replace(",", " ").split())

    def boolean(raw):
        low = raw.strip().lower()
        if low in ("true", "yes", "1", "on"):
            return True
        if low in ("false", "no", "0", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")

    dim = get("grid", "dim", int, cfg.dim)
    defaults_2d = {"extents": (1.0, 1.0), "cells": (8, 8)}
    extents = get("grid", "extents", floats,
                  cfg.extents if dim == 3 else defaults_2d["extents"])
    cells = get("grid", "cells", ints,
                cfg.cells if dim == 3 else defaults_2d["cells"])

    def choice(options):
        def cast(raw):
            low = raw.strip().lower()
            if low not in options:
                raise ValueError(f"must be one of {options}")
            return low
        return cast

    visc_preset = get("viscosity", "preset", choice(tuple(VISCOSITY_PRESETS)), None)
    lam = get("viscosity", "lambda", floats, None)
    mu = get("viscosity", "mu", floats, None)
    if visc_preset is None and lam is None and mu is None:
        visc_preset = cfg.viscosity_preset
        lam, mu = cfg.lam, cfg.mu
    elif visc_preset is None:
        if lam is None or mu is None:
            raise ConfigError("viscosity block needs both 'lambda' and 'mu' "
                              "(or a preset)")
        if len(lam) != 4 or len(mu) != 4:
            raise ConfigError("viscosity matrices need 4 entries (row-major 2x2)")
        nu12 = lam[1] + 2.0 * mu[1]
        if nu12 != 0.0:
            line = _key_line(text, "viscosity", "lambda")
            raise ConfigError(
                "total-viscosity triangularity violated: lam12 + 2*mu12 = "
                f"{nu12!r} must be exactly 0 (line {line})")
    else:
        lam, mu = cfg.lam, cfg.mu

    out = RunConfig(
        dim=dim, extents=extents, cells=cells,
        gamma=get("params", "gamma", float, cfg.gamma),
        m=get("params", "m", float, cfg.m),
        a=get("params", "a", float, cfg.a),
        masses=get("params", "masses", floats, cfg.masses),
        forcing=get("params", "forcing", choice(_FORCING_PRESETS), cfg.forcing),
        forcing_magnitude=get("params", "forcing_magnitude", float,
                              cfg.forcing_magnitude),
        theta_hat=get("params", "theta_hat", choice(_THETA_PRESETS), cfg.theta_hat),
        theta_hat_value=get("params", "theta_hat_value", float,
                            cfg.theta_hat_value),
        allow_unproven=get("params", "allow_unproven", boolean, cfg.allow_unproven),
        viscosity_preset=visc_preset, lam=tuple(lam), mu=tuple(mu),
        lambda_schedule=get("continuation", "lambda_schedule", floats,
                            cfg.lambda_schedule),
        eps_schedule=get("continuation", "eps_schedule", floats, cfg.eps_schedule),
        damping=get("continuation", "damping", float, cfg.damping),
        damping_safety=get("continuation", "damping_safety", float,
                           cfg.damping_safety),
        fp_tol=get("continuation", "fp_tol", float, cfg.fp_tol),
        fp_max_iters=get("continuation", "fp_max_iters", int, cfg.fp_max_iters),
        rel_tol=get("continuation", "rel_tol", float, cfg.rel_tol),
        max_iters=get("continuation", "max_iters", int, cfg.max_iters),
        halt_on_failure=get("continuation", "halt_on_failure", boolean,
                            cfg.halt_on_failure),
        directory=get("output", "directory", str, cfg.directory),
        snapshot_every=get("output", "snapshot_every", int, cfg.snapshot_every),
        formats=get("output", "formats", lambda raw: tuple(
            s.strip() for s in raw.split(",") if s.strip()), cfg.formats),
    )

    violations = []
    if out.dim not in (2, 3):
        violations.append("grid dim must be 2 or 3")
    if len(out.extents) != out.dim or len(out.cells) != out.dim:
        violations.append("extents/cells length must match dim")
    if any(f not in ("dat", "csv") for f in out.formats):
        violations.append("formats must be from {dat, csv}")
    if out.snapshot_every < 0:
        violations.append("snapshot_every must be nonnegative")
    try:
        out.grid()
        out.params()
        out.viscosity()
        out.continuation()
    except (ValueError, KeyError) as exc:
        violations.append(str(exc))
    if violations:
        raise ConfigError("; ".join(violations))
    return out


# -- field persistence ------------------------------------------------------------


def _field_header(state: MixtureState) -> str:
    g = state.grid
    return ("bifluid-fields dim={} extents={} cells={} eps={} lam={}".format(
        g.dim, ",".join(repr(float(e)) for e in g.extents),
        ",".join(str(c) for c in g.cells),
        repr(float(state.eps)), repr(float(state.lam))))


def _state_columns(dim: int) -> list[str]:
    axes = "xyz"[:dim]
    cols = list(axes) + ["rho1", "rho2"]
    cols += [f"u1{ax}" for ax in axes] + [f"u2{ax}" for ax in axes] + ["s"]
    return cols


def _state_matrix(state: MixtureState) -> np.ndarray:
    g = state.grid
    cols = [g.cell_centers()[:, k] for k in range(g.dim)]
    cols += [state.rho[0].values.reshape(-1), state.rho[1].values.reshape(-1)]
    for i in (0, 1):
        for k in range(g.dim):
            cols.append(state.u[i].values[k].reshape(-1))
    cols.append(state.s.values.reshape(-1))
    return np.stack(cols, axis=1)


def _atomic_write(path: str, text: str):
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def write_fields(state: MixtureState, path: str, fmt: str | None = None):
    """Persist all five fields plus tags; decimal shortest-repr round-trips
    bit-exactly."""
    fmt = fmt or ("csv" if path.endswith(".csv") else "dat")
    mat = _state_matrix(state)
    buf = io.StringIO()
    if fmt == "dat":
        buf.write(_field_header(state) + "\n")
        for idx in range(mat.shape[0]):
            buf.write(str(idx) + " "
                      + " ".join(repr(float(v)) for v in mat[idx]) + "\n")
    elif fmt == "csv":
        buf.write("# " + _field_header(state) + "\n")
        buf.write(",".join(_state_columns(state.grid.dim)) + "\n")
        for idx in range(mat.shape[0]):
            buf.write(",".join(repr(float(v)) for v in mat[idx]) + "\n")
    else:
        raise ValueError(f"unknown field format {fmt!r}")
    _atomic_write(path, buf.getvalue())


def _parse_field_header(line: str, path: str, offset: int):
    parts = line.strip().split()
    if not parts or parts[0] != "bifluid-fields":
        raise MalformedFileError(f"{path}: missing field header", offset)
    kv = {}
    for part in parts[1:]:
        if "=" not in part:
            raise MalformedFileError(f"{path}: bad header token {part!r}", offset)
        key, val = part.split("=", 1)
        kv[key] = val
    try:
        dim = int(kv["dim"])
        extents = tuple(float(x) for x in kv["extents"].split(","))
        cells = tuple(int(x) for x in kv["cells"].split(","))
        eps = float(kv["eps"])
        lam = float(kv["lam"])
    except (KeyError, ValueError) as exc:
        raise MalformedFileError(f"{path}: bad header ({exc})", offset) from exc
    return dim, extents, cells, eps, lam


def read_fields(path: str) -> MixtureState:
    """Inverse of write_fields for both formats, with byte-offset errors."""
    with open(path, "r") as fh:
        text = fh.read()
    lines = text.splitlines(keepends=True)
    if not lines:
        raise MalformedFileError(f"{path}: empty file", 0)
    offset = 0
    first = lines[0]
    fmt = "csv" if first.startswith("#") or path.endswith(".csv") else "dat"
    header_line = first[2:] if first.startswith("# ") else first
    dim, extents, cells, eps, lam = _parse_field_header(header_line, path, 0)
    grid = build_grid(dim, extents, cells)
    n = grid.n_cells
    ncols = 3 * dim + 3  # coordinates, densities, velocities, entropy
    data = np.empty((n, ncols))
    offset += len(first)
    row = 0
    start = 1
    if fmt == "csv":
        if len(lines) < 2:
            raise MalformedFileError(f"{path}: missing column header", offset)
        offset += len(lines[1])
        start = 2
    for line in lines[start:]:
        stripped = line.strip()
        if not stripped:
            offset += len(line)
            continue
        if row >= n:
            raise MalformedFileError(f"{path}: more rows than cells", offset)
        parts = stripped.split(",") if fmt == "csv" else stripped.split()
        if fmt == "dat":
            parts = parts[1:]  # drop the index column
        if len(parts) != ncols:
            raise MalformedFileError(
                f"{path}: expected {ncols} values, got {len(parts)}", offset)
        try:
            data[row] = [float(p) for p in parts]
        except ValueError as exc:
            raise MalformedFileError(f"{path}: bad number ({exc})", offset) from exc
        row += 1
        offset += len(line)
    if row != n:
        raise MalformedFileError(
            f"{path}: truncated file ({row} rows, expected {n})", offset)

    k = dim
    rho = (Field(grid, data[:, k].reshape(grid.cells)),
           Field(grid, data[:, k + 1].reshape(grid.cells)))
    u = []
    for i in (0, 1):
        comps = data[:, k + 2 + i * dim:k + 2 + (i + 1) * dim]
        u.append(VectorField(grid, comps.T.reshape((dim,) + grid.cells)))
    s = Field(grid, data[:, -1].reshape(grid.cells))
    return MixtureState(grid, rho, (u[0], u[1]), s, eps, lam)


# -- run orchestration --------------------------------------------------------------


def run(config: RunConfig, output_dir: str | None = None) -> int:
    """Validate, continue over the regularization schedule, persist outputs.

    Exit status: 0 full convergence, 1 configuration/validation error,
    2 partial (some stage failed; results still written).
    """
    outdir = output_dir or config.directory
    try:
        grid = config.grid()
        params = config.params()
        visc = config.viscosity()
        cfg = config.continuation()
    except (ValueError, KeyError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    report = validate_parameters(params, visc)
    if not report.passed:
        print(report, file=sys.stderr)
        return 1

    os.makedirs(outdir, exist_ok=True)
    t0 = time.time()
    rows = []
    prev_flux = {"value": None}

    def on_stage(idx, state, hreport):
        stage = hreport.stages[-1]
        row = estimate_monitor(state, params, visc,
                               fp_iters=sum(s.iterations for s in hreport.stages),
                               converged=hreport.converged,
                               prev_flux=prev_flux["value"])
        prev_flux["value"] = row.flux_fields
        rows.append(row)
        if config.snapshot_every and (idx % config.snapshot_every == 0):
            for fmt in config.formats:
                write_fields(state, os.path.join(
                    outdir, f"fields_eps_{idx}.{fmt}"), fmt)
        status = "ok" if hreport.converged else f"FAILED ({stage.failure})"
        print(f"eps={state.eps:.6g}: {status}, "
              f"{sum(s.iterations for s in hreport.stages)} iterations")

    result = run_continuation(cfg, params, visc, grid, stage_callback=on_stage)

    csv_lines = [",".join(MONITOR_COLUMNS)] + [r.to_csv_row() for r in rows]
    _atomic_write(os.path.join(outdir, "monitor.csv"), "\n".join(csv_lines) + "\n")
    _atomic_write(os.path.join(outdir, "monitor.json"),
                  json.dumps([r.to_json_dict() for r in rows], indent=2) + "\n")

    failures = []
    for rep in result.reports:
        for st in rep.stages:
            if not st.converged:
                failures.append({"eps": st.eps, "lam": st.lam,
                                 "failure": st.failure})
    manifest = {
        "config": config.to_text().splitlines(),
        "version": __version__,
        "kernel_backend": backend_name(),
        "wall_time_s": round(time.time() - t0, 3),
        "failures": failures,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%S"),
    }
    _atomic_write(os.path.join(outdir, "manifest.json"),
                  json.dumps(manifest, indent=2) + "\n")
    return 0 if result.converged else 2


# -- verification battery -------------------------------------------------------------


VERIFY_THRESHOLDS = {
    "robin": {"s": 1.9},
    "lame": {"u1": 1.9, "u2": 1.9},
    "continuity": {"rho1": 0.9},
    "coupled": {"u1": 1.5, "u2": 1.5, "s": 1.5},
}


def run_verification(stream=None) -> int:
    """Spot-check shipped cases and run the standard order battery."""
    stream = stream or sys.stdout
    ok = True
    for name in ("trig2d", "trig3d", "poly3d"):
        case = manufactured_case(name)
        dev = case.spot_check()
        good = dev <= 1e-8
        ok &= good
        print(f"source spot-check {name}: max deviation {dev:.2e} "
              f"({'ok' if good else 'FAIL'})", file=stream)
    batteries = [
        ("trig2d", (8, 16, 32)),
        ("trig3d", (8, 16)),
    ]
    reports = []
    for case_name, grids in batteries:
        case = manufactured_case(case_name)
        for target in SOLVER_TARGETS:
            rep = convergence_study(case, target, grids)
            reports.append(rep)
            thresholds = VERIFY_THRESHOLDS[target]
            for fname, thr in thresholds.items():
                orders = [o for o in rep.orders.get(fname, []) if isinstance(o, float)]
                got = orders[-1] if orders else math.inf
                good = got >= thr
                ok &= good
                print(f"{case_name}/{target}/{fname}: order {got:.2f} "
                      f"(threshold {thr}) {'ok' if good else 'FAIL'}", file=stream)
    return 0 if ok else 1


# -- command line -------------------------------------------------------------------


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="bifluid",
        description="steady two-velocity compressible mixture solver")
    sub = ap.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run a continuation from a config file")
    run_p.add_argument("config")
    run_p.add_argument("--output-dir", default=None)
    run_p.add_argument("--allow-unproven", action="store_true")
    run_p.add_argument("--halt-on-failure", action="store_true")
    run_p.add_argument("--snapshot-every", type=int, default=None)

    sub.add_parser("verify", help="run the manufactured-solution battery")

    val_p = sub.add_parser("validate", help="validate a config file")
    val_p.add_argument("config")
    val_p.add_argument("--allow-unproven", action="store_true")

    ins_p = sub.add_parser("inspect", help="summarize a fields file")
    ins_p.add_argument("fields_file")

    args = ap.parse_args(argv)

    if args.command == "verify":
        return run_verification()

    if args.command == "inspect":
        try:
            state = read_fields(args.fields_file)
        except (MalformedFileError, OSError) as exc:
            print(str(exc), file=sys.stderr)
            return 1
        g = state.grid
        from .operators import integrate, w12_norm
        print(f"dim={g.dim} extents={g.extents} cells={g.cells} "
              f"eps={state.eps} lam={state.lam}")
        for i in (0, 1):
            print(f"rho{i + 1}: mass={integrate(state.rho[i])!r} "
                  f"min={float(state.rho[i].values.min())!r}")
            print(f"u{i + 1}: H1 norm={w12_norm(state.u[i])!r}")
        print(f"s: range [{float(state.s.values.min())!r}, "
              f"{float(state.s.values.max())!r}]")
        return 0

    try:
        with open(args.config) as fh:
            text = fh.read()
        config = parse_config(text)
    except (OSError, ConfigError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    if args.allow_unproven:
        config.allow_unproven = True

    if args.command == "validate":
        report = validate_parameters(config.params(), config.viscosity())
        print(report)
        return 0 if report.passed else 1

    if args.halt_on_failure:
        config.halt_on_failure = True
    if args.snapshot_every is not None:
        config.snapshot_every = args.snapshot_every
    return run(config, output_dir=args.output_dir)


if __name__ == "__main__":
    sys.exit(main())
