"""Command-line front end: scan, classify, certify, sweep, propagate.

Exit codes: 0 all checks pass, 1 some check failed, 2 usage or config error,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .certify import Certificate, certify_point, enantio_obstruction, frozen_sweep, sweep_check
from .herm import NumericalFailure
from .io import (
    ConfigError,
    RunConfig,
    build_model,
    config_from_mapping,
    header_lines,
    load_config,
    read_schedule,
    write_csv,
    write_json,
)
from .models import JCParams, jc_analytic_spectrum
from .propagate import trajectory
from .scan import find_intersections, make_grid, scan_spectrum
from .system import ControlledHamiltonian, OutsideRegion

log = logging.getLogger("conictrl")

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3

_SCAN_DEFAULTS = {
    "counterexample": {"axes": [0, 1], "base": [0.0, 0.0], "bounds": [-5.0, 5.0, -5.0, 5.0], "grid_res": [101, 101]},
    "enantio": {"axes": [0, 2], "base": [0.0, 3.0, 0.0], "bounds": [-6.0, 6.0, -6.0, 6.0], "grid_res": [200, 200]},
    "jc": {"axes": [0], "base": [0.0, 0.0], "bounds": [0.0, 3.0], "grid_res": [301]},
}
# JC crossings lie on the undriven line, so seeds come from a line scan there while the
# search and classification move both controls (a line alone would call every crossing conical)
_SEARCH_DEFAULTS = {"counterexample": None, "enantio": None, "jc": [0, 1]}
_MAX_EXPORT_LEVELS = 20


def _floats(text, what: str) -> list[float]:
    if text is None:
        return []
    if isinstance(text, (list, tuple)):
        return [float(x) for x in text]
    try:
        return [float(x) for x in str(text).replace(";", ",").split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigError(f"{what}: expected comma-separated numbers, got {text!r}") from exc


def _ints(text, what: str) -> list[int]:
    vals = _floats(text, what)
    if any(v != int(v) for v in vals):
        raise ConfigError(f"{what}: expected integers, got {text!r}")
    return [int(v) for v in vals]


def _common(parser: argparse.ArgumentParser) -> None:
    g = parser.add_argument_group("model and run")
    g.add_argument("--config", help="YAML or JSON run configuration")
    g.add_argument("--model", choices=("counterexample", "enantio", "jc"))
    g.add_argument("--E1", type=float)
    g.add_argument("--E2", type=float)
    g.add_argument("--E3", type=float)
    g.add_argument("--sign", choices=("+", "-"))
    g.add_argument("--omega", type=float)
    g.add_argument("--Omega", type=float)
    g.add_argument("--N-trunc", dest="N_trunc", type=int)
    g.add_argument("--seed", type=int)
    g.add_argument("--tol", action="append", default=[], metavar="NAME=VALUE", help="tolerance override")
    g.add_argument("--out-dir")
    g.add_argument("--timestamp", help="timestamp written to JSON outputs (pin it for byte-identical reruns)")
    g.add_argument("--workers", type=int, help="worker processes for sweeps")
    g.add_argument("--plot", action="store_true", help="also write PNG figures")


def _grid_args(parser: argparse.ArgumentParser) -> None:
    g = parser.add_argument_group("grid")
    g.add_argument("--axes", help="scanned control axes, 0-based, e.g. 0,2")
    g.add_argument("--base", help="values of the controls that are not scanned")
    g.add_argument("--bounds", help="lo,hi per scanned axis")
    g.add_argument("--grid-res", help="points per scanned axis, e.g. 200 or 200,150")
    g.add_argument("--levels", help="gap levels j (gap between j and j+1)")
    g.add_argument("--eig-levels", type=int, help="number of eigenvalues exported")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="conictrl", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"conictrl {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("scan", help="eigenvalue and gap surfaces on a grid")
    _common(p)
    _grid_args(p)

    p = sub.add_parser("classify", help="locate and classify eigenvalue intersections")
    _common(p)
    _grid_args(p)
    p.add_argument("--seeds", help="seed points as 'a,b;c,d' (full control vectors); default: grid minima")
    p.add_argument("--max-seeds", type=int)
    p.add_argument("--search-axes", help="controls moved by the search and classification (default: grid axes)")

    for name, helptext in (
        ("certify", "spectral hypotheses at a control point, optionally with sweeps"),
        ("sweep", "single-input Lie-rank sweeps (certificate with sweep checks only)"),
    ):
        p = sub.add_parser(name, help=helptext)
        _common(p)
        _grid_args(p)
        p.add_argument("--point", help="control point for the spectral checks")
        p.add_argument("--control", type=int, help="index of the free control (default: last)")
        p.add_argument("--sub-chain", type=int, help="restrict spectral checks to the lowest K levels")
        p.add_argument("--intersections", action="store_true", help="add connectedness and germs checks")
        p.add_argument("--freeze-axis", help="axes to freeze: '0', '0,1' (jointly) or 'each'")
        p.add_argument("--samples", type=int, help="random sweep samples")
        p.add_argument("--sweep-range", help="lo,hi per frozen axis (default: the control box)")
        p.add_argument("--threshold", type=float, help="required pass fraction (default 0.95)")

    p = sub.add_parser("propagate", help="evolve a basis state under a piecewise-constant schedule")
    _common(p)
    p.add_argument("--schedule", help="CSV with header t_start,t_end,u1,u2[,u3]")
    p.add_argument("--state", type=int, help="initial basis state, 1-based (default 1)")
    p.add_argument("--target", type=int, help="basis state for the fidelity column (default: initial)")
    p.add_argument("--pair", action="store_true", help="enantio: run both enantiomers")
    return parser


_MODEL_FLAGS = ("E1", "E2", "E3", "sign", "omega", "Omega", "N_trunc")
_RUN_FLAGS = ("seed", "out_dir", "timestamp")
_OPTION_FLAGS = (
    "axes", "base", "bounds", "grid_res", "levels", "eig_levels", "seeds", "max_seeds", "search_axes", "point", "control",
    "sub_chain", "intersections", "freeze_axis", "samples", "sweep_range", "threshold", "schedule", "state",
    "target", "pair", "workers", "plot",
)


def resolve_config(args: argparse.Namespace) -> RunConfig:
    data = load_config(args.config) if args.config else {}
    if args.model:
        data["model"] = args.model
    for key in _MODEL_FLAGS + _RUN_FLAGS:
        val = getattr(args, key, None)
        if val is not None:
            data[key] = val
    for key in _OPTION_FLAGS:
        val = getattr(args, key, None)
        if val not in (None, False):
            data[key] = val
    tols = dict(data.get("tolerances", {}) or {})
    for item in args.tol:
        if "=" not in item:
            raise ConfigError(f"--tol expects NAME=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        try:
            tols[k.strip().replace("-", "_")] = float(v)
        except ValueError as exc:
            raise ConfigError(f"--tol {item!r}: value is not a number") from exc
    data["tolerances"] = tols
    return config_from_mapping(data)


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {out}: {exc}") from exc
    return out


def _meta(cfg: RunConfig) -> dict:
    return {"version": __version__, "config": cfg.resolved(), "seed": cfg.seed}


def _grid_from(cfg: RunConfig, model: ControlledHamiltonian):
    d = _SCAN_DEFAULTS[cfg.model]
    o = cfg.options
    axes = _ints(o.get("axes", d["axes"]), "axes")
    base = _floats(o.get("base", d["base"]), "base")
    if len(base) != model.m:
        raise ConfigError(f"base needs {model.m} values")
    bounds = _floats(o.get("bounds", d["bounds"] if axes == d["axes"] else None), "bounds")
    if len(bounds) != 2 * len(axes):
        raise ConfigError("bounds need lo,hi for every scanned axis")
    res = _ints(o.get("grid_res", d["grid_res"] if axes == d["axes"] else d["grid_res"][0]), "grid-res")
    if len(res) == 1:
        res = res * len(axes)
    try:
        return make_grid(model, list(zip(bounds[::2], bounds[1::2])), res, axes, base)
    except OutsideRegion as exc:
        raise ConfigError(str(exc)) from exc
    except ValueError as exc:
        raise ConfigError(f"invalid grid: {exc}") from exc


def _levels(cfg: RunConfig, model: ControlledHamiltonian) -> list[int]:
    if "levels" in cfg.options:
        lv = _ints(cfg.options["levels"], "levels")
    else:
        lv = list(range(1, min(model.dim, _MAX_EXPORT_LEVELS + 1)))
    bad = [j for j in lv if not 1 <= j <= model.dim - 1]
    if bad:
        raise ConfigError(f"levels {bad} outside [1, {model.dim - 1}]")
    return lv


def _columns(grid) -> list[str]:
    return [f"u{k + 1}" for k in range(len(grid.axes))]


def _axis_comment(grid, model) -> str:
    names = ", ".join(f"u{k + 1} = {model.labels[a]}" for k, a in enumerate(grid.axes))
    return f"axes: {names}; other controls fixed at {[float(x) for x in grid.base]}"


def cmd_scan(cfg: RunConfig) -> int:
    model = build_model(cfg)
    grid = scan_spectrum(model, _grid_from(cfg, model))
    levels = _levels(cfg, model)
    out = _out_dir(cfg)
    head = header_lines(cfg) + [_axis_comment(grid, model)]
    coords = grid.points()[:, list(grid.axes)]
    w = grid.eigenvalues.reshape(-1, model.dim)
    k = int(cfg.options.get("eig_levels", min(model.dim, _MAX_EXPORT_LEVELS)))
    if not 1 <= k <= model.dim:
        raise ConfigError(f"eig-levels must lie in [1, {model.dim}]")
    cols = _columns(grid)
    write_csv(out / "eigenvalues.csv", cols + [f"lambda_{i + 1}" for i in range(k)],
              np.hstack([coords, w[:, :k]]), head)
    for j in levels:
        gaps = (w[:, j] - w[:, j - 1]).reshape(-1, 1)
        write_csv(out / f"gap_{j}.csv", cols + [f"gap_{j}"], np.hstack([coords, gaps]), head)
    if cfg.options.get("plot"):
        from .plotting import plot_gap_surface, plot_level_curves

        x = grid.coords
        if len(grid.axes) == 2:
            for j in levels:
                g = grid.eigenvalues[..., j] - grid.eigenvalues[..., j - 1]
                plot_gap_surface(out / f"gap_{j}.png", x[0], x[1], g, j,
                                 labels=[model.labels[a] for a in grid.axes])
        else:
            overlay = []
            if cfg.model == "jc":
                overlay = _jc_overlay(cfg, x[0], grid.eigenvalues[:, :k].max())
            plot_level_curves(out / "levels.png", x[0], grid.eigenvalues[:, :k], model.labels[grid.axes[0]], overlay)
    log.info("scan: %d points, %d gap levels -> %s", len(w), len(levels), out)
    return EXIT_OK


def _jc_overlay(cfg: RunConfig, g: np.ndarray, top: float) -> list:
    p = cfg.params
    jp = JCParams(float(p.get("omega", 0.4)), float(p.get("Omega", np.sqrt(2))), int(p.get("N_trunc", 40)))
    n_max = int(top / jp.omega) + 2
    table = [jc_analytic_spectrum(float(x), jp, n_max) for x in g]
    curves = []
    for idx in range(len(table[0])):
        y = np.array([row[idx].value for row in table])
        if y.min() <= top:
            curves.append((g, y))
    return curves


def _seeds(cfg: RunConfig, model: ControlledHamiltonian):
    text = cfg.options.get("seeds")
    if not text:
        return None
    if isinstance(text, list):
        pts = [[float(x) for x in p] for p in text]
    else:
        pts = [_floats(s, "seeds") for s in str(text).split(";") if s.strip()]
    for s in pts:
        if len(s) != model.m:
            raise ConfigError(f"each seed needs {model.m} values")
        if not model.contains(s):
            raise ConfigError(f"seed {s} outside the control box")
    return pts


def _classify(cfg: RunConfig, model: ControlledHamiltonian):
    grid = scan_spectrum(model, _grid_from(cfg, model))
    tol = cfg.tol()
    seeds = _seeds(cfg, model)
    max_seeds = int(cfg.options.get("max_seeds", 16))
    search = cfg.options.get("search_axes", _SEARCH_DEFAULTS[cfg.model])
    search = None if search is None else _ints(search, "search-axes")
    if search is not None and any(not 0 <= a < model.m for a in search):
        raise ConfigError(f"search axes {search} out of range")
    records = []
    for j in _levels(cfg, model):
        records += find_intersections(model, grid, j, tol, seeds=seeds, max_seeds=max_seeds, search_axes=search)
    return grid, records


def cmd_classify(cfg: RunConfig) -> int:
    model = build_model(cfg)
    grid, records = _classify(cfg, model)
    out = _out_dir(cfg)
    report = {
        **_meta(cfg),
        "model": model.name,
        "timestamp": cfg.timestamp or _timestamp(),
        "tolerances": cfg.tol().as_dict(),
        "records": [r.to_dict() for r in records],
    }
    write_json(out / "records.json", report)
    if cfg.options.get("plot") and len(grid.axes) == 2:
        from .plotting import plot_gap_surface

        x = grid.coords
        for j in sorted({r.level for r in records}):
            marks = [[r.location[a] for a in grid.axes] for r in records if r.level == j]
            g = grid.eigenvalues[..., j] - grid.eigenvalues[..., j - 1]
            plot_gap_surface(out / f"records_gap_{j}.png", x[0], x[1], g, j,
                             labels=[model.labels[a] for a in grid.axes], marks=marks)
    log.info("classify: %d records -> %s", len(records), out)
    return EXIT_OK


def _timestamp() -> str:
    from .certify import default_timestamp

    return default_timestamp()


def _sweep_values(cfg: RunConfig, model: ControlledHamiltonian, axes: list[int], rng) -> np.ndarray:
    samples = int(cfg.options.get("samples", 20))
    if samples < 1:
        raise ConfigError("samples must be positive")
    rng_text = cfg.options.get("sweep_range")
    if rng_text is not None:
        b = _floats(rng_text, "sweep-range")
        if len(b) != 2 * len(axes):
            raise ConfigError("sweep-range needs lo,hi per frozen axis")
        bounds = list(zip(b[::2], b[1::2]))
    else:
        bounds = [model.interval(a) for a in axes]
    cols = []
    for ax, (lo, hi) in zip(axes, bounds):
        rlo, rhi = model.interval(ax)
        if not (rlo <= lo < hi <= rhi):
            raise ConfigError(f"sweep range ({lo}, {hi}) not inside ({rlo}, {rhi})")
        cols.append(rng.uniform(lo, hi, samples))
    return np.column_stack(cols)


def _sweeps(cfg: RunConfig, model: ControlledHamiltonian, cert: Certificate) -> None:
    which = str(cfg.options.get("freeze_axis", "0"))
    if which == "each":
        groups = [[a] for a in range(model.m)]
    else:
        groups = [_ints(which, "freeze-axis")]
    threshold = float(cfg.options.get("threshold", 0.95))
    workers = int(cfg.options.get("workers", 1) or 1)
    rng = np.random.default_rng(cfg.seed)
    reports = []
    for axes in groups:
        if any(not 0 <= a < model.m for a in axes) or len(axes) >= model.m:
            raise ConfigError(f"cannot freeze axes {axes} of a {model.m}-control model")
        values = _sweep_values(cfg, model, axes, rng)
        rep = frozen_sweep(model, axes, values, cfg.tol(), workers)
        cert.checks.append(sweep_check(rep, threshold))
        reports.append(rep.to_dict())
    cert.extra["sweeps"] = reports


def _point(cfg: RunConfig, model: ControlledHamiltonian) -> np.ndarray:
    if "point" in cfg.options:
        u = np.array(_floats(cfg.options["point"], "point"))
    else:
        u = np.random.default_rng(cfg.seed).uniform(-1.0, 1.0, model.m)
    if u.shape != (model.m,) or not model.contains(u):
        raise ConfigError(f"point {u.tolist()} is not a control vector inside the box")
    return u


def cmd_certify(cfg: RunConfig, sweep_only: bool = False) -> int:
    model = build_model(cfg)
    tol = cfg.tol()
    out = _out_dir(cfg)
    if sweep_only:
        cert = Certificate(model.name, tol.as_dict(), timestamp=cfg.timestamp)
        if "freeze_axis" not in cfg.options:
            cfg.options["freeze_axis"] = "each"
        _sweeps(cfg, model, cert)
    else:
        u = _point(cfg, model)
        control = int(cfg.options.get("control", model.m - 1))
        if not 0 <= control < model.m:
            raise ConfigError(f"control index {control} out of range")
        levels = cfg.options.get("sub_chain")
        if levels is None and cfg.model == "jc":
            levels = int(cfg.params.get("N_trunc", 40)) // 2
        records = None
        if cfg.options.get("intersections"):
            _, records = _classify(cfg, model)
        cert = certify_point(model, u, control, tol, records=records,
                             levels=None if levels is None else int(levels),
                             germs_radius=tol.probe_radius if records is not None else None,
                             timestamp=cfg.timestamp)
        if records is not None:
            cert.extra["records"] = [r.to_dict() for r in records]
        if cfg.model == "enantio":
            p = cfg.params
            E = (float(p.get("E1", -1.5)), float(p.get("E2", 0.5)), float(p.get("E3", 1.0)))
            cert.checks.append(enantio_obstruction(u, E, tol))
        if "freeze_axis" in cfg.options or "samples" in cfg.options:
            _sweeps(cfg, model, cert)
    cert.extra.update(_meta(cfg))
    write_json(out / "certificate.json", cert.to_dict())
    s = cert.summary()
    log.info("certificate: %s (%d checks, failed %s)", "pass" if s["pass"] else "fail", s["checks"], s["failed"])
    return EXIT_OK if cert.passed else EXIT_FAIL


def cmd_propagate(cfg: RunConfig) -> int:
    model = build_model(cfg)
    if not cfg.options.get("schedule"):
        raise ConfigError("propagate needs --schedule")
    ctrl = read_schedule(cfg.options["schedule"])
    state = int(cfg.options.get("state", 1))
    target = int(cfg.options.get("target", state))
    for s in (state, target):
        if not 1 <= s <= model.dim:
            raise ConfigError(f"basis state {s} outside [1, {model.dim}]")
    psi0 = np.zeros(model.dim, dtype=complex)
    psi0[state - 1] = 1.0
    runs = [("", model)]
    if cfg.options.get("pair"):
        if cfg.model != "enantio":
            raise ConfigError("--pair applies to the enantio model only")
        mirror = dict(cfg.params)
        mirror["sign"] = "-" if cfg.params.get("sign", "+") == "+" else "+"
        other = build_model(RunConfig(model="enantio", params=mirror))
        runs = [(f"{model.name}_", model), (f"{other.name}_", other)]
    t = ctrl.breakpoints
    columns, blocks, worst = ["t"], [t[:, None]], 0.0
    pops_for_plot, names = [], []
    for prefix, mdl in runs:
        try:
            states, defects = trajectory(mdl, ctrl, psi0)
        except ValueError as exc:
            raise ConfigError(f"schedule does not fit the model: {exc}") from exc
        pops = np.abs(states) ** 2
        fid = pops[:, target - 1]
        columns += [f"{prefix}pop_{k + 1}" for k in range(mdl.dim)] + [f"{prefix}fidelity", f"{prefix}unitarity"]
        blocks += [pops, fid[:, None], defects[:, None]]
        worst = max(worst, float(defects.max()))
        pops_for_plot.append(pops)
        names += [f"{prefix}pop_{k + 1}" for k in range(mdl.dim)]
    out = _out_dir(cfg)
    write_csv(out / "trajectory.csv", columns, np.hstack(blocks), header_lines(cfg))
    if cfg.options.get("plot"):
        from .plotting import plot_populations

        plot_populations(out / "populations.png", t, np.hstack(pops_for_plot), names)
    ok = worst < 1e-9 * ctrl.intervals
    log.info("propagate: %d intervals, max unitarity defect %.3e", ctrl.intervals, worst)
    return EXIT_OK if ok else EXIT_FAIL


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = resolve_config(args)
        if args.command == "scan":
            return cmd_scan(cfg)
        if args.command == "classify":
            return cmd_classify(cfg)
        if args.command == "certify":
            return cmd_certify(cfg)
        if args.command == "sweep":
            return cmd_certify(cfg, sweep_only=True)
        return cmd_propagate(cfg)
    except NumericalFailure as exc:
        print(f"conictrl: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, OutsideRegion, OSError) as exc:
        print(f"conictrl: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
