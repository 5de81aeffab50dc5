"""Experiment orchestration: run pipelines, persist manifests, CSVs and plots.

Every experiment writes a fresh timestamped directory containing a
``manifest.json`` (stable key order; volatile wall-clock data confined to the
``run_meta`` object) plus the CSV/SVG artifacts it references.  Identical
configs produce byte-identical artifacts modulo ``run_meta``.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import analysis, barriers, continuation, solver
from .config import ConfigError, ParsedConfig, parse_config
from .geometry import Rectangle
from .plots import emit_plot
from .profiles import constants, profile_slope

SCHEMA_VERSION = 1


def _fmt17(v):
    return format(float(v), ".17g")


def write_csv(path: Path, header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt17(v) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_csv(path: Path):
    lines = Path(path).read_text(encoding="utf-8").strip().splitlines()
    header = lines[0].split(",")
    data = np.array([[float(tok) for tok in line.split(",")]
                     for line in lines[1:]])
    return header, data


def _downsample(arr, limit=2000):
    if len(arr) <= limit:
        return arr
    idx = np.unique(np.linspace(0, len(arr) - 1, limit).astype(int))
    return arr[idx]


def _field_rows(field: solver.Field):
    grid = field.grid
    gmag = solver.gradient_magnitude(field)
    if len(grid.shape) == 1:
        return ["x", "u", "grad"], np.column_stack(
            [grid.coords, field.values, gmag])
    X, Y = grid.coords
    return ["x", "y", "u", "grad"], np.column_stack(
        [X.ravel(), Y.ravel(), field.values.ravel(), gmag.ravel()])


def make_run_dir(out_dir, experiment):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stamp = datetime.now(timezone.utc).strftime("%Y%m%d-%H%M%S")
    base = f"{experiment}-{stamp}"
    for i in range(10000):
        candidate = out / (base if i == 0 else f"{base}-{i}")
        try:
            candidate.mkdir()
            return candidate
        except FileExistsError:
            continue
    raise RuntimeError("could not create a unique run directory")


class ManifestWriter:
    """Accumulates artifacts, then writes manifest.json with a file index."""

    def __init__(self, run_dir: Path, experiment: str, cfg: ParsedConfig):
        self.run_dir = run_dir
        self.files = []
        self.body = {
            "schema_version": SCHEMA_VERSION,
            "experiment": experiment,
            "config": dict(sorted(cfg.raw.items())),
            "monitors": [],
            "profile_fits": [],
            "results": {},
        }
        self.t0 = time.monotonic()

    def add_file(self, name, text):
        path = self.run_dir / name
        path.write_text(text, encoding="utf-8")
        self.files.append(name)
        return path

    def add_csv(self, name, header, rows):
        write_csv(self.run_dir / name, header, rows)
        self.files.append(name)

    def add_monitor(self, report):
        self.body["monitors"].append(report.to_dict())

    def add_fit(self, name, fit):
        self.body["profile_fits"].append({
            "name": name, "exponent": fit.exponent, "amplitude": fit.amplitude,
            "residual": fit.residual, "window": list(fit.window),
            "n_samples": fit.n_samples,
            "t_star": fit.t_star,
        })

    def finish(self):
        for name in self.files:
            if not (self.run_dir / name).exists():
                raise RuntimeError(f"manifest references missing file {name}")
        self.body["files"] = sorted(self.files)
        self.body["run_meta"] = {
            "timestamp": datetime.now(timezone.utc).isoformat(),
            "wall_seconds": time.monotonic() - self.t0,
        }
        text = json.dumps(self.body, sort_keys=True, indent=2)
        (self.run_dir / "manifest.json").write_text(text, encoding="utf-8")
        return self.body


def _echo_constants(writer, p):
    c = constants(p)
    writer.body["constants"] = {"p": c.p, "beta": c.beta,
                                "c_p": c.c_p, "d_p": c.d_p}
    return c


def _series_dict(record):
    return {
        "grad_max": [[t, v] for t, v in _downsample(record.grad_max_series)],
        "ut_max": [[t, v] for t, v in _downsample(record.ut_max_series)],
        "stop_reason": record.stop_reason,
        "T_h": record.T_h,
        "n_steps": int(len(record.grad_max_series)),
    }


def _run_solve(cfg: ParsedConfig, writer: ManifestWriter):
    grid = cfg.grid()
    u0 = cfg.initial_field(grid)
    sconfig = cfg.solver_config(grid, u0)
    c = _echo_constants(writer, sconfig.p)
    record = solver.run(u0, sconfig)
    writer.body["results"] = _series_dict(record)
    writer.add_csv("grad_series.csv", ["t", "grad_max"], record.grad_max_series)
    writer.add_csv("ut_series.csv", ["t", "ut_max"], record.ut_max_series)
    header, rows = _field_rows(record.final_field)
    writer.add_csv("final_field.csv", header, rows)
    writer.body["results"]["final_time"] = record.final_field.time
    for i, snap in enumerate(record.snapshots):
        header, rows = _field_rows(snap)
        writer.add_csv(f"snapshot_{i:03d}.csv", header, rows)
    writer.body["results"]["snapshot_times"] = [s.time for s in record.snapshots]

    if len(record.grad_max_series) > 1:
        ser = _downsample(record.grad_max_series)
        writer.add_file("grad_norm.svg", emit_plot(
            [("max |grad u|", ser[:, 0], ser[:, 1])],
            title="slope growth", xlabel="t", ylabel="max |grad u|"))

    eps = cfg._float("monitor.eps", default=0.25)
    budget = cfg._float("monitor.budget", default=float("inf"))
    report = analysis.bernstein_monitor(record.final_field, eps, c,
                                        c_budget=budget)
    writer.add_monitor(report)

    if record.stop_reason == solver.STOP_GRADIENT_CAP and len(grid.shape) == 1:
        window = (8 * grid.h, min(0.1, grid.domain.delta0 / 2))
        try:
            samples = analysis.normal_profile_samples(record.final_field, 0.0,
                                                      window)
            fit = analysis.fit_profile(samples)
            writer.add_fit("final_normal_profile", fit)
            oracle = profile_slope(c, 0.0, samples[:, 0])
            writer.add_csv("profile_samples.csv", ["s", "g", "fit"],
                           np.column_stack([samples[:, 0], samples[:, 1],
                                            fit.amplitude * samples[:, 0] ** (-fit.exponent)]))
            writer.add_file("profile_overlay.svg", emit_plot(
                [("numeric", samples[:, 0], samples[:, 1]),
                 ("oracle", samples[:, 0], oracle)],
                log_x=True, log_y=True, title="wall slope profile",
                xlabel="distance to wall", ylabel="u_nu"))
        except ValueError:
            pass
    return 0 if report.passed else 1


def _run_elliptic(cfg: ParsedConfig, writer: ManifestWriter):
    grid = cfg.grid()
    sconfig = cfg.solver_config(grid)
    _echo_constants(writer, sconfig.p)
    kind = cfg._str("elliptic.forcing", default="zero",
                    choices={"zero", "manufactured"})
    if kind == "zero":
        fvals = np.zeros(grid.shape)
    else:
        if len(grid.shape) != 1:
            raise ConfigError("manufactured elliptic forcing is 1D only")
        x = grid.coords
        ell = grid.axes[0][-1]
        fvals = (np.pi / ell) ** 2 * 0.1 * np.sin(np.pi * x / ell) - np.abs(
            0.1 * np.pi / ell * np.cos(np.pi * x / ell)) ** sconfig.p
    result = solver.solve_elliptic(solver.Field(grid, fvals), sconfig)
    writer.body["results"] = {"residual": result.residual,
                              "converged": bool(result.converged),
                              "steps": result.steps}
    header, rows = _field_rows(result.field)
    writer.add_csv("solution.csv", header, rows)
    return 0 if result.converged else 1


def _run_continue(cfg: ParsedConfig, writer: ManifestWriter):
    grid = cfg.grid()
    u0 = cfg.initial_field(grid)
    sconfig = cfg.solver_config(grid, u0)
    _echo_constants(writer, sconfig.p)
    horizon = cfg._float("continue.horizon")
    levels_raw = cfg.raw.get("continue.k_levels", "auto")
    if levels_raw == "auto":
        levels = continuation.default_k_schedule(u0, sconfig.p)
    else:
        levels = cfg._float_list("continue.k_levels")
    ext = continuation.viscosity_extend(u0, horizon, levels, sconfig)
    loss_time, max_trace = continuation.boundary_loss(ext, ext.tol_loss)
    writer.body["results"] = {
        "k_schedule": list(ext.k_schedule),
        "tol_loss": ext.tol_loss,
        "loss_time": loss_time,
        "max_trace": max_trace,
        "convergence_gap": [float(g) for g in ext.convergence_gap],
        "run_stops": [r.stop_reason for r in ext.runs],
    }
    writer.add_csv("boundary_trace.csv", ["t", "trace"], ext.boundary_trace)
    if len(ext.boundary_trace) > 1:
        writer.add_file("boundary_trace.svg", emit_plot(
            [("wall trace", ext.boundary_trace[:, 0], ext.boundary_trace[:, 1])],
            title="boundary trace of the truncation limit",
            xlabel="t", ylabel="extrapolated wall value"))
    return 0


def _run_threshold(cfg: ParsedConfig, writer: ManifestWriter):
    grid = cfg.grid()
    phi = cfg.initial_field(grid)
    if phi.max_abs() > 0:
        phi = solver.Field(grid, phi.values / phi.max_abs())
    sconfig = cfg.solver_config(grid, phi)
    _echo_constants(writer, sconfig.p)
    horizon = cfg._float("threshold.horizon")
    levels_raw = cfg.raw.get("continue.k_levels", "auto")
    levels = None if levels_raw == "auto" else cfg._float_list("continue.k_levels")
    result = continuation.threshold_bisect(
        phi, horizon, cfg._float("threshold.rel_tol", default=0.01), sconfig,
        lambda_init=cfg._float("threshold.lambda_init", default=1.0),
        k_schedule=levels)
    table = [{"lam": lam, "verdict": cls.verdict, "T_h": cls.T_h,
              "loss_time": cls.loss_time}
             for lam, cls in result.classifications]
    writer.body["results"] = {"lambda_lo": result.lambda_lo,
                              "lambda_hi": result.lambda_hi,
                              "classifications": table}
    writer.add_csv("classifications.csv", ["lam", "global"],
                   [(lam, 1.0 if cls.verdict == continuation.GLOBAL else 0.0)
                    for lam, cls in result.classifications])
    return 0


def _run_profile(cfg: ParsedConfig, writer: ManifestWriter):
    run_dir = Path(cfg._str("profile.run_dir"))
    manifest = json.loads((run_dir / "manifest.json").read_text(encoding="utf-8"))
    source = parse_config("\n".join(
        f"{k} = {v}" for k, v in manifest["config"].items()
        if k != "experiment"), manifest["experiment"])
    grid = source.grid()
    c = _echo_constants(writer, source.exponent())
    header, data = read_csv(run_dir / "final_field.csv")
    values = data[:, header.index("u")].reshape(grid.shape)
    t_final = manifest["results"].get("final_time", 0.0)
    field = solver.Field(grid, values, t_final)
    lo = cfg._float("profile.window_lo", default=8 * grid.h)
    hi = cfg._float("profile.window_hi", default=min(0.1, grid.domain.delta0 / 2))
    samples = analysis.normal_profile_samples(field, 0.0, (lo, hi))
    fit = analysis.fit_profile(samples)
    writer.add_fit("normal_profile", fit)
    writer.add_csv("profile_samples.csv", ["s", "g", "fit"],
                   np.column_stack([samples[:, 0], samples[:, 1],
                                    fit.amplitude * samples[:, 0] ** (-fit.exponent)]))
    oracle = profile_slope(c, 0.0, samples[:, 0])
    writer.add_file("profile_overlay.svg", emit_plot(
        [("numeric", samples[:, 0], samples[:, 1]),
         ("oracle", samples[:, 0], oracle)],
        log_x=True, log_y=True, title="wall slope profile",
        xlabel="distance to wall", ylabel="u_nu"))
    writer.body["results"] = {"source_run": str(run_dir),
                              "exponent": fit.exponent,
                              "amplitude": fit.amplitude,
                              "target_exponent": c.beta,
                              "target_amplitude": c.d_p}
    return 0


def _run_barrier_check(cfg: ParsedConfig, writer: ManifestWriter):
    p_values = cfg._float_list("barrier.p_values", default=(2.5, 3.0, 4.0))
    k_frac = cfg._float("barrier.k_frac", default=0.5)
    rho = cfg._float("barrier.rho", default=0.1)
    tau = cfg._float("barrier.tau", default=1.0)
    entries = []
    ok = True
    for p in p_values:
        c = constants(p)
        k = k_frac * c.d_p
        m = cfg._float("barrier.m", default=(p + 1) / (2 * p))
        sweep = barriers.find_feasible_barrier(p, k, rho, tau, m=m)
        margin_critical = barriers.ode_comparison_margin(
            barriers.BarrierParams(p=p, k=(1 - 1e-12) * c.d_p, eta=1e-12,
                                   rho=rho, tau=tau, c1=0.0, m=m))
        theta, grad, bound_ok = barriers.cutoff(0.75, 1.0, m)
        c_m = barriers.cutoff_bound_constant(1.0, m)
        ok = ok and sweep.feasible and bound_ok
        entries.append({
            "p": p, "k": k, "m": m,
            "margin_at_critical": margin_critical,
            "sweep_c1": sweep.params.c1, "sweep_eta": sweep.params.eta,
            "sweep_min_residual": sweep.min_residual,
            "sweep_argmin": list(sweep.argmin),
            "sweep_feasible": bool(sweep.feasible),
            "cutoff_constant": c_m, "cutoff_bound_ok": bool(bound_ok),
        })
    writer.body["results"] = {"entries": entries, "all_feasible": bool(ok)}
    return 0 if ok else 1


def _sweep_child(args):
    base_experiment, raw_items, key, value, out_dir = args
    raw = dict(raw_items)
    raw[key] = value
    raw.pop("sweep.key", None)
    raw.pop("sweep.values", None)
    raw.pop("sweep.experiment", None)
    raw.pop("sweep.workers", None)
    raw.pop("experiment", None)
    text = "\n".join(f"{k} = {v}" for k, v in sorted(raw.items()))
    code, run_dir, _ = run_experiment(base_experiment, parse_config(
        text, base_experiment), out_dir)
    return value, code, str(run_dir)


def _run_sweep(cfg: ParsedConfig, writer: ManifestWriter):
    base = cfg._str("sweep.experiment", default="solve",
                    choices={"solve", "elliptic", "continue"})
    key = cfg._str("sweep.key")
    values = [tok.strip() for tok in cfg.raw["sweep.values"].split(",") if tok.strip()]
    if not values:
        raise ConfigError("sweep.values is empty")
    workers = int(cfg._float("sweep.workers", default=min(4, len(values))))
    jobs = [(base, tuple(sorted(cfg.raw.items())), key, v, str(writer.run_dir))
            for v in values]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_child, jobs))
    else:
        results = [_sweep_child(job) for job in jobs]
    writer.body["results"] = {
        "key": key,
        "runs": [{"value": v, "exit_code": code, "dir": d}
                 for v, code, d in results],
    }
    return max(code for _, code, _ in results)


_RUNNERS = {
    "solve": _run_solve,
    "elliptic": _run_elliptic,
    "continue": _run_continue,
    "threshold": _run_threshold,
    "profile": _run_profile,
    "barrier-check": _run_barrier_check,
    "sweep": _run_sweep,
}


def run_experiment(name: str, cfg: ParsedConfig, out_dir="runs"):
    """Execute one experiment pipeline; returns (exit_code, run_dir, manifest)."""
    if name not in _RUNNERS:
        raise ConfigError(f"unknown experiment {name!r}")
    if cfg.experiment != name:
        raise ConfigError(f"config was validated for {cfg.experiment!r}, "
                          f"not {name!r}")
    run_dir = make_run_dir(out_dir, name)
    writer = ManifestWriter(run_dir, name, cfg)
    try:
        code = _RUNNERS[name](cfg, writer)
    except ConfigError:
        raise
    except Exception as exc:
        raise RuntimeError(f"experiment {name!r} failed in stage "
                           f"{type(exc).__name__}: {exc}") from exc
    manifest = writer.finish()
    return code, run_dir, manifest
