"""Post-blow-up continuation via monotone truncation, loss detection, and the
global-existence threshold.

The weak continuation is approximated by the largest-truncation run together
with a recorded Cauchy gap between the last two levels; the gap quantifies
truncation error honestly instead of extrapolating.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field, replace

import numpy as np

from .analysis import MonitorReport
from .profiles import constants
from .solver import (Field, RunRecord, SolverConfig, STOP_GRADIENT_CAP,
                     STOP_HORIZON, boundary_trace, run, truncated_run)

GLOBAL = "Global"
GBU_NO_LOSS = "GBU-no-loss"
GBU_LOSS = "GBU-loss"
UNDECIDED = "Undecided"


def default_tol_loss(grid, p):
    """Boundary value a resolved wall profile could spuriously produce (x10)."""
    c = constants(p)
    return 10.0 * c.c_p * grid.h ** (1 - c.beta)


@dataclass
class ExtendedRun:
    """Monotone family of truncated runs and their nodewise supremum."""

    k_schedule: tuple
    runs: list                       # one RunRecord per truncation level
    limit_snapshots: list            # nodewise max over levels, per snapshot
    convergence_gap: np.ndarray      # sup gap between last two levels, per snapshot
    boundary_trace: np.ndarray       # columns (t, extrapolated wall value of limit)
    tol_loss: float
    loss_time: float | None


class UndecidedProbeError(RuntimeError):
    """A threshold probe could not be classified within the horizon."""

    def __init__(self, lam, classification, partial):
        super().__init__(f"probe lambda={lam} is undecided; raise the horizon")
        self.lam = lam
        self.classification = classification
        self.partial = partial


@dataclass
class Classification:
    verdict: str
    T_h: float | None
    loss_time: float | None
    record: RunRecord
    extension: ExtendedRun | None = None
    diagnostics: dict = dc_field(default_factory=dict)


@dataclass
class ThresholdResult:
    lambda_lo: float
    lambda_hi: float
    classifications: list            # (lam, Classification), sorted by lam

    def table(self):
        return sorted(((lam, cls.verdict) for lam, cls in self.classifications))


def grid_truncation_limit(grid, p):
    """Largest truncation level whose wall layer the grid resolves.

    The truncated Hamiltonian has wave speed at most p k^(p-1); beyond
    2/h the central scheme's mesh Peclet number exceeds 2 and the wall
    cells develop a runaway bulge regardless of the time step.
    """
    return (2.0 / (p * grid.h)) ** (1.0 / (p - 1.0))


def default_k_schedule(u0: Field, p: float, levels: int = 5):
    """Geometric truncation levels starting at twice the initial max slope,
    pulled down to the grid-resolvable band when that would overshoot."""
    from .solver import _grad_magnitude, _gradient_raw
    g0 = float(_grad_magnitude(_gradient_raw(u0.grid, u0.values)).max())
    k0 = 2.0 * max(g0, 1.0)
    ks = tuple(k0 * 2.0 ** i for i in range(levels))
    limit = grid_truncation_limit(u0.grid, p)
    if ks[-1] > limit:
        ks = tuple(limit * 2.0 ** (i - levels + 1) for i in range(levels))
    return ks


def viscosity_extend(u0: Field, horizon: float, k_schedule,
                     config: SolverConfig) -> ExtendedRun:
    """Truncated runs for an increasing schedule plus their nodewise supremum.

    Monotonicity in the truncation level is a structural property of the
    scheme; a violation beyond tolerance is a bug, not a report.
    """
    k_schedule = tuple(float(k) for k in k_schedule)
    if len(k_schedule) < 3 or any(b <= a for a, b in zip(k_schedule, k_schedule[1:])):
        raise ValueError("k_schedule must be strictly increasing with length >= 3")
    cfg = replace(config, t_end=horizon)
    runs = [truncated_run(u0, k, cfg) for k in k_schedule]
    n_snap = min(len(r.snapshots) for r in runs)
    limit = []
    gaps = []
    trace = []
    for i in range(n_snap):
        fields = [r.snapshots[i] for r in runs]
        t = fields[0].time
        for lo, hi in zip(fields, fields[1:]):
            worst = float((lo.values - hi.values).max())
            if worst > 1e-6:
                raise RuntimeError(
                    f"truncation monotonicity violated by {worst:.3e} at t={t}")
        sup = np.maximum.reduce([f.values for f in fields])
        limit.append(Field(u0.grid, sup, t))
        gaps.append(float(np.max(np.abs(fields[-1].values - fields[-2].values))))
        trace.append((t, boundary_trace(limit[-1])))
    trace = np.array(trace) if trace else np.zeros((0, 2))
    tol = default_tol_loss(u0.grid, config.p)
    ext = ExtendedRun(k_schedule=k_schedule, runs=runs, limit_snapshots=limit,
                      convergence_gap=np.array(gaps), boundary_trace=trace,
                      tol_loss=tol, loss_time=None)
    ext.loss_time = boundary_loss(ext, tol)[0]
    return ext


def boundary_loss(ext: ExtendedRun, tol_loss: float):
    """First snapshot time whose wall trace exceeds tol_loss, and the max trace."""
    if len(ext.boundary_trace) == 0:
        return None, 0.0
    t, tr = ext.boundary_trace[:, 0], ext.boundary_trace[:, 1]
    above = tr > tol_loss
    loss_time = float(t[above][0]) if above.any() else None
    return loss_time, float(tr.max())


def classify(u0: Field, horizon: float, config: SolverConfig,
             decay_frac: float = 0.5, k_schedule=None,
             extension_horizon=None) -> Classification:
    """Trichotomy probe: Global / GBU with or without loss / honest Undecided.

    Global demands both survival to the horizon below the gradient cap and
    sup-norm decay below decay_frac of the initial datum - a finite horizon
    cannot distinguish slow decay from incipient blow-up, hence Undecided.
    Loss of boundary conditions develops shortly after the blow-up time, so
    the truncated extension is integrated over a window past T_h rather than
    the whole horizon unless asked otherwise.
    """
    cfg = replace(config, t_end=horizon)
    rec = run(u0, cfg)
    norm0 = u0.max_abs()
    if rec.stop_reason == STOP_HORIZON:
        decayed = rec.final_field.max_abs() <= decay_frac * norm0
        if decayed:
            return Classification(GLOBAL, None, None, rec,
                                  diagnostics={"final_sup": rec.final_field.max_abs(),
                                               "initial_sup": norm0})
        return Classification(UNDECIDED, None, None, rec,
                              diagnostics={"final_sup": rec.final_field.max_abs(),
                                           "initial_sup": norm0,
                                           "reason": "no decay and no cap by horizon"})
    if rec.stop_reason != STOP_GRADIENT_CAP:
        return Classification(UNDECIDED, None, None, rec,
                              diagnostics={"reason": f"stop {rec.stop_reason}"})
    if k_schedule is None:
        k_schedule = default_k_schedule(u0, config.p)
    if extension_horizon is None:
        extension_horizon = min(horizon, rec.T_h + max(2 * rec.T_h, 0.02))
    snaps = ((0.0, rec.T_h / 2)
             + tuple(np.linspace(rec.T_h, extension_horizon, 41)))
    ext_cfg = replace(config, snapshot_times=snaps)
    ext = viscosity_extend(u0, extension_horizon, k_schedule, ext_cfg)
    loss_time, max_trace = boundary_loss(ext, ext.tol_loss)
    post = loss_time is not None and loss_time > rec.T_h
    verdict = GBU_LOSS if post else GBU_NO_LOSS
    return Classification(verdict, rec.T_h, loss_time if post else None, rec, ext,
                          diagnostics={"max_trace": max_trace,
                                       "tol_loss": ext.tol_loss})


def threshold_bisect(phi: Field, horizon: float, rel_tol: float,
                     config: SolverConfig, lambda_init: float = 1.0,
                     k_schedule=None, max_probes: int = 80) -> ThresholdResult:
    """Bracket the amplitude separating global decay from blow-up.

    Expands a bracket by doubling/halving from lambda_init, then bisects on
    the Global / not-Global verdict.  An Undecided probe pauses the search:
    the caller should raise the horizon.
    """
    norm = phi.max_abs()
    if norm <= 0:
        raise ValueError("phi must be nontrivial")
    if np.min(phi.values) < -1e-14:
        raise ValueError("phi must be nonnegative")
    if abs(norm - 1.0) > 1e-9:
        raise ValueError("phi must be normalized to unit sup norm")
    if rel_tol <= 0:
        raise ValueError("rel_tol must be positive")

    classifications = []

    def probe(lam):
        u0 = Field(phi.grid, lam * phi.values, 0.0)
        cls = classify(u0, horizon, config, k_schedule=k_schedule)
        classifications.append((lam, cls))
        if cls.verdict == UNDECIDED:
            raise UndecidedProbeError(lam, cls, classifications)
        return cls.verdict == GLOBAL

    lam = lambda_init
    is_global = probe(lam)
    lo, hi = (lam, None) if is_global else (None, lam)
    for _ in range(max_probes):
        if lo is not None and hi is not None:
            break
        lam = lam * 2 if hi is None else lam / 2
        if probe(lam):
            lo = lam if lo is None else max(lo, lam)
        else:
            hi = lam if hi is None else min(hi, lam)
    if lo is None or hi is None:
        raise RuntimeError("bracket expansion failed: verdict never changed")

    while (hi - lo) / lo > rel_tol and len(classifications) < max_probes:
        mid = 0.5 * (lo + hi)
        if probe(mid):
            lo = mid
        else:
            hi = mid
    return ThresholdResult(lambda_lo=lo, lambda_hi=hi,
                           classifications=sorted(classifications,
                                                  key=lambda c: c[0]))


def order_check(u0: Field, v0: Field, horizon: float,
                config: SolverConfig, k_schedule=None) -> MonitorReport:
    """Ordering of blow-up and loss times for ordered data u0 <= v0.

    The larger datum must blow up strictly earlier and its continuation must
    lose boundary conditions before the smaller datum blows up.
    """
    if np.any(v0.values < u0.values - 1e-14):
        raise ValueError("order_check requires v0 >= u0 nodewise")
    if float(np.max(np.abs(v0.values - u0.values))) <= 1e-14:
        raise ValueError("order_check requires v0 distinct from u0")
    cls_u = classify(u0, horizon, config, k_schedule=k_schedule)
    cls_v = classify(v0, horizon, config, k_schedule=k_schedule)
    for name, cls in (("u0", cls_u), ("v0", cls_v)):
        if cls.verdict in (GLOBAL, UNDECIDED):
            raise ValueError(f"{name} classified {cls.verdict}: "
                             "order_check needs two blow-up data")
    t_u, t_v = cls_u.T_h, cls_v.T_h
    loss_v = cls_v.loss_time
    loss_u = cls_u.loss_time
    passed = (t_v is not None and t_u is not None and t_v < t_u
              and loss_v is not None and loss_v < t_u)
    fitted = {"T_h_u": t_u, "T_h_v": t_v}
    if loss_v is not None:
        fitted["loss_time_v"] = loss_v
    if loss_u is not None:
        fitted["loss_time_u"] = loss_u
    return MonitorReport(name="order_check", passed=bool(passed),
                         fitted_constants=fitted)
