"""Monitors and extractors confronting numerical runs with the wall asymptotics.

Every monitor reports fitted constants rather than asserting unquantified
ones: the sharp leading coefficients ((1+eps) d_p, -1, beta) are the only
universal numbers, and those are what the tests pin down.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.optimize import minimize_scalar

from .geometry import Rectangle
from .profiles import Constants, profile
from .solver import (Field, RunRecord, STOP_GRADIENT_CAP, _d1_axis, _d2_axis,
                     _gradient_raw, _grad_magnitude, _interp)


@dataclass
class ProfileFit:
    """Power-law fit g ~ amplitude * s^(-exponent) over a sample window."""

    exponent: float
    amplitude: float
    residual: float          # RMS of log residuals
    window: tuple
    n_samples: int
    t_star: float | None = None   # only for blow-up time fits


@dataclass
class MonitorReport:
    name: str
    passed: bool
    worst_node: tuple | None = None    # (coords..., value) of extremal violation
    fitted_constants: dict = dc_field(default_factory=dict)
    flags: tuple = ()

    def to_dict(self):
        return {
            "name": self.name,
            "passed": bool(self.passed),
            "worst_node": None if self.worst_node is None
            else [float(v) for v in self.worst_node],
            "fitted_constants": {k: float(v) for k, v in self.fitted_constants.items()},
            "flags": list(self.flags),
        }


def _node_coords(grid, flat_index):
    if len(grid.shape) == 1:
        return (float(grid.axes[0][flat_index]),)
    i, j = np.unravel_index(flat_index, grid.shape)
    return (float(grid.axes[0][i]), float(grid.axes[1][j]))


def _worst(grid, excess, mask):
    """Location and value of the largest masked entry (None if mask empty)."""
    if not mask.any():
        return None
    vals = np.where(mask, excess, -np.inf)
    idx = int(np.argmax(vals))
    return _node_coords(grid, idx) + (float(vals.flat[idx]),)


# ---------------------------------------------------------------------------
# Directional derivatives (grid-aligned stencils contracted with exact normals)
# ---------------------------------------------------------------------------

def directional_derivatives(f: Field):
    """u_nu, u_nunu and, in 2D, u_tau, u_nutau, u_tautau at every node.

    Formed by contracting central-difference gradient/Hessian components with
    the exact normal/tangent fields from the geometry, not by rotating the grid.
    """
    grid = f.grid
    u = f.values
    h = grid.h
    comps = _gradient_raw(grid, u)
    if len(grid.shape) == 1:
        nu = grid.normals
        uxx = _d2_axis(u, h, 0)
        return {"u_nu": comps[0] * nu, "u_nunu": uxx}
    gx, gy = comps
    uxx = _d2_axis(u, h, 0)
    uyy = _d2_axis(u, h, 1)
    uxy = _d1_axis(gx, h, 1)
    nu = grid.normals
    nx, ny = nu[..., 0], nu[..., 1]
    tx, ty = -ny, nx
    return {
        "u_nu": gx * nx + gy * ny,
        "u_tau": gx * tx + gy * ty,
        "u_nunu": nx * nx * uxx + 2 * nx * ny * uxy + ny * ny * uyy,
        "u_nutau": nx * tx * uxx + (nx * ty + ny * tx) * uxy + ny * ty * uyy,
        "u_tautau": tx * tx * uxx + 2 * tx * ty * uxy + ty * ty * uyy,
    }


# ---------------------------------------------------------------------------
# Monitors
# ---------------------------------------------------------------------------

def bernstein_monitor(f: Field, eps: float, c: Constants,
                      c_budget: float = np.inf, min_delta: float = 0.0):
    """Fitted constant of the sharp wall gradient bound (1+eps) d_p delta^(-beta).

    Also fits the integrated bound for u itself.  Nodes with ambiguous
    projection are excluded; min_delta can additionally exclude the
    stencil-polluted layer next to the wall.
    """
    grid = f.grid
    gmag = _grad_magnitude(_gradient_raw(grid, f.values))
    mask = grid.interior_mask & ~grid.ambiguous_mask & (grid.delta >= min_delta)
    delta = grid.delta
    with np.errstate(divide="ignore", invalid="ignore"):
        excess = gmag - (1 + eps) * c.d_p * delta ** (-c.beta)
        excess_int = (f.values - (1 + eps) * c.c_p * delta ** (1 - c.beta)) / delta
    c_star = float(max(0.0, excess[mask].max())) if mask.any() else 0.0
    c_int = float(max(0.0, excess_int[mask].max())) if mask.any() else 0.0
    return MonitorReport(
        name="bernstein",
        passed=c_star <= c_budget,
        worst_node=_worst(grid, excess, mask),
        fitted_constants={"C": c_star, "C_integrated": c_int,
                          "eps": eps, "budget": c_budget},
    )


def fit_profile(samples) -> ProfileFit:
    """Least-squares power law through (s, g) samples in log-log coordinates."""
    arr = np.asarray(samples, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] < 5:
        raise ValueError("need at least 5 (s, g) samples")
    s, g = arr[:, 0], arr[:, 1]
    if np.any(s <= 0) or np.any(g <= 0):
        raise ValueError("power-law fit requires positive samples")
    ls, lg = np.log(s), np.log(g)
    slope, intercept = np.polyfit(ls, lg, 1)
    resid = lg - (slope * ls + intercept)
    return ProfileFit(exponent=float(-slope), amplitude=float(np.exp(intercept)),
                      residual=float(np.sqrt(np.mean(resid ** 2))),
                      window=(float(s.min()), float(s.max())),
                      n_samples=len(s))


def ode_dominance(f: Field, prev: Field, c: Constants,
                  activity_threshold: float = 0.5, tol: float = 0.25):
    """Distribution of u_nunu / u_nu^p + 1 over the singular region.

    Active nodes are those in the unique-projection region where
    delta^beta * u_nu >= activity_threshold * d_p; the wall ODE predicts the
    ratio -1 there.  Median is the pass statistic, max is reported alongside.
    """
    grid = f.grid
    if grid is not prev.grid and grid.shape != prev.grid.shape:
        raise ValueError("fields live on different grids")
    if not f.time > prev.time:
        raise ValueError("prev must be an earlier snapshot")
    d = directional_derivatives(f)
    u_nu, u_nunu = d["u_nu"], d["u_nunu"]
    active = grid.unique_mask & (grid.delta ** c.beta * u_nu
                                 >= activity_threshold * c.d_p)
    if not active.any():
        return MonitorReport(name="ode_dominance", passed=False, flags=("inactive",))
    ratio = u_nunu[active] / u_nu[active] ** c.p
    dev = np.abs(ratio + 1.0)
    u_t = (f.values - prev.values) / (f.time - prev.time)
    dev_full = np.full(grid.shape, -np.inf)
    dev_full[active] = dev
    return MonitorReport(
        name="ode_dominance",
        passed=bool(np.median(dev) <= tol),
        worst_node=_worst(grid, dev_full, active),
        fitted_constants={"median": float(np.median(dev)), "max": float(dev.max()),
                          "n_active": int(active.sum()),
                          "ut_max_active": float(np.max(np.abs(u_t[active])))},
    )


def tangential_monitor(f: Field, eps: float, c: Constants):
    """Fitted constant of |u_tautau| + |u_nutau| + |u_tau|^p <= eps |u_nu|^p + C."""
    grid = f.grid
    if not isinstance(grid.domain, Rectangle):
        raise ValueError("tangential monitor is vacuous on one-dimensional domains")
    d = directional_derivatives(f)
    combo = (np.abs(d["u_tautau"]) + np.abs(d["u_nutau"])
             + np.abs(d["u_tau"]) ** c.p - eps * np.abs(d["u_nu"]) ** c.p)
    mask = grid.unique_mask
    c_star = float(max(0.0, combo[mask].max())) if mask.any() else 0.0
    return MonitorReport(
        name="tangential",
        passed=True,
        worst_node=_worst(grid, combo, mask),
        fitted_constants={"C_eps": c_star, "eps": eps},
    )


def ut_monitor(record: RunRecord, window):
    """Largest sampled |u_t| inside a time window; passes iff finite."""
    t_a, t_b = window
    if not t_a < t_b:
        raise ValueError(f"empty window {window}")
    series = record.ut_max_series
    sel = (series[:, 0] >= t_a) & (series[:, 0] <= t_b) if len(series) else np.array([], bool)
    if not sel.any():
        raise ValueError(f"no u_t samples inside window {window}")
    vals = series[sel]
    i = int(np.argmax(vals[:, 1]))
    m_star = float(vals[i, 1])
    return MonitorReport(
        name="ut_bound", passed=bool(np.isfinite(m_star)),
        fitted_constants={"M": m_star, "argmax_t": float(vals[i, 0])},
    )


def normal_lowerbound(record: RunRecord, margin: float = 0.05):
    """min u_nu over snapshots and the unique-projection region.

    The bound is fitted from the first snapshot: the normal derivative can
    only be badly negative if the initial datum forces it.
    """
    if record.config.boundary_values:
        if any(abs(v) > 0 for v in record.config.boundary_values.values()):
            raise ValueError("monitor requires zero boundary data")
    if not record.snapshots:
        raise ValueError("run has no snapshots")
    mins = []
    for snap in record.snapshots:
        d = directional_derivatives(snap)
        mins.append(float(d["u_nu"][snap.grid.unique_mask].min()))
    v0 = mins[0]
    v_all = min(mins)
    return MonitorReport(
        name="normal_lowerbound",
        passed=v_all >= v0 - margin,
        fitted_constants={"min": v_all, "min_first_snapshot": v0, "margin": margin},
    )


def tangential_anisotropy(f: Field, a, c: Constants):
    """Samples of r^beta * u_nu at boundary nodes at face distance r from a.

    Monotone growth of these values as r -> 0 is the resolvable surrogate for
    the tangential direction being more singular than the normal one.
    """
    grid = f.grid
    if not isinstance(grid.domain, Rectangle):
        raise ValueError("anisotropy sampling needs a two-dimensional field")
    a = np.asarray(a, dtype=float)
    if grid.domain.distance(a) > 1e-12:
        raise ValueError(f"point {a} is not on the boundary")
    d = directional_derivatives(f)
    u_nu = d["u_nu"]
    face = grid.domain.project(a + 1e-9 * _inward_guess(grid.domain, a)).face
    idx = grid.face_slices()[face]
    axis = 1 if face in (0, 1) else 0     # coordinate running along the face
    coords = grid.axes[axis]
    vals = u_nu[idx]
    along = a[axis]
    r = np.abs(coords - along)
    keep = (r > 1e-12) & (coords > 0) & (coords < coords[-1])   # drop corners and a
    r, vals = r[keep], vals[keep]
    order = np.argsort(r)
    r, vals = r[order], vals[order]
    return list(zip(r.tolist(), (r ** c.beta * vals).tolist()))


def _inward_guess(domain, a):
    center = np.array([domain.lx / 2, domain.ly / 2])
    v = center - a
    return v / max(np.linalg.norm(v), 1e-30)


@dataclass
class RescaleResult:
    alpha: float
    distance: float
    degenerate: bool = False


def rescale_compare(f: Field, z, lam: float, c: Constants,
                    window=(0.25, 2.0), n_samples=64,
                    alpha_range=(1e-3, 1e3)) -> RescaleResult:
    """Best match of the zoomed field against the exact wall-profile family.

    Builds v(y) = lam^(beta-1) u(z + lam y nu_z) on the window by linear
    interpolation and minimizes the sup distance to profile(alpha, y) over a
    log grid of alpha refined by bounded scalar minimization.  A minimizer
    pinned at the upper edge of the alpha range means the field is flatter
    than any member of the family (e.g. u = 0) and is flagged degenerate.
    """
    grid = f.grid
    domain = grid.domain
    eta, R = window
    if not 0 < eta < R:
        raise ValueError(f"bad window {window}")
    if lam <= 0:
        raise ValueError("lam must be positive")
    if lam * R >= domain.delta0:
        raise ValueError("rescale segment leaves the unique-projection region")
    if len(grid.shape) == 1:
        proj = domain.project(float(np.atleast_1d(z)[0]))
        if proj.distance > 1e-12:
            raise ValueError(f"{z} is not a boundary point")
        z_pt, nu = proj.point, proj.normal
        ys = np.linspace(eta, R, n_samples)
        pts = z_pt + lam * ys * nu
    else:
        z_pt = np.asarray(z, dtype=float)
        probe = domain.project(z_pt + 1e-9 * _inward_guess(domain, z_pt))
        nu = probe.normal
        ys = np.linspace(eta, R, n_samples)
        pts = z_pt[None, :] + (lam * ys)[:, None] * nu[None, :]
    v = lam ** (c.beta - 1.0) * f.sample(pts)

    def dist_alpha(alpha):
        return float(np.max(np.abs(v - profile(c, alpha, ys))))

    def dist(log_alpha):
        return dist_alpha(np.exp(log_alpha))

    la_lo, la_hi = np.log(alpha_range[0]), np.log(alpha_range[1])
    las = np.linspace(la_lo, la_hi, 121)
    dists = np.array([dist(la) for la in las])
    i = int(np.argmin(dists))
    lo = las[max(0, i - 1)]
    hi = las[min(len(las) - 1, i + 1)]
    res = minimize_scalar(dist, bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-10})
    alpha = float(np.exp(res.x))
    best = float(res.fun)
    degenerate = i >= len(las) - 2
    d0 = dist_alpha(0.0)   # the unshifted member sits below the log grid
    if d0 < best:
        alpha, best, degenerate = 0.0, d0, False
    return RescaleResult(alpha=alpha, distance=best, degenerate=degenerate)


def normal_profile_samples(f: Field, a, window, c: Constants | None = None):
    """(s, u_nu(a + s nu_a)) pairs at node-spaced distances inside the window."""
    grid = f.grid
    domain = grid.domain
    s_lo, s_hi = window
    h = grid.h
    s_vals = np.arange(np.ceil(s_lo / h - 1e-9), np.floor(s_hi / h + 1e-9) + 1) * h
    s_vals = s_vals[(s_vals >= s_lo - 1e-12) & (s_vals <= s_hi + 1e-12) & (s_vals > 0)]
    if len(s_vals) == 0:
        raise ValueError(f"window {window} contains no nodes at spacing {h}")
    comps = _gradient_raw(grid, f.values)
    if len(grid.shape) == 1:
        a_val = float(np.atleast_1d(a)[0])
        face = [fc for fc, (pt, _) in domain.faces.items() if abs(pt - a_val) < 1e-12]
        if not face:
            raise ValueError(f"{a} is not a boundary point")
        _, nu = domain.faces[face[0]]
        pts = a_val + s_vals * nu
        g = _interp(grid, comps[0], pts) * nu
    else:
        a_pt = np.asarray(a, dtype=float)
        nu = domain.project(a_pt + 1e-9 * _inward_guess(domain, a_pt)).normal
        pts = a_pt[None, :] + s_vals[:, None] * nu[None, :]
        g = (_interp(grid, comps[0], pts) * nu[0]
             + _interp(grid, comps[1], pts) * nu[1])
    return np.column_stack([s_vals, g])


def gbu_rate_fit(record: RunRecord, c: Constants,
                 growth_factor: float = 3.0, n_candidates: int = 200) -> ProfileFit:
    """Joint fit of max-slope growth to A (T* - t)^(-b) by nested search.

    Candidate blow-up times T* beyond the recorded stop are scanned on a log
    grid; each candidate reduces to a log-log least-squares line, and the
    residual-minimizing candidate is refined by bounded minimization.
    """
    if record.stop_reason != STOP_GRADIENT_CAP:
        raise ValueError("rate fit needs a run stopped at the gradient cap")
    series = record.grad_max_series
    t, g = series[:, 0], series[:, 1]
    sel = g >= growth_factor * g[0]
    if sel.sum() < 10:
        raise ValueError("insufficient dynamic range: fewer than 10 samples "
                         f"with growth factor {growth_factor}")
    ts, gs = t[sel], g[sel]
    span = ts[-1] - ts[0]
    if span <= 0:
        raise ValueError("degenerate time span in the selected samples")
    lg = np.log(gs)

    def fit_at(t_star):
        x = np.log(t_star - ts)
        slope, intercept = np.polyfit(x, lg, 1)
        resid = lg - (slope * x + intercept)
        return float(np.sqrt(np.mean(resid ** 2))), -slope, np.exp(intercept)

    offsets = span * np.logspace(-8, 1, n_candidates)
    best = None
    for off in offsets:
        r, b, A = fit_at(ts[-1] + off)
        if best is None or r < best[0]:
            best = (r, b, A, off)
    i = int(np.where(offsets == best[3])[0][0])
    lo = offsets[max(0, i - 1)]
    hi = offsets[min(len(offsets) - 1, i + 1)]
    res = minimize_scalar(lambda o: fit_at(ts[-1] + o)[0], bounds=(lo, hi),
                          method="bounded", options={"xatol": span * 1e-10})
    r, b, A = fit_at(ts[-1] + res.x)
    return ProfileFit(exponent=float(b), amplitude=float(A), residual=float(r),
                      window=(float(ts[0]), float(ts[-1])), n_samples=int(sel.sum()),
                      t_star=float(ts[-1] + res.x))
