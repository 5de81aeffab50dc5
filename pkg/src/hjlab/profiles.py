"""Closed-form boundary-layer profiles for u_t = Laplace(u) + |grad u|^p, p > 2.

The one-dimensional steady problem -w'' = |w'|^p with zero wall value has the
exact family  w(s) = c_p ((alpha + s)^(1-beta) - alpha^(1-beta)),  beta = 1/(p-1).
Every numerical result in this package is tested against these formulas.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class SingularityError(ValueError):
    """A closed-form profile was evaluated at or past its singular point."""


@dataclass(frozen=True)
class Constants:
    """Derived constants of the profile family for one exponent p."""

    p: float
    beta: float
    c_p: float
    d_p: float


def constants(p: float) -> Constants:
    """Profile constants for exponent p; rejects p <= 2 (superquadratic only)."""
    if not (np.isfinite(p) and p > 2):
        raise ValueError(f"exponent must satisfy p > 2, got {p}")
    beta = 1.0 / (p - 1.0)
    c_p = (p - 1.0) / (p - 2.0) * (p - 1.0) ** (-beta)
    d_p = beta ** beta
    return Constants(p=float(p), beta=beta, c_p=c_p, d_p=d_p)


def profile(c: Constants, alpha, s):
    """Shifted wall profile c_p((alpha+s)^(1-beta) - alpha^(1-beta)); zero at s=0."""
    alpha = np.asarray(alpha, dtype=float)
    s = np.asarray(s, dtype=float)
    if np.any(alpha < 0) or np.any(s < 0):
        raise ValueError("profile requires alpha >= 0 and s >= 0")
    e = 1.0 - c.beta
    out = c.c_p * ((alpha + s) ** e - alpha ** e)
    return out if out.ndim else float(out)


def profile_slope(c: Constants, alpha, s):
    """Profile derivative d_p(alpha+s)^(-beta); singular where alpha + s = 0."""
    alpha = np.asarray(alpha, dtype=float)
    s = np.asarray(s, dtype=float)
    if np.any(alpha < 0):
        raise ValueError("profile_slope requires alpha >= 0")
    total = alpha + s
    if np.any(total <= 0):
        raise SingularityError("slope is singular at alpha + s = 0")
    out = c.d_p * total ** (-c.beta)
    return out if out.ndim else float(out)


def ode_profile(c: Constants, g1, y):
    """Exact slope of -w'' = |w'|^p with w'(1) = g1 > 0.

    Returns [g1^(1-p) + (p-1)(y-1)]^(-beta).  For y < 1 the bracket can hit
    zero: the backward solution ceases to exist there and a SingularityError
    is raised.
    """
    g1 = np.asarray(g1, dtype=float)
    y = np.asarray(y, dtype=float)
    if np.any(g1 <= 0):
        raise ValueError("ode_profile requires g1 > 0")
    bracket = g1 ** (1.0 - c.p) + (c.p - 1.0) * (y - 1.0)
    if np.any(bracket <= 0):
        raise SingularityError("slope ODE blows up backward: bracket <= 0")
    out = bracket ** (-c.beta)
    return out if out.ndim else float(out)


def spacetime_bounds(c: Constants, g_b, delta, eps):
    """Two-sided envelope for the slope at distance delta from a wall slope g_b.

    lower = [g_b^(1-p) + (1+eps)(p-1) delta]^(-beta), upper with (1-eps).
    """
    g_b = np.asarray(g_b, dtype=float)
    delta = np.asarray(delta, dtype=float)
    if np.any(g_b <= 0):
        raise ValueError("spacetime_bounds requires g_b > 0")
    if np.any(delta < 0):
        raise ValueError("spacetime_bounds requires delta >= 0")
    if not 0 <= eps < 1:
        raise ValueError(f"eps must lie in [0, 1), got {eps}")
    base = g_b ** (1.0 - c.p)
    lower = (base + (1 + eps) * (c.p - 1) * delta) ** (-c.beta)
    upper = (base + (1 - eps) * (c.p - 1) * delta) ** (-c.beta)
    if lower.ndim:
        return lower, upper
    return float(lower), float(upper)


def ode_residual(c: Constants, fn, s, h_fd=1e-4):
    """fn''(s) + |fn'(s)|^p via 5-point central differences.

    Vanishes (up to O(h_fd^2) stencil error) exactly when fn solves the
    steady wall ODE.  Rejects stencils that touch a singularity.
    """
    offsets = np.array([-2.0, -1.0, 0.0, 1.0, 2.0]) * h_fd
    try:
        vals = np.array([fn(s + o) for o in offsets], dtype=float)
    except (ValueError, ZeroDivisionError, FloatingPointError) as exc:
        raise ValueError(f"stencil at s={s} touches a singular point: {exc}") from exc
    if not np.all(np.isfinite(vals)):
        raise ValueError(f"stencil at s={s} produced non-finite values")
    d1 = (-vals[4] + 8 * vals[3] - 8 * vals[1] + vals[0]) / (12 * h_fd)
    d2 = (-vals[4] + 16 * vals[3] - 30 * vals[2] + 16 * vals[1] - vals[0]) / (12 * h_fd ** 2)
    return d2 + abs(d1) ** c.p
