"""Strict flat key-value run configuration.

Format: one ``key = value`` pair per line, ``#`` comments, keys namespaced by
section prefixes (``solver.t_end``, ``u0.amplitude``).  Unknown keys are
fatal: silent typos corrupt experiments.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import Grid, Interval, RadialDisk, Rectangle
from .profiles import constants
from .solver import Field, SolverConfig, auto_gradient_cap

EXPERIMENTS = ("solve", "elliptic", "continue", "threshold", "profile",
               "barrier-check", "sweep")


class ConfigError(ValueError):
    """Invalid or unknown configuration; maps to CLI exit code 2."""


_DOMAIN_KEYS = {"shape", "length", "length_x", "length_y", "radius", "h"}
_U0_KEYS = {"u0.kind", "u0.amplitude", "u0.center", "u0.width"}
_SOLVER_KEYS = {"p", "solver.t_end", "solver.cfl_diffusion",
                "solver.cfl_advection", "solver.gradient_cap",
                "solver.snapshots"}
_COMMON = {"experiment"} | _DOMAIN_KEYS | _U0_KEYS | _SOLVER_KEYS

ALLOWED_KEYS = {
    "solve": _COMMON | {"monitor.eps", "monitor.budget"},
    "elliptic": _COMMON | {"elliptic.forcing", "elliptic.tol"},
    "continue": _COMMON | {"continue.horizon", "continue.k_levels"},
    "threshold": _COMMON | {"threshold.rel_tol", "threshold.horizon",
                            "threshold.lambda_init", "continue.k_levels"},
    "profile": {"experiment", "profile.run_dir", "profile.window_lo",
                "profile.window_hi"},
    "barrier-check": {"experiment", "p", "barrier.p_values", "barrier.k_frac",
                      "barrier.rho", "barrier.tau", "barrier.m"},
    "sweep": _COMMON | {"monitor.eps", "monitor.budget", "sweep.key",
                        "sweep.values", "sweep.experiment", "sweep.workers"},
}

_REQUIRED = {
    "solve": {"shape", "h", "p", "solver.t_end"},
    "elliptic": {"shape", "h", "p"},
    "continue": {"shape", "h", "p", "continue.horizon"},
    "threshold": {"shape", "h", "p", "threshold.horizon"},
    "profile": {"profile.run_dir"},
    "barrier-check": set(),
    "sweep": {"sweep.key", "sweep.values"},
}


def parse_text(text: str) -> dict:
    """key = value lines to a raw string mapping; no validation yet."""
    raw = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, value = (part.strip() for part in stripped.split("=", 1))
        if not key or not value:
            raise ConfigError(f"line {lineno}: empty key or value in {line!r}")
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        raw[key] = value
    return raw


@dataclass
class ParsedConfig:
    experiment: str
    raw: dict

    # -- typed accessors ---------------------------------------------------

    def _float(self, key, default=None):
        if key not in self.raw:
            if default is None:
                raise ConfigError(f"missing required key {key!r}")
            return default
        try:
            return float(self.raw[key])
        except ValueError:
            raise ConfigError(f"key {key!r}: expected a number, "
                              f"got {self.raw[key]!r}") from None

    def _str(self, key, default=None, choices=None):
        value = self.raw.get(key, default)
        if value is None:
            raise ConfigError(f"missing required key {key!r}")
        if choices and value not in choices:
            raise ConfigError(f"key {key!r}: expected one of {sorted(choices)}, "
                              f"got {value!r}")
        return value

    def _float_list(self, key, default=None):
        if key not in self.raw:
            if default is None:
                raise ConfigError(f"missing required key {key!r}")
            return default
        try:
            return tuple(float(tok) for tok in self.raw[key].split(",") if tok.strip())
        except ValueError:
            raise ConfigError(f"key {key!r}: expected comma-separated numbers, "
                              f"got {self.raw[key]!r}") from None

    # -- builders ----------------------------------------------------------

    def domain(self):
        shape = self._str("shape", choices={"interval", "rectangle", "disk"})
        try:
            if shape == "interval":
                return Interval(self._float("length"))
            if shape == "rectangle":
                return Rectangle(self._float("length_x"), self._float("length_y"))
            return RadialDisk(self._float("radius"))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def grid(self):
        try:
            return Grid(self.domain(), self._float("h"))
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def exponent(self):
        p = self._float("p")
        try:
            constants(p)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        return p

    def initial_field(self, grid: Grid) -> Field:
        kind = self._str("u0.kind", default="zero",
                         choices={"zero", "sin", "bump"})
        amp = self._float("u0.amplitude", default=1.0)
        if kind == "zero":
            return Field(grid, np.zeros(grid.shape))
        dom = grid.domain
        if isinstance(dom, Interval):
            x = grid.coords
            base = np.sin(np.pi * x / dom.length)
        elif isinstance(dom, RadialDisk):
            r = grid.coords
            base = np.cos(0.5 * np.pi * r / dom.radius)
        else:
            X, Y = grid.coords
            base = np.sin(np.pi * X / dom.lx) * np.sin(np.pi * Y / dom.ly)
            if kind == "bump":
                center = self._float("u0.center", default=dom.lx / 2)
                width = self._float("u0.width", default=dom.lx / 4)
                base = np.sin(np.pi * Y / dom.ly) * np.exp(-((X - center) / width) ** 2)
        if kind == "bump" and not isinstance(dom, Rectangle):
            raise ConfigError("u0.kind = bump needs a rectangle domain")
        values = amp * base
        for idx in grid.face_slices().values():
            values[idx] = 0.0
        return Field(grid, values)

    def solver_config(self, grid: Grid, u0: Field | None = None) -> SolverConfig:
        p = self.exponent()
        cap_raw = self.raw.get("solver.gradient_cap", "auto")
        if cap_raw == "auto":
            cap = None
            if u0 is not None:
                from .solver import _grad_magnitude, _gradient_raw
                g0 = float(_grad_magnitude(_gradient_raw(grid, u0.values)).max())
                cap = auto_gradient_cap(grid, p, g0)
        else:
            try:
                cap = float(cap_raw)
            except ValueError:
                raise ConfigError("solver.gradient_cap: expected 'auto' or a "
                                  f"number, got {cap_raw!r}") from None
        t_end = self._float("solver.t_end", default=1.0)
        snaps_raw = self.raw.get("solver.snapshots", "auto:25")
        if snaps_raw.startswith("auto:"):
            try:
                n = int(snaps_raw.split(":", 1)[1])
            except ValueError:
                raise ConfigError(f"solver.snapshots: bad count in {snaps_raw!r}") from None
            snaps = tuple(np.linspace(0.0, t_end, n))
        else:
            snaps = self._float_list("solver.snapshots")
        try:
            return SolverConfig(
                p=p, t_end=t_end,
                cfl_diffusion=self._float("solver.cfl_diffusion", default=0.9),
                cfl_advection=self._float("solver.cfl_advection", default=0.9),
                snapshot_times=snaps, gradient_cap=cap,
                elliptic_tol=self._float("elliptic.tol", default=1e-10),
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from None


def parse_config(text: str, experiment: str | None = None) -> ParsedConfig:
    """Parse and strictly validate a config document for one experiment."""
    raw = parse_text(text)
    named = raw.get("experiment")
    if named is not None and named not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {named!r}; "
                          f"expected one of {EXPERIMENTS}")
    if experiment is None:
        experiment = named
    if experiment is None:
        raise ConfigError("no experiment selected (pass one or set "
                          "'experiment = <name>' in the config)")
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {experiment!r}; "
                          f"expected one of {EXPERIMENTS}")
    if named is not None and named != experiment:
        raise ConfigError(f"config names experiment {named!r} but "
                          f"{experiment!r} was requested")
    allowed = ALLOWED_KEYS[experiment]
    unknown = sorted(set(raw) - allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) for experiment {experiment!r}: "
                          + ", ".join(repr(k) for k in unknown))
    missing = sorted(_REQUIRED[experiment] - set(raw))
    if missing:
        raise ConfigError(f"missing required key(s) for {experiment!r}: "
                          + ", ".join(repr(k) for k in missing))
    cfg = ParsedConfig(experiment=experiment, raw=raw)
    if "p" in raw:
        cfg.exponent()
    if "shape" in raw:
        cfg.domain()
    return cfg
