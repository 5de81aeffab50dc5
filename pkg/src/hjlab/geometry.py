"""Domains with closed-form boundary geometry and uniform node lattices.

Only shapes whose distance function, boundary projection and inward normal
have exact closed forms are supported: an interval, an axis-aligned
rectangle, and a disk reduced to its radial coordinate.  Exact geometry
keeps discretization error confined to the PDE scheme.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

# Rectangle faces, in tie-break order (smaller axis index wins).
FACE_X0, FACE_X1, FACE_Y0, FACE_Y1 = 0, 1, 2, 3

_TIE_TOL = 1e-12


@dataclass(frozen=True)
class Projection:
    """Boundary projection of an interior point: x = point + distance * normal."""

    point: object
    normal: object
    distance: float
    face: int
    ambiguous: bool = False


def _check_positive_length(name, value):
    if not (np.isfinite(value) and value > 0):
        raise ValueError(f"{name} must be positive and finite, got {value}")


@dataclass(frozen=True)
class Interval:
    """The segment [0, length]."""

    length: float

    def __post_init__(self):
        _check_positive_length("length", self.length)

    @property
    def dim(self):
        return 1

    @property
    def delta0(self):
        """Width of the unique-projection neighborhood of the boundary."""
        return self.length / 2

    @property
    def faces(self):
        # face id -> (boundary coordinate, inward normal)
        return {FACE_X0: (0.0, 1.0), FACE_X1: (self.length, -1.0)}

    def contains(self, x, tol=1e-12):
        return -tol <= x <= self.length + tol

    def distance(self, x):
        if not self.contains(x):
            raise ValueError(f"point {x} outside interval [0, {self.length}]")
        return min(x, self.length - x)

    def project(self, x):
        if not self.contains(x):
            raise ValueError(f"point {x} outside interval [0, {self.length}]")
        d_left = x
        d_right = self.length - x
        ambiguous = abs(d_left - d_right) <= _TIE_TOL
        if d_left <= d_right:
            return Projection(0.0, 1.0, d_left, FACE_X0, ambiguous)
        return Projection(self.length, -1.0, d_right, FACE_X1, ambiguous)

    def normal_ray(self, a, s):
        """Point at distance s from the boundary point a along the inward normal."""
        face = _match_face(self.faces, a, lambda b, pt: abs(b - pt))
        if not 0 <= s <= self.length:
            raise ValueError(f"ray length {s} leaves the interval")
        origin, nu = self.faces[face]
        return origin + s * nu


@dataclass(frozen=True)
class Rectangle:
    """The axis-aligned box [0, lx] x [0, ly]."""

    lx: float
    ly: float

    def __post_init__(self):
        _check_positive_length("lx", self.lx)
        _check_positive_length("ly", self.ly)

    @property
    def dim(self):
        return 2

    @property
    def delta0(self):
        return min(self.lx, self.ly) / 2

    @property
    def faces(self):
        return {
            FACE_X0: np.array([1.0, 0.0]),
            FACE_X1: np.array([-1.0, 0.0]),
            FACE_Y0: np.array([0.0, 1.0]),
            FACE_Y1: np.array([0.0, -1.0]),
        }

    def contains(self, x, tol=1e-12):
        x = np.asarray(x, dtype=float)
        return (-tol <= x[0] <= self.lx + tol) and (-tol <= x[1] <= self.ly + tol)

    def _face_distances(self, x):
        return (x[0], self.lx - x[0], x[1], self.ly - x[1])

    def distance(self, x):
        x = np.asarray(x, dtype=float)
        if not self.contains(x):
            raise ValueError(f"point {x} outside rectangle [0,{self.lx}]x[0,{self.ly}]")
        return min(self._face_distances(x))

    def project(self, x):
        x = np.asarray(x, dtype=float)
        if not self.contains(x):
            raise ValueError(f"point {x} outside rectangle [0,{self.lx}]x[0,{self.ly}]")
        dists = self._face_distances(x)
        dmin = min(dists)
        winners = [f for f in range(4) if dists[f] - dmin <= _TIE_TOL]
        face = winners[0]
        nu = self.faces[face]
        point = x - dmin * nu
        return Projection(point, nu, dmin, face, ambiguous=len(winners) > 1)

    def normal_ray(self, a, s):
        a = np.asarray(a, dtype=float)
        face = _match_face(self.faces, a, lambda f, pt: _rect_face_gap(self, f, pt))
        nu = self.faces[face]
        limit = self.lx if face in (FACE_X0, FACE_X1) else self.ly
        if not 0 <= s <= limit:
            raise ValueError(f"ray length {s} leaves the rectangle")
        return a + s * nu


def _rect_face_gap(rect, face, pt):
    gaps = {
        FACE_X0: abs(pt[0]),
        FACE_X1: abs(rect.lx - pt[0]),
        FACE_Y0: abs(pt[1]),
        FACE_Y1: abs(rect.ly - pt[1]),
    }
    return gaps[face]


def _match_face(faces, a, gap):
    for face in faces:
        if gap(face, a) <= 1e-12:
            return face
    raise ValueError(f"point {a} is not on the boundary")


@dataclass(frozen=True)
class RadialDisk:
    """A disk of given radius, reduced to radially symmetric data on r in [0, radius]."""

    radius: float

    def __post_init__(self):
        _check_positive_length("radius", self.radius)

    @property
    def dim(self):
        return 1

    @property
    def delta0(self):
        return self.radius

    @property
    def faces(self):
        return {FACE_X0: (self.radius, -1.0)}

    def contains(self, r, tol=1e-12):
        return -tol <= r <= self.radius + tol

    def distance(self, r):
        if not self.contains(r):
            raise ValueError(f"radius {r} outside disk of radius {self.radius}")
        return self.radius - r

    def project(self, r):
        if not self.contains(r):
            raise ValueError(f"radius {r} outside disk of radius {self.radius}")
        # Center is equidistant from the whole boundary circle.
        return Projection(self.radius, -1.0, self.radius - r, FACE_X0,
                          ambiguous=abs(r) <= _TIE_TOL)

    def normal_ray(self, a, s):
        if abs(a - self.radius) > 1e-12:
            raise ValueError(f"point {a} is not on the boundary circle")
        if not 0 <= s <= self.radius:
            raise ValueError(f"ray length {s} leaves the disk")
        return self.radius - s


Domain = Interval | Rectangle | RadialDisk


def _snap_spacing(h, lengths, max_search=100_000):
    """Largest h' <= h such that every axis length is an integer multiple of h'."""
    if not (np.isfinite(h) and h > 0):
        raise ValueError(f"grid spacing must be positive, got {h}")
    n0 = max(1, int(np.ceil(lengths[0] / h - 1e-12)))
    for n in range(n0, n0 + max_search):
        h2 = lengths[0] / n
        counts = [n]
        ok = True
        for ell in lengths[1:]:
            m = ell / h2
            m_round = round(m)
            if m_round < 1 or abs(m - m_round) > 1e-9 * max(1, m_round):
                ok = False
                break
            counts.append(m_round)
        if ok:
            return h2, tuple(counts)
    raise ValueError(f"no common spacing <= {h} divides axis lengths {lengths}")


class Grid:
    """Uniform node lattice over the closed domain, boundary nodes included.

    The requested spacing is snapped downward so that every axis length is an
    integer multiple of the stored ``h``.
    """

    def __init__(self, domain: Domain, h: float):
        self.domain = domain
        if isinstance(domain, Interval):
            lengths = (domain.length,)
        elif isinstance(domain, Rectangle):
            lengths = (domain.lx, domain.ly)
        elif isinstance(domain, RadialDisk):
            lengths = (domain.radius,)
        else:
            raise TypeError(f"unsupported domain {domain!r}")
        self.h, self.cells = _snap_spacing(h, lengths)
        self.shape = tuple(n + 1 for n in self.cells)
        self.axes = tuple(np.linspace(0.0, ell, n + 1)
                          for ell, n in zip(lengths, self.cells))

    @property
    def dim(self):
        return self.domain.dim

    @property
    def ndim_axes(self):
        return len(self.shape)

    @cached_property
    def coords(self):
        """Node coordinates; 1D axis array, or meshgrid pair (ij indexing) in 2D."""
        if len(self.axes) == 1:
            return self.axes[0]
        return np.meshgrid(*self.axes, indexing="ij")

    @cached_property
    def delta(self):
        """Distance to the boundary at every node."""
        d = self.domain
        if isinstance(d, Interval):
            x = self.axes[0]
            return np.minimum(x, d.length - x)
        if isinstance(d, RadialDisk):
            return d.radius - self.axes[0]
        X, Y = self.coords
        return np.minimum.reduce([X, d.lx - X, Y, d.ly - Y])

    @cached_property
    def boundary_mask(self):
        m = np.zeros(self.shape, dtype=bool)
        if isinstance(self.domain, RadialDisk):
            m[-1] = True
            return m
        for ax in range(len(self.shape)):
            idx_lo = [slice(None)] * len(self.shape)
            idx_lo[ax] = 0
            m[tuple(idx_lo)] = True
            idx_hi = [slice(None)] * len(self.shape)
            idx_hi[ax] = -1
            m[tuple(idx_hi)] = True
        return m

    @cached_property
    def interior_mask(self):
        return ~self.boundary_mask

    @cached_property
    def boundary_adjacent_mask(self):
        """Interior nodes one spacing away from the boundary."""
        return self.interior_mask & (self.delta <= self.h * (1 + 1e-9))

    @cached_property
    def face_id(self):
        """Face of each boundary node (-1 at interior; corners take the smaller id)."""
        f = np.full(self.shape, -1, dtype=int)
        if isinstance(self.domain, Interval):
            f[0] = FACE_X0
            f[-1] = FACE_X1
        elif isinstance(self.domain, RadialDisk):
            f[-1] = FACE_X0
        else:
            f[:, -1] = FACE_Y1
            f[:, 0] = FACE_Y0
            f[-1, :] = FACE_X1
            f[0, :] = FACE_X0
        return f

    @cached_property
    def normals(self):
        """Inward normal of the nearest face at every node (2D: shape + (2,))."""
        d = self.domain
        if isinstance(d, Interval):
            x = self.axes[0]
            return np.where(x <= d.length / 2, 1.0, -1.0)
        if isinstance(d, RadialDisk):
            return np.full(self.shape, -1.0)
        X, Y = self.coords
        dists = np.stack([X, d.lx - X, Y, d.ly - Y])
        face = np.argmin(dists, axis=0)
        table = np.array([d.faces[f] for f in range(4)])
        return table[face]

    @cached_property
    def ambiguous_mask(self):
        """Nodes whose boundary projection is not unique (tie-break applied)."""
        d = self.domain
        if isinstance(d, Interval):
            return np.abs(self.axes[0] - d.length / 2) <= _TIE_TOL
        if isinstance(d, RadialDisk):
            return self.axes[0] <= _TIE_TOL
        X, Y = self.coords
        dists = np.stack([X, d.lx - X, Y, d.ly - Y])
        dmin = dists.min(axis=0)
        ties = (dists - dmin <= _TIE_TOL).sum(axis=0)
        return ties > 1

    @cached_property
    def unique_mask(self):
        """Interior nodes inside the unique-projection region, flagged ones excluded."""
        return (self.interior_mask & ~self.ambiguous_mask
                & (self.delta < self.domain.delta0 - _TIE_TOL))

    def face_slices(self):
        """Mapping face id -> index tuple selecting that face's boundary nodes."""
        if isinstance(self.domain, Interval):
            return {FACE_X0: (0,), FACE_X1: (-1,)}
        if isinstance(self.domain, RadialDisk):
            return {FACE_X0: (-1,)}
        return {
            FACE_X0: (0, slice(None)),
            FACE_X1: (-1, slice(None)),
            FACE_Y0: (slice(None), 0),
            FACE_Y1: (slice(None), -1),
        }

    def __repr__(self):
        return f"Grid({self.domain!r}, h={self.h:.6g}, shape={self.shape})"
