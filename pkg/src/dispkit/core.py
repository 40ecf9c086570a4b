"""Geometry primitives: point sets, axis-parallel boxes and periodic boxes.

Boxes use half-open intervals ``[lower, upper)`` per coordinate. A left face
may additionally be flagged *open*, which turns the interval into
``(lower, upper)``. An open face sitting on a point coordinate stands for the
limit of half-open boxes whose left face decreases to that coordinate, so the
supremum in the dispersion definition becomes a maximum over finitely many
candidates.

Periodic boxes live on the torus ``[0, 1)^d``. Along each axis the box is the
arc starting at ``anchor`` with length ``side``; a point ``p`` belongs to the
arc iff ``t = (p - anchor) mod 1`` satisfies ``0 <= t < side`` (closed left)
or ``0 < t < side`` (open left).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

#: Slack used only where derived arithmetic (powers of eps, lattice steps)
#: meets geometry. Face/point comparisons are exact.
TOL = 1e-12


class DimensionError(ValueError):
    """Raised when a point and a box (or net) disagree on dimension."""


def _as_floats(values, name):
    out = tuple(float(v) for v in values)
    if any(math.isnan(v) for v in out):
        raise ValueError(f"{name} contains NaN")
    return out


def ordered_product(values) -> float:
    """Product of ``values`` multiplied left to right.

    All volumes in the package go through this (or its vectorized twin
    :func:`ordered_product_rows`) so that equal boxes always get bit-identical
    volumes regardless of which code path built them.
    """
    acc = 1.0
    for v in values:
        acc *= float(v)
    return acc


def ordered_product_rows(sides: np.ndarray) -> np.ndarray:
    sides = np.asarray(sides, dtype=float)
    acc = np.ones(sides.shape[0])
    for j in range(sides.shape[1]):
        acc = acc * sides[:, j]
    return acc


@dataclass(frozen=True)
class PointSet:
    """``n`` points in ``[0, 1]^d`` stored as a read-only ``(n, d)`` array."""

    d: int
    points: np.ndarray = field(repr=False)

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise ValueError(f"dimension must be an integer >= 1, got {self.d!r}")
        pts = np.array(self.points, dtype=float, copy=True)
        if pts.size == 0:
            pts = pts.reshape(0, self.d)
        if pts.ndim != 2 or pts.shape[1] != self.d:
            raise DimensionError(f"expected points of dimension {self.d}, got shape {pts.shape}")
        if np.isnan(pts).any() or (pts < 0).any() or (pts > 1).any():
            raise ValueError("point coordinates must lie in [0, 1]")
        pts.setflags(write=False)
        object.__setattr__(self, "d", int(self.d))
        object.__setattr__(self, "points", pts)

    @classmethod
    def from_rows(cls, rows, d: int | None = None) -> "PointSet":
        rows = [list(r) for r in rows]
        if d is None:
            if not rows:
                raise ValueError("cannot infer dimension of an empty point list")
            d = len(rows[0])
        return cls(d, np.asarray(rows, dtype=float).reshape(len(rows), d))

    @property
    def n(self) -> int:
        return self.points.shape[0]

    def __len__(self) -> int:
        return self.n

    def permute_axes(self, perm: Sequence[int]) -> "PointSet":
        return PointSet(self.d, self.points[:, list(perm)])

    def union(self, other: "PointSet") -> "PointSet":
        if other.d != self.d:
            raise DimensionError("dimension mismatch")
        return PointSet(self.d, np.vstack([self.points, other.points]))

    def prefix(self, n: int) -> "PointSet":
        return PointSet(self.d, self.points[:n])


@dataclass(frozen=True)
class AxisBox:
    """Axis-parallel box ``prod [lower_i, upper_i)`` inside the unit cube.

    ``open_left[i]`` makes the i-th interval ``(lower_i, upper_i)``. The
    faces are stored directly (rather than anchor + side) so that a face
    built from a point coordinate compares exactly against that point.
    """

    lower: tuple
    upper: tuple
    open_left: tuple = None

    def __post_init__(self):
        lo = _as_floats(self.lower, "lower")
        hi = _as_floats(self.upper, "upper")
        if len(lo) != len(hi) or not lo:
            raise DimensionError("lower and upper must have the same positive length")
        ol = (False,) * len(lo) if self.open_left is None else tuple(bool(x) for x in self.open_left)
        if len(ol) != len(lo):
            raise DimensionError("open_left has wrong length")
        for a, b in zip(lo, hi):
            if a < 0 or b > 1 + TOL or b < a:
                raise ValueError(f"invalid interval [{a}, {b}) for a box in the unit cube")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        object.__setattr__(self, "open_left", ol)

    @classmethod
    def from_anchor_sides(cls, anchor, sides, open_left=None) -> "AxisBox":
        anchor = _as_floats(anchor, "anchor")
        sides = _as_floats(sides, "sides")
        if any(s < 0 for s in sides):
            raise ValueError("side lengths must be nonnegative")
        return cls(anchor, tuple(a + s for a, s in zip(anchor, sides)), open_left)

    @classmethod
    def unit(cls, d: int) -> "AxisBox":
        return cls((0.0,) * d, (1.0,) * d)

    @property
    def d(self) -> int:
        return len(self.lower)

    @property
    def anchor(self) -> tuple:
        return self.lower

    @property
    def sides(self) -> tuple:
        return tuple(b - a for a, b in zip(self.lower, self.upper))

    @property
    def periodic(self) -> bool:
        return False

    def volume(self) -> float:
        return ordered_product(self.sides)

    def contains(self, point) -> bool:
        p = _as_floats(point, "point")
        if len(p) != self.d:
            raise DimensionError(f"point has dimension {len(p)}, box has {self.d}")
        for x, a, b, op in zip(p, self.lower, self.upper, self.open_left):
            if x >= b or x < a or (op and x == a):
                return False
        return True

    def contains_many(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=float).reshape(-1, self.d)
        lo = np.asarray(self.lower)
        hi = np.asarray(self.upper)
        ol = np.asarray(self.open_left)
        left_ok = np.where(ol, pts > lo, pts >= lo)
        return np.all(left_ok & (pts < hi), axis=1)

    def shifted(self, offset) -> "AxisBox":
        off = _as_floats(offset, "offset")
        return AxisBox.from_anchor_sides(
            [a + o for a, o in zip(self.lower, off)], self.sides, self.open_left
        )

    def key(self) -> tuple:
        """Ordering key used to break ties between equal-volume boxes."""
        return (self.anchor, self.sides, self.open_left)

    def to_dict(self) -> dict:
        return {
            "anchor": list(self.anchor),
            "sides": list(self.sides),
            "open_left": list(self.open_left),
            "periodic": False,
        }


def circular_length(a, b):
    """Forward arc length from ``a`` to ``b`` on the unit circle."""
    return np.mod(np.subtract(b, a), 1.0)


@dataclass(frozen=True)
class PeriodicBox:
    """Product of circular arcs ``[anchor_i, anchor_i + side_i)`` modulo 1."""

    anchor: tuple
    sides: tuple
    open_left: tuple = None

    def __post_init__(self):
        an = _as_floats(self.anchor, "anchor")
        sd = _as_floats(self.sides, "sides")
        if len(an) != len(sd) or not an:
            raise DimensionError("anchor and sides must have the same positive length")
        ol = (False,) * len(an) if self.open_left is None else tuple(bool(x) for x in self.open_left)
        if len(ol) != len(an):
            raise DimensionError("open_left has wrong length")
        if any(not 0 <= a < 1 for a in an):
            raise ValueError("periodic anchors must lie in [0, 1)")
        if any(not 0 <= s <= 1 for s in sd):
            raise ValueError("periodic side lengths must lie in [0, 1]")
        object.__setattr__(self, "anchor", an)
        object.__setattr__(self, "sides", sd)
        object.__setattr__(self, "open_left", ol)

    @property
    def d(self) -> int:
        return len(self.anchor)

    @property
    def periodic(self) -> bool:
        return True

    def volume(self) -> float:
        return ordered_product(self.sides)

    def wraps(self) -> tuple:
        return tuple(a + s > 1 for a, s in zip(self.anchor, self.sides))

    def contains(self, point) -> bool:
        p = _as_floats(point, "point")
        if len(p) != self.d:
            raise DimensionError(f"point has dimension {len(p)}, box has {self.d}")
        for x, a, s, op in zip(p, self.anchor, self.sides, self.open_left):
            t = float(circular_length(a, x))
            if t >= s or (op and t == 0.0):
                return False
        return True

    def contains_many(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=float).reshape(-1, self.d)
        t = circular_length(np.asarray(self.anchor), pts)
        ol = np.asarray(self.open_left)
        left_ok = np.where(ol, t > 0, True)
        return np.all(left_ok & (t < np.asarray(self.sides)), axis=1)

    def key(self) -> tuple:
        return (self.anchor, self.sides, self.open_left)

    def to_dict(self) -> dict:
        return {
            "anchor": list(self.anchor),
            "sides": list(self.sides),
            "open_left": list(self.open_left),
            "periodic": True,
        }


Box = Union[AxisBox, PeriodicBox]


def box_volume(box: Box) -> float:
    """Lebesgue measure of ``box`` (product of its side lengths)."""
    return box.volume()


def box_contains(box: Box, point) -> bool:
    """Membership test honouring open left faces and periodic wrap."""
    return box.contains(point)


@dataclass(frozen=True)
class NetParams:
    """Parameters of an approximation net.

    ``delta0 = eps**(1 + gamma)`` is the volume floor of the anchored net and
    ``delta = delta0 / 4`` the floor after shifting and shrinking by
    ``c_d = 1 - 1/d``.
    """

    d: int
    eps: float
    gamma: float | None = None

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise ValueError(f"dimension must be a positive integer, got {self.d!r}")
        eps = float(self.eps)
        if not 0 < eps < 1:
            raise ValueError(f"eps must lie in (0, 1), got {eps}")
        gamma = default_gamma(eps) if self.gamma is None else float(self.gamma)
        if not gamma > 0 or math.isinf(gamma):
            raise ValueError(f"gamma must be a positive finite number, got {gamma}")
        object.__setattr__(self, "d", int(self.d))
        object.__setattr__(self, "eps", eps)
        object.__setattr__(self, "gamma", gamma)

    @property
    def delta0(self) -> float:
        return self.eps ** (1.0 + self.gamma)

    @property
    def delta(self) -> float:
        return self.delta0 / 4.0

    @property
    def c_d(self) -> float:
        return 1.0 - 1.0 / self.d

    def as_dict(self) -> dict:
        return {
            "d": self.d,
            "eps": self.eps,
            "gamma": self.gamma,
            "delta0": self.delta0,
            "delta": self.delta,
        }


def default_gamma(eps: float) -> float:
    """``1/ln(1/eps)``, the choice making ``eps**(1+gamma) == eps/e``."""
    return 1.0 / math.log(1.0 / eps)
