"""Exact dispersion, k-dispersion and torus dispersion of finite point sets.

Why finitely many candidates suffice: take an admissible box (at most ``k``
points inside) of maximal volume and push each face outward until it would
swallow another point or hits the cube boundary. The volume never
decreases, so some optimal box has every face supported by ``0``, ``1`` or a
point coordinate. Left faces sitting on a point coordinate are *open* (the
box is the limit of half-open boxes approaching from the right), right
faces are always exclusive. On the torus there is no boundary, so every arc
runs between two point coordinates, or is the full circle minus one
coordinate.

The fast engine enumerates candidate intervals on all axes but one, in
decreasing-spread order with branch and bound on the product of side
lengths, and solves the remaining axis in closed form: with the slab's
points sorted along that axis, the best interval holding at most ``k`` of
them is a sliding window between ranks ``i`` and ``i + k + 1``.

Ties between equal volumes are broken by the smallest
``(anchor, sides, open_left)`` tuple so outputs are deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    AxisBox,
    PeriodicBox,
    PointSet,
    circular_length,
    ordered_product_rows,
)

PRUNE_SLACK = 1e-12
DEFAULT_MAX_WORK = 4e9
_CHUNK_CELLS = 4_000_000


class InstanceTooLarge(ValueError):
    """The instance exceeds the enumeration budget; ``estimate`` is the work bound."""

    def __init__(self, message, estimate):
        super().__init__(message)
        self.estimate = estimate


@dataclass(frozen=True)
class DispersionResult:
    value: float
    witness: AxisBox | PeriodicBox
    attained: bool
    boxes_examined: int
    k: int = 0
    periodic: bool = False

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "k": self.k,
            "periodic": self.periodic,
            "attained": self.attained,
            "boxes_examined": self.boxes_examined,
            "witness": self.witness.to_dict(),
        }


@dataclass
class _Axis:
    lo: np.ndarray
    hi: np.ndarray  # right face (cube) or lo + length (torus, unused)
    length: np.ndarray
    open: np.ndarray
    member: np.ndarray  # (C, n) bool

    def __len__(self):
        return self.lo.shape[0]

    def sorted_by_length(self) -> "_Axis":
        o = np.argsort(-self.length, kind="stable")
        return _Axis(self.lo[o], self.hi[o], self.length[o], self.open[o], self.member[o])


def _cube_axis(col: np.ndarray) -> _Axis:
    u = np.unique(col)
    lefts = np.concatenate([[0.0], u])
    lopen = np.concatenate([[False], np.ones(u.size, dtype=bool)])
    rights = np.unique(np.concatenate([u, [1.0]]))
    li, ri = np.meshgrid(np.arange(lefts.size), np.arange(rights.size), indexing="ij")
    keep = rights[ri] > lefts[li]
    li, ri = li[keep], ri[keep]
    lo, hi, op = lefts[li], rights[ri], lopen[li]
    c = col[None, :]
    left_ok = np.where(op[:, None], c > lo[:, None], c >= lo[:, None])
    member = left_ok & (c < hi[:, None])
    return _Axis(lo, hi, hi - lo, op, member)


def _torus_axis(col: np.ndarray) -> _Axis:
    u = np.unique(col)
    ai, bi = np.meshgrid(np.arange(u.size), np.arange(u.size), indexing="ij")
    a, b = u[ai.ravel()], u[bi.ravel()]
    length = np.where(a == b, 1.0, circular_length(a, b))
    lo = np.concatenate([[0.0], a])
    length = np.concatenate([[1.0], length])
    op = np.concatenate([[False], np.ones(a.size, dtype=bool)])
    t = circular_length(lo[:, None], col[None, :])
    member = np.where(op[:, None], t > 0, True) & (t < length[:, None])
    return _Axis(lo, lo + length, length, op, member)


def _normalize(points: PointSet, periodic: bool) -> np.ndarray:
    pts = np.array(points.points, dtype=float)
    if periodic:
        pts = np.mod(pts, 1.0)
    return pts


def _check_k(k):
    if int(k) != k or k < 0:
        raise ValueError(f"k must be a nonnegative integer, got {k!r}")
    return int(k)


def _check_points(points: PointSet):
    if not isinstance(points, PointSet):
        raise TypeError("expected a PointSet")
    if points.d < 1:
        raise ValueError("dimension must be >= 1")


def _full_box(d, periodic):
    if periodic:
        return PeriodicBox((0.0,) * d, (1.0,) * d)
    return AxisBox.unit(d)


def _make_box(periodic, lo, length, op):
    if periodic:
        return PeriodicBox(tuple(lo), tuple(length), tuple(op))
    return AxisBox(tuple(lo), tuple(a + s for a, s in zip(lo, length)), tuple(op))


def _attained(box) -> bool:
    if box.periodic:
        # a full circle minus one coordinate is only a limit of proper arcs
        return not any(op and s == 1.0 for op, s in zip(box.open_left, box.sides))
    return not any(box.open_left)


class _Ties:
    """Incumbent value and every candidate box reaching it."""

    def __init__(self):
        self.value = -math.inf
        self.boxes = []

    def offer(self, vol, make_boxes):
        if vol < self.value:
            return
        if vol > self.value:
            self.value = vol
            self.boxes = []
        self.boxes.extend(make_boxes())

    def best(self):
        return min(self.boxes, key=lambda b: b.key())


def _windows_cube(masks, col, k):
    """Best last-axis intervals per row; returns (lengths (R, n+1), lefts, rights)."""
    R, n = masks.shape
    S = np.sort(np.where(masks, col[None, :], 1.0), axis=1)
    B = np.concatenate([np.zeros((R, 1)), S, np.ones((R, k + 1))], axis=1)
    lefts = B[:, : n + 1]
    rights = B[:, k + 1 : k + n + 2]
    return rights - lefts, lefts, rights


def _windows_torus(masks, col, k):
    """Circular windows per row; returns (lengths, anchors, full_rows)."""
    R, n = masks.shape
    m = masks.sum(axis=1)
    full = m <= k
    if n == 0:
        return np.full((R, 0), -np.inf), np.zeros((R, 0)), full
    S = np.sort(np.where(masks, col[None, :], np.inf), axis=1)
    i = np.arange(n)[None, :]
    j = i + k + 1
    wrap = j >= m[:, None]
    jj = np.where(wrap, j - m[:, None], j)
    ok = (i < m[:, None]) & (jj < m[:, None]) & (~full[:, None])
    jj = np.clip(jj, 0, n - 1)
    a = np.broadcast_to(S, (R, n))
    b = np.take_along_axis(S, jj, axis=1)
    with np.errstate(invalid="ignore"):
        length = circular_length(a, b)
    length = np.where(a == b, np.where(wrap, 1.0, -np.inf), length)
    length = np.where(ok, length, -np.inf)
    return length, np.where(ok, a, 0.0), full


class _Search:
    def __init__(self, points: PointSet, k: int, periodic: bool, max_work: float):
        self.pts = _normalize(points, periodic)
        self.n, self.d = self.pts.shape
        self.k = k
        self.periodic = periodic
        self.order = _axis_order(self.pts)
        self.last = self.order[-1]
        work = _work(self.pts, self.order, periodic)
        if work > max_work:
            raise InstanceTooLarge(
                f"enumeration bound {work:.3g} exceeds budget {max_work:.3g} "
                f"(n={self.n}, d={self.d})",
                work,
            )
        build = _torus_axis if periodic else _cube_axis
        self.axes = {ax: build(self.pts[:, ax]).sorted_by_length() for ax in self.order[:-1]}
        self.ties = _Ties()
        self.examined = 0

    def run(self) -> DispersionResult:
        self._seed_incumbent()
        full_mask = np.ones(self.n, dtype=bool)
        if self.d == 1:
            self._solve_rows(full_mask[None, :], {}, None, None)
        else:
            self._descend(0, full_mask, 1.0, {})
        box = self.ties.best()
        return DispersionResult(
            value=box.volume(),
            witness=box,
            attained=_attained(box),
            boxes_examined=self.examined,
            k=self.k,
            periodic=self.periodic,
        )

    def _seed_incumbent(self):
        # best single slab: one axis solved in closed form, the rest full
        best = 0.0
        col_mask = np.ones((1, self.n), dtype=bool)
        for ax in range(self.d):
            if self.periodic:
                length, _, full = _windows_torus(col_mask, self.pts[:, ax], self.k)
                val = 1.0 if full[0] else float(length.max(initial=-np.inf))
            else:
                length, _, _ = _windows_cube(col_mask, self.pts[:, ax], self.k)
                val = float(length.max())
            best = max(best, val)
        self._seed_value = best

    def _bound(self):
        return max(self.ties.value, self._seed_value) * (1.0 - PRUNE_SLACK)

    def _descend(self, depth, mask, prefix, chosen):
        ax = self.order[depth]
        A = self.axes[ax]
        if depth == self.d - 2:
            # vectorize over this axis' candidates, closed form on the last axis
            thr = self._bound()
            count = int(np.searchsorted(-(prefix * A.length), -thr, side="right"))
            for start in range(0, count, max(1, _CHUNK_CELLS // max(self.n, 1))):
                stop = min(count, start + max(1, _CHUNK_CELLS // max(self.n, 1)))
                rows = np.arange(start, stop)
                masks = A.member[rows] & mask[None, :]
                self._solve_rows(masks, chosen, ax, rows)
            return
        for c in range(len(A)):
            if prefix * A.length[c] < self._bound():
                break
            chosen[ax] = c
            self._descend(depth + 1, mask & A.member[c], prefix * A.length[c], chosen)
        chosen.pop(ax, None)

    def _solve_rows(self, masks, chosen, row_axis, rows):
        R = masks.shape[0]
        col = self.pts[:, self.last]
        if self.periodic:
            length, anchors, full = _windows_torus(masks, col, self.k)
            row_best = np.where(full, 1.0, length.max(axis=1, initial=-np.inf))
        else:
            length, lefts, rights = _windows_cube(masks, col, self.k)
            row_best = length.max(axis=1)
        self.examined += int(R * max(length.shape[1], 1))

        sides = np.empty((R, self.d))
        for ax, c in chosen.items():
            sides[:, ax] = self.axes[ax].length[c]
        if row_axis is not None:
            sides[:, row_axis] = self.axes[row_axis].length[rows]
        sides[:, self.last] = row_best
        vol = ordered_product_rows(sides)
        top = float(vol.max())
        if top < self.ties.value:
            return
        hit = np.flatnonzero(vol == top)

        def make():
            out = []
            for r in hit:
                lo = np.empty(self.d)
                hi = np.empty(self.d)
                ln = np.empty(self.d)
                op = np.zeros(self.d, dtype=bool)
                picks = list(chosen.items())
                if row_axis is not None:
                    picks.append((row_axis, rows[r]))
                for ax, c in picks:
                    A = self.axes[ax]
                    lo[ax], hi[ax], ln[ax], op[ax] = A.lo[c], A.hi[c], A.length[c], A.open[c]
                if self.periodic and full[r]:
                    lo[self.last], ln[self.last], op[self.last] = 0.0, 1.0, False
                    out.append(_make_box(True, lo, ln, op))
                    continue
                for w in np.flatnonzero(length[r] == row_best[r]):
                    if self.periodic:
                        lo[self.last], op[self.last] = anchors[r, w], True
                        ln[self.last] = length[r, w]
                        out.append(_make_box(True, lo, ln, op))
                    else:
                        lo[self.last], op[self.last] = lefts[r, w], w > 0
                        hi[self.last] = rights[r, w]
                        out.append(AxisBox(tuple(lo), tuple(hi), tuple(op)))
            return out

        self.ties.offer(top, make)


def _exact(points, k, periodic, max_work):
    _check_points(points)
    k = _check_k(k)
    if points.n <= k:
        box = _full_box(points.d, periodic)
        return DispersionResult(1.0, box, _attained(box), 1, k, periodic)
    return _Search(points, k, periodic, max_work).run()


def dispersion_exact(points: PointSet, max_work: float = DEFAULT_MAX_WORK) -> DispersionResult:
    """Largest volume of an axis-parallel box in the cube containing no point."""
    return _exact(points, 0, False, max_work)


def k_dispersion_exact(points: PointSet, k: int, max_work: float = DEFAULT_MAX_WORK) -> DispersionResult:
    """Largest volume of a box containing at most ``k`` points."""
    return _exact(points, k, False, max_work)


def torus_dispersion_exact(points: PointSet, k: int = 0, max_work: float = DEFAULT_MAX_WORK) -> DispersionResult:
    """Largest volume of an empty periodic box (at most ``k`` points if given)."""
    return _exact(points, k, True, max_work)


def _axis_order(pts):
    """Axes by decreasing coordinate spread; the last one is solved in closed form."""
    n, d = pts.shape
    spread = pts.max(axis=0) - pts.min(axis=0) if n else np.zeros(d)
    return [int(a) for a in np.argsort(-spread, kind="stable")]


def _work(pts, order, periodic):
    n = pts.shape[0]
    work = float(max(n, 1))
    for ax in order[:-1]:
        u = np.unique(pts[:, ax]).size
        work *= (u * u + 1) if periodic else (u + 1) * (u + 2) / 2 - (1 if u and pts[:, ax].max() == 1.0 else 0)
    return work


def estimate_work(points: PointSet, periodic: bool = False) -> float:
    """Worst-case enumeration size of the fast engine, without running it."""
    _check_points(points)
    pts = _normalize(points, periodic)
    return _work(pts, _axis_order(pts), periodic)


BRUTE_MAX_N = 12
BRUTE_MAX_D = 3


def brute_force_oracle(points: PointSet, k: int = 0, periodic: bool = False) -> DispersionResult:
    """Reference implementation: every candidate face combination, no pruning."""
    _check_points(points)
    k = _check_k(k)
    n, d = points.n, points.d
    if n > BRUTE_MAX_N or d > BRUTE_MAX_D:
        raise InstanceTooLarge(
            f"brute force limited to n <= {BRUTE_MAX_N}, d <= {BRUTE_MAX_D} (got n={n}, d={d})",
            float(n) ** (2 * d),
        )
    pts = _normalize(points, periodic)
    per_axis = []
    for ax in range(d):
        col = pts[:, ax]
        u = np.unique(col)
        cands = []
        if periodic:
            cands.append((0.0, 1.0, False))
            for a in u:
                for b in u:
                    cands.append((a, 1.0 if a == b else float(circular_length(a, b)), True))
        else:
            lefts = [(0.0, False)] + [(float(a), True) for a in u]
            rights = sorted(set(float(x) for x in u) | {1.0})
            for a, op in lefts:
                for b in rights:
                    if b > a:
                        cands.append((a, b, op))
        lo = np.array([c[0] for c in cands])
        second = np.array([c[1] for c in cands])
        op = np.array([c[2] for c in cands], dtype=bool)
        if periodic:
            length = second
            t = circular_length(lo[:, None], col[None, :])
            inside = np.where(op[:, None], t > 0, True) & (t < length[:, None])
        else:
            length = second - lo
            x = col[None, :]
            inside = np.where(op[:, None], x > lo[:, None], x >= lo[:, None]) & (x < second[:, None])
        per_axis.append((lo, second, op, length, inside))

    grids = np.meshgrid(*[np.arange(len(a[0])) for a in per_axis], indexing="ij")
    idx = [g.ravel() for g in grids]
    sides = np.stack([per_axis[a][3][idx[a]] for a in range(d)], axis=1)
    vol = ordered_product_rows(sides)
    inside = np.ones((idx[0].size, n), dtype=bool)
    for a in range(d):
        inside &= per_axis[a][4][idx[a]]
    ok = inside.sum(axis=1) <= k
    best = vol[ok].max()
    boxes = []
    for r in np.flatnonzero(ok & (vol == best)):
        lo = [per_axis[a][0][idx[a][r]] for a in range(d)]
        sec = [per_axis[a][1][idx[a][r]] for a in range(d)]
        op = [bool(per_axis[a][2][idx[a][r]]) for a in range(d)]
        if periodic:
            boxes.append(PeriodicBox(lo, sec, op))
        else:
            boxes.append(AxisBox(lo, sec, op))
    box = min(boxes, key=lambda b: b.key())
    return DispersionResult(box.volume(), box, _attained(box), int(vol.size), k, periodic)
