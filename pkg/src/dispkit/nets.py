"""Finite families of boxes certifying that no large box is empty.

A family ``N`` is a delta-approximation for boxes of volume >= eps when every
such box contains some member of ``N`` of volume >= delta. If a point set
hits every member of ``N``, no box of volume >= eps is empty.

Construction, bottom up:

* anchored boxes ``prod [0, b_i)`` of volume eps are mapped by
  ``b -> ln(1/b)/ln(1/eps)`` onto the standard simplex. Rounding each
  coordinate up to the grid ``(gamma/d) * Z`` yields a point whose
  coordinates sum to at most ``1 + gamma``; mapping back gives an anchored
  box of volume >= eps**(1+gamma) inside the original one;
* a general box ``x + prod [0, a_i)`` contains ``z + c_d * B`` where ``B``
  approximates the anchored box ``prod [0, a_i)``, ``c_d = 1 - 1/d`` and
  ``z`` is the first point of the lattice ``(b_i/d) * Z`` at or after ``x``;
* on the torus the same lattice is used without the right-boundary cut-off
  and the shifted boxes wrap around.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .core import (
    TOL,
    AxisBox,
    DimensionError,
    NetParams,
    PeriodicBox,
    PointSet,
    circular_length,
    ordered_product_rows,
)
from .rng import trial_generator

KINDS = ("anchored", "general", "torus")
DEFAULT_MEM_BUDGET = 2 * 1024**3
_BYTES_PER_COORD = 8 + 8 + 8 + 8  # lower, sides, upper, k-vector
_SCAN_CELLS = 20_000_000


class NetTooLarge(MemoryError):
    def __init__(self, message, count, nbytes):
        super().__init__(message)
        self.count = count
        self.nbytes = nbytes


# ---------------------------------------------------------------------------
# simplex cover


@dataclass(frozen=True)
class SimplexCover:
    """Grid points ``step * k`` (k >= 0 integer) with ``sum(y) <= 1 + gamma``."""

    d: int
    gamma: float
    step: float
    k: np.ndarray = field(repr=False)

    @property
    def points(self) -> np.ndarray:
        return self.k * self.step

    @property
    def max_index_sum(self) -> int:
        return int(self.k.sum(axis=1).max())

    def __len__(self):
        return self.k.shape[0]

    def round_up(self, x) -> np.ndarray:
        """Grid indices of the coordinatewise ceiling of ``x`` (rows of simplex points)."""
        x = np.asarray(x, dtype=float)
        return np.maximum(np.ceil(x / self.step), 0).astype(np.int64)


def _compositions(d, total):
    """All nonnegative integer vectors of length d with sum <= total, lexicographic."""
    if d == 1:
        return np.arange(total + 1, dtype=np.int64)[:, None]
    parts = []
    for first in range(total + 1):
        rest = _compositions(d - 1, total - first)
        parts.append(np.hstack([np.full((rest.shape[0], 1), first, dtype=np.int64), rest]))
    return np.vstack(parts)


def _grid_limit(d, gamma):
    return math.floor(d * (1 + gamma) / gamma + TOL)


def build_simplex_cover(d: int, gamma: float) -> SimplexCover:
    if int(d) != d or d < 2:
        raise ValueError(f"d must be an integer >= 2, got {d!r}")
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    d = int(d)
    step = gamma / d
    k = _compositions(d, _grid_limit(d, gamma))
    k.setflags(write=False)
    return SimplexCover(d, float(gamma), step, k)


# ---------------------------------------------------------------------------
# nets


@dataclass
class ApproximationNet:
    """A box family stored column-wise.

    Every element ``j`` is the box with lower corner ``lower[j]`` and side
    lengths ``sides[j]`` (wrapping modulo 1 for the torus kind). ``source[j]``
    indexes the anchored box it was derived from and ``kvec[j]`` holds its
    shift-lattice indices (all zero for anchored nets).
    """

    params: NetParams
    kind: str
    lower: np.ndarray
    sides: np.ndarray
    source: np.ndarray
    kvec: np.ndarray
    anchored_b: np.ndarray = field(repr=False)
    anchored_k: np.ndarray = field(repr=False)
    _offsets: np.ndarray | None = field(default=None, repr=False)
    _strides: np.ndarray | None = field(default=None, repr=False)
    _kmax: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown net kind {self.kind!r}")
        self.upper = self.lower + self.sides
        self._cover_index = {tuple(int(v) for v in row): i for i, row in enumerate(self.anchored_k)}
        for arr in (self.lower, self.sides, self.upper, self.source, self.kvec):
            arr.setflags(write=False)

    def __len__(self):
        return self.lower.shape[0]

    @property
    def d(self) -> int:
        return self.params.d

    @property
    def periodic(self) -> bool:
        return self.kind == "torus"

    def volumes(self) -> np.ndarray:
        return ordered_product_rows(self.sides)

    def box(self, j: int):
        if self.periodic:
            return PeriodicBox(tuple(self.lower[j]), tuple(self.sides[j]))
        return AxisBox(tuple(self.lower[j]), tuple(self.upper[j]))

    @property
    def boxes(self) -> list:
        return [self.box(j) for j in range(len(self))]

    def without(self, indices) -> "ApproximationNet":
        """Copy of the net with the given elements removed (no fast lookup)."""
        keep = np.ones(len(self), dtype=bool)
        keep[np.atleast_1d(np.asarray(indices, dtype=np.int64))] = False
        return ApproximationNet(
            self.params,
            self.kind,
            self.lower[keep].copy(),
            self.sides[keep].copy(),
            self.source[keep].copy(),
            self.kvec[keep].copy(),
            self.anchored_b,
            self.anchored_k,
        )

    @property
    def has_lookup(self) -> bool:
        return self._offsets is not None

    def size_bound(self) -> float:
        return net_size_bound(self.params, self.kind)

    def overhead_ratio(self) -> float:
        return len(self) / self.size_bound()


def anchored_table(params: NetParams):
    """Cover points with coordinate sum >= 1 and their anchored box corners ``eps**y``."""
    cover = build_simplex_cover(params.d, params.gamma)
    k = cover.k
    need = k.sum(axis=1) * cover.step >= 1 - TOL
    k = k[need]
    b = params.eps ** (k * cover.step)
    return cover, k, b


def shift_counts(b: np.ndarray, d: int, periodic: bool) -> np.ndarray:
    """Number of admissible lattice indices per axis, elementwise over ``b``."""
    b = np.asarray(b, dtype=float)
    if (b <= 0).any():
        raise ValueError("anchored box sides must be positive")
    if periodic:
        return np.floor(1 + d / b + TOL).astype(np.int64)
    return np.floor(1 - d + d / b + TOL).astype(np.int64)


def shift_lattice(b, params: NetParams, periodic: bool = False) -> np.ndarray:
    """All shift vectors ``z_i = k_i b_i / d`` for an anchored box with sides ``b``."""
    b = np.asarray(b, dtype=float).reshape(-1)
    if b.size != params.d:
        raise DimensionError("anchored box dimension does not match params")
    kmax = shift_counts(b, params.d, periodic)
    grids = np.meshgrid(*[np.arange(1, m + 1) for m in kmax], indexing="ij")
    kk = np.stack([g.ravel() for g in grids], axis=1)
    return kk * b / params.d


def shift_lattice_bound(params: NetParams, periodic: bool) -> float:
    """Cardinality bound for one shift lattice: ``ln(e/d0)^d/d0`` or ``(2d)^d/d0``."""
    d0 = params.delta0
    if periodic:
        return (2 * params.d) ** params.d / d0
    return math.log(math.e / d0) ** params.d / d0


def net_size_bound(params: NetParams, kind: str) -> float:
    d, g = params.d, params.gamma
    base = 7 * d * math.log(d)
    if kind == "anchored":
        return base * ((1 + g) / g) ** (d - 1)
    if kind == "general":
        return base * (1 + 1 / g) ** d * math.log(math.e / params.delta0) ** d / params.delta0
    return base * (1 + 1 / g) ** d * (2 * d) ** d / params.delta0


def net_cardinality(params: NetParams, kind: str) -> int:
    """Size of the net :func:`build_net` would produce, without building it."""
    _, k, b = anchored_table(params)
    if kind == "anchored":
        return int(k.shape[0])
    return int(np.prod(shift_counts(b, params.d, kind == "torus"), axis=1).sum())


def _guard(params, kind, mem_budget):
    count = net_cardinality(params, kind)
    nbytes = count * params.d * _BYTES_PER_COORD
    if mem_budget is not None and nbytes > mem_budget:
        raise NetTooLarge(
            f"{kind} net for d={params.d}, eps={params.eps:g} has {count} boxes "
            f"(~{nbytes / 2**20:.1f} MiB) which exceeds the budget of {mem_budget / 2**20:.1f} MiB",
            count,
            nbytes,
        )
    return count


def build_anchored_net(params: NetParams, mem_budget: float | None = DEFAULT_MEM_BUDGET) -> ApproximationNet:
    if params.d < 2:
        raise ValueError("nets need d >= 2")
    _guard(params, "anchored", mem_budget)
    _, k, b = anchored_table(params)
    n = b.shape[0]
    return ApproximationNet(
        params,
        "anchored",
        np.zeros_like(b),
        b.copy(),
        np.arange(n),
        np.zeros_like(k),
        b,
        k,
        _offsets=np.arange(n),
        _strides=np.zeros_like(k),
        _kmax=np.ones_like(k),
    )


def _build_shifted(params, periodic, mem_budget):
    if params.d < 2:
        raise ValueError("nets need d >= 2")
    _guard(params, "torus" if periodic else "general", mem_budget)
    d = params.d
    c_d = params.c_d
    _, kgrid, b = anchored_table(params)
    kmax = shift_counts(b, d, periodic)
    counts = np.prod(kmax, axis=1)
    offsets = np.concatenate([[0], np.cumsum(counts)[:-1]])
    # row-major strides of each anchored box's lattice
    strides = np.ones_like(kmax)
    for i in range(d - 2, -1, -1):
        strides[:, i] = strides[:, i + 1] * kmax[:, i + 1]
    lowers, sides, sources, kvecs = [], [], [], []
    for j in range(b.shape[0]):
        grids = np.meshgrid(*[np.arange(1, m + 1) for m in kmax[j]], indexing="ij")
        kk = np.stack([g.ravel() for g in grids], axis=1)
        z = kk * b[j] / d
        if periodic:
            z = np.mod(z, 1.0)
        lowers.append(z)
        sides.append(np.broadcast_to(c_d * b[j], z.shape))
        sources.append(np.full(z.shape[0], j))
        kvecs.append(kk)
    return ApproximationNet(
        params,
        "torus" if periodic else "general",
        np.vstack(lowers),
        np.vstack(sides).copy(),
        np.concatenate(sources),
        np.vstack(kvecs),
        b,
        kgrid,
        _offsets=offsets,
        _strides=strides,
        _kmax=kmax,
    )


def build_general_net(params: NetParams, mem_budget: float | None = DEFAULT_MEM_BUDGET) -> ApproximationNet:
    return _build_shifted(params, False, mem_budget)


def build_torus_net(params: NetParams, mem_budget: float | None = DEFAULT_MEM_BUDGET) -> ApproximationNet:
    return _build_shifted(params, True, mem_budget)


def build_net(params: NetParams, kind: str = "general", mem_budget=DEFAULT_MEM_BUDGET) -> ApproximationNet:
    if kind == "anchored":
        return build_anchored_net(params, mem_budget)
    if kind == "general":
        return build_general_net(params, mem_budget)
    if kind == "torus":
        return build_torus_net(params, mem_budget)
    raise ValueError(f"unknown net kind {kind!r}")


def attach_lookup(net: ApproximationNet) -> ApproximationNet:
    """Recover the constructive lookup for a net loaded from disk, if its layout is canonical."""
    params = net.params
    _, kgrid, b = anchored_table(params)
    if kgrid.shape != net.anchored_k.shape or not np.array_equal(kgrid, net.anchored_k):
        return net
    if net.kind == "anchored":
        kmax = np.ones_like(kgrid)
    else:
        kmax = shift_counts(b, params.d, net.kind == "torus")
    counts = np.prod(kmax, axis=1)
    if int(counts.sum()) != len(net):
        return net
    offsets = np.concatenate([[0], np.cumsum(counts)[:-1]])
    strides = np.ones_like(kmax)
    if net.kind == "anchored":
        strides[:] = 0
    else:
        for i in range(params.d - 2, -1, -1):
            strides[:, i] = strides[:, i + 1] * kmax[:, i + 1]
    net._offsets, net._strides, net._kmax = offsets, strides, kmax
    return net


# ---------------------------------------------------------------------------
# lookup and containment


def _contained(net, idx, lo, sides):
    """Whether element ``idx[r]`` lies inside query box ``r`` (with TOL slack)."""
    if net.periodic:
        t = circular_length(lo, net.lower[idx])
        t = np.where(t > 1 - TOL, t - 1, t)
        inside = (t >= -TOL) & (t + net.sides[idx] <= sides + TOL)
    else:
        inside = (net.lower[idx] >= lo - TOL) & (net.upper[idx] <= lo + sides + TOL)
    return inside.all(axis=1)


def _shrink(sides, eps):
    vol = ordered_product_rows(sides)
    factor = np.minimum(1.0, (eps / vol) ** (1.0 / sides.shape[1]))
    return sides * factor[:, None]


def constructive_candidates(net: ApproximationNet, lo, sides) -> np.ndarray:
    """Index of the element the construction assigns to each query box, or -1."""
    lo = np.atleast_2d(np.asarray(lo, dtype=float))
    sides = np.atleast_2d(np.asarray(sides, dtype=float))
    out = np.full(lo.shape[0], -1, dtype=np.int64)
    if not net.has_lookup:
        return out
    p = net.params
    a = _shrink(sides, p.eps)
    with np.errstate(divide="ignore"):
        x = np.log(1.0 / a) / math.log(1.0 / p.eps)
    grid = np.ceil(x / (p.gamma / p.d)).astype(np.int64)
    grid = np.maximum(grid, 0)
    src = np.array([net._cover_index.get(tuple(int(v) for v in row), -1) for row in grid])
    ok = src >= 0
    if not ok.any():
        return out
    s = src[ok]
    if net.kind == "anchored":
        out[ok] = net._offsets[s]
        return out
    b = net.anchored_b[s]
    kk = np.floor(lo[ok] * p.d / b).astype(np.int64) + 1
    kk = np.clip(kk, 1, net._kmax[s])
    idx = net._offsets[s] + ((kk - 1) * net._strides[s]).sum(axis=1)
    good = (idx < len(net)) & (net.source[np.minimum(idx, len(net) - 1)] == s)
    good &= (net.kvec[np.minimum(idx, len(net) - 1)] == kk).all(axis=1)
    res = np.where(good, idx, -1)
    out[np.flatnonzero(ok)] = res
    return out


def find_certificates(net: ApproximationNet, lo, sides) -> np.ndarray:
    """Indices of all net elements inside one query box with volume >= delta (full scan)."""
    lo = np.asarray(lo, dtype=float).reshape(1, -1)
    sides = np.asarray(sides, dtype=float).reshape(1, -1)
    idx = np.arange(len(net))
    inside = _contained(net, idx, lo, sides)
    big = net.volumes() >= net.params.delta * (1 - TOL)
    return np.flatnonzero(inside & big)


# ---------------------------------------------------------------------------
# verification


def sample_query_box(rng: np.random.Generator, params: NetParams, kind: str):
    """One random box of volume eps: sides ``eps**y`` for y uniform on the simplex."""
    d = params.d
    while True:
        e = rng.standard_exponential(d)
        y = e / e.sum()
        sides = params.eps**y
        if (sides <= 1).all():
            break
    u = rng.random(d)
    if kind == "anchored":
        lo = np.zeros(d)
    elif kind == "torus":
        lo = u
    else:
        lo = u * (1 - sides)
    return lo, sides


@dataclass(frozen=True)
class VerificationReport:
    kind: str
    trials: int
    passes: int
    failures: int
    constructive_hits: int
    first_failure: AxisBox | PeriodicBox | None
    seed: int

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "trials": self.trials,
            "passes": self.passes,
            "failures": self.failures,
            "constructive_hits": self.constructive_hits,
            "seed": self.seed,
            "first_failure": None if self.first_failure is None else self.first_failure.to_dict(),
        }


def _query_box(net, lo, sides):
    if net.periodic:
        return PeriodicBox(tuple(lo), tuple(sides))
    return AxisBox.from_anchor_sides(tuple(lo), tuple(np.minimum(sides, 1 - lo)))


def _verify_chunk(net, seed, start, stop):
    d = net.d
    los = np.empty((stop - start, d))
    sds = np.empty((stop - start, d))
    for r, t in enumerate(range(start, stop)):
        los[r], sds[r] = sample_query_box(trial_generator(seed, t, "verify"), net.params, net.kind)
    cand = constructive_candidates(net, los, sds)
    big = net.volumes() >= net.params.delta * (1 - TOL)
    hit = np.zeros(stop - start, dtype=bool)
    have = cand >= 0
    if have.any():
        c = cand[have]
        hit[have] = _contained(net, c, los[have], sds[have]) & big[c]
    constructive = int(hit.sum())
    failures = []
    for r in np.flatnonzero(~hit):
        if find_certificates(net, los[r], sds[r]).size:
            hit[r] = True
        else:
            failures.append(start + r)
    first = None
    if failures:
        r = failures[0] - start
        first = (failures[0], los[r], sds[r])
    return int(hit.sum()), constructive, len(failures), first


def verify_approximation(net: ApproximationNet, trials: int, seed: int = 0, workers: int = 1) -> VerificationReport:
    """Check the approximation property on ``trials`` random boxes of volume eps.

    Trial ``t`` draws its box from its own counter-based stream, so the report
    does not depend on ``workers``.
    """
    if int(trials) != trials or trials < 1:
        raise ValueError("trials must be a positive integer")
    trials = int(trials)
    chunk = max(1, min(2048, -(-trials // max(1, workers))))
    spans = [(s, min(trials, s + chunk)) for s in range(0, trials, chunk)]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda sp: _verify_chunk(net, seed, *sp), spans))
    else:
        parts = [_verify_chunk(net, seed, *sp) for sp in spans]
    passes = sum(p[0] for p in parts)
    constructive = sum(p[1] for p in parts)
    failures = sum(p[2] for p in parts)
    firsts = [p[3] for p in parts if p[3] is not None]
    first = None
    if firsts:
        _, lo, sd = min(firsts, key=lambda f: f[0])
        first = _query_box(net, lo, sd)
    return VerificationReport(net.kind, trials, passes, failures, constructive, first, seed)


# ---------------------------------------------------------------------------
# certification


@dataclass(frozen=True)
class CertificationReport:
    certified: bool
    k: int
    net_size: int
    deficient: np.ndarray = field(repr=False)
    min_count: int

    @property
    def deficient_count(self) -> int:
        return int(self.deficient.size)

    def to_dict(self) -> dict:
        return {
            "certified": self.certified,
            "k": self.k,
            "net_size": self.net_size,
            "deficient_count": self.deficient_count,
            "min_count": self.min_count,
            "deficient": [int(i) for i in self.deficient],
        }


def element_counts(net: ApproximationNet, points: np.ndarray) -> np.ndarray:
    """Number of points inside each net element."""
    pts = np.asarray(points, dtype=float)
    n = pts.shape[0]
    counts = np.zeros(len(net), dtype=np.int64)
    if n == 0 or len(net) == 0:
        return counts
    step = max(1, _SCAN_CELLS // (n * net.d))
    for s in range(0, len(net), step):
        lo = net.lower[s : s + step, None, :]
        if net.periodic:
            t = circular_length(lo, pts[None, :, :])
            inside = (t < net.sides[s : s + step, None, :]).all(axis=2)
        else:
            hi = net.upper[s : s + step, None, :]
            inside = ((pts[None] >= lo) & (pts[None] < hi)).all(axis=2)
        counts[s : s + step] = inside.sum(axis=1)
    return counts


def net_certifies(net: ApproximationNet, points: PointSet, k: int = 0) -> CertificationReport:
    """Whether every net element holds at least ``k + 1`` points of ``points``.

    A positive answer certifies that every box of volume >= eps holds more
    than ``k`` points, i.e. the k-dispersion is below eps.
    """
    if points.d != net.d:
        raise DimensionError(f"point set has dimension {points.d}, net has {net.d}")
    if int(k) != k or k < 0:
        raise ValueError("k must be a nonnegative integer")
    counts = element_counts(net, points.points)
    deficient = np.flatnonzero(counts < k + 1)
    return CertificationReport(
        certified=deficient.size == 0,
        k=int(k),
        net_size=len(net),
        deficient=deficient,
        min_count=int(counts.min()) if counts.size else 0,
    )
