"""Seeded experiments with uniformly random point sets.

Each trial owns an independent counter-based stream (see :mod:`dispkit.rng`),
so reports are bit-identical for a given seed whatever the worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.stats import binom

from . import bounds
from .core import NetParams, PointSet
from .exact import k_dispersion_exact, torus_dispersion_exact
from .nets import DEFAULT_MEM_BUDGET, ApproximationNet, build_net, net_certifies
from .rng import trial_generator

METHODS = ("exact", "net_certify")


def sample_uniform(n: int, d: int, seed: int = 0, stream: int = 0) -> PointSet:
    """``n`` i.i.d. uniform points in ``[0, 1)^d`` from stream ``stream`` of ``seed``."""
    if n < 0 or d < 1:
        raise ValueError("need n >= 0 and d >= 1")
    rng = trial_generator(seed, stream, "points")
    return PointSet(d, rng.random((n, d)))


@dataclass(frozen=True)
class TrialRecord:
    trial: int
    n: int
    success: bool
    deficient_box_count: int | None = None
    dispersion_value: float | None = None
    exact_success: bool | None = None


@dataclass(frozen=True)
class TrialReport:
    experiment: str
    seed: int
    params: dict
    records: tuple = field(repr=False)
    probability_floor: float | None = None

    @property
    def trial_count(self) -> int:
        return len(self.records)

    @property
    def successes(self) -> int:
        return sum(r.success for r in self.records)

    @property
    def success_fraction(self) -> float:
        return self.successes / self.trial_count if self.records else 0.0

    def summary(self) -> dict:
        return {
            "n": self.params.get("n"),
            "trials": self.trial_count,
            "successes": self.successes,
            "fraction": self.success_fraction,
            "floor": self.probability_floor,
        }

    def to_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "seed": self.seed,
            "params": self.params,
            "probability_floor": self.probability_floor,
            "trial_count": self.trial_count,
            "successes": self.successes,
            "success_fraction": self.success_fraction,
            "records": [asdict(r) for r in self.records],
        }


def _map_trials(fn, trials, workers):
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return tuple(pool.map(fn, range(trials)))
    return tuple(fn(t) for t in range(trials))


def union_bound_n(net_size: int, delta: float, k: int) -> int:
    """Sample size from the union-bound lemmas for a net of the given size."""
    if k == 0:
        return bounds.lemma_unb_bound(net_size, delta).integer_value
    return bounds.lemma_k_unb_bound(net_size, delta, k).integer_value


def run_net_experiment(
    params: NetParams,
    k: int,
    n: int | None,
    trials: int,
    seed: int = 0,
    *,
    periodic: bool = False,
    net: ApproximationNet | None = None,
    workers: int = 1,
    mem_budget: float | None = DEFAULT_MEM_BUDGET,
) -> TrialReport:
    """Draw ``n`` uniform points per trial; success iff every net box holds >= k+1 of them.

    With ``n=None`` the sample size comes from the union-bound lemma for the
    constructed net.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if net is None:
        net = build_net(params, "torus" if periodic else "general", mem_budget)
    size = len(net)
    floor = 1 - 1 / size if size >= 3 else None
    if n is None:
        n = union_bound_n(size, params.delta, k)

    def one(t):
        pts = sample_uniform(n, params.d, seed, t)
        rep = net_certifies(net, pts, k)
        return TrialRecord(t, n, rep.certified, rep.deficient_count)

    records = _map_trials(one, trials, workers)
    return TrialReport(
        "net",
        seed,
        {**params.as_dict(), "k": k, "n": n, "kind": net.kind, "net_size": size},
        records,
        floor,
    )


def run_dispersion_experiment(
    d: int,
    eps: float,
    n: int,
    k: int,
    trials: int,
    seed: int = 0,
    method: str = "exact",
    *,
    gamma: float | None = None,
    periodic: bool = False,
    midpoint: bool = False,
    cross_check: bool = False,
    net: ApproximationNet | None = None,
    workers: int = 1,
    mem_budget: float | None = DEFAULT_MEM_BUDGET,
) -> TrialReport:
    """Fraction of trials whose (k-)dispersion is at most eps.

    ``method="exact"`` runs the exact oracle; ``"net_certify"`` counts a trial
    as successful when the approximation net certifies dispersion < eps, and
    with ``cross_check`` also runs the exact oracle on the same points.
    ``midpoint`` replaces the random sample by ``n`` copies of the centre.
    """
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    params = None
    if method == "net_certify":
        params = NetParams(d, eps, gamma)
        if net is None:
            net = build_net(params, "torus" if periodic else "general", mem_budget)

    def exact(pts):
        if periodic:
            return torus_dispersion_exact(pts, k).value
        return k_dispersion_exact(pts, k).value

    def one(t):
        if midpoint:
            pts = PointSet(d, np.full((n, d), 0.5))
        else:
            pts = sample_uniform(n, d, seed, t)
        if method == "exact":
            v = exact(pts)
            return TrialRecord(t, n, v <= eps, None, v, v <= eps)
        rep = net_certifies(net, pts, k)
        if cross_check:
            v = exact(pts)
            return TrialRecord(t, n, rep.certified, rep.deficient_count, v, v <= eps)
        return TrialRecord(t, n, rep.certified, rep.deficient_count)

    records = _map_trials(one, trials, workers)
    out = {"d": d, "eps": eps, "n": n, "k": k, "method": method, "periodic": periodic, "midpoint": midpoint}
    if params is not None:
        out.update(gamma=params.gamma, net_size=len(net))
    return TrialReport("dispersion", seed, out, records, None)


@dataclass(frozen=True)
class InverseResult:
    n: int
    trace: tuple  # (n, successes, trials, fraction)
    reference: dict

    def to_dict(self) -> dict:
        return {"n": self.n, "trace": [list(t) for t in self.trace], "reference": self.reference}


class SearchCapExceeded(RuntimeError):
    def __init__(self, message, trace):
        super().__init__(message)
        self.trace = trace


def empirical_inverse(
    d: int,
    eps: float,
    k: int,
    target_fraction: float,
    trials_per_n: int,
    seed: int = 0,
    *,
    periodic: bool = False,
    n_cap: int = 4096,
    workers: int = 1,
) -> InverseResult:
    """Smallest n whose empirical success fraction reaches ``target_fraction``.

    Trial ``t`` always uses a prefix of the same stream, so the point sets are
    nested in n and each trial's success is monotone in n. That makes the
    doubling-then-bisection search well defined.
    """
    if not 0 < target_fraction < 1:
        raise ValueError("target_fraction must lie strictly between 0 and 1")
    if trials_per_n < 1:
        raise ValueError("trials_per_n must be >= 1")
    trace = {}

    def fraction(n):
        if n not in trace:
            rep = run_dispersion_experiment(
                d, eps, n, k, trials_per_n, seed, "exact", periodic=periodic, workers=workers
            )
            trace[n] = (n, rep.successes, rep.trial_count, rep.success_fraction)
        return trace[n][3]

    def ordered():
        return tuple(trace[m] for m in sorted(trace))

    lo, hi = max(k, 0), max(k + 1, 1)
    while fraction(hi) < target_fraction:
        lo = hi
        hi *= 2
        if hi > n_cap:
            raise SearchCapExceeded(f"no n <= {n_cap} reached the target fraction", ordered())
    # invariant: fraction(lo) < target <= fraction(hi), or lo is the floor
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if fraction(mid) >= target_fraction:
            hi = mid
        else:
            lo = mid
    if lo >= max(k, 0) and lo != hi and lo in trace and trace[lo][3] >= target_fraction:
        hi = lo
    reference = {
        "trivial_lower": bounds.lower_bounds(eps, d, "trivial").integer_value,
    }
    if d >= 2 and eps <= 0.5:
        reference["thm_main"] = bounds.thm_main_bound(eps, d).integer_value
    return InverseResult(hi, ordered(), reference)


def binomial_failure_margin(trials: int, p_fail: float, alpha: float = 1e-3) -> int:
    """Largest failure count consistent with failure probability ``p_fail`` at level ``alpha``.

    Exact binomial quantile; used for statistical acceptance with few trials.
    """
    return int(binom.ppf(1 - alpha, trials, min(max(p_fail, 0.0), 1.0)))
