"""Closed-form bounds on the inverse of the minimal dispersion.

Every evaluator returns a :class:`BoundValue`. Upper and lower bounds from the
literature that carry an unspecified absolute constant are evaluated with the
constant set to 1 and flagged ``constant_unspecified``. Regime tests that
involve ``d**-d`` or ``d**-(d*d)`` are done on logarithms, since those
numbers underflow in double precision already for moderate ``d``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from scipy.optimize import minimize_scalar

FORMULA_IDS = (
    "thm_main",
    "thm_torus",
    "thm_k",
    "lemma_unb",
    "lemma_k_unb",
    "rz_cover",
    "theta_m",
    "lower_ahr",
    "lower_bc",
    "lower_ullrich",
    "lower_trivial",
    "lower_hkkr_random",
    "sosnovec_large_eps",
    "mackay_large_eps",
    "best_known_piecewise",
)

LOWER_VARIANTS = {
    "ahr": "lower_ahr",
    "bc": "lower_bc",
    "ullrich": "lower_ullrich",
    "trivial": "lower_trivial",
    "hkkr": "lower_hkkr_random",
}

# relative slack for regime boundaries evaluated in log space
_REGIME_RTOL = 1e-12


@dataclass(frozen=True)
class BoundValue:
    value: float
    formula_id: str
    valid: bool = True
    regime: str = ""
    constant_unspecified: bool = False
    params: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    @property
    def integer_value(self) -> int:
        return math.ceil(self.value)

    def row(self) -> dict:
        return {
            "formula_id": self.formula_id,
            "eps": self.params.get("eps", ""),
            "d": self.params.get("d", ""),
            "k": self.params.get("k", ""),
            "value": self.value,
            "integer_value": self.integer_value,
            "valid": self.valid,
            "constant_unspecified": self.constant_unspecified,
        }


def _le(a, b):
    """``a <= b`` up to relative slack (both sides are logarithms)."""
    return a <= b + _REGIME_RTOL * max(1.0, abs(a), abs(b))


def _check_d(d, minimum=2):
    if int(d) != d or d < 1:
        raise ValueError(f"d must be a positive integer, got {d!r}")
    return int(d) >= minimum


def _check_eps(eps):
    eps = float(eps)
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    return eps


def _main_regime(eps, d):
    return _check_d(d) and 0 < eps <= 0.5


def thm_main_bound(eps: float, d: int) -> BoundValue:
    """``12e (4 d lnln(8/eps) + ln(1/eps)) / eps``; valid for d >= 2, eps in (0, 1/2]."""
    eps = _check_eps(eps)
    ok = _main_regime(eps, d)
    value = 12 * math.e * (4 * d * math.log(math.log(8 / eps)) + math.log(1 / eps)) / eps
    return BoundValue(value, "thm_main", ok, "d>=2, 0<eps<=1/2", params={"eps": eps, "d": d})


def thm_torus_bound(eps: float, d: int) -> BoundValue:
    """``24e (2 d ln(2d) + ln(e/eps)) / eps`` for periodic boxes."""
    eps = _check_eps(eps)
    ok = _main_regime(eps, d)
    value = 24 * math.e * (2 * d * math.log(2 * d) + math.log(math.e / eps)) / eps
    return BoundValue(value, "thm_torus", ok, "d>=2, 0<eps<=1/2", params={"eps": eps, "d": d})


def thm_k_bound(eps: float, d: int, k: int) -> BoundValue:
    """``80e (d lnln(8/eps) + k ln(e/eps)) / eps`` for k-dispersion."""
    eps = _check_eps(eps)
    if int(k) != k or k < 0:
        raise ValueError(f"k must be a nonnegative integer, got {k!r}")
    ok = _main_regime(eps, d)
    value = 80 * math.e * (d * math.log(math.log(8 / eps)) + k * math.log(math.e / eps)) / eps
    return BoundValue(value, "thm_k", ok, "d>=2, k>=0, 0<eps<=1/2", params={"eps": eps, "d": d, "k": int(k)})


def _check_net(net_size, delta):
    if net_size < 3:
        raise ValueError(f"the union bound needs a net of at least 3 boxes, got {net_size}")
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")


def lemma_unb_bound(net_size: int, delta: float) -> BoundValue:
    """Union bound ``3 ln|N| / delta``; succeeds with probability >= 1 - 1/|N|."""
    _check_net(net_size, delta)
    value = 3 * math.log(net_size) / delta
    return BoundValue(
        value,
        "lemma_unb",
        True,
        "|N|>=3, 0<delta<1",
        params={"net_size": net_size, "delta": delta, "k": 0},
        extra={"probability_floor": 1 - 1 / net_size},
    )


def lemma_k_unb_bound(net_size: int, delta: float, k: int) -> BoundValue:
    """``(5/delta)(ln|N| + k ln(e/delta))`` points hit every net box k+1 times."""
    _check_net(net_size, delta)
    if int(k) != k or k < 0:
        raise ValueError(f"k must be a nonnegative integer, got {k!r}")
    value = 5 / delta * (math.log(net_size) + k * math.log(math.e / delta))
    return BoundValue(
        value,
        "lemma_k_unb",
        True,
        "|N|>=3, 0<delta<1, k>=0",
        params={"net_size": net_size, "delta": delta, "k": int(k)},
        extra={"probability_floor": 1 - 1 / net_size},
    )


def k_unb_failure_bound(net_size: int, delta: float, k: int, n: int) -> float:
    """Upper bound on the probability that some net box holds at most k of n points.

    For ``k >= 1`` this is ``|N| C(n, k) (1 - delta)^(n - k)``, evaluated in
    log space; for ``k = 0`` it is ``|N| (1 - delta)^n``.
    """
    if n < k:
        return 1.0
    log_binom = math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)
    log_p = math.log(net_size) + log_binom + (n - k) * math.log1p(-delta)
    return min(1.0, math.exp(log_p))


def rz_cover_bound(m: int, gamma: float) -> BoundValue:
    """Covering bound ``7 m ln m ((1+gamma)/gamma)^m`` for a convex body by -gamma copies."""
    if int(m) != m or m < 2:
        raise ValueError(f"m must be an integer >= 2, got {m!r}")
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    value = 7 * m * math.log(m) * ((1 + gamma) / gamma) ** m
    return BoundValue(value, "rz_cover", True, "m>=2, gamma>0", params={"d": m, "gamma": gamma})


def theta_m_bound(m: int) -> BoundValue:
    """Rogers' covering density bound, minimized numerically, with its closed cap."""
    if int(m) != m or m < 3:
        raise ValueError(f"m must be an integer >= 3, got {m!r}")

    def f(x):
        return (1 + x) ** m * (1 - m * math.log(x))

    res = minimize_scalar(f, bounds=(1e-300, 1.0 / m), method="bounded", options={"xatol": 1e-12})
    cap = m * (math.log(m) + math.log(math.log(m)) + 5)
    return BoundValue(
        float(res.fun),
        "theta_m",
        True,
        "m>=3",
        params={"d": m},
        extra={"argmin": float(res.x), "cap": cap},
    )


def lower_bounds(eps: float, d: int, variant: str) -> BoundValue:
    """Lower bounds on N(eps, d) (or its torus analogue for ``ullrich``)."""
    eps = _check_eps(eps)
    if variant not in LOWER_VARIANTS:
        raise ValueError(f"unknown lower bound variant {variant!r}; choose from {sorted(LOWER_VARIANTS)}")
    _check_d(d, minimum=1)
    params = {"eps": eps, "d": d}
    fid = LOWER_VARIANTS[variant]
    if variant == "ahr":
        return BoundValue(math.log2(d) / (8 * eps), fid, eps < 0.25, "0<eps<1/4", params=params)
    if variant == "bc":
        ok = _le(math.log(eps), -d * math.log(4 * d))
        return BoundValue(d / (math.e * eps), fid, ok, "eps<=(4d)^-d", params=params)
    if variant == "ullrich":
        return BoundValue(d / eps, fid, True, "torus, all eps", params=params)
    if variant == "trivial":
        return BoundValue(max(1 / eps - 1, 0.0), fid, True, "all eps", params=params)
    value = max(math.log(1 / eps) / eps, d / (2 * eps))
    return BoundValue(
        max(value, 0.0),
        fid,
        eps < 1,
        "random uniform points; constant c unspecified",
        constant_unspecified=True,
        params=params,
    )


def large_eps_bounds(eps: float) -> BoundValue:
    """Best of the large-eps upper bounds; exactly 1 for eps >= 1/2."""
    eps = _check_eps(eps)
    if eps <= 0.25:
        raise ValueError(f"large-eps bounds need eps > 1/4, got {eps}")
    params = {"eps": eps}
    if eps >= 0.5:
        return BoundValue(1.0, "mackay_large_eps", True, "eps>=1/2: midpoint", params=params)
    sosnovec = 1 + 1 / (eps - 0.25)
    mackay = math.pi / math.sqrt(eps - 0.25) - 3
    if mackay <= sosnovec:
        return BoundValue(
            mackay, "mackay_large_eps", True, "1/4<eps<1/2", params=params, extra={"sosnovec": sosnovec}
        )
    return BoundValue(
        sosnovec, "sosnovec_large_eps", True, "eps>1/4", params=params, extra={"mackay": mackay}
    )


REGIME_LABELS = {
    1: "ln_d_over_eps2",
    2: "d_lnln_over_eps",
    3: "ln_over_eps",
    4: "d2_ln_d_over_eps",
}


def regime(eps: float, d: int) -> int:
    """Index (1..4) of the piecewise best-known regime containing ``(eps, d)``."""
    eps = _check_eps(eps)
    if not _check_d(d):
        raise ValueError("the piecewise table needs d >= 2")
    le = math.log(eps)
    ld = math.log(d)
    t1 = 2 * math.log(ld) - ld - math.log(math.log(math.log(2 * d))) if ld > 0 else math.inf
    t2 = -d * ld
    t3 = -d * d * ld
    if _le(t1, le):
        return 1
    if _le(t2, le):
        return 2
    if _le(t3, le):
        return 3
    return 4


def best_known_upper(eps: float, d: int) -> BoundValue:
    """State-of-the-art upper bound on N(eps, d), with every constant C set to 1."""
    eps = _check_eps(eps)
    r = regime(eps, d)
    inv = 1 / eps
    if r == 1:
        value = math.log(d) / eps**2 * math.log(inv)
    elif r == 2:
        value = d / eps * math.log(math.log(inv)) if inv > 1 else -math.inf
    elif r == 3:
        value = math.log(inv) / eps
    else:
        value = d * d * math.log(d) / eps
    # lnln(1/eps) is not positive for eps >= 1/e, where the formula is vacuous
    valid = 0 < eps <= 0.5 and value > 0
    return BoundValue(
        max(value, 0.0),
        "best_known_piecewise",
        valid,
        REGIME_LABELS[r],
        constant_unspecified=True,
        params={"eps": eps, "d": d},
        extra={"regime": r},
    )
