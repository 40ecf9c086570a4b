"""Acceptance criteria 1-10.

Each criterion is a function returning ``(ok, detail)``. The pytest wrappers
assert on it, and a terminal-summary hook (see ``conftest.py``) prints one
``PASS``/``FAIL`` line per criterion. ``python tests/test_acceptance.py``
prints the same lines without pytest.
"""

import contextlib
import io
import math
import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from dispkit import bounds
from dispkit.core import NetParams, PointSet
from dispkit.exact import (
    brute_force_oracle,
    dispersion_exact,
    k_dispersion_exact,
    torus_dispersion_exact,
)
from dispkit.montecarlo import run_net_experiment, sample_uniform, union_bound_n
from dispkit.nets import (
    anchored_table,
    build_anchored_net,
    build_net,
    net_certifies,
    shift_counts,
    shift_lattice_bound,
    verify_approximation,
)

RESULTS = {}


def _same(a, b):
    return a.value == b.value and a.witness == b.witness and a.attained == b.attained


def _instances(seed, count, dmax, nmax):
    rng = np.random.default_rng(seed)
    for i in range(count):
        d = int(rng.integers(1, dmax + 1))
        n = int(rng.integers(0, nmax + 1))
        pts = rng.random((n, d))
        if i % 3 == 0:
            pts = np.round(pts * 5) / 5  # shared coordinates and ties
        yield PointSet(d, pts)


def criterion_1():
    t0 = time.perf_counter()
    mismatches = 0
    checks = 0
    engines = [
        ("dispersion", lambda P: dispersion_exact(P), dict(k=0, periodic=False)),
        ("k=0", lambda P: k_dispersion_exact(P, 0), dict(k=0, periodic=False)),
        ("k=1", lambda P: k_dispersion_exact(P, 1), dict(k=1, periodic=False)),
        ("k=2", lambda P: k_dispersion_exact(P, 2), dict(k=2, periodic=False)),
        ("torus", lambda P: torus_dispersion_exact(P), dict(k=0, periodic=True)),
    ]
    for j, (_, fast, kw) in enumerate(engines):
        for P in _instances(1000 + j, 200, 3, 8):
            checks += 1
            if not _same(fast(P), brute_force_oracle(P, **kw)):
                mismatches += 1
    elapsed = time.perf_counter() - t0
    return mismatches == 0 and elapsed < 60, f"{checks} comparisons, {mismatches} mismatches, {elapsed:.1f}s"


def criterion_2():
    errs = []
    for d in range(1, 5):
        if abs(dispersion_exact(PointSet(d, [[0.5] * d])).value - 0.5) > 1e-12:
            errs.append(f"midpoint d={d}")
    for n in range(1, 21):
        P = PointSet(1, [[i / (n + 1)] for i in range(1, n + 1)])
        if abs(dispersion_exact(P).value - 1 / (n + 1)) > 1e-12:
            errs.append(f"equispaced n={n}")
    diag = dispersion_exact(PointSet(2, [[1 / 3, 1 / 3], [2 / 3, 2 / 3]]))
    if abs(diag.value - 4 / 9) > 1e-12 or diag.attained:
        errs.append("diagonal pair")
    if torus_dispersion_exact(PointSet(2, [[0.5, 0.5]])).value != 1.0:
        errs.append("torus single point")
    if abs(k_dispersion_exact(PointSet(1, [[i / 6] for i in range(1, 6)]), 2).value - 0.5) > 1e-12:
        errs.append("k-dispersion of 5 equispaced points")
    return not errs, "all known values match" if not errs else "failed: " + ", ".join(errs)


def criterion_3():
    bad_lower = bad_torus = 0
    for P in _instances(3000, 500, 3, 30):
        cube = dispersion_exact(P).value
        if cube < 1 / (P.n + 1) - 1e-12:
            bad_lower += 1
        if torus_dispersion_exact(P).value < cube:
            bad_torus += 1
    return bad_lower == bad_torus == 0, f"500 sets: {bad_lower} below 1/(n+1), {bad_torus} torus < cube"


NET_GRID = [(d, eps) for d in (2, 3) for eps in (0.05, 0.1, 0.2)]


def criterion_4():
    t0 = time.perf_counter()
    failures = {}
    for d, eps in NET_GRID:
        params = NetParams(d, eps)
        for kind in ("general", "torus"):
            rep = verify_approximation(build_net(params, kind), 10_000, seed=2024)
            failures[(d, eps, kind)] = rep.failures
    elapsed = time.perf_counter() - t0
    total = sum(failures.values())
    return total == 0 and elapsed < 600, f"12 nets x 10^4 boxes, {total} failures, {elapsed:.1f}s"


def criterion_5():
    params = NetParams(2, 0.2)
    net = build_net(params, "general")
    rng = np.random.default_rng(5005)
    violations = large = certified = 0
    for t in range(200):
        n = int(rng.integers(1, 61))
        P = sample_uniform(n, 2, seed=5005, stream=t)
        v = dispersion_exact(P).value
        rep = net_certifies(net, P)
        if v >= params.eps:
            large += 1
            if rep.deficient_count < 1:
                violations += 1
        if rep.certified:
            certified += 1
            if not v < params.eps:
                violations += 1
    return violations == 0, f"{violations} violations; {large} sets with dispersion >= eps, {certified} certified"


def criterion_6():
    lines = []
    ok = True
    for d, eps in NET_GRID:
        params = NetParams(d, eps)
        anchored = build_anchored_net(params)
        if not (anchored.volumes() >= params.delta0 * (1 - 1e-12)).all():
            ok = False
        _, _, b = anchored_table(params)
        for periodic, kind in ((False, "general"), (True, "torus")):
            sizes = np.prod(shift_counts(b, d, periodic), axis=1)
            if sizes.max() > shift_lattice_bound(params, periodic):
                ok = False
            net = build_net(params, kind)
            lines.append(f"{kind} d={d} eps={eps}: |N|={len(net)} ratio={net.overhead_ratio():.3g}")
    return ok, "volume floors and lattice bounds hold; " + "; ".join(lines)


def criterion_7():
    t0 = time.perf_counter()
    params = NetParams(2, 0.2)
    n = bounds.thm_main_bound(0.2, 2).integer_value
    if n != math.ceil(12 * math.e * (8 * math.log(math.log(40)) + math.log(5)) / 0.2):
        return False, f"n={n} disagrees with the closed form"
    rep = run_net_experiment(params, 0, n, 100, seed=7)
    elapsed = time.perf_counter() - t0
    ok = n == 1966 and rep.success_fraction >= 0.98 and elapsed < 300
    return ok, f"n={n}, success fraction {rep.success_fraction}, floor {rep.probability_floor:.4f}, {elapsed:.1f}s"


def criterion_8():
    params = NetParams(2, 0.2)
    net = build_net(params, "general")
    n = union_bound_n(len(net), params.delta, 2)
    rep = run_net_experiment(params, 2, n, 100, seed=8, net=net)
    return rep.success_fraction >= 0.98, f"|N|={len(net)}, n={n}, success fraction {rep.success_fraction}"


def criterion_9():
    from test_bounds import REFERENCE, evaluate

    bad = [
        (name, args)
        for name, args, expected in REFERENCE
        if not math.isclose(evaluate(name, args).value, expected, rel_tol=1e-9)
    ]
    large = all(bounds.large_eps_bounds(e).value == 1.0 for e in (0.5, 0.7, 1.0))
    ok = not bad and large and len(REFERENCE) == 50
    return ok, f"{len(REFERENCE) - len(bad)}/{len(REFERENCE)} reference values within 1e-9; large_eps(>=1/2)=1: {large}"


DETERMINISM_COMMANDS = [
    ["mc", "net", "--d", "2", "--eps", "0.2", "--trials", "20", "--seed", "10", "--format", "jsonl"],
    ["mc", "net", "--d", "2", "--eps", "0.2", "--k", "2", "--trials", "10", "--seed", "10", "--format", "jsonl"],
    ["mc", "disp", "--d", "2", "--eps", "0.2", "--n", "30", "--k", "1", "--trials", "20", "--seed", "10", "--format", "jsonl"],
    ["mc", "disp", "--d", "2", "--eps", "0.2", "--n", "250", "--trials", "6", "--seed", "10", "--method", "net_certify", "--cross-check", "--format", "jsonl"],
    ["mc", "invert", "--d", "1", "--eps", "0.26", "--trials", "30", "--seed", "10"],
    ["net", "verify", "--d", "3", "--eps", "0.2", "--trials", "5000", "--seed", "10"],
    ["net", "verify", "--d", "2", "--eps", "0.1", "--torus", "--trials", "5000", "--seed", "10"],
]


def _cli_output(argv):
    from dispkit.cli import main

    buf = io.StringIO()
    with contextlib.redirect_stdout(buf):
        code = main(argv)
    return code, buf.getvalue()


def criterion_10():
    differing = []
    for argv in DETERMINISM_COMMANDS:
        outs = set()
        for _ in range(2):
            for threads in ("1", "2", "8"):
                code, out = _cli_output(argv + ["--threads", threads])
                outs.add((code, out))
        if len(outs) != 1 or next(iter(outs))[0] != 0:
            differing.append(" ".join(argv[:2]))
    return not differing, f"{len(DETERMINISM_COMMANDS)} seeded commands x 2 runs x threads 1/2/8" + (
        f"; differing: {differing}" if differing else ", byte-identical"
    )


CRITERIA = {
    1: ("oracle equivalence", criterion_1),
    2: ("known values", criterion_2),
    3: ("universal lower bound and torus domination", criterion_3),
    4: ("net approximation property", criterion_4),
    5: ("net soundness vs exact oracle", criterion_5),
    6: ("cardinality bounds", criterion_6),
    7: ("end-to-end sample size with constant 12e", criterion_7),
    8: ("end-to-end k=2 sample size", criterion_8),
    9: ("bound evaluators", criterion_9),
    10: ("determinism across workers", criterion_10),
}


def _evaluate(number):
    name, fn = CRITERIA[number]
    try:
        ok, detail = fn()
    except Exception as exc:  # a crash is a failed criterion, reported as such
        ok, detail = False, f"error: {exc!r}"
    RESULTS[number] = (ok, name, detail)
    return ok, detail


def format_line(number):
    ok, name, detail = RESULTS[number]
    return f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {name}: {detail}"


@pytest.mark.parametrize("number", sorted(CRITERIA))
def test_criterion(number):
    ok, detail = _evaluate(number)
    assert ok, detail


if __name__ == "__main__":
    for number in sorted(CRITERIA):
        _evaluate(number)
        print(format_line(number), flush=True)
    sys.exit(0 if all(r[0] for r in RESULTS.values()) else 1)
