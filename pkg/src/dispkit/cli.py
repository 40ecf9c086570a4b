"""``dispkit`` command line.

Every output starts with a config echo (format version, parameters, seed).
Text and CSV outputs carry it as ``#`` comment lines; JSON-lines outputs as a
leading ``{"type": "config", ...}`` record. ``--threads`` is deliberately left
out of the echo: it never changes results, so outputs stay byte-identical
across worker counts.

Exit codes: 0 success, 2 input error, 3 size/resource refusal, 4 internal
invariant violation.
"""

from __future__ import annotations

import argparse
import json
import math
import sys

import numpy as np

from . import bounds as bnd
from .core import NetParams, default_gamma
from .exact import DEFAULT_MAX_WORK, InstanceTooLarge, k_dispersion_exact, torus_dispersion_exact
from .formats import FormatError, read_net, read_points, write_net
from .montecarlo import (
    METHODS,
    SearchCapExceeded,
    empirical_inverse,
    run_dispersion_experiment,
    run_net_experiment,
)
from .nets import DEFAULT_MEM_BUDGET, KINDS, NetTooLarge, build_net, net_cardinality, net_certifies, verify_approximation
from .rng import default_seed

OUTPUT_VERSION = 1

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_SIZE = 3
EXIT_INTERNAL = 4


class InputError(ValueError):
    pass


class InvariantViolation(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# value formatting


def fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    if isinstance(v, (list, tuple, np.ndarray)):
        return " ".join(fmt(x) for x in v)
    return str(v)


def _json_value(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    if isinstance(v, dict):
        return {k: _json_value(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_json_value(x) for x in v]
    return v


def _dump(obj) -> str:
    """JSON with floats written to 17 significant digits."""
    def enc(v):
        if isinstance(v, float):
            return format(v, ".17g")
        if isinstance(v, dict):
            return "{" + ", ".join(f"{json.dumps(k)}: {enc(x)}" for k, x in v.items()) + "}"
        if isinstance(v, list):
            return "[" + ", ".join(enc(x) for x in v) + "]"
        return json.dumps(v)

    return enc(_json_value(obj))


class Writer:
    """Formats the config echo and records for one of text / csv / jsonl."""

    def __init__(self, stream, fmt_name, command, config):
        self.stream = stream
        self.format = fmt_name
        self.columns = None
        cfg = {"format_version": OUTPUT_VERSION, "command": command, **config}
        if fmt_name == "jsonl":
            self._line(_dump({"type": "config", **cfg}))
        else:
            self._line(f"# dispkit output v{OUTPUT_VERSION}")
            for key, val in cfg.items():
                self._line(f"# {key}={fmt(val)}")

    def _line(self, s):
        self.stream.write(s + "\n")

    def record(self, kind, row: dict):
        if self.format == "jsonl":
            self._line(_dump({"type": kind, **row}))
        elif self.format == "csv":
            if self.columns is None:
                self.columns = list(row)
                self._line(",".join(self.columns))
            self._line(",".join(_csv_cell(fmt(row.get(c))) for c in self.columns))
        else:
            for key, val in row.items():
                self._line(f"{key}: {fmt(val)}")


def _csv_cell(s: str) -> str:
    if any(c in s for c in ',"\n'):
        return '"' + s.replace('"', '""') + '"'
    return s


# ---------------------------------------------------------------------------
# argument helpers


def _grid(spec: str, cast):
    """``a,b,c`` or ``lo:hi`` (integers, inclusive) or ``lo:hi:step``."""
    out = []
    try:
        for part in spec.split(","):
            part = part.strip()
            if ":" in part:
                fields = part.split(":")
                if len(fields) == 2 and cast is int:
                    lo, hi = int(fields[0]), int(fields[1])
                    out.extend(range(lo, hi + 1))
                    continue
                if len(fields) != 3:
                    raise ValueError
                lo, hi, step = (float(f) for f in fields)
                if step <= 0:
                    raise ValueError
                m = int(math.floor((hi - lo) / step + 1e-9))
                out.extend(cast(round(lo + i * step, 12)) for i in range(m + 1))
            else:
                out.append(cast(part))
    except ValueError:
        raise InputError(f"bad grid specification {spec!r}") from None
    if not out:
        raise InputError(f"empty grid {spec!r}")
    return out


def _params(args) -> NetParams:
    if args.d is None or args.eps is None:
        raise InputError("--d and --eps are required")
    try:
        return NetParams(args.d, args.eps, args.gamma)
    except ValueError as exc:
        raise InputError(str(exc)) from None


def _kind(args) -> str:
    if getattr(args, "kind", None):
        return args.kind
    return "torus" if args.torus else "general"


def _mem(args):
    return None if args.mem_budget <= 0 else args.mem_budget


def _load_net(args):
    if args.net:
        return read_net(args.net)
    return build_net(_params(args), _kind(args), _mem(args))


def _net_config(net) -> dict:
    return {**net.params.as_dict(), "kind": net.kind, "count": len(net)}


# ---------------------------------------------------------------------------
# commands


def cmd_disp(args, out):
    if not args.points:
        raise InputError("--points is required")
    pts = read_points(args.points)
    k = args.k
    if k < 0:
        raise InputError("--k must be >= 0")
    cfg = {"points": args.points, "d": pts.d, "n": pts.n, "k": k, "torus": args.torus}
    w = Writer(out, args.format or "text", "disp", cfg)
    if args.torus:
        res = torus_dispersion_exact(pts, k, args.max_work)
    else:
        res = k_dispersion_exact(pts, k, args.max_work)
    box = res.witness
    inside = int(box.contains_many(pts.points).sum()) if pts.n else 0
    if inside > k or box.volume() != res.value:
        raise InvariantViolation(f"witness holds {inside} points (k={k}) or its volume differs from the value")
    w.record(
        "result",
        {
            "value": res.value,
            "attained": res.attained,
            "witness_anchor": list(box.anchor),
            "witness_sides": list(box.sides),
            "witness_open_left": list(box.open_left),
            "boxes_examined": res.boxes_examined,
        },
    )


def cmd_net_build(args, out):
    if not args.out:
        raise InputError("net build needs --out for the net file")
    net = build_net(_params(args), _kind(args), _mem(args))
    write_net(args.out, net)
    w = Writer(sys.stdout, args.format or "text", "net build", {**_net_config(net), "net": args.out})
    vols = net.volumes()
    w.record(
        "net",
        {
            "count": len(net),
            "min_volume": float(vols.min()),
            "size_bound": net.size_bound(),
            "overhead_ratio": net.overhead_ratio(),
        },
    )


def cmd_net_verify(args, out):
    if args.trials is None or args.trials < 1:
        raise InputError("--trials must be a positive integer")
    net = _load_net(args)
    w = Writer(out, args.format or "text", "net verify", {**_net_config(net), "trials": args.trials, "seed": args.seed})
    rep = verify_approximation(net, args.trials, args.seed, args.threads)
    row = {
        "trials": rep.trials,
        "passes": rep.passes,
        "failures": rep.failures,
        "constructive_hits": rep.constructive_hits,
    }
    if rep.first_failure is not None:
        row["first_failure_anchor"] = list(rep.first_failure.anchor)
        row["first_failure_sides"] = list(rep.first_failure.sides)
    w.record("verification", row)


def cmd_net_certify(args, out):
    if not args.points:
        raise InputError("--points is required")
    pts = read_points(args.points)
    net = _load_net(args)
    w = Writer(out, args.format or "text", "net certify", {**_net_config(net), "points": args.points, "k": args.k})
    rep = net_certifies(net, pts, args.k)
    w.record(
        "certification",
        {
            "certified": rep.certified,
            "k": rep.k,
            "net_size": rep.net_size,
            "deficient_count": rep.deficient_count,
            "min_count": rep.min_count,
        },
    )


def _lemma_net_size(eps, d, gamma):
    """General-net cardinality, when enumerating the cover is cheap."""
    g = default_gamma(eps) if gamma is None else gamma
    limit = math.floor(d * (1 + g) / g + 1e-12)
    if math.comb(limit + d, d) > 200_000:
        return None
    return net_cardinality(NetParams(d, eps, g), "general")


def _bound_rows(eps, d, k, gamma):
    def safe(fn, *a):
        try:
            return fn(*a)
        except (ValueError, OverflowError):
            return None

    rows = [
        safe(bnd.thm_main_bound, eps, d),
        safe(bnd.thm_torus_bound, eps, d),
        safe(bnd.thm_k_bound, eps, d, k),
    ]
    rows += [safe(bnd.lower_bounds, eps, d, v) for v in bnd.LOWER_VARIANTS]
    if d >= 2:
        rows.append(safe(bnd.best_known_upper, eps, d))
        rows.append(safe(bnd.rz_cover_bound, d, default_gamma(eps) if gamma is None else gamma) if eps < 1 else None)
    if d >= 3:
        rows.append(safe(bnd.theta_m_bound, d))
    if eps > 0.25:
        rows.append(safe(bnd.large_eps_bounds, eps))
    if d >= 2 and eps < 1:
        size = _lemma_net_size(eps, d, gamma)
        if size is not None and size >= 3:
            delta = NetParams(d, eps, gamma).delta
            rows.append(safe(bnd.lemma_unb_bound, size, delta) if k == 0 else safe(bnd.lemma_k_unb_bound, size, delta, k))
    return [r for r in rows if r is not None]


def cmd_bounds_eval(args, out):
    if args.d_grid is None or args.eps_grid is None:
        raise InputError("--d and --eps grids are required")
    ds = _grid(args.d_grid, int)
    epss = _grid(args.eps_grid, float)
    ks = _grid(args.k_grid, int)
    if any(d < 1 for d in ds) or any(not e > 0 for e in epss) or any(k < 0 for k in ks):
        raise InputError("need d >= 1, eps > 0 and k >= 0")
    cfg = {"d": args.d_grid, "eps": args.eps_grid, "k": args.k_grid, "gamma": args.gamma}
    w = Writer(out, args.format or "csv", "bounds eval", cfg)
    for eps in epss:
        for d in ds:
            for k in ks:
                for b in _bound_rows(eps, d, k, args.gamma):
                    w.record(
                        "bound",
                        {
                            "formula_id": b.formula_id,
                            "eps": eps,
                            "d": d,
                            "k": b.params.get("k", k),
                            "value": b.value,
                            "integer_value": b.integer_value if math.isfinite(b.value) else None,
                            "valid": b.valid,
                            "constant_unspecified": b.constant_unspecified,
                            "regime": b.regime,
                        },
                    )


def cmd_bounds_regimes(args, out):
    ds = _grid(args.d_grid or "2:64", int)
    if args.eps_grid is not None:
        log_eps = [math.log10(e) for e in _grid(args.eps_grid, float)]
    else:
        log_eps = _grid(args.log10_eps or "-40:-0.3:0.1", float)
    if any(d < 2 for d in ds):
        raise InputError("the regime table needs d >= 2")
    cfg = {"d": args.d_grid or "2:64", "log10_eps": args.log10_eps or "-40:-0.3:0.1", "eps": args.eps_grid}
    w = Writer(out, args.format or "csv", "bounds regimes", cfg)
    for d in ds:
        for le in log_eps:
            r = bnd.regime(10.0**le, d)
            w.record("regime", {"d": d, "log10_eps": le, "regime": r, "label": bnd.REGIME_LABELS[r]})


def _report(w, rep, with_records):
    if with_records:
        for r in rep.records:
            w.record("trial", {
                "trial": r.trial,
                "n": r.n,
                "success": r.success,
                "deficient_box_count": r.deficient_box_count,
                "dispersion_value": r.dispersion_value,
                "exact_success": r.exact_success,
            })
    w.record("summary", rep.summary())


def cmd_mc_net(args, out):
    if args.trials is None:
        raise InputError("--trials is required")
    params = _params(args)
    cfg = {**params.as_dict(), "k": args.k, "n": args.n, "trials": args.trials, "seed": args.seed, "torus": args.torus}
    net = build_net(params, "torus" if args.torus else "general", _mem(args))
    w = Writer(out, args.format or "csv", "mc net", cfg)
    rep = run_net_experiment(params, args.k, args.n, args.trials, args.seed, periodic=args.torus, net=net, workers=args.threads)
    _report(w, rep, w.format == "jsonl")


def cmd_mc_disp(args, out):
    if args.trials is None or args.n is None or args.d is None or args.eps is None:
        raise InputError("--d, --eps, --n and --trials are required")
    cfg = {
        "d": args.d, "eps": args.eps, "gamma": args.gamma, "k": args.k, "n": args.n, "trials": args.trials,
        "seed": args.seed, "torus": args.torus, "method": args.method, "midpoint": args.midpoint,
        "cross_check": args.cross_check,
    }
    net = None
    if args.method == "net_certify":
        net = build_net(_params(args), "torus" if args.torus else "general", _mem(args))
    w = Writer(out, args.format or "csv", "mc disp", cfg)
    rep = run_dispersion_experiment(
        args.d, args.eps, args.n, args.k, args.trials, args.seed, args.method, gamma=args.gamma,
        periodic=args.torus, midpoint=args.midpoint, cross_check=args.cross_check, net=net, workers=args.threads,
    )
    if args.cross_check:
        bad = [r.trial for r in rep.records if r.success and not r.exact_success]
        if bad:
            raise InvariantViolation(f"net certified trials {bad} whose exact dispersion is not below eps")
    _report(w, rep, w.format == "jsonl")


def cmd_mc_invert(args, out):
    if args.trials is None or args.d is None or args.eps is None:
        raise InputError("--d, --eps and --trials are required")
    cfg = {
        "d": args.d, "eps": args.eps, "k": args.k, "target": args.target, "trials": args.trials,
        "seed": args.seed, "torus": args.torus, "n_cap": args.n_cap,
    }
    w = Writer(out, args.format or "csv", "mc invert", cfg)
    res = empirical_inverse(
        args.d, args.eps, args.k, args.target, args.trials, args.seed,
        periodic=args.torus, n_cap=args.n_cap, workers=args.threads,
    )
    for n, succ, trials, frac in res.trace:
        w.record("step", {"n": n, "successes": succ, "trials": trials, "fraction": frac})
    summary = {"n": res.n, **{f"ref_{k}": v for k, v in res.reference.items()}}
    if w.format == "csv":
        w.columns = None
        out.write("\n")
    w.record("result", summary)


# ---------------------------------------------------------------------------
# parser


def _common(p, *, params=True, mc=False):
    if params:
        p.add_argument("--d", type=int)
        p.add_argument("--eps", type=float)
        p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--k", type=int, default=0)
    p.add_argument("--torus", action="store_true")
    p.add_argument("--format", choices=("text", "csv", "jsonl"), default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--mem-budget", type=float, default=DEFAULT_MEM_BUDGET,
                   help="bytes; <= 0 disables the guard")
    p.add_argument("--seed", type=int, default=None)
    if mc:
        p.add_argument("--n", type=int, default=None)
        p.add_argument("--trials", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dispkit", description="Dispersion of point sets: exact values, nets, bounds, experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("disp", help="exact (k-/torus) dispersion of a point file")
    _common(p, params=False)
    p.add_argument("--points")
    p.add_argument("--max-work", type=float, default=DEFAULT_MAX_WORK)
    p.set_defaults(func=cmd_disp)

    net = sub.add_parser("net", help="approximation nets").add_subparsers(dest="action", required=True)
    for name, func in (("build", cmd_net_build), ("verify", cmd_net_verify), ("certify", cmd_net_certify)):
        p = net.add_parser(name)
        _common(p, mc=True)
        p.add_argument("--kind", choices=KINDS, default=None)
        p.add_argument("--net", default=None, help="net file (instead of building from --d/--eps)")
        p.add_argument("--points")
        p.set_defaults(func=func)

    bounds = sub.add_parser("bounds", help="closed-form bounds").add_subparsers(dest="action", required=True)
    for name, func in (("eval", cmd_bounds_eval), ("regimes", cmd_bounds_regimes)):
        p = bounds.add_parser(name)
        p.add_argument("--d", dest="d_grid", default=None, help="e.g. 2,3 or 2:64")
        p.add_argument("--eps", dest="eps_grid", default=None, help="e.g. 0.1,0.2 or 0.05:0.5:0.05")
        p.add_argument("--k", dest="k_grid", default="0")
        p.add_argument("--gamma", type=float, default=None)
        p.add_argument("--log10-eps", dest="log10_eps", default=None, help="e.g. --log10-eps=-40:-0.3:0.1")
        p.add_argument("--format", choices=("text", "csv", "jsonl"), default=None)
        p.add_argument("--out", default=None)
        p.set_defaults(func=func)

    mc = sub.add_parser("mc", help="Monte Carlo experiments").add_subparsers(dest="action", required=True)
    p = mc.add_parser("net")
    _common(p, mc=True)
    p.set_defaults(func=cmd_mc_net)
    p = mc.add_parser("disp")
    _common(p, mc=True)
    p.add_argument("--method", choices=METHODS, default="exact")
    p.add_argument("--midpoint", action="store_true")
    p.add_argument("--cross-check", action="store_true")
    p.set_defaults(func=cmd_mc_disp)
    p = mc.add_parser("invert")
    _common(p, mc=True)
    p.add_argument("--target", type=float, default=0.5)
    p.add_argument("--n-cap", type=int, default=4096)
    p.set_defaults(func=cmd_mc_invert)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "seed", 0) is None:
        try:
            args.seed = default_seed()
        except ValueError:
            print("dispkit: DISPKIT_SEED must be an integer", file=sys.stderr)
            return EXIT_INPUT
    if hasattr(args, "threads") and args.threads < 1:
        print("dispkit: --threads must be >= 1", file=sys.stderr)
        return EXIT_INPUT
    # net build writes the net to --out and its report to stdout
    to_file = args.out and not (args.command == "net" and args.action == "build")
    out = open(args.out, "w", encoding="utf-8", newline="\n") if to_file else sys.stdout
    try:
        args.func(args, out)
    except (FormatError, InputError) as exc:
        print(f"dispkit: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except InstanceTooLarge as exc:
        print(f"dispkit: instance too large (estimated work {exc.estimate:.3g}): {exc}", file=sys.stderr)
        return EXIT_SIZE
    except NetTooLarge as exc:
        print(f"dispkit: refusing to build net ({exc.count} boxes, ~{exc.nbytes} bytes): {exc}", file=sys.stderr)
        return EXIT_SIZE
    except SearchCapExceeded as exc:
        print(f"dispkit: {exc}", file=sys.stderr)
        return EXIT_SIZE
    except (InvariantViolation, AssertionError) as exc:
        print(f"dispkit: internal invariant violated: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except (ValueError, OSError) as exc:
        print(f"dispkit: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    finally:
        if out is not sys.stdout:
            out.close()
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
