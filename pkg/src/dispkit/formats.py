"""Text formats: point sets (``d n`` header + rows) and line-delimited net files."""

from __future__ import annotations

import json
import math

import numpy as np

from .core import NetParams, PointSet

POINTS_FORMAT_VERSION = 1
NET_FORMAT_VERSION = 1


class FormatError(ValueError):
    def __init__(self, message, line=None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


def fmt_float(x: float) -> str:
    """17 significant digits: enough for an exact round trip of any double."""
    x = float(x)
    if math.isnan(x) or math.isinf(x):
        raise ValueError("cannot serialize non-finite number")
    return format(x, ".17g")


# ---------------------------------------------------------------------------
# point sets


def parse_points(text: str) -> PointSet:
    if text and not text.endswith("\n"):
        raise FormatError("file must end with a newline", text.count("\n") + 1)
    header = None
    rows = []
    for lineno, line in enumerate(text.split("\n")[:-1] if text else [], start=1):
        if line.startswith("#"):
            continue
        fields = line.split(" ")
        if header is None:
            if len(fields) != 2:
                raise FormatError("header must be 'd n'", lineno)
            try:
                d, n = int(fields[0]), int(fields[1])
            except ValueError:
                raise FormatError("header fields must be base-10 integers", lineno) from None
            if d < 1 or n < 0:
                raise FormatError("need d >= 1 and n >= 0", lineno)
            header = (d, n)
            continue
        d, n = header
        if len(rows) == n:
            raise FormatError(f"more than the declared {n} points", lineno)
        if len(fields) != d:
            raise FormatError(f"expected {d} coordinates separated by single spaces, got {len(fields)}", lineno)
        try:
            row = [float(f) for f in fields]
        except ValueError:
            raise FormatError("coordinates must be decimal reals", lineno) from None
        if any(not 0.0 <= v <= 1.0 for v in row):
            raise FormatError("coordinates must lie in [0, 1]", lineno)
        rows.append(row)
    if header is None:
        raise FormatError("missing 'd n' header", 1)
    d, n = header
    if len(rows) != n:
        raise FormatError(f"declared {n} points but found {len(rows)}", text.count("\n"))
    return PointSet(d, np.asarray(rows, dtype=float).reshape(n, d))


def read_points(path) -> PointSet:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        return parse_points(fh.read())


def format_points(points: PointSet, comments=()) -> str:
    lines = [f"# {c}" for c in comments]
    lines.append(f"{points.d} {points.n}")
    for row in points.points:
        lines.append(" ".join(repr(float(v)) for v in row))
    return "\n".join(lines) + "\n"


def write_points(path, points: PointSet, comments=()) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_points(points, comments))


# ---------------------------------------------------------------------------
# nets


def _arr(values) -> str:
    return "[" + ", ".join(fmt_float(v) for v in values) + "]"


def format_net_lines(net):
    p = net.params
    yield (
        "{"
        f'"format": {NET_FORMAT_VERSION}, "d": {p.d}, "eps": {fmt_float(p.eps)}, '
        f'"gamma": {fmt_float(p.gamma)}, "delta0": {fmt_float(p.delta0)}, '
        f'"delta": {fmt_float(p.delta)}, "kind": "{net.kind}", "count": {len(net)}'
        "}\n"
    )
    periodic = "true" if net.periodic else "false"
    for j in range(len(net)):
        k = ", ".join(str(int(v)) for v in net.kvec[j])
        yield (
            f'{{"anchor": {_arr(net.lower[j])}, "sides": {_arr(net.sides[j])}, '
            f'"periodic": {periodic}, "source": {int(net.source[j])}, "k": [{k}]}}\n'
        )


def write_net(path, net) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.writelines(format_net_lines(net))


def read_net(path):
    from .nets import ApproximationNet, anchored_table, attach_lookup

    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise FormatError("empty net file", 1)
    try:
        head = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise FormatError(f"bad header: {exc.msg}", 1) from None
    if head.get("format") != NET_FORMAT_VERSION:
        raise FormatError(f"unsupported net format {head.get('format')!r}", 1)
    try:
        params = NetParams(int(head["d"]), float(head["eps"]), float(head["gamma"]))
        kind, count = head["kind"], int(head["count"])
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"bad header: {exc}", 1) from None
    if not math.isclose(params.delta0, float(head["delta0"]), rel_tol=1e-12):
        raise FormatError("delta0 does not match eps**(1+gamma)", 1)
    body = lines[1:]
    if len(body) != count:
        raise FormatError(f"header declares {count} boxes, file has {len(body)}", len(lines))
    d = params.d
    lower = np.empty((count, d))
    sides = np.empty((count, d))
    source = np.empty(count, dtype=np.int64)
    kvec = np.empty((count, d), dtype=np.int64)
    for j, line in enumerate(body):
        try:
            rec = json.loads(line)
            lower[j], sides[j] = rec["anchor"], rec["sides"]
            source[j] = rec["source"]
            kvec[j] = rec["k"]
        except (json.JSONDecodeError, KeyError, ValueError, TypeError) as exc:
            raise FormatError(f"bad box record: {exc}", j + 2) from None
    _, kgrid, b = anchored_table(params)
    net = ApproximationNet(params, kind, lower, sides, source, kvec, b, kgrid)
    return attach_lookup(net)
