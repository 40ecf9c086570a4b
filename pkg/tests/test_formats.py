import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dispkit.core import NetParams, PointSet
from dispkit.formats import FormatError, format_points, parse_points, read_net, read_points, write_net, write_points
from dispkit.nets import build_net, verify_approximation


@given(st.lists(st.tuples(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1)), max_size=20))
def test_points_round_trip_bit_identical(rows):
    P = PointSet(3, np.array(rows, dtype=float).reshape(-1, 3))
    text = format_points(P)
    Q = parse_points(text)
    assert np.array_equal(P.points, Q.points)
    assert format_points(Q) == text


def test_points_file_round_trip(tmp_path):
    P = PointSet(2, [[0.1, 1 / 3], [0.0, 1.0]])
    path = tmp_path / "p.txt"
    write_points(path, P, comments=["two points"])
    raw = path.read_bytes()
    assert raw.startswith(b"# two points\n2 2\n") and raw.endswith(b"\n") and b"\r" not in raw
    assert np.array_equal(read_points(path).points, P.points)


def test_comments_and_empty():
    P = parse_points("# header comment\n3 0\n")
    assert P.d == 3 and P.n == 0


@pytest.mark.parametrize(
    "text,line",
    [
        ("2 1\n0.5 0.5", 2),
        ("2\n", 1),
        ("2 1\n0.5  0.5\n", 2),
        ("2 1\n0.5 x\n", 2),
        ("2 1\n0.5 1.5\n", 2),
        ("2 2\n0.5 0.5\n", 2),
        ("2 1\n0.5 0.5\n0.1 0.1\n", 3),
        ("# only comments\n", 1),
        ("a b\n", 1),
        ("2 1\n# c\n0.5\n", 3),
    ],
)
def test_malformed_points_report_line(text, line):
    with pytest.raises(FormatError) as info:
        parse_points(text)
    assert info.value.line == line
    assert f"line {line}" in str(info.value)


@pytest.mark.parametrize("kind", ["anchored", "general", "torus"])
def test_net_round_trip(tmp_path, kind):
    net = build_net(NetParams(2, 0.2), kind)
    path = tmp_path / "net.jsonl"
    write_net(path, net)
    back = read_net(path)
    assert back.kind == kind and len(back) == len(net)
    assert np.array_equal(back.lower, net.lower) and np.array_equal(back.sides, net.sides)
    assert np.array_equal(back.kvec, net.kvec) and np.array_equal(back.source, net.source)
    assert back.has_lookup
    path2 = tmp_path / "again.jsonl"
    write_net(path2, back)
    assert path.read_bytes() == path2.read_bytes()
    assert verify_approximation(back, 500, seed=1) == verify_approximation(net, 500, seed=1)


def test_net_header(tmp_path):
    import json

    path = tmp_path / "n.jsonl"
    write_net(path, build_net(NetParams(2, 0.25, 1.0), "general"))
    head = json.loads(path.read_text().splitlines()[0])
    assert head["format"] == 1 and head["count"] == 296 and head["delta"] == 0.015625


def test_bad_net_file(tmp_path):
    path = tmp_path / "bad.jsonl"
    write_net(path, build_net(NetParams(2, 0.25, 1.0), "anchored"))
    lines = path.read_text().splitlines()
    path.write_text("\n".join(lines[:3] + ["{oops"] + lines[4:]) + "\n")
    with pytest.raises(FormatError) as info:
        read_net(path)
    assert info.value.line == 4
    path.write_text("\n".join(lines[:-1]) + "\n")
    with pytest.raises(FormatError):
        read_net(path)
