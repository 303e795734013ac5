import struct

import numpy as np
import pytest

from dualfield.io import SNAPSHOT_MAGIC, fmt, read_csv, read_snapshot, write_csv, write_snapshot


def test_fmt_is_round_trip_exact():
    for x in (0.1, 1 / 3, -2.5e-300, np.float64(np.pi)):
        assert float(fmt(x)) == float(x)
    assert fmt(True) == "pass" and fmt(np.bool_(False)) == "fail"
    assert fmt(np.int64(7)) == "7" and fmt("a") == "a"


def test_csv_round_trip(tmp_path):
    rows = [[1, 0.1, "x"], [2, 1e-17, "y"]]
    path = write_csv(tmp_path / "sub" / "t.csv", ["i", "v", "s"], rows)
    header, back = read_csv(path)
    assert header == ["i", "v", "s"]
    assert [[int(r[0]), float(r[1]), r[2]] for r in back] == rows


def test_snapshot_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    arrays = {"c": rng.standard_normal((5, 2)) + 1j * rng.standard_normal((5, 2)),
              "Z": rng.standard_normal((2, 3, 3, 3, 3)).astype(complex),
              "scalar": np.array(1.5 + 2j)}
    path = write_snapshot(tmp_path / "s.snap", arrays, time=3.25)
    back, t = read_snapshot(path)
    assert t == 3.25 and list(back) == list(arrays)
    for k in arrays:
        assert np.array_equal(back[k], arrays[k])


def test_snapshot_bytes_are_deterministic(tmp_path):
    arrays = {"a": np.arange(6).reshape(2, 3) * (1 + 1j)}
    a = write_snapshot(tmp_path / "a.snap", arrays).read_bytes()
    b = write_snapshot(tmp_path / "b.snap", arrays).read_bytes()
    assert a == b and a.startswith(SNAPSHOT_MAGIC)


def test_snapshot_rejects_foreign_files(tmp_path):
    bad = tmp_path / "bad.snap"
    bad.write_bytes(b"NOTASNAP" + bytes(16))
    with pytest.raises(ValueError, match="not a snapshot"):
        read_snapshot(bad)
    future = tmp_path / "future.snap"
    future.write_bytes(SNAPSHOT_MAGIC + struct.pack("<IdI", 99, 0.0, 0))
    with pytest.raises(ValueError, match="version 99"):
        read_snapshot(future)
