"""CSV and binary snapshot writers.

Floats are written with ``repr``-exact ``.17g`` formatting so that identical
arrays always produce identical bytes.
"""

import csv
import struct
from pathlib import Path

import numpy as np

SNAPSHOT_MAGIC = b"DUALSNAP"
SNAPSHOT_VERSION = 1


def fmt(value):
    if isinstance(value, (bool, np.bool_)):
        return "pass" if value else "fail"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def write_csv(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])
    return path


def read_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        return header, [row for row in reader]


def write_snapshot(path, arrays, time=0.0):
    """Write named complex arrays to a versioned little-endian file.

    Layout: magic (8 bytes), version (u32), time (f64), array count (u32);
    per array: name length (u32), UTF-8 name, ndim (u32), shape (u64 each);
    then for every array in order its row-major data as (re, im) f64 pairs.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    items = [(name, np.asarray(arr, dtype="<c16")) for name, arr in arrays.items()]
    with open(path, "wb") as fh:
        fh.write(SNAPSHOT_MAGIC)
        fh.write(struct.pack("<IdI", SNAPSHOT_VERSION, float(time), len(items)))
        for name, arr in items:
            raw = name.encode("utf-8")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<I", arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        for _, arr in items:
            fh.write(arr.tobytes(order="C"))
    return path


def read_snapshot(path):
    with open(path, "rb") as fh:
        if fh.read(8) != SNAPSHOT_MAGIC:
            raise ValueError(f"{path}: not a snapshot file")
        version, time, count = struct.unpack("<IdI", fh.read(16))
        if version != SNAPSHOT_VERSION:
            raise ValueError(f"{path}: unsupported snapshot version {version}")
        specs = []
        for _ in range(count):
            (n,) = struct.unpack("<I", fh.read(4))
            name = fh.read(n).decode("utf-8")
            (ndim,) = struct.unpack("<I", fh.read(4))
            shape = struct.unpack(f"<{ndim}Q", fh.read(8 * ndim)) if ndim else ()
            specs.append((name, shape))
        out = {}
        for name, shape in specs:
            size = int(np.prod(shape)) if shape else 1
            data = np.frombuffer(fh.read(16 * size), dtype="<c16")
            out[name] = data.reshape(shape).copy()
    return out, time
