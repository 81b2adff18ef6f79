"""Topology CSV and NFIM image file formats.

Topology files are UTF-8 CSV with the header
``role,x_m,y_m,z_m,weight_re,weight_im``; tx rows come first, then rx rows,
each in index order.  Floats are written with ``repr`` so a round trip is
exact.

Image files are little-endian binary::

    magic  b"NFIM"
    u32    version (1)
    u32    n_x, n_z
    f64    R0, x0, z0, dx, dz
    f64    (re, im) per pixel, z outer
"""

from __future__ import annotations

import csv
import io
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .errors import MagicMismatch, ParseError, SynthError, TruncatedFile
from .imaging import ImageField, ImageGrid
from .model import ArrayTopology

TOPOLOGY_HEADER = ("role", "x_m", "y_m", "z_m", "weight_re", "weight_im")
MAGIC = b"NFIM"
VERSION = 1
_HEADER = struct.Struct("<4sIIIddddd")


def atomic_write(path, data: bytes) -> Path:
    """Write ``data`` to a temporary sibling of ``path`` then rename over it."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


# -- topology -----------------------------------------------------------------

def topology_to_csv(topology: ArrayTopology) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TOPOLOGY_HEADER)
    for role in ("tx", "rx"):
        for p, wt in zip(topology.positions(role), topology.weights(role)):
            w.writerow([role, *(repr(float(v)) for v in p),
                        repr(float(wt.real)), repr(float(wt.imag))])
    return buf.getvalue()


def _strict_float(token: str, line: int, column: str) -> float:
    if token != token.strip() or not token:
        raise ParseError(f"{column}: malformed number {token!r}", line)
    try:
        value = float(token)
    except ValueError:
        raise ParseError(f"{column}: malformed number {token!r}", line) from None
    if not np.isfinite(value):
        raise ParseError(f"{column}: non-finite value {token!r}", line)
    return value


def topology_from_csv(text: str) -> ArrayTopology:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != TOPOLOGY_HEADER:
        raise ParseError(f"header must be {','.join(TOPOLOGY_HEADER)}", 1)
    data = {"tx": [], "rx": []}
    seen_rx = False
    for line, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(TOPOLOGY_HEADER):
            raise ParseError(f"expected {len(TOPOLOGY_HEADER)} fields, got {len(row)}", line)
        role = row[0]
        if role not in data:
            raise ParseError(f"role must be 'tx' or 'rx', got {role!r}", line)
        if role == "rx":
            seen_rx = True
        elif seen_rx:
            raise ParseError("tx rows must precede rx rows", line)
        data[role].append([_strict_float(t, line, c)
                           for t, c in zip(row[1:], TOPOLOGY_HEADER[1:])])
    arrays = {r: np.array(v, float).reshape(-1, 5) for r, v in data.items()}
    return ArrayTopology(arrays["tx"][:, :3], arrays["rx"][:, :3],
                         arrays["tx"][:, 3] + 1j * arrays["tx"][:, 4],
                         arrays["rx"][:, 3] + 1j * arrays["rx"][:, 4])


def write_topology(path, topology: ArrayTopology) -> Path:
    return atomic_write(path, topology_to_csv(topology).encode("utf-8"))


def read_topology(path) -> ArrayTopology:
    try:
        text = Path(path).read_bytes().decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ParseError(f"not UTF-8: {exc}") from None
    return topology_from_csv(text)


# -- images -------------------------------------------------------------------

def image_to_bytes(image: ImageField) -> bytes:
    r = image.grid.rect
    if r is None:
        raise SynthError("only rectangular images can be serialized")
    head = _HEADER.pack(MAGIC, VERSION, r.n_x, r.n_z, r.R0, r.x0, r.z0, r.dx, r.dz)
    body = np.asarray(image.values, dtype="<c16").tobytes()
    return head + body


def image_from_bytes(data: bytes) -> ImageField:
    if len(data) < 4 or data[:4] != MAGIC:
        raise MagicMismatch(f"expected magic {MAGIC!r}, got {bytes(data[:4])!r}")
    if len(data) < _HEADER.size:
        raise TruncatedFile(f"header needs {_HEADER.size} bytes, file has {len(data)}")
    _, version, n_x, n_z, R0, x0, z0, dx, dz = _HEADER.unpack_from(data)
    if version != VERSION:
        raise SynthError(f"unsupported image version {version}")
    need = _HEADER.size + 16 * n_x * n_z
    if len(data) < need:
        raise TruncatedFile(f"expected {need} bytes, file has {len(data)}")
    if len(data) > need:
        raise SynthError(f"{len(data) - need} trailing bytes after image payload")
    values = np.frombuffer(data, dtype="<c16", offset=_HEADER.size, count=n_x * n_z)
    grid = ImageGrid.rectangular(x0, dx, n_x, z0, dz, n_z, R0)
    return ImageField(grid, values.astype(complex))


def write_image(path, image: ImageField) -> Path:
    return atomic_write(path, image_to_bytes(image))


def read_image(path) -> ImageField:
    return image_from_bytes(Path(path).read_bytes())


def magnitude_csv(image: ImageField) -> str:
    """Long-format ``x_m,z_m,magnitude`` table, z outer."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("x_m", "z_m", "magnitude"))
    mag = np.abs(image.values)
    for p, m in zip(image.grid.positions, mag):
        w.writerow((repr(float(p[0])), repr(float(p[2])), repr(float(m))))
    return buf.getvalue()


def write_magnitude_csv(path, image: ImageField) -> Path:
    return atomic_write(path, magnitude_csv(image).encode("utf-8"))
