"""File formats: z-grid binary files, CSV ingestion, and PGM masks.

A z-grid file is one JSON header line (width, height, endianness, dtype
tag "f64") followed by raw little-endian float64 values, row-major.  Masks
and rendered maps are binary PGM (P5, maxval 255) with 0 = selected so any
image viewer displays results directly.  All writes go through a temp file
and an atomic rename.
"""
from __future__ import annotations

import json
import os
import tempfile

import numpy as np

from .errors import DataFormatError
from .simulation import ZGrid

# 4-level comparison palette
LEVEL_TRUE_POSITIVE = 0
LEVEL_FALSE_NEGATIVE = 85
LEVEL_FALSE_POSITIVE = 170
LEVEL_TRUE_NEGATIVE = 255


def atomic_write_bytes(path, data: bytes) -> None:
    """Write via a temp file in the same directory plus an atomic rename."""
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_zgrid(path, grid) -> None:
    """Write a z-grid (ZGrid or 2-D array) in the binary grid format."""
    values = np.asarray(getattr(grid, "values", grid), dtype=np.float64)
    if values.ndim != 2:
        raise ValueError("z-grid values must be 2-D")
    height, width = values.shape
    header = json.dumps({"width": width, "height": height,
                         "endianness": "little", "dtype": "f64"}, sort_keys=True)
    payload = values.astype("<f8").tobytes(order="C")
    atomic_write_bytes(path, header.encode() + b"\n" + payload)


def read_zgrid(path) -> ZGrid:
    """Read a z-grid file; .csv paths are parsed as comma-separated rows."""
    if str(path).endswith(".csv"):
        return _read_zgrid_csv(path)
    with open(path, "rb") as handle:
        blob = handle.read()
    if not blob:
        raise DataFormatError(f"{path}: empty file")
    newline = blob.find(b"\n")
    if newline < 0:
        raise DataFormatError(f"{path}: missing header line")
    try:
        header = json.loads(blob[:newline].decode())
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DataFormatError(f"{path}: malformed JSON header: {exc}") from exc
    for key in ("width", "height", "endianness", "dtype"):
        if key not in header:
            raise DataFormatError(f"{path}: header missing {key!r}")
    if header["dtype"] != "f64" or header["endianness"] != "little":
        raise DataFormatError(f"{path}: unsupported encoding "
                              f"{header['dtype']}/{header['endianness']}")
    width, height = int(header["width"]), int(header["height"])
    if width < 1 or height < 1:
        raise DataFormatError(f"{path}: non-positive dimensions in header")
    payload = blob[newline + 1:]
    expected = width * height * 8
    if len(payload) != expected:
        raise DataFormatError(f"{path}: payload is {len(payload)} bytes, "
                              f"expected {expected} for {width}x{height}")
    values = np.frombuffer(payload, dtype="<f8").reshape(height, width)
    return ZGrid(values=values.copy(), width=width, height=height)


def _read_zgrid_csv(path) -> ZGrid:
    try:
        values = np.loadtxt(path, delimiter=",", ndmin=2, dtype=np.float64)
    except (ValueError, OSError) as exc:
        raise DataFormatError(f"{path}: cannot parse CSV grid: {exc}") from exc
    if values.size == 0:
        raise DataFormatError(f"{path}: empty CSV grid")
    height, width = values.shape
    return ZGrid(values=values, width=width, height=height)


def write_pgm(path, image) -> None:
    """Write a 2-D uint8 array as binary PGM (P5, maxval 255)."""
    img = np.asarray(image)
    if img.ndim != 2:
        raise ValueError("PGM image must be 2-D")
    img = img.astype(np.uint8)
    height, width = img.shape
    atomic_write_bytes(path, b"P5\n%d %d\n255\n" % (width, height) + img.tobytes())


def read_pgm(path) -> np.ndarray:
    """Read a binary PGM; malformed input is rejected with a byte offset."""
    with open(path, "rb") as handle:
        blob = handle.read()
    pos = 0

    def fail(msg):
        raise DataFormatError(f"{path}: {msg} at byte offset {pos}")

    if blob[:2] != b"P5":
        fail("expected 'P5' magic")
    pos = 2

    def skip_separators():
        nonlocal pos
        while pos < len(blob):
            ch = blob[pos:pos + 1]
            if ch == b"#":
                end = blob.find(b"\n", pos)
                pos = len(blob) if end < 0 else end + 1
            elif ch.isspace():
                pos += 1
            else:
                return

    def read_int():
        nonlocal pos
        skip_separators()
        start = pos
        while pos < len(blob) and blob[pos:pos + 1].isdigit():
            pos += 1
        if pos == start:
            fail("expected a decimal integer")
        return int(blob[start:pos])

    width = read_int()
    height = read_int()
    maxval = read_int()
    if maxval != 255:
        fail(f"unsupported maxval {maxval}")
    if pos >= len(blob) or not blob[pos:pos + 1].isspace():
        fail("expected single whitespace before pixel data")
    pos += 1
    expected = width * height
    payload = blob[pos:]
    if len(payload) != expected:
        fail(f"pixel payload is {len(payload)} bytes, expected {expected}")
    return np.frombuffer(payload, dtype=np.uint8).reshape(height, width).copy()


def mask_to_image(mask) -> np.ndarray:
    """Boolean mask to PGM levels: 0 = selected, 255 = not selected."""
    mask = np.asarray(mask, dtype=bool)
    return np.where(mask, 0, 255).astype(np.uint8)


def image_to_mask(image) -> np.ndarray:
    return np.asarray(image) == 0


def write_mask(path, mask) -> None:
    write_pgm(path, mask_to_image(mask))


def read_mask(path) -> np.ndarray:
    return image_to_mask(read_pgm(path))


def render_map(mask, truth=None) -> np.ndarray:
    """Binary mask image, or the 4-level comparison map when truth is given."""
    mask = np.asarray(mask, dtype=bool)
    if truth is None:
        return mask_to_image(mask)
    truth = np.asarray(truth, dtype=bool)
    if truth.shape != mask.shape:
        raise ValueError("mask and truth shapes disagree")
    out = np.full(mask.shape, LEVEL_TRUE_NEGATIVE, dtype=np.uint8)
    out[truth & mask] = LEVEL_TRUE_POSITIVE
    out[truth & ~mask] = LEVEL_FALSE_NEGATIVE
    out[~truth & mask] = LEVEL_FALSE_POSITIVE
    return out
