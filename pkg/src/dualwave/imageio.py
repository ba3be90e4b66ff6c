"""Grayscale image input/output and region cropping.

Supported inputs are 8- and 16-bit PGM (binary ``P5`` and plain ``P2``),
8- and 16-bit grayscale PNG and ``.npy`` arrays.  Integer images are mapped
to ``[0, 1]`` by dividing by the largest representable value (the PGM
``maxval`` or ``2**bits - 1`` for PNG); ``.npy`` arrays are returned as-is.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .errors import DataError, InputError
from .fbm import make_rng

__all__ = [
    "read_pgm",
    "write_pgm",
    "read_png",
    "write_png",
    "load_image",
    "save_image",
    "to_integer_image",
    "CropSpec",
    "crop_region",
]

PGM_SUFFIXES = (".pgm", ".pnm")


# ----------------------------------------------------------------------
# PGM


def _pgm_tokens(data: bytes, count: int):
    """Read ``count`` whitespace-separated header tokens, skipping comments."""
    tokens, pos, n = [], 0, len(data)
    while len(tokens) < count:
        while pos < n and data[pos : pos + 1].isspace():
            pos += 1
        if pos < n and data[pos : pos + 1] == b"#":
            while pos < n and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not data[pos : pos + 1].isspace() and data[pos : pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise DataError("truncated PGM header")
        tokens.append(data[start:pos])
    return tokens, pos


def read_pgm(path, raw: bool = False) -> np.ndarray:
    """Read a PGM file; ``raw=True`` returns the integer samples unscaled."""
    with open(path, "rb") as fh:
        data = fh.read()
    magic = data[:2]
    if magic not in (b"P5", b"P2"):
        raise DataError(f"{path}: not a PGM file")
    (w, h, maxval), pos = _pgm_tokens(data[2:], 3)
    try:
        w, h, maxval = int(w), int(h), int(maxval)
    except ValueError as exc:
        raise DataError(f"{path}: malformed PGM header") from exc
    if w <= 0 or h <= 0 or not 0 < maxval < 65536:
        raise DataError(f"{path}: invalid PGM dimensions or maxval")
    body = data[2 + pos + 1 :]  # exactly one whitespace byte ends the header
    if magic == b"P5":
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        need = w * h * dtype.itemsize
        if len(body) < need:
            raise DataError(f"{path}: truncated PGM raster")
        pixels = np.frombuffer(body[:need], dtype=dtype).reshape(h, w)
    else:
        try:
            values = np.array(body.split()[: w * h], dtype=np.int64)
        except ValueError as exc:
            raise DataError(f"{path}: malformed plain PGM raster") from exc
        if values.size < w * h:
            raise DataError(f"{path}: truncated PGM raster")
        pixels = values.reshape(h, w)
    if pixels.max(initial=0) > maxval:
        raise DataError(f"{path}: sample exceeds maxval")
    if raw:
        return pixels.astype(np.uint16 if maxval > 255 else np.uint8)
    return pixels.astype(float) / maxval


def write_pgm(path, pixels, maxval: int | None = None):
    """Write integer ``pixels`` as binary PGM (16-bit big-endian if maxval > 255)."""
    pixels = np.asarray(pixels)
    if pixels.ndim != 2 or not np.issubdtype(pixels.dtype, np.integer):
        raise InputError("write_pgm expects a 2D integer array")
    if maxval is None:
        maxval = 65535 if pixels.dtype.itemsize > 1 else 255
    if pixels.min(initial=0) < 0 or pixels.max(initial=0) > maxval:
        raise InputError("pixel values outside [0, maxval]")
    dtype = ">u2" if maxval > 255 else "u1"
    h, w = pixels.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n{maxval}\n".encode("ascii"))
        fh.write(pixels.astype(dtype).tobytes())


# ----------------------------------------------------------------------
# PNG


def read_png(path, raw: bool = False) -> np.ndarray:
    from PIL import Image

    try:
        with Image.open(path) as im:
            im.load()
            mode = im.mode
            arr = np.array(im)
    except OSError as exc:
        raise DataError(f"{path}: cannot read PNG ({exc})") from exc
    if mode == "L":
        maxval = 255
    elif mode.startswith("I"):
        maxval = 65535
        if arr.min(initial=0) < 0 or arr.max(initial=0) > maxval:
            raise DataError(f"{path}: 32-bit PNG samples are not supported")
    else:
        raise DataError(f"{path}: expected a grayscale PNG, got mode {mode}")
    if raw:
        return arr.astype(np.uint16 if maxval > 255 else np.uint8)
    return arr.astype(float) / maxval


def write_png(path, pixels):
    from PIL import Image

    pixels = np.asarray(pixels)
    if pixels.dtype == np.uint8:
        Image.fromarray(pixels, mode="L").save(path)
    elif pixels.dtype == np.uint16:
        Image.fromarray(pixels.astype("<u2")).save(path)
    else:
        raise InputError("write_png expects uint8 or uint16 pixels")


# ----------------------------------------------------------------------
# generic


def to_integer_image(field, bits: int = 16) -> np.ndarray:
    """Min-max scale a real field to unsigned integers with ``bits`` bits."""
    if bits not in (8, 16):
        raise InputError("bits must be 8 or 16")
    field = np.asarray(field, dtype=float)
    top = 2**bits - 1
    lo, hi = float(field.min()), float(field.max())
    if hi == lo:
        scaled = np.zeros(field.shape)
    else:
        scaled = np.rint((field - lo) / (hi - lo) * top)
    return scaled.astype(np.uint8 if bits == 8 else np.uint16)


def load_image(path) -> np.ndarray:
    """Read a grayscale image as a float array, dispatching on the suffix."""
    path = os.fspath(path)
    if not os.path.isfile(path):
        raise DataError(f"{path}: no such file")
    suffix = os.path.splitext(path)[1].lower()
    if suffix in PGM_SUFFIXES:
        return read_pgm(path)
    if suffix == ".png":
        return read_png(path)
    if suffix == ".npy":
        try:
            arr = np.load(path, allow_pickle=False)
        except (OSError, ValueError) as exc:
            raise DataError(f"{path}: cannot read array ({exc})") from exc
        if arr.ndim != 2:
            raise DataError(f"{path}: expected a 2D array")
        return arr
    raise DataError(f"{path}: unsupported image format {suffix!r}")


def save_image(path, field, bits: int = 16):
    """Save a field as ``.npy`` (exact) or min-max scaled PGM/PNG."""
    path = os.fspath(path)
    suffix = os.path.splitext(path)[1].lower()
    if suffix == ".npy":
        np.save(path, np.asarray(field))
    elif suffix in PGM_SUFFIXES:
        write_pgm(path, to_integer_image(field, bits))
    elif suffix == ".png":
        write_png(path, to_integer_image(field, bits))
    else:
        raise InputError(f"unsupported output format {suffix!r}")


# ----------------------------------------------------------------------
# cropping


@dataclass(frozen=True)
class CropSpec:
    """Square crop anchored at ``edge_offset`` columns from one image side."""

    size: int = 1024
    edge_offset: int = 30
    orientation: str = "auto"  # "left", "right" or "auto"
    vertical_seed: int = 0

    def __post_init__(self):
        n = int(self.size)
        if n != self.size or n < 2 or n & (n - 1):
            raise InputError(f"crop size must be a power of two, got {self.size!r}")
        if self.edge_offset < 0:
            raise InputError("edge_offset must be non-negative")
        if self.orientation not in ("left", "right", "auto"):
            raise InputError(f"orientation must be left, right or auto, got {self.orientation!r}")


def crop_region(image, spec: CropSpec, stream: tuple = ()) -> np.ndarray:
    """Cut a ``size x size`` region next to the tissue-side edge.

    ``auto`` picks the side whose half has the larger mean intensity.  The
    vertical center is drawn uniformly from the rows using
    ``make_rng(spec.vertical_seed, *stream)`` and clamped so the region stays
    inside the image.
    """
    image = np.asarray(image)
    if image.ndim != 2:
        raise DataError("crop_region expects a 2D image")
    rows, cols = image.shape
    size = spec.size
    if rows < size or cols < size + spec.edge_offset:
        raise DataError(
            f"image {rows}x{cols} too small for a {size} crop at offset {spec.edge_offset}"
        )
    side = spec.orientation
    if side == "auto":
        half = cols // 2
        side = "left" if image[:, :half].mean() >= image[:, cols - half :].mean() else "right"
    left = spec.edge_offset if side == "left" else cols - spec.edge_offset - size
    center = int(make_rng(spec.vertical_seed, *stream).integers(0, rows))
    top = min(max(center - size // 2, 0), rows - size)
    return image[top : top + size, left : left + size].copy()
