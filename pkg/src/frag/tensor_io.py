"""Latent tensor containers, the ``.frag`` binary format and PGM/PPM ingestion.

A latent sequence is a float array of shape ``(L, H, W, C)``: frames, rows,
columns, channels. C order on that shape gives exactly the on-disk element
offset ``((l*H + y)*W + x)*C + c``.

File layout (all little-endian)::

    bytes 0-7    ASCII magic "FRAG0001"
    bytes 8-11   u32 format version (1)
    bytes 12-27  u32 L, W, H, C
    bytes 28-    L*W*H*C float32 values
"""

from __future__ import annotations

import os
import re
import struct
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MAGIC = b"FRAG0001"
VERSION = 1
HEADER_SIZE = 28
_HEADER = struct.Struct("<8sIIIII")


class TensorFormatError(ValueError):
    """Base class for malformed tensor files. ``code`` is stable across releases."""

    code = "format"


class BadMagicError(TensorFormatError):
    code = "bad_magic"


class UnsupportedVersionError(TensorFormatError):
    code = "bad_version"


class TruncatedPayloadError(TensorFormatError):
    code = "truncated"


class TrailingDataError(TensorFormatError):
    code = "trailing_data"


class NonFiniteError(TensorFormatError):
    code = "non_finite"


class ImageFormatError(ValueError):
    code = "image_format"


class DimensionMismatchError(ValueError):
    code = "dim_mismatch"


@dataclass(frozen=True)
class TensorHeader:
    frames: int
    width: int
    height: int
    channels: int
    version: int = VERSION

    @property
    def count(self) -> int:
        return self.frames * self.width * self.height * self.channels

    @property
    def shape(self) -> tuple[int, int, int, int]:
        return (self.frames, self.height, self.width, self.channels)

    def pack(self) -> bytes:
        return _HEADER.pack(MAGIC, self.version, self.frames, self.width,
                            self.height, self.channels)

    @classmethod
    def unpack(cls, raw: bytes) -> "TensorHeader":
        if len(raw) < HEADER_SIZE:
            if not MAGIC.startswith(raw[:8]):
                raise BadMagicError(f"bad magic {raw[:8]!r}")
            raise TruncatedPayloadError(f"header is {len(raw)} bytes, need {HEADER_SIZE}")
        magic, version, frames, width, height, channels = _HEADER.unpack(raw[:HEADER_SIZE])
        if magic != MAGIC:
            raise BadMagicError(f"bad magic {magic!r}")
        if version != VERSION:
            raise UnsupportedVersionError(f"unsupported format version {version}")
        if min(frames, width, height, channels) < 1:
            raise TensorFormatError(f"zero-sized dimension in header "
                                    f"(L={frames}, W={width}, H={height}, C={channels})")
        return cls(frames, width, height, channels, version)


def check_latents(z, name: str = "latents") -> np.ndarray:
    """Validate a latent sequence and return it as an ndarray.

    Raises ValueError for wrong rank, empty axes or non-finite values.
    """
    z = np.asarray(z)
    if z.ndim != 4:
        raise ValueError(f"{name} must be 4-D (L, H, W, C), got shape {z.shape}")
    if min(z.shape) < 1:
        raise ValueError(f"{name} has an empty axis: {z.shape}")
    if not np.issubdtype(z.dtype, np.floating) and not np.issubdtype(z.dtype, np.integer):
        raise ValueError(f"{name} must be real-valued, got {z.dtype}")
    if not np.all(np.isfinite(z)):
        raise NonFiniteError(f"{name} contains NaN or Inf")
    return z


def header_for(z: np.ndarray) -> TensorHeader:
    frames, height, width, channels = z.shape
    return TensorHeader(frames, width, height, channels)


def atomic_write_bytes(path, data: bytes) -> None:
    """Write ``data`` to ``path`` through a temp file in the same directory."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def encode_latents(z) -> bytes:
    z = check_latents(z)
    payload = np.ascontiguousarray(z, dtype="<f4")
    if not np.all(np.isfinite(payload)):
        raise NonFiniteError("values overflow float32")
    return header_for(payload).pack() + payload.tobytes()


def decode_latents(raw: bytes) -> np.ndarray:
    header = TensorHeader.unpack(raw)
    expected = header.count * 4
    payload = raw[HEADER_SIZE:]
    if len(payload) < expected:
        raise TruncatedPayloadError(
            f"payload has {len(payload)} bytes, header {header.shape} needs {expected}")
    if len(payload) > expected:
        raise TrailingDataError(f"{len(payload) - expected} bytes after payload")
    z = np.frombuffer(payload, dtype="<f4").reshape(header.shape).astype(np.float32)
    if not np.all(np.isfinite(z)):
        raise NonFiniteError("payload contains NaN or Inf")
    return z


def write_latents(z, path) -> None:
    """Write a latent sequence as a ``.frag`` file (float32, little-endian)."""
    atomic_write_bytes(path, encode_latents(z))


def read_latents(path) -> np.ndarray:
    """Read a ``.frag`` file into a float32 array of shape ``(L, H, W, C)``."""
    return decode_latents(Path(path).read_bytes())


# -- binary PGM / PPM -------------------------------------------------------

_TOKEN = re.compile(rb"\s*(?:#[^\n]*\n\s*)*(\S+)")


def _parse_netpbm(raw: bytes, name: str) -> np.ndarray:
    pos = 0
    tokens = []
    for _ in range(4):
        m = _TOKEN.match(raw, pos)
        if m is None:
            raise ImageFormatError(f"{name}: truncated header")
        tokens.append(m.group(1))
        pos = m.end()
    magic = tokens[0]
    if magic not in (b"P5", b"P6"):
        raise ImageFormatError(f"{name}: unsupported format {magic!r}, need P5 or P6")
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise ImageFormatError(f"{name}: malformed header") from None
    if maxval != 255:
        raise ImageFormatError(f"{name}: maxval {maxval} unsupported, need 255")
    # exactly one whitespace byte separates header and raster
    pos += 1
    channels = 1 if magic == b"P5" else 3
    n = width * height * channels
    raster = raw[pos:pos + n]
    if len(raster) != n:
        raise ImageFormatError(f"{name}: raster truncated")
    return np.frombuffer(raster, dtype=np.uint8).reshape(height, width, channels)


def read_netpbm(path) -> np.ndarray:
    """Read a binary PGM/PPM as uint8 ``(H, W, C)``."""
    path = Path(path)
    return _parse_netpbm(path.read_bytes(), path.name)


def encode_pgm(image) -> bytes:
    image = np.asarray(image, dtype=np.uint8)
    if image.ndim != 2:
        raise ValueError("PGM export needs a 2-D array")
    height, width = image.shape
    return f"P5\n{width} {height}\n255\n".encode("ascii") + image.tobytes()


def write_pgm(image, path) -> None:
    atomic_write_bytes(path, encode_pgm(image))


def ingest_frames(directory) -> np.ndarray:
    """Load every ``.pgm``/``.ppm`` in ``directory`` as one latent sequence.

    Frames are ordered by filename and scaled to [0, 1]. PGM gives C=1,
    PPM gives C=3. All frames must agree in size and channel count.
    """
    directory = Path(directory)
    files = sorted(p for p in directory.iterdir()
                   if p.is_file() and p.suffix.lower() in (".pgm", ".ppm"))
    if not files:
        raise ImageFormatError(f"no .pgm/.ppm files in {directory}")
    frames = []
    for path in files:
        img = read_netpbm(path)
        if frames and img.shape != frames[0].shape:
            raise DimensionMismatchError(
                f"{path.name} is {img.shape}, expected {frames[0].shape}")
        frames.append(img)
    return np.stack(frames).astype(np.float64) / 255.0
