"""File formats: PFM for float maps, PNG (8/16-bit) for display images and masks.

PFM files are written little-endian (negative scale header) with bottom-up
scanlines, matching the common convention.  Multi-plane float stacks (e.g. a
9-channel model input) are stored as a single grayscale PFM whose height is
``planes * H``: plane 0 occupies the top H rows after standard decoding.
"""

from __future__ import annotations

import io as _stdio
from pathlib import Path

import cv2
import numpy as np

__all__ = [
    "read_pfm",
    "write_pfm",
    "read_pfm_stack",
    "write_pfm_stack",
    "read_png",
    "write_png",
    "decode_png_bytes",
    "encode_png_bytes",
    "read_normal_array",
    "write_normals_png16",
]


# --- PFM -------------------------------------------------------------------


def _read_header_token(f) -> bytes:
    # Tokens are separated by single whitespace bytes (usually '\n').
    tok = b""
    while True:
        c = f.read(1)
        if not c:
            raise ValueError("unexpected end of PFM header")
        if c in b" \t\n\r":
            if tok:
                return tok
            continue
        tok += c


def read_pfm_file(f) -> np.ndarray:
    """Parse a PFM stream into an (H, W) or (H, W, 3) float64 array."""
    magic = _read_header_token(f)
    if magic == b"PF":
        channels = 3
    elif magic == b"Pf":
        channels = 1
    else:
        raise ValueError(f"not a PFM stream (magic {magic!r})")
    width = int(_read_header_token(f))
    height = int(_read_header_token(f))
    scale = float(_read_header_token(f))
    endian = "<" if scale < 0 else ">"
    count = width * height * channels
    buf = f.read(count * 4)
    if len(buf) != count * 4:
        raise ValueError("truncated PFM pixel data")
    data = np.frombuffer(buf, dtype=endian + "f4").astype(np.float64)
    if abs(scale) not in (0.0, 1.0):
        data = data * abs(scale)
    if channels == 1:
        img = data.reshape(height, width)
    else:
        img = data.reshape(height, width, 3)
    return np.flipud(img).copy()  # file is bottom-up


def read_pfm(path: str | Path) -> np.ndarray:
    with open(path, "rb") as f:
        return read_pfm_file(f)


def write_pfm(path: str | Path, arr: np.ndarray) -> None:
    """Write an (H, W), (H, W, 1), or (H, W, 3) array as little-endian PFM."""
    arr = np.asarray(arr, dtype=np.float32)
    if arr.ndim == 3 and arr.shape[2] == 1:
        arr = arr[:, :, 0]
    if arr.ndim == 2:
        magic = b"Pf"
    elif arr.ndim == 3 and arr.shape[2] == 3:
        magic = b"PF"
    else:
        raise ValueError(f"cannot write shape {arr.shape} as PFM")
    h, w = arr.shape[:2]
    flipped = np.ascontiguousarray(np.flipud(arr), dtype="<f4")
    with open(path, "wb") as f:
        f.write(magic + b"\n")
        f.write(f"{w} {h}\n".encode())
        f.write(b"-1.0\n")
        f.write(flipped.tobytes())


def write_pfm_stack(path: str | Path, arr: np.ndarray) -> None:
    """Write an (H, W, K) float stack as one tall grayscale PFM (K*H rows)."""
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim != 3:
        raise ValueError(f"stack must be (H, W, K), got shape {arr.shape}")
    h, w, k = arr.shape
    tall = np.moveaxis(arr, 2, 0).reshape(k * h, w)
    write_pfm(path, tall)


def read_pfm_stack(path: str | Path, planes: int) -> np.ndarray:
    """Read back a stack written by ``write_pfm_stack``."""
    tall = read_pfm(path)
    if tall.ndim != 2 or tall.shape[0] % planes != 0:
        raise ValueError(
            f"PFM stack of shape {tall.shape} does not divide into {planes} planes"
        )
    h = tall.shape[0] // planes
    return np.moveaxis(tall.reshape(planes, h, tall.shape[1]), 0, 2)


# --- PNG -------------------------------------------------------------------


def _png_to_unit(raw: np.ndarray) -> np.ndarray:
    if raw.dtype == np.uint8:
        arr = raw.astype(np.float64) / 255.0
    elif raw.dtype == np.uint16:
        arr = raw.astype(np.float64) / 65535.0
    else:
        raise ValueError(f"unsupported PNG sample type {raw.dtype}")
    if arr.ndim == 3:
        if arr.shape[2] == 4:  # drop alpha
            arr = arr[:, :, :3]
        arr = arr[:, :, ::-1].copy()  # BGR -> RGB
    return arr


def decode_png_bytes(data: bytes) -> np.ndarray:
    """Decode PNG bytes to a [0, 1] float array, (H, W) or (H, W, 3)."""
    raw = cv2.imdecode(np.frombuffer(data, np.uint8), cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise ValueError("could not decode PNG data")
    return _png_to_unit(raw)


def read_png(path: str | Path) -> np.ndarray:
    raw = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise ValueError(f"could not read PNG: {path}")
    return _png_to_unit(raw)


def _unit_to_png(arr: np.ndarray, bit_depth: int) -> np.ndarray:
    arr = np.clip(np.asarray(arr, dtype=np.float64), 0.0, 1.0)
    if arr.ndim == 3 and arr.shape[2] == 1:
        arr = arr[:, :, 0]
    if arr.ndim == 3:
        arr = arr[:, :, ::-1]  # RGB -> BGR
    if bit_depth == 8:
        return np.round(arr * 255.0).astype(np.uint8)
    if bit_depth == 16:
        return np.round(arr * 65535.0).astype(np.uint16)
    raise ValueError(f"bit depth must be 8 or 16, got {bit_depth}")


def encode_png_bytes(arr: np.ndarray, bit_depth: int = 8) -> bytes:
    ok, buf = cv2.imencode(".png", _unit_to_png(arr, bit_depth))
    if not ok:
        raise ValueError("PNG encoding failed")
    return buf.tobytes()


def write_png(path: str | Path, arr: np.ndarray, bit_depth: int = 8) -> None:
    """Write a [0, 1] float array as an 8- or 16-bit PNG."""
    if not cv2.imwrite(str(path), _unit_to_png(arr, bit_depth)):
        raise ValueError(f"could not write PNG: {path}")


# --- normal maps -------------------------------------------------------------

# Normals ride in PFM as raw vectors, or in 16-bit PNG with the (n + 1) / 2
# channel encoding.  Both paths go through the sanitizer in ``lighting``.


def read_normal_array(path: str | Path) -> np.ndarray:
    """Read a raw 3-vector field from .pfm, or from PNG with (n+1)/2 encoding."""
    p = Path(path)
    if p.suffix.lower() == ".pfm":
        arr = read_pfm(p)
    else:
        arr = read_png(p) * 2.0 - 1.0
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"normal map must be 3-channel, got shape {arr.shape}")
    return arr


def decode_normal_bytes(data: bytes, filename: str) -> np.ndarray:
    if filename.lower().endswith(".pfm"):
        arr = read_pfm_file(_stdio.BytesIO(data))
    else:
        arr = decode_png_bytes(data) * 2.0 - 1.0
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"normal map must be 3-channel, got shape {arr.shape}")
    return arr


def write_normals_png16(path: str | Path, vectors: np.ndarray) -> None:
    """Store unit vectors as 16-bit PNG via the (n + 1) / 2 encoding."""
    write_png(path, (np.asarray(vectors) + 1.0) * 0.5, bit_depth=16)
