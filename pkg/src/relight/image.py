"""Float raster types and the compositing algebra every other module builds on.

All images are linear-light, non-negative float rasters.  Display-referred
(sRGB) data is converted on the way in/out with a pure power curve; see
``srgb_to_linear`` / ``linear_to_srgb``.  Images are immutable values: the
wrapped arrays are defensive copies with the writeable flag cleared, so every
operation here is a pure function and safe to run concurrently.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "FloatImage",
    "AlphaMask",
    "DepthMap",
    "srgb_to_linear",
    "linear_to_srgb",
    "reconstruct",
    "composite",
    "luminance",
    "downsample_half",
    "gradient_xy",
    "box_downsample",
    "box_downsample_adjoint",
    "forward_diff_x",
    "forward_diff_y",
    "forward_diff_x_adjoint",
    "forward_diff_y_adjoint",
    "resize_bilinear",
    "resize_nearest",
    "fit_long_side",
]

# Rec. 709 luma weights for linear-light RGB.
LUMA_WEIGHTS = np.array([0.2126, 0.7152, 0.0722])


def _freeze(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, dtype=np.float64, copy=True)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class FloatImage:
    """H x W x C raster of finite, non-negative linear-light samples.

    ``data`` may be passed as (H, W) or (H, W, 1) for single-channel images;
    it is stored canonically as (H, W, C) with C in {1, 3}.
    """

    data: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        if arr.ndim != 3:
            raise ValueError(f"image data must be 2-D or 3-D, got shape {arr.shape}")
        if arr.shape[2] not in (1, 3):
            raise ValueError(f"image must have 1 or 3 channels, got {arr.shape[2]}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"image must be at least 1x1, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("image contains non-finite samples")
        lo = float(arr.min())
        if lo < 0.0:
            raise ValueError(f"image contains negative sample {lo}")
        object.__setattr__(self, "data", _freeze(arr))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True)
class AlphaMask:
    """H x W blend-weight field; 1 selects foreground, 0 background."""

    data: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim == 3 and arr.shape[2] == 1:
            arr = arr[:, :, 0]
        if arr.ndim != 2:
            raise ValueError(f"mask data must be 2-D, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("mask contains non-finite samples")
        lo, hi = float(arr.min()), float(arr.max())
        if lo < 0.0 or hi > 1.0:
            raise ValueError(f"mask samples must lie in [0, 1], got range [{lo}, {hi}]")
        object.__setattr__(self, "data", _freeze(arr))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True)
class DepthMap:
    """H x W relative inverse-depth field (estimator-defined scale)."""

    data: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim == 3 and arr.shape[2] == 1:
            arr = arr[:, :, 0]
        if arr.ndim != 2:
            raise ValueError(f"depth data must be 2-D, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("depth contains non-finite samples")
        lo = float(arr.min())
        if lo < 0.0:
            raise ValueError(f"depth contains negative sample {lo}")
        object.__setattr__(self, "data", _freeze(arr))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


def _require_same_dims(a: FloatImage, b: FloatImage) -> None:
    if (a.height, a.width) != (b.height, b.width):
        raise ValueError(
            f"dimension mismatch: {a.height}x{a.width} vs {b.height}x{b.width}"
        )


def srgb_to_linear(img: FloatImage, gamma: float = 2.2) -> FloatImage:
    """Decode a display-referred image into linear light: out = img ** gamma.

    Input samples must lie in [0, 1].
    """
    arr = img.data
    hi = float(arr.max())
    if hi > 1.0:
        raise ValueError(f"display-referred sample {hi} exceeds 1.0")
    return FloatImage(np.power(arr, gamma))


def linear_to_srgb(img: FloatImage, gamma: float = 2.2) -> FloatImage:
    """Encode linear light for display: out = clamp(img, 0, 1) ** (1/gamma).

    Values above 1 are clamped before the power; this is a display encoding,
    not a tonemapper.
    """
    arr = np.clip(img.data, 0.0, 1.0)
    return FloatImage(np.power(arr, 1.0 / gamma))


def reconstruct(albedo: FloatImage, shading: FloatImage) -> FloatImage:
    """Rebuild an image from its intrinsic layers: out = shading * albedo per pixel."""
    _require_same_dims(albedo, shading)
    if albedo.channels != 3:
        raise ValueError(f"albedo must have 3 channels, got {albedo.channels}")
    if shading.channels != 1:
        raise ValueError(f"shading must have 1 channel, got {shading.channels}")
    return FloatImage(albedo.data * shading.data)


def composite(fg: FloatImage, bg: FloatImage, alpha: AlphaMask) -> FloatImage:
    """Per-pixel convex blend: alpha * fg + (1 - alpha) * bg.

    Applies identically to albedo, shading, or any other layer pair.
    """
    _require_same_dims(fg, bg)
    if fg.channels != bg.channels:
        raise ValueError(f"channel mismatch: {fg.channels} vs {bg.channels}")
    if (alpha.height, alpha.width) != (fg.height, fg.width):
        raise ValueError(
            f"mask dimension mismatch: {alpha.height}x{alpha.width} "
            f"vs {fg.height}x{fg.width}"
        )
    a = alpha.data[:, :, None]
    return FloatImage(a * fg.data + (1.0 - a) * bg.data)


def luminance(img: FloatImage) -> FloatImage:
    """Rec. 709 luminance of a linear-light RGB image."""
    if img.channels != 3:
        raise ValueError(f"luminance needs 3 channels, got {img.channels}")
    return FloatImage(img.data @ LUMA_WEIGHTS)


# --- raw-array kernels shared with the loss machinery ---------------------


def box_downsample(arr: np.ndarray) -> np.ndarray:
    """2x2 box average of an (H, W) or (H, W, C) array.

    Odd dimensions are edge-replicated before averaging, so the output is
    ceil(d / 2) along each axis.
    """
    h, w = arr.shape[:2]
    pads = [(0, h % 2), (0, w % 2)] + [(0, 0)] * (arr.ndim - 2)
    padded = np.pad(arr, pads, mode="edge")
    ph, pw = padded.shape[:2]
    view = padded.reshape((ph // 2, 2, pw // 2, 2) + padded.shape[2:])
    return view.mean(axis=(1, 3))


def box_downsample_adjoint(grad: np.ndarray, height: int, width: int) -> np.ndarray:
    """Adjoint of ``box_downsample`` back onto a (height, width[, C]) source."""
    out = np.repeat(np.repeat(grad, 2, axis=0), 2, axis=1) * 0.25
    # Fold replicated pad rows/columns back onto the true edge.
    if out.shape[0] != height:
        out = np.concatenate(
            [out[: height - 1], (out[height - 1] + out[height])[None]], axis=0
        )
    if out.shape[1] != width:
        out = np.concatenate(
            [out[:, : width - 1], (out[:, width - 1] + out[:, width])[:, None]], axis=1
        )
    return out


def forward_diff_x(arr: np.ndarray) -> np.ndarray:
    """Forward difference along x; last column is zero."""
    out = np.zeros_like(arr)
    out[:, :-1] = arr[:, 1:] - arr[:, :-1]
    return out


def forward_diff_y(arr: np.ndarray) -> np.ndarray:
    """Forward difference along y; last row is zero."""
    out = np.zeros_like(arr)
    out[:-1] = arr[1:] - arr[:-1]
    return out


def forward_diff_x_adjoint(grad: np.ndarray) -> np.ndarray:
    out = np.zeros_like(grad)
    out[:, 1:] += grad[:, :-1]
    out[:, :-1] -= grad[:, :-1]
    return out


def forward_diff_y_adjoint(grad: np.ndarray) -> np.ndarray:
    out = np.zeros_like(grad)
    out[1:] += grad[:-1]
    out[:-1] -= grad[:-1]
    return out


def downsample_half(img: FloatImage) -> FloatImage:
    """Halve an image with a 2x2 box filter (the scale-pyramid step)."""
    if img.height < 2 or img.width < 2:
        raise ValueError(
            f"cannot downsample a degenerate {img.height}x{img.width} image"
        )
    return FloatImage(box_downsample(img.data))


def gradient_xy(img: FloatImage) -> tuple[np.ndarray, np.ndarray]:
    """Forward-difference gradients (d/dx, d/dy), zero-padded at the far edge.

    Returns raw signed arrays shaped like ``img.data``; gradients can be
    negative, so they are not wrapped back into ``FloatImage``.
    """
    if img.height < 2 or img.width < 2:
        raise ValueError(f"gradient needs dims >= 2, got {img.height}x{img.width}")
    return forward_diff_x(img.data), forward_diff_y(img.data)


# --- resampling ------------------------------------------------------------


def fit_long_side(height: int, width: int, long_side: int) -> tuple[int, int]:
    """Target dims that bring the long side to ``long_side``, keeping aspect."""
    if long_side <= 0:
        raise ValueError(f"long side must be positive, got {long_side}")
    scale = long_side / max(height, width)
    return max(1, round(height * scale)), max(1, round(width * scale))


def _sample_coords(n_out: int, n_src: int) -> np.ndarray:
    # Pixel-center mapping: out center x maps to (x + 0.5) * src/out - 0.5.
    return (np.arange(n_out) + 0.5) * (n_src / n_out) - 0.5


def resize_bilinear(arr: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Edge-clamped bilinear resample of an (H, W) or (H, W, C) array."""
    h, w = arr.shape[:2]
    if (h, w) == (out_h, out_w):
        return arr.copy()
    ys = np.clip(_sample_coords(out_h, h), 0.0, h - 1.0)
    xs = np.clip(_sample_coords(out_w, w), 0.0, w - 1.0)
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (ys - y0).reshape(-1, 1)
    fx = (xs - x0).reshape(1, -1)
    if arr.ndim == 3:
        fy = fy[:, :, None]
        fx = fx[:, :, None]
    top = arr[np.ix_(y0, x0)] * (1 - fx) + arr[np.ix_(y0, x1)] * fx
    bot = arr[np.ix_(y1, x0)] * (1 - fx) + arr[np.ix_(y1, x1)] * fx
    return top * (1 - fy) + bot * fy


def resize_nearest(arr: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Nearest-neighbour resample; used for masks so values stay exact."""
    h, w = arr.shape[:2]
    if (h, w) == (out_h, out_w):
        return arr.copy()
    ys = np.clip(np.round(_sample_coords(out_h, h)).astype(int), 0, h - 1)
    xs = np.clip(np.round(_sample_coords(out_w, w)).astype(int), 0, w - 1)
    return arr[np.ix_(ys, xs)]
