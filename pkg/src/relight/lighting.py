"""Parametric scene illumination: a directional light plus constant ambient.

Shading is rendered from surface normals with the diffuse dot-product model,
and the four light parameters are recovered from a scene's normals and
shading either with a projected-Adam fit (the default, which enforces the
camera-facing and non-negative-ambient constraints) or with a plain ridge
least-squares solve (the fast unconstrained variant used during batch pair
generation).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .image import AlphaMask, FloatImage, resize_bilinear
from .optim import InsufficientDataError, minimize

__all__ = [
    "NormalMap",
    "LightModel",
    "FitOptions",
    "FitReport",
    "InsufficientDataError",
    "normalize_normals",
    "resize_normals",
    "render_lambertian",
    "fit_light_lstsq",
    "fit_light_constrained",
    "light_from_angles",
    "parse_light_spec",
]

# Normal-equation condition number beyond which the fit is flagged degenerate.
DEGENERATE_CONDITION = 1e8


@dataclass(frozen=True)
class NormalMap:
    """H x W field of unit 3-vectors (nx, ny, nz) in camera space.

    The convention here is nz >= 0: normals face the camera.  Estimator
    outputs with the opposite sign must be flipped before construction;
    ``normalize_normals`` handles small numeric violations.
    """

    data: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise ValueError(f"normal map must be (H, W, 3), got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("normal map contains non-finite samples")
        norms = np.linalg.norm(arr, axis=2)
        err = float(np.abs(norms - 1.0).max())
        if err > 1e-3:
            raise ValueError(f"normals deviate from unit length by {err}")
        min_nz = float(arr[:, :, 2].min())
        if min_nz < 0.0:
            raise ValueError(f"normal map has nz = {min_nz} < 0 (must face the camera)")
        out = arr.copy()
        out.flags.writeable = False
        object.__setattr__(self, "data", out)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


def normalize_normals(vectors: np.ndarray) -> NormalMap:
    """Sanitize a raw vector field into a valid NormalMap.

    Renormalizes to unit length (zero vectors become (0, 0, 1)) and clamps
    slightly negative nz from quantization; genuinely back-facing normals
    still raise.
    """
    arr = np.asarray(vectors, dtype=np.float64).copy()
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"normal field must be (H, W, 3), got shape {arr.shape}")
    nz = arr[:, :, 2]
    if float(nz.min()) < -1e-3:
        raise ValueError(
            f"normal field has nz = {float(nz.min())} < 0; flip the convention first"
        )
    np.maximum(nz, 0.0, out=nz)
    norms = np.linalg.norm(arr, axis=2, keepdims=True)
    arr = np.where(norms > 1e-12, arr / np.maximum(norms, 1e-12), [0.0, 0.0, 1.0])
    return NormalMap(arr)


def resize_normals(normals: NormalMap, out_h: int, out_w: int) -> NormalMap:
    """Bilinear resample followed by renormalization."""
    return normalize_normals(resize_bilinear(normals.data, out_h, out_w))


@dataclass(frozen=True)
class LightModel:
    """Directional light vector (magnitude = intensity) plus ambient level.

    Physically meaningful models keep ambient >= 0 and the z component of
    ``direction`` non-negative; the constrained fitter guarantees this.  The
    type itself only requires finite values so the unconstrained solver can
    report infeasible optima verbatim.
    """

    direction: np.ndarray
    ambient: float

    def __post_init__(self) -> None:
        vec = np.asarray(self.direction, dtype=np.float64).reshape(3)
        if not np.all(np.isfinite(vec)) or not np.isfinite(self.ambient):
            raise ValueError("light parameters must be finite")
        vec.flags.writeable = False
        object.__setattr__(self, "direction", vec)
        object.__setattr__(self, "ambient", float(self.ambient))

    def to_dict(self) -> dict:
        lx, ly, lz = self.direction
        return {"lx": lx, "ly": ly, "lz": lz, "c": self.ambient}

    @classmethod
    def from_dict(cls, d: dict) -> "LightModel":
        try:
            return cls(
                direction=np.array([d["lx"], d["ly"], d["lz"]], dtype=np.float64),
                ambient=float(d["c"]),
            )
        except KeyError as e:
            raise ValueError(f"light record is missing field {e.args[0]!r}") from e

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "LightModel":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class FitOptions:
    """Knobs for the constrained fit."""

    iterations: int = 500
    lr: float = 1e-2
    ridge: float = 1e-6
    octant_constraint: bool = False  # require all of l >= 0, not just lz


@dataclass(frozen=True)
class FitReport:
    light: LightModel
    residual_mse: float
    iterations: int
    degenerate: bool

    def to_dict(self) -> dict:
        return {
            "light": self.light.to_dict(),
            "residual_mse": self.residual_mse,
            "iterations": self.iterations,
            "degenerate": self.degenerate,
        }


def render_lambertian(normals: NormalMap, light: LightModel) -> FloatImage:
    """Diffuse shading: max(0, n . l + ambient) per pixel.

    Back-facing responses are clamped at zero; shading maps are physically
    non-negative.
    """
    s = normals.data @ light.direction + light.ambient
    return FloatImage(np.maximum(s, 0.0))


def _design_matrix(
    normals: NormalMap, shading: FloatImage, mask: AlphaMask | None
) -> tuple[np.ndarray, np.ndarray]:
    if (normals.height, normals.width) != (shading.height, shading.width):
        raise ValueError(
            f"dimension mismatch: normals {normals.height}x{normals.width} "
            f"vs shading {shading.height}x{shading.width}"
        )
    if shading.channels != 1:
        raise ValueError(f"shading must be single-channel, got {shading.channels}")
    n = normals.data.reshape(-1, 3)
    s = shading.data.reshape(-1)
    if mask is not None:
        if (mask.height, mask.width) != (normals.height, normals.width):
            raise ValueError("mask dimensions do not match the fit inputs")
        keep = mask.data.reshape(-1) > 0.5
        n, s = n[keep], s[keep]
    if n.shape[0] < 4:
        raise InsufficientDataError(
            f"light fit needs at least 4 usable pixels, got {n.shape[0]}"
        )
    a = np.concatenate([n, np.ones((n.shape[0], 1))], axis=1)
    return a, s


def _ridge_solution(
    a: np.ndarray, s: np.ndarray, ridge: float
) -> tuple[np.ndarray, bool]:
    ata = a.T @ a
    cond = float(np.linalg.cond(ata))
    degenerate = (not np.isfinite(cond)) or cond > DEGENERATE_CONDITION
    # Tikhonov term on the direction components only keeps the system solvable.
    reg = np.diag([ridge, ridge, ridge, 0.0])
    theta = np.linalg.solve(ata + reg, a.T @ s)
    return theta, degenerate


def _residual_mse(a: np.ndarray, s: np.ndarray, theta: np.ndarray) -> float:
    r = a @ theta - s
    return float(np.mean(r * r))


def fit_light_lstsq(
    normals: NormalMap,
    shading: FloatImage,
    mask: AlphaMask | None = None,
    ridge: float = 1e-6,
) -> FitReport:
    """Unconstrained 4-unknown ridge solve of [nx ny nz 1] . theta = shading.

    Fast batch variant: no positivity projection, so the returned parameters
    may be infeasible for rendering conventions that expect them positive.
    """
    a, s = _design_matrix(normals, shading, mask)
    theta, degenerate = _ridge_solution(a, s, ridge)
    light = LightModel(direction=theta[:3], ambient=theta[3])
    return FitReport(
        light=light,
        residual_mse=_residual_mse(a, s, theta),
        iterations=0,
        degenerate=degenerate,
    )


def fit_light_constrained(
    normals: NormalMap,
    shading: FloatImage,
    mask: AlphaMask | None = None,
    opts: FitOptions = FitOptions(),
) -> FitReport:
    """Recover light parameters by projected Adam on the shading residual.

    Minimizes the mean squared difference between rendered and observed
    shading, projecting after every step so the ambient term stays >= 0 and
    the light vector stays camera-facing (lz >= 0; with ``octant_constraint``
    every component of l is kept >= 0).  Starts from the ridge least-squares
    solution projected into the feasible set, and returns the best feasible
    point seen, so the result never regresses below its initialization.
    """
    a, s = _design_matrix(normals, shading, mask)
    theta0, degenerate = _ridge_solution(a, s, opts.ridge)
    n_pixels = a.shape[0]

    def project(theta: np.ndarray) -> np.ndarray:
        out = theta.copy()
        if opts.octant_constraint:
            out[:3] = np.maximum(out[:3], 0.0)
        else:
            out[2] = max(out[2], 0.0)
        out[3] = max(out[3], 0.0)
        return out

    def objective(theta: np.ndarray) -> tuple[float, np.ndarray]:
        r = a @ theta - s
        return float(np.mean(r * r)), (2.0 / n_pixels) * (a.T @ r)

    theta, value = minimize(
        objective, project(theta0), project, iters=opts.iterations, lr=opts.lr
    )
    light = LightModel(direction=theta[:3], ambient=theta[3])
    return FitReport(
        light=light,
        residual_mse=value,
        iterations=opts.iterations,
        degenerate=degenerate,
    )


def light_from_angles(
    azimuth: float, elevation: float, intensity: float, ambient: float
) -> LightModel:
    """Human-friendly parameterization: angles + strength instead of a raw vector.

    Azimuth 0 / elevation 0 points down the camera axis (0, 0, 1); azimuth
    rotates toward +x, elevation toward +y.
    """
    if intensity < 0.0:
        raise ValueError(f"intensity must be >= 0, got {intensity}")
    if ambient < 0.0:
        raise ValueError(f"ambient must be >= 0, got {ambient}")
    direction = intensity * np.array(
        [
            np.cos(elevation) * np.sin(azimuth),
            np.sin(elevation),
            np.cos(elevation) * np.cos(azimuth),
        ]
    )
    return LightModel(direction=direction, ambient=ambient)


_VECTOR_KEYS = frozenset({"lx", "ly", "lz", "c"})
_ANGLE_KEYS = frozenset({"azimuth", "elevation", "intensity", "ambient"})


def parse_light_spec(d: dict) -> LightModel:
    """Decode a light from a JSON-style dict, raw-vector or angle form.

    Raw form needs all of lx/ly/lz/c; angle form accepts any subset of
    azimuth/elevation/intensity/ambient with identity-ish defaults (0, 0, 1,
    0).  Unknown keys raise by name so callers can surface precise errors.
    """
    if not isinstance(d, dict):
        raise ValueError("light payload must be a JSON object")
    keys = set(d)
    if keys & _VECTOR_KEYS:
        unknown = keys - _VECTOR_KEYS
        if unknown:
            raise ValueError(f"unknown light field(s): {', '.join(sorted(unknown))}")
        missing = _VECTOR_KEYS - keys
        if missing:
            raise ValueError(f"light payload missing {', '.join(sorted(missing))}")
        return LightModel.from_dict(d)
    if keys & _ANGLE_KEYS:
        unknown = keys - _ANGLE_KEYS
        if unknown:
            raise ValueError(f"unknown light field(s): {', '.join(sorted(unknown))}")
        return light_from_angles(
            azimuth=float(d.get("azimuth", 0.0)),
            elevation=float(d.get("elevation", 0.0)),
            intensity=float(d.get("intensity", 1.0)),
            ambient=float(d.get("ambient", 0.0)),
        )
    raise ValueError(
        "light payload needs lx/ly/lz/c or azimuth/elevation/intensity/ambient"
    )
