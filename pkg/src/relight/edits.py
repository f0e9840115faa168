"""Parameterized albedo edits: white balance, saturation, color curve, exposure.

The four operations act on linear RGB albedo, compose in a caller-chosen
order, and are confined to a masked region by blending over the original.
``fit_edit_params`` inverts the forward chain by optimization: each bounded
parameter is sigmoid-mapped onto its range so Adam can run unconstrained,
and gradients come from hand-written vector-Jacobian products rather than
numeric differencing.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .image import LUMA_WEIGHTS, AlphaMask, FloatImage, luminance
from .optim import InsufficientDataError, minimize

__all__ = [
    "EDIT_KINDS",
    "EditParams",
    "EditSample",
    "apply_exposure",
    "apply_saturation",
    "apply_white_balance",
    "apply_color_curve",
    "apply_edit_sequence",
    "sample_random_edits",
    "make_edit_sample",
    "fit_edit_params",
    "edit_params_from_payload",
    "match_masked_statistics",
]

# Canonical kind order used for letters, vectors, and sampling.
EDIT_KINDS = ("white_balance", "saturation", "color_curve", "exposure")
_LETTERS = {"white_balance": "W", "saturation": "S", "color_curve": "C", "exposure": "E"}
_KINDS_BY_LETTER = {v: k for k, v in _LETTERS.items()}

EXPOSURE_RANGE = (0.5, 2.0)
SATURATION_RANGE = (0.0, 2.0)
WHITE_BALANCE_RANGE = (0.1, 1.0)
COLOR_CURVE_RANGE = (0.0, 2.0)


def _check_scalar(name: str, value: float, lo: float, hi: float) -> float:
    v = float(value)
    if not np.isfinite(v) or v < lo or v > hi:
        raise ValueError(f"{name} must be in [{lo}, {hi}], got {value}")
    return v


def _check_triple(
    name: str, value, lo: float, hi: float, exclusive_lo: bool = False
) -> np.ndarray:
    arr = np.asarray(value, dtype=np.float64).reshape(-1)
    if arr.shape != (3,):
        raise ValueError(f"{name} must have 3 components, got shape {arr.shape}")
    below = arr.min() <= lo if exclusive_lo else arr.min() < lo
    if not np.all(np.isfinite(arr)) or below or arr.max() > hi:
        span = f"({lo}, {hi}]" if exclusive_lo else f"[{lo}, {hi}]"
        raise ValueError(f"{name} components must be in {span}, got {arr.tolist()}")
    arr.flags.writeable = False
    return arr


def order_to_kinds(order: str) -> tuple[str, ...]:
    """Decode a 4-letter order string like "WSCE" into kind names."""
    if not isinstance(order, str) or sorted(order) != sorted("WSCE"):
        raise ValueError(f"order must be a permutation of 'WSCE', got {order!r}")
    return tuple(_KINDS_BY_LETTER[ch] for ch in order)


@dataclass(frozen=True)
class EditParams:
    """One point in the edit space plus the order the edits compose in.

    ``order`` is a permutation string over W (white balance), S (saturation),
    C (color curve), E (exposure); its first letter is applied first.
    """

    white_balance: np.ndarray
    saturation: float
    color_curve: np.ndarray
    exposure: float
    order: str = "WSCE"

    def __post_init__(self) -> None:
        object.__setattr__(
            self,
            "white_balance",
            _check_triple("white_balance", self.white_balance, *WHITE_BALANCE_RANGE),
        )
        object.__setattr__(
            self,
            "saturation",
            _check_scalar("saturation", self.saturation, *SATURATION_RANGE),
        )
        object.__setattr__(
            self,
            "color_curve",
            _check_triple(
                "color_curve", self.color_curve, *COLOR_CURVE_RANGE, exclusive_lo=True
            ),
        )
        object.__setattr__(
            self, "exposure", _check_scalar("exposure", self.exposure, *EXPOSURE_RANGE)
        )
        order_to_kinds(self.order)

    @classmethod
    def identity(cls, order: str = "WSCE") -> "EditParams":
        return cls(
            white_balance=np.ones(3),
            saturation=1.0,
            color_curve=np.ones(3),
            exposure=1.0,
            order=order,
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, EditParams):
            return NotImplemented
        return (
            np.array_equal(self.white_balance, other.white_balance)
            and self.saturation == other.saturation
            and np.array_equal(self.color_curve, other.color_curve)
            and self.exposure == other.exposure
            and self.order == other.order
        )

    def value_of(self, kind: str):
        if kind not in EDIT_KINDS:
            raise ValueError(f"unknown edit kind {kind!r}")
        return getattr(self, kind)

    def to_dict(self) -> dict:
        return {
            "white_balance": [float(g) for g in self.white_balance],
            "saturation": self.saturation,
            "color_curve": [float(k) for k in self.color_curve],
            "exposure": self.exposure,
            "order": self.order,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EditParams":
        try:
            return cls(
                white_balance=np.asarray(d["white_balance"], dtype=np.float64),
                saturation=float(d["saturation"]),
                color_curve=np.asarray(d["color_curve"], dtype=np.float64),
                exposure=float(d["exposure"]),
                order=d.get("order", "WSCE"),
            )
        except KeyError as e:
            raise ValueError(f"edit record is missing field {e.args[0]!r}") from e

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "EditParams":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class EditSample:
    """A (clean, edited) albedo pair for mismatch-correction training."""

    original_albedo: FloatImage
    edited_albedo: FloatImage
    mask: AlphaMask
    params: EditParams
    active_edits: tuple[str, ...]


def _require_rgb(img: FloatImage, name: str) -> None:
    if img.channels != 3:
        raise ValueError(f"{name} must have 3 channels, got {img.channels}")


# Raw-array kernels shared by the public ops and the fitter's tape.


def _exposure_fwd(x: np.ndarray, k: float) -> np.ndarray:
    return x * k


def _saturation_fwd(x: np.ndarray, s: float) -> np.ndarray:
    lum = x @ LUMA_WEIGHTS
    # s*x + (1-s)*L rather than L + s*(x-L): exact at both s=0 and s=1.
    return np.maximum(s * x + (1.0 - s) * lum[:, :, None], 0.0)


def _white_balance_fwd(x: np.ndarray, g: np.ndarray) -> np.ndarray:
    return x * g


def _color_curve_fwd(x: np.ndarray, k: np.ndarray) -> np.ndarray:
    t = np.clip(x, 0.0, 1.0)
    return np.power(t, 1.0 / np.maximum(k, 0.01))


def apply_exposure(albedo: FloatImage, k: float) -> FloatImage:
    """Scale brightness: out = k * albedo."""
    _require_rgb(albedo, "albedo")
    _check_scalar("exposure", k, *EXPOSURE_RANGE)
    return FloatImage(_exposure_fwd(albedo.data, float(k)))


def apply_saturation(albedo: FloatImage, s: float) -> FloatImage:
    """Lerp between per-pixel luminance (s=0) and the input colors (s=1)."""
    _require_rgb(albedo, "albedo")
    _check_scalar("saturation", s, *SATURATION_RANGE)
    return FloatImage(_saturation_fwd(albedo.data, float(s)))


def apply_white_balance(albedo: FloatImage, gains) -> FloatImage:
    """Per-channel gains, attenuating only (each gain is at most 1)."""
    _require_rgb(albedo, "albedo")
    g = _check_triple("white_balance", gains, *WHITE_BALANCE_RANGE)
    return FloatImage(_white_balance_fwd(albedo.data, g))


def apply_color_curve(albedo: FloatImage, curve) -> FloatImage:
    """Per-channel power curve on [0, 1]: out = clamp(a, 0, 1)^(1/max(k, 0.01)).

    k = 1 is the identity, k > 1 brightens mid-tones, k near 0 crushes them.
    """
    _require_rgb(albedo, "albedo")
    k = _check_triple("color_curve", curve, *COLOR_CURVE_RANGE, exclusive_lo=True)
    return FloatImage(_color_curve_fwd(albedo.data, k))


_APPLY_RAW = {
    "exposure": _exposure_fwd,
    "saturation": _saturation_fwd,
    "white_balance": _white_balance_fwd,
    "color_curve": _color_curve_fwd,
}


def apply_edit_sequence(
    albedo: FloatImage,
    mask: AlphaMask,
    params: EditParams,
    active: tuple[str, ...] | None = None,
) -> FloatImage:
    """Apply the active edits in params.order, confined to the masked region.

    The full image is edited, then blended over the original as
    out = original + mask * (edited - original), so mask = 0 pixels stay
    bit-identical and identity parameters return the input unchanged.
    An empty active set is a no-op.
    """
    _require_rgb(albedo, "albedo")
    if (mask.height, mask.width) != (albedo.height, albedo.width):
        raise ValueError(
            f"mask {mask.height}x{mask.width} does not match "
            f"albedo {albedo.height}x{albedo.width}"
        )
    chosen = EDIT_KINDS if active is None else tuple(active)
    for kind in chosen:
        if kind not in EDIT_KINDS:
            raise ValueError(f"unknown edit kind {kind!r}")
    base = albedo.data
    edited = base
    for kind in order_to_kinds(params.order):
        if kind in chosen:
            edited = _APPLY_RAW[kind](edited, params.value_of(kind))
    if edited is base:
        return albedo
    out = base + mask.data[:, :, None] * (edited - base)
    return FloatImage(np.maximum(out, 0.0))


def sample_random_edits(rng_seed: int) -> tuple[EditParams, tuple[str, ...]]:
    """Draw a random edit: 1 to 4 active kinds, random order, uniform values.

    Deterministic for a fixed seed.
    """
    rng = np.random.default_rng(rng_seed)
    count = int(rng.integers(1, 5))
    perm = rng.permutation(4)
    order = "".join(_LETTERS[EDIT_KINDS[i]] for i in perm)
    picked = rng.choice(4, size=count, replace=False)
    active = tuple(EDIT_KINDS[i] for i in sorted(picked))
    params = EditParams(
        white_balance=rng.uniform(*WHITE_BALANCE_RANGE, size=3),
        saturation=float(rng.uniform(*SATURATION_RANGE)),
        color_curve=rng.uniform(*COLOR_CURVE_RANGE, size=3),
        exposure=float(rng.uniform(*EXPOSURE_RANGE)),
        order=order,
    )
    return params, active


def make_edit_sample(albedo: FloatImage, mask: AlphaMask, rng_seed: int) -> EditSample:
    """Degrade a masked albedo region with random edits, keeping the clean copy."""
    params, active = sample_random_edits(rng_seed)
    edited = apply_edit_sequence(albedo, mask, params, active)
    return EditSample(
        original_albedo=albedo,
        edited_albedo=edited,
        mask=mask,
        params=params,
        active_edits=active,
    )


# Fitting: boxes are handled by x = lo + (hi - lo) * sigmoid(u), so Adam runs
# unconstrained in u.  Vector layout: [wb_r, wb_g, wb_b, sat, curve_r,
# curve_g, curve_b, exposure].

_SLICES = {
    "white_balance": slice(0, 3),
    "saturation": slice(3, 4),
    "color_curve": slice(4, 7),
    "exposure": slice(7, 8),
}
_LO = np.array([0.1, 0.1, 0.1, 0.0, 0.0, 0.0, 0.0, 0.5])
_HI = np.array([1.0, 1.0, 1.0, 2.0, 2.0, 2.0, 2.0, 2.0])
_IDENTITY_VEC = np.array([1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0])


def _sigmoid(u: np.ndarray) -> np.ndarray:
    out = np.empty_like(u)
    pos = u >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-u[pos]))
    ez = np.exp(u[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _box_decode(u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Map unconstrained u into the parameter box; also return dx/du."""
    sig = _sigmoid(u)
    x = _LO + (_HI - _LO) * sig
    return x, (_HI - _LO) * sig * (1.0 - sig)


def _box_encode(x: np.ndarray, clip: float = 4.0) -> np.ndarray:
    t = np.clip((x - _LO) / (_HI - _LO), 1e-6, 1.0 - 1e-6)
    return np.clip(np.log(t / (1.0 - t)), -clip, clip)


def _forward_tape(
    x0: np.ndarray, vec: np.ndarray, kinds: tuple[str, ...], chosen: tuple[str, ...]
) -> tuple[np.ndarray, list]:
    """Run the edit chain on a raw array, recording inputs for the backward pass."""
    tape = []
    x = x0
    for kind in kinds:
        if kind not in chosen:
            continue
        p = vec[_SLICES[kind]]
        tape.append((kind, x, p))
        x = _APPLY_RAW[kind](x, float(p[0]) if p.size == 1 else p)
    return x, tape


def _backward_tape(grad_out: np.ndarray, tape: list) -> tuple[np.ndarray, np.ndarray]:
    """Accumulate d(objective)/d(params) and d(objective)/d(input)."""
    grad_vec = np.zeros(8)
    g = grad_out
    for kind, x, p in reversed(tape):
        if kind == "exposure":
            grad_vec[_SLICES[kind]] += np.sum(g * x)
            g = g * p[0]
        elif kind == "white_balance":
            grad_vec[_SLICES[kind]] += np.sum(g * x, axis=(0, 1))
            g = g * p
        elif kind == "saturation":
            s = p[0]
            lum = x @ LUMA_WEIGHTS
            pre = s * x + (1.0 - s) * lum[:, :, None]
            gg = np.where(pre > 0.0, g, 0.0)
            grad_vec[_SLICES[kind]] += np.sum(gg * (x - lum[:, :, None]))
            gsum = gg.sum(axis=2)
            g = s * gg + (1.0 - s) * gsum[:, :, None] * LUMA_WEIGHTS
        elif kind == "color_curve":
            t = np.clip(x, 0.0, 1.0)
            k = np.maximum(p, 0.01)
            e = 1.0 / k
            interior = t > 0.0
            y = np.power(t, e)
            # dy/dt = e * t^(e-1), zeroed where the clamp is flat or t = 0
            dt = np.where(interior, e * np.power(np.maximum(t, 1e-300), e - 1.0), 0.0)
            dt = np.where((x > 0.0) & (x < 1.0), dt, 0.0)
            log_t = np.where(interior, np.log(np.maximum(t, 1e-300)), 0.0)
            grad_e = np.sum(np.where(interior, g * y * log_t, 0.0), axis=(0, 1))
            dk = np.where(p > 0.01, -1.0 / (k * k), 0.0)
            grad_vec[_SLICES[kind]] += grad_e * dk
            g = g * dt
        else:  # pragma: no cover - kinds are validated upstream
            raise AssertionError(kind)
    return grad_vec, g


def _masked_mse(out: np.ndarray, target: np.ndarray, weights: np.ndarray) -> float:
    diff = out - target
    return float(np.sum(weights[:, :, None] * diff * diff) / (3.0 * weights.sum()))


def fit_edit_params(
    fg_albedo: FloatImage,
    target_albedo: FloatImage,
    mask: AlphaMask,
    order: str = "WSCE",
    active: tuple[str, ...] | None = None,
    iterations: int = 600,
    lr: float = 0.05,
) -> EditParams:
    """Recover edit parameters that pull fg_albedo toward target_albedo.

    Minimizes the mask-weighted MSE of apply_edit_sequence(fg_albedo, ...)
    against the target with Adam in the sigmoid-reparameterized box.  Fitting
    can be restricted to a subset of edit kinds via ``active`` (the rest stay
    at their identity values), which keeps single-edit recovery well posed;
    by default all four are fit.  The returned parameters never score worse
    than the identity edit.
    """
    _require_rgb(fg_albedo, "fg_albedo")
    _require_rgb(target_albedo, "target_albedo")
    if fg_albedo.data.shape != target_albedo.data.shape:
        raise ValueError(
            f"foreground shape {fg_albedo.data.shape} does not match "
            f"target shape {target_albedo.data.shape}"
        )
    if (mask.height, mask.width) != (fg_albedo.height, fg_albedo.width):
        raise ValueError("mask dimensions do not match the albedo inputs")
    kinds = order_to_kinds(order)
    chosen = kinds if active is None else tuple(active)
    for kind in chosen:
        if kind not in EDIT_KINDS:
            raise ValueError(f"unknown edit kind {kind!r}")
    weights = mask.data
    n_active = int(np.count_nonzero(weights > 0.0))
    if n_active <= 16:
        raise InsufficientDataError(
            f"edit fit needs more than 16 masked pixels, got {n_active}"
        )
    base = fg_albedo.data
    target = target_albedo.data
    wsum = 3.0 * weights.sum()
    w3 = weights[:, :, None]

    def objective(u: np.ndarray) -> tuple[float, np.ndarray]:
        vec, dvec = _box_decode(u)
        edited, tape = _forward_tape(base, vec, kinds, chosen)
        out = base + w3 * (edited - base)
        diff = out - target
        value = float(np.sum(w3 * diff * diff) / wsum)
        grad_edited = (2.0 / wsum) * w3 * w3 * diff
        grad_vec, _ = _backward_tape(grad_edited, tape)
        return value, grad_vec * dvec

    u_best, _ = minimize(objective, _box_encode(_IDENTITY_VEC), iters=iterations, lr=lr)
    vec, _ = _box_decode(u_best)
    fitted_full = _IDENTITY_VEC.copy()
    for kind in chosen:
        fitted_full[_SLICES[kind]] = vec[_SLICES[kind]]
    candidate = EditParams(
        white_balance=fitted_full[0:3],
        saturation=float(fitted_full[3]),
        color_curve=fitted_full[4:7],
        exposure=float(fitted_full[7]),
        order=order,
    )
    identity = EditParams.identity(order)
    cand_mse = _masked_mse(
        apply_edit_sequence(fg_albedo, mask, candidate, chosen).data, target, weights
    )
    ident_mse = _masked_mse(
        apply_edit_sequence(fg_albedo, mask, identity, chosen).data, target, weights
    )
    # The sigmoid cannot land exactly on range endpoints (wb identity sits at
    # 1.0), so an explicit identity candidate keeps the no-op case exact.
    return identity if ident_mse <= cand_mse else candidate


def edit_params_from_payload(d: dict) -> tuple[EditParams, tuple[str, ...]]:
    """Decode a possibly-partial edit payload; absent fields stay identity.

    Returns the params plus the active kinds: taken from d["active"] when
    given, otherwise the kinds whose fields are present in the payload.
    Unknown keys raise by name so callers can surface precise errors.
    """
    if not isinstance(d, dict):
        raise ValueError("edit payload must be a JSON object")
    allowed = set(EDIT_KINDS) | {"order", "active"}
    unknown = set(d) - allowed
    if unknown:
        raise ValueError(f"unknown edit field(s): {', '.join(sorted(unknown))}")
    params = EditParams(
        white_balance=np.asarray(d.get("white_balance", np.ones(3)), dtype=np.float64),
        saturation=float(d.get("saturation", 1.0)),
        color_curve=np.asarray(d.get("color_curve", np.ones(3)), dtype=np.float64),
        exposure=float(d.get("exposure", 1.0)),
        order=d.get("order", "WSCE"),
    )
    if "active" in d:
        active = tuple(d["active"])
        for kind in active:
            if kind not in EDIT_KINDS:
                raise ValueError(f"unknown edit kind in active: {kind!r}")
    else:
        active = tuple(k for k in EDIT_KINDS if k in d)
    return params, active


def match_masked_statistics(
    fg_albedo: FloatImage,
    fg_mask: AlphaMask,
    bg_albedo: FloatImage,
    bg_mask: AlphaMask,
) -> FloatImage:
    """Heuristic harmonization target: map foreground per-channel masked
    mean/std onto the background's masked statistics.

    Used when no ground-truth albedo is available to fit edits against.
    """
    _require_rgb(fg_albedo, "fg_albedo")
    _require_rgb(bg_albedo, "bg_albedo")
    out = fg_albedo.data.copy()
    fw = fg_mask.data.reshape(-1)
    bw = bg_mask.data.reshape(-1)
    if fw.sum() <= 0 or bw.sum() <= 0:
        raise InsufficientDataError("statistic matching needs nonempty masks")
    f = fg_albedo.data.reshape(-1, 3)
    b = bg_albedo.data.reshape(-1, 3)
    for c in range(3):
        mu_f = float(np.average(f[:, c], weights=fw))
        mu_b = float(np.average(b[:, c], weights=bw))
        var_f = float(np.average((f[:, c] - mu_f) ** 2, weights=fw))
        var_b = float(np.average((b[:, c] - mu_b) ** 2, weights=bw))
        scale = np.sqrt(var_b / var_f) if var_f > 1e-12 else 1.0
        out[:, :, c] = (out[:, :, c] - mu_f) * scale + mu_b
    return FloatImage(np.maximum(out, 0.0))
