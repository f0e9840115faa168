"""HTTP facade for interactive relighting: upload a scene's maps once, then
re-render repeatedly under user-chosen light, edit, and refiner settings.

Scenes are immutable after upload and live in a small in-memory LRU store;
renders are pure functions of (scene, request body), so identical requests
return byte-identical PNGs.  Validation is explicit: every 400 names the
offending part or field.
"""

from __future__ import annotations

import threading
import time
import uuid
from collections import OrderedDict
from dataclasses import dataclass
from io import BytesIO
from typing import Any

import numpy as np
from fastapi import Body, FastAPI, File, Form, UploadFile
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse, Response

from .edits import edit_params_from_payload
from .image import AlphaMask, DepthMap, FloatImage, linear_to_srgb, srgb_to_linear
from .io import decode_normal_bytes, decode_png_bytes, encode_png_bytes, read_pfm_file
from .lighting import (
    FitReport,
    NormalMap,
    fit_light_constrained,
    normalize_normals,
    parse_light_spec,
)
from .optim import InsufficientDataError
from .reshade import (
    Refiner,
    Scene,
    harmonize_report,
    identity_refiner,
    scale_scene,
    smooth_refiner,
)

__all__ = ["SceneHandle", "SceneStore", "create_app"]

SCENE_PARTS = (
    "fg_image",
    "bg_image",
    "fg_albedo",
    "bg_albedo",
    "fg_shading",
    "bg_shading",
    "fg_normals",
    "bg_normals",
    "bg_depth",
    "mask",
)

RENDER_REFINERS: dict[str, Refiner] = {
    "identity": identity_refiner,
    "smooth": smooth_refiner,
}


@dataclass(frozen=True)
class SceneHandle:
    """One stored scene plus its cached background light fit."""

    id: str
    scene: Scene
    fit: FitReport
    created: float


class SceneStore:
    """Thread-safe LRU table of uploaded scenes."""

    def __init__(self, cap: int = 8) -> None:
        self._cap = max(1, int(cap))
        self._lock = threading.Lock()
        self._handles: OrderedDict[str, SceneHandle] = OrderedDict()

    def put(self, handle: SceneHandle) -> None:
        with self._lock:
            self._handles[handle.id] = handle
            self._handles.move_to_end(handle.id)
            while len(self._handles) > self._cap:
                self._handles.popitem(last=False)

    def get(self, scene_id: str) -> SceneHandle | None:
        with self._lock:
            handle = self._handles.get(scene_id)
            if handle is not None:
                self._handles.move_to_end(scene_id)
            return handle

    def __len__(self) -> int:
        with self._lock:
            return len(self._handles)


class _PartError(ValueError):
    """Upload part failed to decode; message already names the part."""


def _decode_pfm_bytes(data: bytes) -> np.ndarray:
    return read_pfm_file(BytesIO(data))


def _decode_linear_image(data: bytes, filename: str, gamma: float) -> FloatImage:
    if filename.lower().endswith(".pfm"):
        return FloatImage(np.maximum(_decode_pfm_bytes(data), 0.0))
    return srgb_to_linear(FloatImage(decode_png_bytes(data)), gamma)


def _decode_float_map(data: bytes, filename: str, part: str) -> np.ndarray:
    if not filename.lower().endswith(".pfm"):
        raise _PartError(f"part {part}: must be a .pfm file, got {filename!r}")
    return np.maximum(_decode_pfm_bytes(data), 0.0)


def _decode_mask(data: bytes, filename: str) -> AlphaMask:
    if filename.lower().endswith(".pfm"):
        arr = _decode_pfm_bytes(data)
    else:
        arr = decode_png_bytes(data)
    if arr.ndim == 3:
        arr = arr[:, :, 0]
    return AlphaMask(np.clip(arr, 0.0, 1.0))


def _decode_parts(parts: dict[str, tuple[bytes, str]], gamma: float) -> Scene:
    def image(name: str) -> FloatImage:
        data, fname = parts[name]
        return _decode_linear_image(data, fname, gamma)

    def float_map(name: str) -> np.ndarray:
        data, fname = parts[name]
        return _decode_float_map(data, fname, name)

    def normals(name: str) -> NormalMap:
        data, fname = parts[name]
        return normalize_normals(decode_normal_bytes(data, fname))

    try:
        return Scene(
            fg_image=image("fg_image"),
            bg_image=image("bg_image"),
            fg_albedo=FloatImage(float_map("fg_albedo")),
            bg_albedo=FloatImage(float_map("bg_albedo")),
            fg_shading=FloatImage(float_map("fg_shading")),
            bg_shading=FloatImage(float_map("bg_shading")),
            fg_normals=normals("fg_normals"),
            bg_normals=normals("bg_normals"),
            bg_depth=DepthMap(float_map("bg_depth")),
            alpha=_decode_mask(*parts["mask"]),
        )
    except _PartError:
        raise
    except ValueError as e:
        raise _PartError(str(e)) from e


def _handle_payload(handle: SceneHandle) -> dict[str, Any]:
    return {
        "id": handle.id,
        "width": handle.scene.width,
        "height": handle.scene.height,
        "fitted_light": handle.fit.light.to_dict(),
        "residual_mse": handle.fit.residual_mse,
        "degenerate": handle.fit.degenerate,
        "iterations": handle.fit.iterations,
    }


def _error(status: int, detail: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"detail": detail})


def create_app(store_cap: int = 8) -> FastAPI:
    """Build the service; scenes live in an LRU store capped at ``store_cap``."""
    app = FastAPI(title="relight")
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )
    store = SceneStore(store_cap)
    app.state.store = store

    @app.post("/scenes")
    def create_scene(
        fg_image: UploadFile | None = File(None),
        bg_image: UploadFile | None = File(None),
        fg_albedo: UploadFile | None = File(None),
        bg_albedo: UploadFile | None = File(None),
        fg_shading: UploadFile | None = File(None),
        bg_shading: UploadFile | None = File(None),
        fg_normals: UploadFile | None = File(None),
        bg_normals: UploadFile | None = File(None),
        bg_depth: UploadFile | None = File(None),
        mask: UploadFile | None = File(None),
        resolution: int = Form(1024),
        gamma: float = Form(2.2),
    ):
        uploads = {
            "fg_image": fg_image,
            "bg_image": bg_image,
            "fg_albedo": fg_albedo,
            "bg_albedo": bg_albedo,
            "fg_shading": fg_shading,
            "bg_shading": bg_shading,
            "fg_normals": fg_normals,
            "bg_normals": bg_normals,
            "bg_depth": bg_depth,
            "mask": mask,
        }
        for name in SCENE_PARTS:
            if uploads[name] is None:
                return _error(400, f"missing part: {name}")
        if resolution < 0:
            return _error(400, "resolution must be >= 0")
        if gamma <= 0:
            return _error(400, "gamma must be > 0")
        parts = {
            name: (part.file.read(), part.filename or "")
            for name, part in uploads.items()
        }
        try:
            scene = _decode_parts(parts, gamma)
        except _PartError as e:
            return _error(400, str(e))
        scene = scale_scene(scene, resolution)
        try:
            fit = fit_light_constrained(scene.bg_normals, scene.bg_shading)
        except InsufficientDataError as e:
            return _error(400, str(e))
        handle = SceneHandle(
            id=uuid.uuid4().hex[:12], scene=scene, fit=fit, created=time.time()
        )
        store.put(handle)
        payload = _handle_payload(handle)
        # A degenerate fit still stores the scene; the status code flags it.
        return JSONResponse(status_code=422 if fit.degenerate else 201, content=payload)

    @app.get("/scenes/{scene_id}")
    def get_scene(scene_id: str):
        handle = store.get(scene_id)
        if handle is None:
            return _error(404, f"unknown scene id: {scene_id}")
        return JSONResponse(status_code=200, content=_handle_payload(handle))

    @app.post("/scenes/{scene_id}/render")
    def render_scene(
        scene_id: str,
        payload: dict[str, Any] = Body(default_factory=dict),
        scale: int | None = None,
    ):
        handle = store.get(scene_id)
        if handle is None:
            return _error(404, f"unknown scene id: {scene_id}")
        if not isinstance(payload, dict):
            return _error(400, "request body must be a JSON object")
        unknown = set(payload) - {"light", "edits", "refiner"}
        if unknown:
            return _error(400, f"unknown field(s): {', '.join(sorted(unknown))}")
        light = None
        edit_params = None
        edit_active = None
        try:
            if payload.get("light") is not None:
                light = parse_light_spec(payload["light"])
            if payload.get("edits") is not None:
                edit_params, edit_active = edit_params_from_payload(payload["edits"])
        except (ValueError, TypeError) as e:
            return _error(400, str(e))
        refiner_name = payload.get("refiner", "identity")
        refiner = RENDER_REFINERS.get(refiner_name)
        if refiner is None:
            return _error(
                400,
                f"unknown refiner {refiner_name!r}; expected one of "
                f"{', '.join(sorted(RENDER_REFINERS))}",
            )
        scene = handle.scene
        if scale is not None:
            if scale <= 0:
                return _error(400, "scale must be a positive long-side size")
            scene = scale_scene(scene, scale)
        if light is None:
            light = handle.fit.light
        result = harmonize_report(
            scene, refiner, edit_params, light, edit_active=edit_active
        )
        png = encode_png_bytes(linear_to_srgb(result.composite).data, bit_depth=8)
        return Response(content=png, media_type="image/png")

    return app
