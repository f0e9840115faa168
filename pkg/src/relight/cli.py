"""Command-line entry points: light fitting, harmonized compositing,
self-supervised pair generation, and forced-choice response ranking.

Exit codes: 0 success, 1 I/O or parse failure, 2 numerical or degenerate
failure.  Set IC_LOG=debug (or info/warning/error) to control log output.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import shlex
import sys
from pathlib import Path

import numpy as np

from . import bt
from .edits import EditParams, edit_params_from_payload, fit_edit_params, match_masked_statistics
from .image import (
    AlphaMask,
    DepthMap,
    FloatImage,
    fit_long_side,
    linear_to_srgb,
    resize_bilinear,
    resize_nearest,
    srgb_to_linear,
)
from .io import read_normal_array, read_pfm, read_png, write_pfm, write_png
from .lighting import (
    FitOptions,
    LightModel,
    NormalMap,
    fit_light_constrained,
    fit_light_lstsq,
    normalize_normals,
    parse_light_spec,
    resize_normals,
)
from .optim import InsufficientDataError
from .reshade import (
    Refiner,
    Scene,
    external_refiner,
    generate_pair,
    harmonize_report,
    identity_refiner,
    scale_scene,
    smooth_refiner,
    write_pair_sample,
)

log = logging.getLogger("relight")

EXIT_OK = 0
EXIT_IO = 1
EXIT_NUMERIC = 2

SCENE_KEYS = (
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

DEFAULT_RESOLUTION = 1024


class ManifestError(ValueError):
    """Manifest missing, malformed, or referencing unreadable files."""


def _configure_logging() -> None:
    level_name = os.environ.get("IC_LOG", "warning").upper()
    level = getattr(logging, level_name, None)
    if not isinstance(level, int):
        level = logging.WARNING
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


def load_manifest(path: str | Path) -> dict:
    """Parse a scene manifest: map names to absolute paths plus settings.

    Paths are resolved relative to the manifest's directory.  ``resolution``
    (long side, default 1024) and ``gamma`` (default 2.2) ride along.
    """
    p = Path(path)
    try:
        data = json.loads(p.read_text())
    except OSError as e:
        raise ManifestError(f"cannot read manifest {p}: {e}") from e
    except json.JSONDecodeError as e:
        raise ManifestError(f"manifest {p} is not valid JSON: {e}") from e
    if not isinstance(data, dict):
        raise ManifestError(f"manifest {p} must be a JSON object")
    out: dict = {
        "resolution": data.get("resolution", DEFAULT_RESOLUTION),
        "gamma": data.get("gamma", 2.2),
    }
    if not isinstance(out["resolution"], int) or out["resolution"] <= 0:
        raise ManifestError("manifest resolution must be a positive integer")
    if not isinstance(out["gamma"], (int, float)) or out["gamma"] <= 0:
        raise ManifestError("manifest gamma must be a positive number")
    for key in SCENE_KEYS:
        if key in data:
            file_path = Path(data[key])
            if not file_path.is_absolute():
                file_path = p.parent / file_path
            if not file_path.exists():
                raise ManifestError(f"manifest entry {key}: no such file {file_path}")
            out[key] = file_path
    return out


def _load_linear_image(path: Path, gamma: float) -> FloatImage:
    """Display image: PNG is gamma-decoded, PFM is taken as linear."""
    if path.suffix.lower() == ".pfm":
        return FloatImage(np.maximum(read_pfm(path), 0.0))
    return srgb_to_linear(FloatImage(read_png(path)), gamma)


def _load_float_map(path: Path, what: str) -> np.ndarray:
    if path.suffix.lower() != ".pfm":
        raise ManifestError(f"{what} must be a .pfm file, got {path.name}")
    return np.maximum(read_pfm(path), 0.0)


def _load_mask(path: Path) -> AlphaMask:
    if path.suffix.lower() == ".pfm":
        arr = read_pfm(path)
    else:
        arr = read_png(path)
    if arr.ndim == 3:
        arr = arr[:, :, 0]
    return AlphaMask(np.clip(arr, 0.0, 1.0))


def _load_normals(path: Path) -> NormalMap:
    return normalize_normals(read_normal_array(path))


def load_scene(manifest: dict, resolution: int | None = None) -> Scene:
    """Build a Scene from a manifest, downscaling to the working resolution."""
    missing = [k for k in SCENE_KEYS if k not in manifest]
    if missing:
        raise ManifestError(f"manifest is missing entries: {', '.join(missing)}")
    gamma = float(manifest["gamma"])
    scene = Scene(
        fg_image=_load_linear_image(manifest["fg_image"], gamma),
        bg_image=_load_linear_image(manifest["bg_image"], gamma),
        fg_albedo=FloatImage(_load_float_map(manifest["fg_albedo"], "fg_albedo")),
        bg_albedo=FloatImage(_load_float_map(manifest["bg_albedo"], "bg_albedo")),
        fg_shading=FloatImage(_load_float_map(manifest["fg_shading"], "fg_shading")),
        bg_shading=FloatImage(_load_float_map(manifest["bg_shading"], "bg_shading")),
        fg_normals=_load_normals(manifest["fg_normals"]),
        bg_normals=_load_normals(manifest["bg_normals"]),
        bg_depth=DepthMap(_load_float_map(manifest["bg_depth"], "bg_depth")),
        alpha=_load_mask(manifest["mask"]),
    )
    long_side = int(manifest["resolution"]) if resolution is None else resolution
    return scale_scene(scene, long_side)


def _parse_json_arg(value: str, what: str) -> dict:
    """Accept inline JSON (starts with '{') or a path to a JSON file."""
    text = value.strip()
    if not text.startswith("{"):
        try:
            text = Path(value).read_text()
        except OSError as e:
            raise ManifestError(f"cannot read {what} file {value}: {e}") from e
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ManifestError(f"{what} is not valid JSON: {e}") from e
    if not isinstance(data, dict):
        raise ManifestError(f"{what} must be a JSON object")
    return data


def _make_refiner(choice: str) -> Refiner:
    if choice == "identity":
        return identity_refiner
    if choice == "smooth":
        return smooth_refiner
    if choice.startswith("external:"):
        command = shlex.split(choice[len("external:") :])
        return external_refiner(command)
    raise ManifestError(
        f"unknown refiner {choice!r}; expected identity, smooth, or external:<cmd>"
    )


def cmd_fit_light(args: argparse.Namespace) -> int:
    try:
        manifest = load_manifest(args.manifest)
        for key in ("bg_normals", "bg_shading"):
            if key not in manifest:
                raise ManifestError(f"fit-light needs manifest entry {key!r}")
        normals = _load_normals(manifest["bg_normals"])
        shading = FloatImage(_load_float_map(manifest["bg_shading"], "bg_shading"))
    except (ManifestError, OSError, ValueError) as e:
        log.error("input error: %s", e)
        return EXIT_IO
    resolution = args.resolution if args.resolution is not None else manifest["resolution"]
    if resolution > 0 and max(normals.height, normals.width) > resolution:
        out_h, out_w = fit_long_side(normals.height, normals.width, resolution)
        normals = resize_normals(normals, out_h, out_w)
        shading = FloatImage(resize_bilinear(shading.data, out_h, out_w))
    try:
        if args.lstsq:
            report = fit_light_lstsq(normals, shading)
        else:
            opts = FitOptions(octant_constraint=args.octant_constraint)
            report = fit_light_constrained(normals, shading, opts=opts)
    except InsufficientDataError as e:
        log.error("fit failed: %s", e)
        return EXIT_NUMERIC
    text = json.dumps(report.to_dict(), indent=2, sort_keys=True)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    if report.degenerate and not args.allow_degenerate:
        log.error("light fit is degenerate (ill-conditioned normals)")
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_harmonize(args: argparse.Namespace) -> int:
    try:
        manifest = load_manifest(args.manifest)
        if args.gamma is not None:
            manifest["gamma"] = args.gamma
        scene = load_scene(manifest, args.resolution)
    except (ManifestError, OSError, ValueError) as e:
        log.error("scene loading: %s", e)
        return EXIT_IO

    light = None
    edit_params = None
    edit_active = None
    try:
        if args.light:
            light = parse_light_spec(_parse_json_arg(args.light, "light override"))
        if args.edits == "auto":
            target = match_masked_statistics(
                scene.fg_albedo, scene.alpha, scene.bg_albedo, AlphaMask(1.0 - scene.alpha.data)
            )
            edit_params = fit_edit_params(scene.fg_albedo, target, scene.alpha)
        elif args.edits:
            edit_params, edit_active = edit_params_from_payload(
                _parse_json_arg(args.edits, "edit params")
            )
        refiner = _make_refiner(args.refiner)
    except ManifestError as e:
        log.error("parameter parsing: %s", e)
        return EXIT_IO
    except InsufficientDataError as e:
        log.error("edit fitting: %s", e)
        return EXIT_NUMERIC
    except ValueError as e:
        log.error("parameter parsing: %s", e)
        return EXIT_IO

    try:
        opts = FitOptions(octant_constraint=args.octant_constraint)
        result = harmonize_report(
            scene, refiner, edit_params, light, fit_opts=opts, edit_active=edit_active
        )
    except InsufficientDataError as e:
        log.error("light fitting: %s", e)
        return EXIT_NUMERIC
    except RuntimeError as e:
        log.error("refinement: %s", e)
        return EXIT_NUMERIC

    out_dir = Path(args.out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        gamma = float(manifest["gamma"])
        write_png(
            out_dir / "composite.png",
            linear_to_srgb(result.composite, gamma).data,
            bit_depth=args.bit_depth,
        )
        light_doc = {"light": result.light.to_dict()}
        if result.fit is not None:
            light_doc["fit"] = result.fit.to_dict()
        if edit_params is not None:
            light_doc["edits"] = edit_params.to_dict()
        (out_dir / "light.json").write_text(json.dumps(light_doc, indent=2, sort_keys=True))
        if not args.no_intermediates:
            write_pfm(out_dir / "albedo_composite.pfm", result.composite_albedo.data)
            write_pfm(out_dir / "shading_initial.pfm", result.initial_shading.data)
            write_pfm(out_dir / "shading_refined.pfm", result.refined_shading.data)
            write_pfm(out_dir / "composite_linear.pfm", result.composite.data)
    except OSError as e:
        log.error("writing outputs: %s", e)
        return EXIT_IO
    if result.fit is not None and result.fit.degenerate:
        log.warning("background light fit was degenerate; composite may be unreliable")
    print(str(out_dir / "composite.png"))
    return EXIT_OK


PAIR_MAPS = {
    "image": (".png", ".pfm"),
    "albedo": (".pfm",),
    "shading": (".pfm",),
    "normals": (".pfm", ".png"),
    "depth": (".pfm",),
    "mask": (".png", ".pfm"),
}


def _find_map(entry: Path, stem: str) -> Path:
    for ext in PAIR_MAPS[stem]:
        candidate = entry / f"{stem}{ext}"
        if candidate.exists():
            return candidate
    raise ManifestError(
        f"{entry.name}: missing {stem} map ({' or '.join(PAIR_MAPS[stem])})"
    )


def _gen_one_pair(entry: Path, out_dir: Path, seed: int, resolution: int, gamma: float) -> None:
    image = _load_linear_image(_find_map(entry, "image"), gamma)
    albedo = FloatImage(_load_float_map(_find_map(entry, "albedo"), "albedo"))
    shading = FloatImage(_load_float_map(_find_map(entry, "shading"), "shading"))
    normals = _load_normals(_find_map(entry, "normals"))
    depth = DepthMap(_load_float_map(_find_map(entry, "depth"), "depth"))
    mask = _load_mask(_find_map(entry, "mask"))
    if resolution > 0 and max(mask.height, mask.width) > resolution:
        out_h, out_w = fit_long_side(mask.height, mask.width, resolution)
        image = FloatImage(resize_bilinear(image.data, out_h, out_w))
        albedo = FloatImage(resize_bilinear(albedo.data, out_h, out_w))
        shading = FloatImage(resize_bilinear(shading.data, out_h, out_w))
        normals = resize_normals(normals, out_h, out_w)
        depth = DepthMap(resize_bilinear(depth.data, out_h, out_w))
        mask = AlphaMask(resize_nearest(mask.data, out_h, out_w))
    sample = generate_pair(image, mask, albedo, shading, normals, depth)
    write_pair_sample(out_dir, sample, extra_meta={"seed": seed, "source": entry.name})


def cmd_gen_pairs(args: argparse.Namespace) -> int:
    corpus = Path(args.corpus_dir)
    if not corpus.is_dir():
        log.error("corpus directory %s does not exist", corpus)
        return EXIT_IO
    entries = sorted(p for p in corpus.iterdir() if p.is_dir())
    if not entries:
        log.warning("corpus %s has no entries; nothing to do", corpus)
        return EXIT_OK
    out_root = Path(args.out_dir)
    failures = 0
    for entry in entries:
        try:
            _gen_one_pair(
                entry, out_root / entry.name, args.seed, args.resolution, args.gamma
            )
            log.info("wrote pair for %s", entry.name)
        except (ManifestError, OSError, ValueError) as e:
            failures += 1
            log.error("%s: %s", entry.name, e)
    if failures == len(entries):
        log.error("all %d corpus entries failed", failures)
        return EXIT_NUMERIC
    print(f"{len(entries) - failures}/{len(entries)} pairs written to {out_root}")
    return EXIT_OK


def cmd_bt_rank(args: argparse.Namespace) -> int:
    try:
        with open(args.csv_path, newline="", encoding="utf-8") as f:
            reader = csv.reader(f)
            header = next(reader, None)
            if header is None or [h.strip() for h in header] != [
                "item_id",
                "method_a",
                "method_b",
                "choice",
            ]:
                log.error(
                    "expected header item_id,method_a,method_b,choice, got %s", header
                )
                return EXIT_IO
            tally = bt.ingest_responses(reader)
    except OSError as e:
        log.error("cannot read %s: %s", args.csv_path, e)
        return EXIT_IO
    except ValueError as e:
        log.error("parse error: %s", e)
        return EXIT_IO
    try:
        scores = bt.bt_fit(tally, add_half=args.add_half)
    except ValueError as e:
        log.error("fit error: %s", e)
        return EXIT_NUMERIC
    print(bt.report_json(scores) if args.json else bt.report(scores))
    return EXIT_OK


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(store_cap=args.store_cap)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return EXIT_OK


def _add_common_scene_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument(
        "--resolution",
        type=int,
        default=None,
        help="working long side (downscale only; 0 keeps the input size; "
        "default: manifest value or 1024)",
    )
    p.add_argument(
        "--gamma",
        type=float,
        default=None,
        help="display gamma (default: manifest value or 2.2)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="relight",
        description="Illumination-aware image compositing in the intrinsic domain.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit-light", help="fit the 4-parameter light to a background")
    p_fit.add_argument("manifest", help="scene manifest JSON")
    p_fit.add_argument("--out", help="write the fit report JSON here as well")
    p_fit.add_argument("--lstsq", action="store_true", help="unconstrained ridge solve")
    p_fit.add_argument(
        "--octant-constraint",
        action="store_true",
        help="constrain every light component to be >= 0 (not just lz)",
    )
    p_fit.add_argument(
        "--allow-degenerate",
        action="store_true",
        help="exit 0 even when the fit is flagged degenerate",
    )
    _add_common_scene_flags(p_fit)
    p_fit.set_defaults(func=cmd_fit_light)

    p_harm = sub.add_parser("harmonize", help="composite a foreground into a background")
    p_harm.add_argument("manifest", help="scene manifest JSON")
    p_harm.add_argument("--out-dir", default="harmonize_out", help="output directory")
    p_harm.add_argument("--light", help="light override: JSON text or a path to JSON")
    p_harm.add_argument(
        "--edits",
        help="albedo edits: JSON text, a path to JSON, or 'auto' to fit "
        "statistics-matching edits",
    )
    p_harm.add_argument(
        "--refiner",
        default="identity",
        help="shading refiner: identity, smooth, or external:<command>",
    )
    p_harm.add_argument(
        "--octant-constraint",
        action="store_true",
        help="constrain every light component to be >= 0 (not just lz)",
    )
    p_harm.add_argument(
        "--no-intermediates",
        action="store_true",
        help="write only composite.png and light.json",
    )
    p_harm.add_argument(
        "--bit-depth", type=int, choices=(8, 16), default=8, help="composite PNG depth"
    )
    _add_common_scene_flags(p_harm)
    p_harm.set_defaults(func=cmd_harmonize)

    p_gen = sub.add_parser("gen-pairs", help="build self-supervised training pairs")
    p_gen.add_argument("corpus_dir", help="directory of per-image map directories")
    p_gen.add_argument("out_dir", help="output dataset directory")
    p_gen.add_argument("--seed", type=int, default=0, help="recorded in meta.json")
    p_gen.add_argument(
        "--resolution",
        type=int,
        default=DEFAULT_RESOLUTION,
        help="working long side (downscale only; 0 keeps input size)",
    )
    p_gen.add_argument("--gamma", type=float, default=2.2)
    p_gen.set_defaults(func=cmd_gen_pairs)

    p_bt = sub.add_parser("bt-rank", help="Bradley-Terry ranking of 2AFC responses")
    p_bt.add_argument("csv_path", help="CSV with header item_id,method_a,method_b,choice")
    p_bt.add_argument("--json", action="store_true", help="emit JSON instead of text")
    p_bt.add_argument(
        "--add-half",
        action="store_true",
        help="add 0.5 wins to every ordered pair (handles zero-win methods)",
    )
    p_bt.set_defaults(func=cmd_bt_rank)

    p_serve = sub.add_parser("serve", help="run the interactive HTTP service")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8000)
    p_serve.add_argument(
        "--store-cap", type=int, default=8, help="max scenes kept in memory (LRU)"
    )
    p_serve.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    _configure_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
