/** DOM wiring for the interactive harmonization page.
 *
 * Everything stateful lives in RenderSession; this file only reads the
 * controls, forwards changes, and paints previews. The page works against
 * any service instance reachable from the browser; the base URL field is
 * the only configuration.
 */

import { ApiClient, SCENE_PART_NAMES, type ScenePartName } from "./api.js";
import { naiveComposite, maskOutline } from "./compare.js";
import {
  AMBIENT_RANGE,
  AZIMUTH_RANGE,
  COLOR_CURVE_FLOOR,
  COLOR_CURVE_RANGE,
  ELEVATION_RANGE,
  EXPOSURE_RANGE,
  INTENSITY_RANGE,
  SATURATION_RANGE,
  WHITE_BALANCE_RANGE,
  type EditValues,
  type LightAngles,
  type Triple,
} from "./params.js";
import { decodePfm, type PfmImage } from "./pfm.js";
import { RenderSession } from "./session.js";

type View = "harmonized" | "naive";

interface AppState {
  session: RenderSession | null;
  naive: { width: number; height: number; rgba: Uint8ClampedArray } | null;
  outline: { width: number; height: number; outline: Uint8Array } | null;
  view: View;
  previewUrl: string | null;
}

const state: AppState = {
  session: null,
  naive: null,
  outline: null,
  view: "harmonized",
  previewUrl: null,
};

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function setBanner(id: string, message: string | null): void {
  const node = el<HTMLDivElement>(id);
  node.textContent = message ?? "";
  node.hidden = message === null;
}

function sliderValue(id: string): number {
  return Number(el<HTMLInputElement>(id).value);
}

function setSlider(id: string, value: number): void {
  const input = el<HTMLInputElement>(id);
  input.value = String(value);
  const label = document.getElementById(`${id}-value`);
  if (label) label.textContent = value.toFixed(2);
}

function configureSlider(id: string, lo: number, hi: number, step: number): void {
  const input = el<HTMLInputElement>(id);
  input.min = String(lo);
  input.max = String(hi);
  input.step = String(step);
}

function readLight(): LightAngles {
  return {
    azimuth: sliderValue("azimuth"),
    elevation: sliderValue("elevation"),
    intensity: sliderValue("intensity"),
    ambient: sliderValue("ambient"),
  };
}

function readEdits(): EditValues {
  const triple = (prefix: string): Triple => [
    sliderValue(`${prefix}-r`),
    sliderValue(`${prefix}-g`),
    sliderValue(`${prefix}-b`),
  ];
  return {
    exposure: sliderValue("exposure"),
    saturation: sliderValue("saturation"),
    whiteBalance: triple("wb"),
    colorCurve: triple("curve"),
  };
}

function pushLightToSliders(light: LightAngles): void {
  setSlider("azimuth", light.azimuth);
  setSlider("elevation", light.elevation);
  setSlider("intensity", light.intensity);
  setSlider("ambient", light.ambient);
}

async function decodeLayer(file: File, gamma: number): Promise<PfmImage> {
  if (/\.pfm$/i.test(file.name)) {
    return decodePfm(await file.arrayBuffer());
  }
  const bitmap = await createImageBitmap(file);
  const canvas = document.createElement("canvas");
  canvas.width = bitmap.width;
  canvas.height = bitmap.height;
  const ctx = canvas.getContext("2d");
  if (!ctx) throw new Error("2d canvas unavailable");
  ctx.drawImage(bitmap, 0, 0);
  const pixels = ctx.getImageData(0, 0, bitmap.width, bitmap.height).data;
  const data = new Float32Array(bitmap.width * bitmap.height * 3);
  for (let i = 0; i < bitmap.width * bitmap.height; i += 1) {
    for (let c = 0; c < 3; c += 1) {
      data[i * 3 + c] = Math.pow(pixels[i * 4 + c]! / 255, gamma);
    }
  }
  return { width: bitmap.width, height: bitmap.height, channels: 3, data };
}

function paintRgba(
  canvas: HTMLCanvasElement,
  image: { width: number; height: number; rgba: Uint8ClampedArray },
): void {
  canvas.width = image.width;
  canvas.height = image.height;
  const ctx = canvas.getContext("2d");
  if (!ctx) throw new Error("2d canvas unavailable");
  const pixels = new Uint8ClampedArray(image.rgba);
  ctx.putImageData(new ImageData(pixels, image.width, image.height), 0, 0);
}

function paintOutline(canvas: HTMLCanvasElement): void {
  const ctx = canvas.getContext("2d");
  if (!ctx || !state.outline) return;
  const { width, height, outline } = state.outline;
  ctx.save();
  ctx.scale(canvas.width / width, canvas.height / height);
  ctx.fillStyle = "rgba(255, 64, 64, 0.9)";
  for (let y = 0; y < height; y += 1) {
    for (let x = 0; x < width; x += 1) {
      if (outline[y * width + x]) ctx.fillRect(x, y, 1, 1);
    }
  }
  ctx.restore();
}

function refreshView(): void {
  const img = el<HTMLImageElement>("preview");
  const canvas = el<HTMLCanvasElement>("naive-canvas");
  const overlay = el<HTMLCanvasElement>("overlay-canvas");
  const showNaive = state.view === "naive" && state.naive !== null;
  img.hidden = showNaive;
  canvas.hidden = !showNaive;
  if (showNaive && state.naive) paintRgba(canvas, state.naive);
  const wantOutline = el<HTMLInputElement>("show-outline").checked;
  overlay.hidden = !wantOutline || state.outline === null;
  if (!overlay.hidden) {
    const ref = showNaive ? canvas : img;
    overlay.width = showNaive ? canvas.width : img.naturalWidth || 1;
    overlay.height = showNaive ? canvas.height : img.naturalHeight || 1;
    overlay.style.width = `${ref.clientWidth}px`;
    overlay.style.height = `${ref.clientHeight}px`;
    const ctx = overlay.getContext("2d");
    ctx?.clearRect(0, 0, overlay.width, overlay.height);
    paintOutline(overlay);
  }
  el<HTMLButtonElement>("compare-toggle").disabled = !state.session?.canCompare();
  el<HTMLButtonElement>("full-res").disabled = state.session === null;
}

function showPreview(blob: Blob): void {
  if (state.previewUrl) URL.revokeObjectURL(state.previewUrl);
  state.previewUrl = URL.createObjectURL(blob);
  const img = el<HTMLImageElement>("preview");
  img.onload = refreshView;
  img.src = state.previewUrl;
  refreshView();
}

function bindSliders(): void {
  configureSlider("azimuth", AZIMUTH_RANGE[0], AZIMUTH_RANGE[1], 0.01);
  configureSlider("elevation", ELEVATION_RANGE[0], ELEVATION_RANGE[1], 0.01);
  configureSlider("intensity", INTENSITY_RANGE[0], INTENSITY_RANGE[1], 0.01);
  configureSlider("ambient", AMBIENT_RANGE[0], AMBIENT_RANGE[1], 0.01);
  configureSlider("exposure", EXPOSURE_RANGE[0], EXPOSURE_RANGE[1], 0.01);
  configureSlider("saturation", SATURATION_RANGE[0], SATURATION_RANGE[1], 0.01);
  for (const c of ["r", "g", "b"]) {
    configureSlider(`wb-${c}`, WHITE_BALANCE_RANGE[0], WHITE_BALANCE_RANGE[1], 0.01);
    configureSlider(`curve-${c}`, COLOR_CURVE_FLOOR, COLOR_CURVE_RANGE[1], 0.01);
  }
  const lightIds = ["azimuth", "elevation", "intensity", "ambient"];
  const editIds = ["exposure", "saturation", "wb-r", "wb-g", "wb-b", "curve-r", "curve-g", "curve-b"];
  for (const id of lightIds) {
    el<HTMLInputElement>(id).addEventListener("input", () => {
      setSlider(id, sliderValue(id));
      state.session?.setLight(readLight());
    });
  }
  for (const id of editIds) {
    el<HTMLInputElement>(id).addEventListener("input", () => {
      setSlider(id, sliderValue(id));
      state.session?.setEdits(readEdits());
    });
  }
  el<HTMLSelectElement>("refiner").addEventListener("change", () => {
    const value = el<HTMLSelectElement>("refiner").value;
    state.session?.setRefiner(value === "smooth" ? "smooth" : "identity");
  });
}

async function handleUpload(event: Event): Promise<void> {
  event.preventDefault();
  setBanner("error-banner", null);
  setBanner("warning-banner", null);
  const gamma = Number(el<HTMLInputElement>("gamma").value) || 2.2;
  const resolution = Number(el<HTMLInputElement>("resolution").value) || 1024;
  const parts: Partial<Record<ScenePartName, File>> = {};
  for (const name of SCENE_PART_NAMES) {
    const input = el<HTMLInputElement>(`file-${name}`);
    const file = input.files?.[0];
    if (!file) {
      setBanner("error-banner", `select a file for ${name}`);
      return;
    }
    parts[name] = file;
  }
  const client = new ApiClient(el<HTMLInputElement>("base-url").value || "http://127.0.0.1:8000");
  let info;
  try {
    info = await client.createScene(parts as Record<ScenePartName, File>, {
      resolution,
      gamma,
    });
  } catch (err) {
    setBanner("error-banner", err instanceof Error ? err.message : String(err));
    return;
  }
  state.session?.dispose();
  state.session = new RenderSession(info, {
    client,
    onPreview: showPreview,
    onError: (message) => setBanner("error-banner", message),
  });
  setBanner("warning-banner", state.session.warning);
  pushLightToSliders(state.session.light);
  // The "before" image and mask outline come from the original uploads.
  try {
    const [fg, bg, mask] = await Promise.all([
      decodeLayer(parts.fg_image!, gamma),
      decodeLayer(parts.bg_image!, gamma),
      decodeLayer(parts.mask!, gamma),
    ]);
    state.naive = naiveComposite(fg, bg, mask, gamma);
    state.outline = maskOutline(mask);
  } catch {
    state.naive = null;
    state.outline = null;
  }
  void state.session.requestRender();
  refreshView();
}

export function main(): void {
  bindSliders();
  el<HTMLFormElement>("upload-form").addEventListener("submit", (e) => void handleUpload(e));
  el<HTMLButtonElement>("compare-toggle").addEventListener("click", () => {
    state.view = state.view === "harmonized" ? "naive" : "harmonized";
    el<HTMLButtonElement>("compare-toggle").textContent =
      state.view === "naive" ? "Show harmonized" : "Show naive paste";
    refreshView();
  });
  el<HTMLInputElement>("show-outline").addEventListener("change", refreshView);
  el<HTMLButtonElement>("full-res").addEventListener("click", () => {
    void state.session?.renderFullRes();
  });
  refreshView();
}

if (typeof document !== "undefined" && document.getElementById("upload-form")) {
  main();
}
