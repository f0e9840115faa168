/** Client-side comparison helpers: the naive cut-and-paste composite used as
 * the "before" image, and a mask outline for checking placement. Both work on
 * decoded float maps so they can run without a canvas.
 */

import type { PfmImage } from "./pfm.js";

function channelAt(img: PfmImage, x: number, y: number, c: number): number {
  const base = (y * img.width + x) * img.channels;
  return img.data[base + (img.channels === 3 ? c : 0)]!;
}

/** Linear alpha blend of foreground over background, display-encoded with the
 * given gamma. Returns RGBA bytes in reading order (top-down). */
export function naiveComposite(
  fg: PfmImage,
  bg: PfmImage,
  mask: PfmImage,
  gamma = 2.2,
): { width: number; height: number; rgba: Uint8ClampedArray } {
  if (
    fg.width !== bg.width ||
    fg.height !== bg.height ||
    fg.width !== mask.width ||
    fg.height !== mask.height
  ) {
    throw new Error("layer dimensions disagree");
  }
  const { width, height } = fg;
  const rgba = new Uint8ClampedArray(width * height * 4);
  const inv = 1 / gamma;
  for (let y = 0; y < height; y += 1) {
    for (let x = 0; x < width; x += 1) {
      const a = Math.min(1, Math.max(0, channelAt(mask, x, y, 0)));
      const out = (y * width + x) * 4;
      for (let c = 0; c < 3; c += 1) {
        const lin = a * channelAt(fg, x, y, c) + (1 - a) * channelAt(bg, x, y, c);
        rgba[out + c] = Math.round(255 * Math.pow(Math.min(1, Math.max(0, lin)), inv));
      }
      rgba[out + 3] = 255;
    }
  }
  return { width, height, rgba };
}

/** Boundary of the thresholded mask: an inside pixel whose 4-neighborhood
 * leaves the mask (or the frame). Output dims always equal the mask's. */
export function maskOutline(
  mask: PfmImage,
  threshold = 0.5,
): { width: number; height: number; outline: Uint8Array } {
  const { width, height } = mask;
  const inside = (x: number, y: number): boolean => {
    if (x < 0 || y < 0 || x >= width || y >= height) return false;
    return channelAt(mask, x, y, 0) > threshold;
  };
  const outline = new Uint8Array(width * height);
  for (let y = 0; y < height; y += 1) {
    for (let x = 0; x < width; x += 1) {
      if (!inside(x, y)) continue;
      if (!inside(x - 1, y) || !inside(x + 1, y) || !inside(x, y - 1) || !inside(x, y + 1)) {
        outline[y * width + x] = 1;
      }
    }
  }
  return { width, height, outline };
}
