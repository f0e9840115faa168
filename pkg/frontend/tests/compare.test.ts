import { describe, expect, it } from "vitest";

import { maskOutline, naiveComposite } from "../src/compare.js";
import type { PfmImage } from "../src/pfm.js";

function gray(width: number, height: number, values: number[]): PfmImage {
  return { width, height, channels: 1, data: Float32Array.from(values) };
}

function rgb(width: number, height: number, values: number[]): PfmImage {
  return { width, height, channels: 3, data: Float32Array.from(values) };
}

function constantRgb(width: number, height: number, value: number): PfmImage {
  return rgb(width, height, Array(width * height * 3).fill(value));
}

describe("naiveComposite", () => {
  it("alpha blends in linear space then gamma-encodes", () => {
    const fg = constantRgb(1, 1, 1.0);
    const bg = constantRgb(1, 1, 0.0);
    const mask = gray(1, 1, [0.5]);
    const out = naiveComposite(fg, bg, mask, 2.2);
    // 0.5 linear -> 0.5^(1/2.2) display -> byte.
    const want = Math.round(255 * Math.pow(0.5, 1 / 2.2));
    expect(out.rgba[0]).toBe(want);
    expect(out.rgba[1]).toBe(want);
    expect(out.rgba[2]).toBe(want);
    expect(out.rgba[3]).toBe(255);
  });

  it("alpha extremes pick exactly one layer", () => {
    const fg = constantRgb(2, 1, 0.25);
    const bg = constantRgb(2, 1, 0.75);
    const mask = gray(2, 1, [1.0, 0.0]);
    const out = naiveComposite(fg, bg, mask, 2.2);
    const fgByte = Math.round(255 * Math.pow(0.25, 1 / 2.2));
    const bgByte = Math.round(255 * Math.pow(0.75, 1 / 2.2));
    expect(out.rgba[0]).toBe(fgByte);
    expect(out.rgba[4]).toBe(bgByte);
  });

  it("blends each channel independently", () => {
    const fg = rgb(1, 1, [1.0, 0.0, 0.5]);
    const bg = rgb(1, 1, [0.0, 1.0, 0.5]);
    const mask = gray(1, 1, [0.25]);
    const out = naiveComposite(fg, bg, mask, 1.0);
    expect(out.rgba[0]).toBe(Math.round(255 * 0.25));
    expect(out.rgba[1]).toBe(Math.round(255 * 0.75));
    expect(out.rgba[2]).toBe(Math.round(255 * 0.5));
  });

  it("clips out-of-range linear values before encoding", () => {
    const fg = constantRgb(1, 1, 3.0);
    const bg = constantRgb(1, 1, -1.0);
    const out1 = naiveComposite(fg, fg, gray(1, 1, [1.0]), 2.2);
    const out0 = naiveComposite(bg, bg, gray(1, 1, [0.0]), 2.2);
    expect(out1.rgba[0]).toBe(255);
    expect(out0.rgba[0]).toBe(0);
  });

  it("output dimensions mirror the inputs", () => {
    const out = naiveComposite(
      constantRgb(3, 2, 0.5),
      constantRgb(3, 2, 0.5),
      gray(3, 2, Array(6).fill(0.5)),
    );
    expect(out.width).toBe(3);
    expect(out.height).toBe(2);
    expect(out.rgba.length).toBe(3 * 2 * 4);
  });

  it("rejects mismatched layer dimensions", () => {
    expect(() =>
      naiveComposite(constantRgb(2, 2, 0.5), constantRgb(3, 2, 0.5), gray(2, 2, Array(4).fill(1))),
    ).toThrow(/dimensions/);
  });
});

describe("maskOutline", () => {
  it("output dims always equal the mask dims", () => {
    const mask = gray(5, 4, Array(20).fill(0));
    const out = maskOutline(mask);
    expect(out.width).toBe(5);
    expect(out.height).toBe(4);
    expect(out.outline.length).toBe(20);
  });

  it("marks the ring of a filled square, not its interior", () => {
    // 4x4 mask with a solid 3x3 block; only the center pixel is interior.
    const values = [
      1, 1, 1, 0,
      1, 1, 1, 0,
      1, 1, 1, 0,
      0, 0, 0, 0,
    ];
    const out = maskOutline(gray(4, 4, values));
    const want = [
      1, 1, 1, 0,
      1, 0, 1, 0,
      1, 1, 1, 0,
      0, 0, 0, 0,
    ];
    expect(Array.from(out.outline)).toEqual(want);
  });

  it("treats the frame border as outside", () => {
    const out = maskOutline(gray(2, 2, [1, 1, 1, 1]));
    expect(Array.from(out.outline)).toEqual([1, 1, 1, 1]);
  });

  it("applies the 0.5 threshold", () => {
    const out = maskOutline(gray(3, 1, [0.4, 0.6, 0.4]));
    expect(Array.from(out.outline)).toEqual([0, 1, 0]);
  });

  it("an empty mask has no outline", () => {
    const out = maskOutline(gray(3, 3, Array(9).fill(0)));
    expect(out.outline.every((v) => v === 0)).toBe(true);
  });
});
