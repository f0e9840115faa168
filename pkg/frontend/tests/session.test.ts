import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import type { RenderBody, SceneInfo } from "../src/api.js";
import { DEGENERATE_WARNING, RenderSession, type RenderClient } from "../src/session.js";

function makeInfo(overrides: Partial<SceneInfo> = {}): SceneInfo {
  return {
    id: "abc123",
    width: 64,
    height: 48,
    // Frozen decomposition: azimuth 0.7, elevation -0.4, intensity 1.3.
    fitted_light: {
      lx: 0.7713729183698036,
      ly: -0.5062438450012458,
      lz: 0.9158061968582693,
      c: 0.25,
    },
    residual_mse: 1e-6,
    degenerate: false,
    iterations: 120,
    ...overrides,
  };
}

interface Deferred {
  resolve(blob: Blob): void;
  reject(err: Error): void;
}

class FakeClient implements RenderClient {
  calls: { sceneId: string; body: RenderBody; scale: number | undefined }[] = [];
  private pending: Deferred[] = [];

  renderScene(sceneId: string, body: RenderBody, scale?: number): Promise<Blob> {
    this.calls.push({ sceneId, body, scale });
    return new Promise<Blob>((resolve, reject) => {
      this.pending.push({ resolve, reject });
    });
  }

  resolve(index: number, text: string): void {
    this.pending[index]!.resolve(new Blob([text]));
  }

  reject(index: number, message: string): void {
    this.pending[index]!.reject(new Error(message));
  }
}

describe("session presets", () => {
  it("decomposes the fitted light into the slider values", () => {
    const session = new RenderSession(makeInfo(), { client: new FakeClient() });
    expect(Math.abs(session.light.azimuth - 0.7)).toBeLessThan(1e-12);
    expect(Math.abs(session.light.elevation - -0.4)).toBeLessThan(1e-12);
    expect(Math.abs(session.light.intensity - 1.3)).toBeLessThan(1e-12);
    expect(session.light.ambient).toBe(0.25);
    expect(session.manualMode).toBe(false);
    expect(session.warning).toBeNull();
  });

  it("starts from identity edits and the identity refiner", () => {
    const session = new RenderSession(makeInfo(), { client: new FakeClient() });
    expect(session.edits.exposure).toBe(1.0);
    expect(session.edits.saturation).toBe(1.0);
    expect(session.edits.whiteBalance).toEqual([1.0, 1.0, 1.0]);
    expect(session.edits.colorCurve).toEqual([1.0, 1.0, 1.0]);
    expect(session.refiner).toBe("identity");
  });

  it("a degenerate fit flips to manual mode with a warning", () => {
    const session = new RenderSession(makeInfo({ degenerate: true }), {
      client: new FakeClient(),
    });
    expect(session.manualMode).toBe(true);
    expect(session.warning).toBe(DEGENERATE_WARNING);
    // Manual lighting is still available: the sliders hold usable values.
    expect(session.light.intensity).toBeGreaterThan(0);
  });

  it("clamps an out-of-box fitted ambient into the slider span", () => {
    const info = makeInfo({ fitted_light: { lx: 0, ly: 0, lz: 1, c: 9.5 } });
    const session = new RenderSession(info, { client: new FakeClient() });
    expect(session.light.ambient).toBe(3.0);
  });

  it("compare is unavailable before the first successful render", () => {
    const session = new RenderSession(makeInfo(), { client: new FakeClient() });
    expect(session.canCompare()).toBe(false);
  });
});

describe("debounced scheduling", () => {
  beforeEach(() => {
    vi.useFakeTimers();
  });

  afterEach(() => {
    vi.useRealTimers();
  });

  it("a rapid slider drag issues zero requests inside the quiet window", () => {
    const client = new FakeClient();
    const session = new RenderSession(makeInfo(), { client });
    for (let i = 0; i < 20; i += 1) {
      session.setLight({ azimuth: i / 20 });
      vi.advanceTimersByTime(40);
    }
    expect(client.calls.length).toBe(0);
  });

  it("exactly one request fires after the window goes quiet", () => {
    const client = new FakeClient();
    const session = new RenderSession(makeInfo(), { client });
    for (let i = 0; i < 20; i += 1) {
      session.setLight({ azimuth: i / 20 });
    }
    vi.advanceTimersByTime(150);
    expect(client.calls.length).toBe(1);
    // The request carries the final slider value of the drag.
    expect(client.calls[0]!.body.light!.azimuth).toBeCloseTo(19 / 20, 12);
  });

  it("an unchanged control issues no second request", async () => {
    const client = new FakeClient();
    const session = new RenderSession(makeInfo(), { client });
    session.setLight({ azimuth: 0.5 });
    vi.advanceTimersByTime(150);
    expect(client.calls.length).toBe(1);
    client.resolve(0, "first");
    await vi.advanceTimersByTimeAsync(0);
    // Re-sending the identical value collapses to the same request key.
    session.setLight({ azimuth: 0.5 });
    vi.advanceTimersByTime(150);
    expect(client.calls.length).toBe(1);
  });

  it("edit and refiner changes also go through the debounce", () => {
    const client = new FakeClient();
    const session = new RenderSession(makeInfo(), { client });
    session.setEdits({ exposure: 1.5 });
    session.setRefiner("smooth");
    expect(client.calls.length).toBe(0);
    vi.advanceTimersByTime(150);
    expect(client.calls.length).toBe(1);
    expect(client.calls[0]!.body.refiner).toBe("smooth");
    expect(client.calls[0]!.body.edits!.exposure).toBe(1.5);
  });

  it("setLight clamps before the request is built", () => {
    const client = new FakeClient();
    const session = new RenderSession(makeInfo(), { client });
    session.setLight({ intensity: 99, elevation: -9 });
    session.setEdits({ exposure: 99, colorCurve: [0, 1, 1] });
    vi.advanceTimersByTime(150);
    const body = client.calls[0]!.body;
    expect(body.light!.intensity).toBe(3.0);
    expect(body.light!.elevation).toBe(-Math.PI / 2);
    expect(body.edits!.exposure).toBe(2.0);
    expect((body.edits!.color_curve as number[])[0]).toBe(0.01);
  });

  it("dispose cancels a pending render", () => {
    const client = new FakeClient();
    const session = new RenderSession(makeInfo(), { client });
    session.setLight({ azimuth: 0.5 });
    session.dispose();
    vi.advanceTimersByTime(1000);
    expect(client.calls.length).toBe(0);
  });

  it("flush skips the rest of the quiet window", () => {
    const client = new FakeClient();
    const session = new RenderSession(makeInfo(), { client });
    session.setLight({ azimuth: 0.5 });
    session.flush();
    expect(client.calls.length).toBe(1);
  });
});

describe("request lifecycle", () => {
  it("previews land in issue order when responses arrive in order", async () => {
    const client = new FakeClient();
    const previews: Blob[] = [];
    const session = new RenderSession(makeInfo(), {
      client,
      onPreview: (blob) => previews.push(blob),
    });
    const first = session.requestRender();
    client.resolve(0, "one");
    await first;
    expect(session.renderCount).toBe(1);
    expect(session.canCompare()).toBe(true);
    expect(await session.lastPreview!.text()).toBe("one");
    expect(previews.length).toBe(1);
  });

  it("discards a stale response that arrives after a newer one", async () => {
    const client = new FakeClient();
    const session = new RenderSession(makeInfo(), { client });
    const first = session.requestRender();
    session.light = { ...session.light, azimuth: 0.9 };
    const second = session.requestRender();
    expect(client.calls.length).toBe(2);
    // Newer response lands first; the older one must not overwrite it.
    client.resolve(1, "newer");
    await second;
    client.resolve(0, "older");
    await first;
    expect(await session.lastPreview!.text()).toBe("newer");
    expect(session.renderCount).toBe(1);
  });

  it("a failed render keeps the last good preview and reports the error", async () => {
    const client = new FakeClient();
    const errors: string[] = [];
    const session = new RenderSession(makeInfo(), {
      client,
      onError: (message) => errors.push(message),
    });
    const first = session.requestRender();
    client.resolve(0, "good");
    await first;
    session.light = { ...session.light, azimuth: 1.2 };
    const second = session.requestRender();
    client.reject(1, "HTTP 400: bad light");
    await second;
    expect(await session.lastPreview!.text()).toBe("good");
    expect(session.lastError).toBe("HTTP 400: bad light");
    expect(errors).toEqual(["HTTP 400: bad light"]);
  });

  it("the same parameters can be retried after a failure", async () => {
    const client = new FakeClient();
    const session = new RenderSession(makeInfo(), { client });
    const first = session.requestRender();
    client.reject(0, "boom");
    await first;
    const second = session.requestRender();
    expect(client.calls.length).toBe(2);
    client.resolve(1, "recovered");
    await second;
    expect(await session.lastPreview!.text()).toBe("recovered");
    expect(session.lastError).toBeNull();
  });

  it("repeating identical parameters issues no request", async () => {
    const client = new FakeClient();
    const session = new RenderSession(makeInfo(), { client });
    const first = session.requestRender();
    client.resolve(0, "one");
    await first;
    await session.requestRender();
    expect(client.calls.length).toBe(1);
  });

  it("preview renders are capped at the preview scale; full-res is not", async () => {
    const client = new FakeClient();
    const session = new RenderSession(makeInfo(), { client, previewScale: 256 });
    const first = session.requestRender();
    client.resolve(0, "preview");
    await first;
    const full = session.renderFullRes();
    expect(client.calls.length).toBe(2);
    expect(client.calls[0]!.scale).toBe(256);
    expect(client.calls[1]!.scale).toBeUndefined();
    client.resolve(1, "full");
    await full;
    expect(await session.lastPreview!.text()).toBe("full");
  });

  it("the default preview scale keeps the long side at 512", () => {
    const client = new FakeClient();
    const session = new RenderSession(makeInfo(), { client });
    void session.requestRender();
    expect(client.calls[0]!.scale).toBe(512);
  });

  it("requests always carry explicit light, edits, and refiner", () => {
    const client = new FakeClient();
    const session = new RenderSession(makeInfo(), { client });
    void session.requestRender();
    const body = client.calls[0]!.body;
    expect(Object.keys(body).sort()).toEqual(["edits", "light", "refiner"]);
    expect(body.light).toHaveProperty("azimuth");
    expect(body.light).toHaveProperty("ambient");
    expect(body.edits).toHaveProperty("white_balance");
    expect(body.edits).toHaveProperty("order", "WSCE");
  });
});
