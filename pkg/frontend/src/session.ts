/** Client-side session state for one uploaded scene.
 *
 * The session owns the slider values, schedules renders behind a trailing
 * debounce, and keeps the preview consistent under out-of-order responses:
 * every request carries a sequence number and a response lands only if no
 * newer response has landed already. Repeating the exact same parameters
 * issues no request, and a failed render keeps the last good preview.
 */

import type { RenderBody, SceneInfo } from "./api.js";
import { trailingDebounce, type Debounced } from "./debounce.js";
import {
  clampEdits,
  clampLight,
  editsPayload,
  IDENTITY_EDITS,
  lightPayload,
  vectorToAngles,
  type EditValues,
  type LightAngles,
} from "./params.js";

export interface RenderClient {
  renderScene(sceneId: string, body: RenderBody, scale?: number): Promise<Blob>;
}

export type RefinerName = "identity" | "smooth";

export interface SessionOptions {
  client: RenderClient;
  /** Long-side cap for preview renders; full-res renders skip it. */
  previewScale?: number;
  debounceMs?: number;
  onPreview?: (blob: Blob) => void;
  onError?: (message: string) => void;
}

export const DEFAULT_PREVIEW_SCALE = 512;
export const DEFAULT_DEBOUNCE_MS = 150;

export const DEGENERATE_WARNING =
  "Light fit is unreliable for this scene; set the light manually.";

export class RenderSession {
  readonly sceneId: string;
  readonly info: SceneInfo;
  light: LightAngles;
  edits: EditValues;
  refiner: RefinerName = "identity";
  /** True when the fitted light cannot be trusted as a starting point. */
  readonly manualMode: boolean;
  readonly warning: string | null;
  lastPreview: Blob | null = null;
  lastError: string | null = null;
  renderCount = 0;

  private readonly client: RenderClient;
  private readonly previewScale: number;
  private readonly onPreview?: (blob: Blob) => void;
  private readonly onError?: (message: string) => void;
  private readonly schedule: Debounced<[]>;
  private seqIssued = 0;
  private seqShown = 0;
  private lastSentKey: string | null = null;

  constructor(info: SceneInfo, options: SessionOptions) {
    this.sceneId = info.id;
    this.info = info;
    this.client = options.client;
    this.previewScale = options.previewScale ?? DEFAULT_PREVIEW_SCALE;
    this.onPreview = options.onPreview;
    this.onError = options.onError;
    this.schedule = trailingDebounce(
      () => void this.requestRender(),
      options.debounceMs ?? DEFAULT_DEBOUNCE_MS,
    );
    // Preset the sliders from the fitted light's angle decomposition; a
    // degenerate fit still provides numbers but flips the session into
    // manual mode with a visible warning.
    const fitted = info.fitted_light;
    const angles = vectorToAngles(fitted);
    this.light = clampLight({ ...angles, ambient: fitted.c });
    this.edits = { ...IDENTITY_EDITS };
    this.manualMode = info.degenerate;
    this.warning = info.degenerate ? DEGENERATE_WARNING : null;
  }

  setLight(changes: Partial<LightAngles>): void {
    this.light = clampLight({ ...this.light, ...changes });
    this.schedule();
  }

  setEdits(changes: Partial<EditValues>): void {
    this.edits = clampEdits({ ...this.edits, ...changes });
    this.schedule();
  }

  setRefiner(name: RefinerName): void {
    this.refiner = name;
    this.schedule();
  }

  /** The compare toggle needs one successful render to have anything to show. */
  canCompare(): boolean {
    return this.renderCount > 0;
  }

  /** Run the pending debounced render now (e.g. on slider release). */
  flush(): void {
    this.schedule.flush();
  }

  dispose(): void {
    this.schedule.cancel();
  }

  renderBody(): RenderBody {
    return {
      light: lightPayload(this.light),
      edits: editsPayload(this.edits),
      refiner: this.refiner,
    };
  }

  /** Issue a render immediately (the debounced path lands here). */
  async requestRender(fullRes = false): Promise<void> {
    const body = this.renderBody();
    const scale = fullRes ? undefined : this.previewScale;
    const key = JSON.stringify({ body, scale });
    if (key === this.lastSentKey) return;
    this.lastSentKey = key;
    const seq = ++this.seqIssued;
    try {
      const blob = await this.client.renderScene(this.sceneId, body, scale);
      if (seq <= this.seqShown) return;
      this.seqShown = seq;
      this.lastPreview = blob;
      this.renderCount += 1;
      this.lastError = null;
      this.onPreview?.(blob);
    } catch (err) {
      // Keep the last good preview; clear the dedupe key so the same
      // parameters can be retried after a transient failure.
      if (this.lastSentKey === key) this.lastSentKey = null;
      this.lastError = err instanceof Error ? err.message : String(err);
      this.onError?.(this.lastError);
    }
  }

  /** Render at the scene's native resolution. */
  renderFullRes(): Promise<void> {
    return this.requestRender(true);
  }
}
