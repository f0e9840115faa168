/** Thin HTTP client for the harmonization service.
 *
 * The only configuration is the service base URL; everything else rides on
 * the endpoint contract: POST /scenes (multipart upload, 201 normal or 422
 * degenerate-but-stored, both with scene JSON), GET /scenes/{id}, and
 * POST /scenes/{id}/render (JSON body, PNG bytes back, optional ?scale=).
 */

export interface FittedLight {
  lx: number;
  ly: number;
  lz: number;
  c: number;
}

export interface SceneInfo {
  id: string;
  width: number;
  height: number;
  fitted_light: FittedLight;
  residual_mse: number;
  degenerate: boolean;
  iterations: number;
}

export interface RenderBody {
  light?: Record<string, number>;
  edits?: Record<string, unknown>;
  refiner?: string;
}

export class ApiError extends Error {
  readonly status: number;
  readonly detail: string;

  constructor(status: number, detail: string) {
    super(`HTTP ${status}: ${detail}`);
    this.name = "ApiError";
    this.status = status;
    this.detail = detail;
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export const SCENE_PART_NAMES = [
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
] as const;

export type ScenePartName = (typeof SCENE_PART_NAMES)[number];

export interface UploadOptions {
  resolution?: number;
  gamma?: number;
}

async function errorDetail(response: Response): Promise<string> {
  try {
    const body = (await response.json()) as { detail?: unknown };
    if (typeof body.detail === "string") return body.detail;
  } catch {
    // Non-JSON error body; fall through to the status text.
  }
  return response.statusText || "request failed";
}

export class ApiClient {
  readonly baseUrl: string;
  private readonly fetchImpl: FetchLike;

  constructor(baseUrl: string, fetchImpl?: FetchLike) {
    this.baseUrl = baseUrl.replace(/\/+$/, "");
    this.fetchImpl = fetchImpl ?? ((url, init) => fetch(url, init));
  }

  /** Upload the ten layers. Resolves with the scene info for both 201 and
   * 422 (degenerate fit, still stored); rejects with ApiError otherwise. */
  async createScene(
    parts: Record<ScenePartName, File | Blob>,
    options: UploadOptions = {},
  ): Promise<SceneInfo> {
    const form = new FormData();
    for (const name of SCENE_PART_NAMES) {
      const part = parts[name];
      const filename = part instanceof File ? part.name : `${name}.pfm`;
      form.append(name, part, filename);
    }
    if (options.resolution !== undefined) {
      form.append("resolution", String(options.resolution));
    }
    if (options.gamma !== undefined) {
      form.append("gamma", String(options.gamma));
    }
    const response = await this.fetchImpl(`${this.baseUrl}/scenes`, {
      method: "POST",
      body: form,
    });
    if (response.status !== 201 && response.status !== 422) {
      throw new ApiError(response.status, await errorDetail(response));
    }
    return (await response.json()) as SceneInfo;
  }

  async getScene(sceneId: string): Promise<SceneInfo> {
    const response = await this.fetchImpl(
      `${this.baseUrl}/scenes/${encodeURIComponent(sceneId)}`,
    );
    if (!response.ok) {
      throw new ApiError(response.status, await errorDetail(response));
    }
    return (await response.json()) as SceneInfo;
  }

  /** Render the composite; resolves with the PNG bytes as a Blob. */
  async renderScene(
    sceneId: string,
    body: RenderBody,
    scale?: number,
  ): Promise<Blob> {
    const query = scale !== undefined ? `?scale=${scale}` : "";
    const response = await this.fetchImpl(
      `${this.baseUrl}/scenes/${encodeURIComponent(sceneId)}/render${query}`,
      {
        method: "POST",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(body),
      },
    );
    if (!response.ok) {
      throw new ApiError(response.status, await errorDetail(response));
    }
    return response.blob();
  }
}
