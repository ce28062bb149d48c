/** Typed client for the frame-service HTTP API. */

export interface OrbitPose {
  azimuth: number;
  elevation: number;
  radius: number;
  target: [number, number, number];
}

export type RenderMode = 'clod' | 'off' | `topk:${number}`;

export interface RenderRequest {
  scene: string;
  width: number;
  height: number;
  s_v: number;
  tau: number;
  mode: RenderMode;
  orbit: OrbitPose;
}

export interface FrameResponse {
  image_b64: string;
  format: string;
  width: number;
  height: number;
  rendered_count: number;
  n_total: number;
  eta_actual: number;
  render_ms: number;
  request: RenderRequest;
}

export interface SceneInfo {
  id: string;
  file_mb: number;
  n_total?: number;
  sh_degree?: number;
  bounds?: { min: [number, number, number]; max: [number, number, number] };
  error?: string;
}

export interface ServiceErrorBody {
  error: { code: string; message: string };
}

export class ServiceError extends Error {
  readonly code: string;
  readonly status: number;

  constructor(status: number, code: string, message: string) {
    super(message);
    this.code = code;
    this.status = status;
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class FrameServiceClient {
  readonly baseUrl: string;
  private readonly fetchFn: FetchLike;

  constructor(baseUrl: string, fetchFn: FetchLike = fetch.bind(globalThis)) {
    this.baseUrl = baseUrl.replace(/\/+$/, '');
    this.fetchFn = fetchFn;
  }

  async health(): Promise<{ status: string; version: string }> {
    return this.getJson('/health');
  }

  async listScenes(): Promise<SceneInfo[]> {
    const body = await this.getJson<{ scenes: SceneInfo[] }>('/scenes');
    return body.scenes;
  }

  async renderFrame(req: RenderRequest, signal?: AbortSignal): Promise<FrameResponse> {
    const resp = await this.fetchFn(`${this.baseUrl}/render`, {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify(req),
      signal,
    });
    if (!resp.ok) {
      throw await this.asServiceError(resp);
    }
    return (await resp.json()) as FrameResponse;
  }

  private async getJson<T>(path: string): Promise<T> {
    const resp = await this.fetchFn(`${this.baseUrl}${path}`);
    if (!resp.ok) {
      throw await this.asServiceError(resp);
    }
    return (await resp.json()) as T;
  }

  private async asServiceError(resp: Response): Promise<ServiceError> {
    try {
      const body = (await resp.json()) as ServiceErrorBody;
      if (body && body.error) {
        return new ServiceError(resp.status, body.error.code, body.error.message);
      }
    } catch {
      // fall through to the generic error
    }
    return new ServiceError(resp.status, 'http_error', `HTTP ${resp.status}`);
  }
}
