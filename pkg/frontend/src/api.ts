// Typed client for the storyreel curation API. All server interaction in the
// UI flows through this module; there is no private protocol.

export interface Candidate {
  content_hash: string;
  path: string;
  width: number;
  height: number;
  nsfw_flagged: boolean;
  url: string;
}

export interface SceneState {
  scene_index: number;
  sentence_index: number;
  sentence_text: string;
  description: string | null;
  status: "pending" | "generating" | "awaiting_selection" | "selected";
  selected_index: number | null;
  candidates: Candidate[];
}

export interface PipelineStatus {
  stages: Record<string, string>;
  scene_count: number;
  scenes_selected: number;
  all_selected: boolean;
}

export interface SelectionAck {
  scene_index: number;
  selected_index: number;
  status: string;
}

export class ApiError extends Error {
  constructor(message: string, public readonly status: number | null) {
    super(message);
    this.name = "ApiError";
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
    private readonly baseUrl: string = "",
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let resp: Response;
    try {
      resp = await this.fetchFn(this.baseUrl + path, init);
    } catch (err) {
      throw new ApiError(`API unreachable: ${String(err)}`, null);
    }
    if (!resp.ok) {
      let detail = resp.statusText;
      try {
        const body = await resp.json();
        if (body && typeof body.detail === "string") detail = body.detail;
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(detail, resp.status);
    }
    return (await resp.json()) as T;
  }

  getScenes(): Promise<{ scenes: SceneState[] }> {
    return this.request("/api/scenes");
  }

  getSceneCandidates(sceneIndex: number): Promise<{
    scene_index: number;
    selected_index: number | null;
    status: string;
    candidates: Candidate[];
  }> {
    return this.request(`/api/scenes/${sceneIndex}/candidates`);
  }

  getStatus(): Promise<PipelineStatus> {
    return this.request("/api/status");
  }

  postSelection(sceneIndex: number, candidateIndex: number): Promise<SelectionAck> {
    return this.request(`/api/scenes/${sceneIndex}/selection`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ index: candidateIndex }),
    });
  }

  postRegenerate(sceneIndex: number, count: number): Promise<unknown> {
    return this.request(`/api/scenes/${sceneIndex}/regenerate`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ count }),
    });
  }
}
