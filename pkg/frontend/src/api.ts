// Typed client for the glyph-generation service. The service is the single
// authority on validation; this client only shapes requests and responses.

export type Mode = "sheet" | "lerp-words" | "lerp-noise";

export interface WordWeight {
  word: string;
  weight: number;
}

export interface GenerateRequest {
  words: WordWeight[];
  text: string;
  n: number;
  seed: number;
  mode: Mode;
  steps?: number;
  word_a?: string;
  word_b?: string;
  seed_a?: number;
  seed_b?: number;
}

export interface GridMeta {
  rows: number;
  cols: number;
  cell: [number, number];
}

export interface ConditionEntry {
  word: string | null;
  weight: number;
  vector_norm: number;
  contribution_norm: number;
}

export interface GenerateResponse {
  images: string[];
  grid_png: string;
  grid: GridMeta;
  condition_summary: ConditionEntry[];
  sidecar: Record<string, unknown>;
  timing_ms: number;
}

export interface VocabEntry {
  word: string;
  count: number;
  learned: boolean;
}

export interface VocabResponse {
  k: number;
  words: VocabEntry[];
  unlearned: VocabEntry[];
}

export interface HealthResponse {
  status: string;
  checkpoint_id: string;
  k: number;
  d: number;
  variant: string;
}

export interface ApiError {
  status: number;
  detail: unknown;
  suggestions: string[];
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private baseUrl: string = "",
    private fetchFn: FetchLike = (...args) => fetch(...args),
  ) {}

  private async json<T>(path: string, init?: RequestInit): Promise<T> {
    const res = await this.fetchFn(this.baseUrl + path, init);
    if (!res.ok) {
      let detail: unknown = null;
      try {
        detail = (await res.json()).detail;
      } catch {
        detail = await res.text();
      }
      const suggestions =
        detail && typeof detail === "object" && "suggestions" in detail
          ? ((detail as { suggestions: string[] }).suggestions ?? [])
          : [];
      throw { status: res.status, detail, suggestions } satisfies ApiError;
    }
    return (await res.json()) as T;
  }

  health(): Promise<HealthResponse> {
    return this.json<HealthResponse>("/api/health");
  }

  vocab(): Promise<VocabResponse> {
    return this.json<VocabResponse>("/api/vocab");
  }

  generate(req: GenerateRequest): Promise<GenerateResponse> {
    return this.json<GenerateResponse>("/api/generate", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(req),
    });
  }
}
