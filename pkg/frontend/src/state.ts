// Session state and client-side validation. Validation here is a strict
// subset of the server's rules: anything rejected locally would also be
// rejected by the service, and the service remains the authority.

import type { GenerateRequest, GenerateResponse, Mode, WordWeight } from "./api.js";

export const MAX_TEXT = 32;
export const MAX_VARIANTS = 16;
export const MAX_STEPS = 16;

export interface SessionState {
  words: WordWeight[];
  text: string;
  seed: number;
  n: number;
  mode: Mode;
  lambda: number;
  wordA: string;
  wordB: string;
}

export function initialState(): SessionState {
  return {
    words: [],
    text: "ABC",
    seed: 1,
    n: 2,
    mode: "sheet",
    lambda: 0.5,
    wordA: "",
    wordB: "",
  };
}

export function validateRequest(req: GenerateRequest): string[] {
  const problems: string[] = [];
  if (req.text.length < 1 || req.text.length > MAX_TEXT) {
    problems.push(`text must be 1..${MAX_TEXT} letters`);
  }
  if (!/^[A-Z]*$/.test(req.text)) {
    problems.push("text must be uppercase A-Z");
  }
  if (req.n < 1 || req.n > MAX_VARIANTS) {
    problems.push(`n must be 1..${MAX_VARIANTS}`);
  }
  if (req.mode === "sheet" || req.mode === "lerp-noise") {
    if (req.words.length === 0) {
      problems.push("add at least one impression word");
    }
    const total = req.words.reduce((acc, w) => acc + w.weight, 0);
    if (req.words.length > 0 && total <= 0) {
      problems.push("word weights must sum to a positive value");
    }
  }
  if (req.words.some((w) => w.weight < 0)) {
    problems.push("weights must be nonnegative");
  }
  if (req.mode === "lerp-words") {
    if (!req.word_a || !req.word_b) {
      problems.push("pick both endpoint words");
    }
    if (!req.steps || req.steps < 2 || req.steps > MAX_STEPS) {
      problems.push(`steps must be 2..${MAX_STEPS}`);
    }
  }
  if (req.mode === "lerp-noise") {
    if (req.seed_a === undefined || req.seed_b === undefined) {
      problems.push("pick both noise seeds");
    }
    if (!req.steps || req.steps < 2 || req.steps > MAX_STEPS) {
      problems.push(`steps must be 2..${MAX_STEPS}`);
    }
  }
  return problems;
}

export interface HistoryEntry {
  id: number;
  request: GenerateRequest;
  thumbnail: string; // first cell, base64 PNG
  gridPng: string;
  sidecar: Record<string, unknown>;
  timingMs: number;
}

export interface StorageLike {
  getItem(key: string): string | null;
  setItem(key: string, value: string): void;
}

const HISTORY_KEY = "wordglyph.history";
const HISTORY_LIMIT = 60;

export class History {
  private entries: HistoryEntry[] = [];
  private nextId = 1;

  constructor(private storage: StorageLike | null = null) {
    if (this.storage) {
      try {
        const raw = this.storage.getItem(HISTORY_KEY);
        if (raw) {
          this.entries = JSON.parse(raw) as HistoryEntry[];
          this.nextId = 1 + Math.max(0, ...this.entries.map((e) => e.id));
        }
      } catch {
        this.entries = [];
      }
    }
  }

  record(request: GenerateRequest, response: GenerateResponse): HistoryEntry {
    const entry: HistoryEntry = {
      id: this.nextId++,
      request,
      thumbnail: response.images[0] ?? "",
      gridPng: response.grid_png,
      sidecar: response.sidecar,
      timingMs: response.timing_ms,
    };
    this.entries.push(entry);
    if (this.entries.length > HISTORY_LIMIT) {
      this.entries = this.entries.slice(-HISTORY_LIMIT);
    }
    this.persist();
    return entry;
  }

  list(): readonly HistoryEntry[] {
    return this.entries;
  }

  get(id: number): HistoryEntry | undefined {
    return this.entries.find((e) => e.id === id);
  }

  clear(): void {
    this.entries = [];
    this.persist();
  }

  private persist(): void {
    if (this.storage) {
      this.storage.setItem(HISTORY_KEY, JSON.stringify(this.entries));
    }
  }
}

export function sheetRequest(state: SessionState): GenerateRequest {
  return {
    words: state.words.map((w) => ({ ...w })),
    text: state.text,
    n: state.n,
    seed: state.seed,
    mode: "sheet",
  };
}

// A scrub at coefficient lambda is a two-word weighted sheet: the blend
// (1-lambda)*a + lambda*b expressed through per-word weights, so the
// endpoints coincide with plain single-word generation on the server.
export function scrubRequest(state: SessionState, lambda: number): GenerateRequest {
  return {
    words: [
      { word: state.wordA, weight: 1 - lambda },
      { word: state.wordB, weight: lambda },
    ],
    text: state.text,
    n: state.n,
    seed: state.seed,
    mode: "sheet",
  };
}
