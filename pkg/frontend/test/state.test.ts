import { describe, expect, it } from "vitest";

import type { GenerateRequest, GenerateResponse } from "../src/api.js";
import {
  History,
  initialState,
  scrubRequest,
  sheetRequest,
  StorageLike,
  validateRequest,
} from "../src/state.js";

function validSheet(): GenerateRequest {
  return {
    words: [{ word: "bold", weight: 1 }],
    text: "ABC",
    n: 2,
    seed: 7,
    mode: "sheet",
  };
}

function fakeResponse(): GenerateResponse {
  return {
    images: ["AAA=", "BBB="],
    grid_png: "R0lG",
    grid: { rows: 1, cols: 2, cell: [64, 64] },
    condition_summary: [],
    sidecar: { mode: "sheet", seed: 7 },
    timing_ms: 12,
  };
}

describe("validateRequest (client-side subset of server rules)", () => {
  it("accepts a valid sheet request", () => {
    expect(validateRequest(validSheet())).toEqual([]);
  });

  it.each([
    [{ text: "" }, "text"],
    [{ text: "abc" }, "uppercase"],
    [{ text: "A".repeat(33) }, "text"],
    [{ n: 0 }, "n must"],
    [{ n: 17 }, "n must"],
    [{ words: [] }, "impression word"],
    [{ words: [{ word: "bold", weight: 0 }] }, "positive"],
    [{ words: [{ word: "bold", weight: -1 }] }, "nonnegative"],
  ])("rejects %j", (patch, fragment) => {
    const problems = validateRequest({ ...validSheet(), ...patch } as GenerateRequest);
    expect(problems.join(" ")).toContain(fragment);
  });

  it("requires endpoints and steps for word interpolation", () => {
    const req: GenerateRequest = {
      ...validSheet(),
      words: [],
      mode: "lerp-words",
      word_a: "bold",
    };
    const problems = validateRequest(req);
    expect(problems.join(" ")).toContain("endpoint");
    expect(problems.join(" ")).toContain("steps");
  });
});

describe("scrubRequest", () => {
  it("maps the coefficient onto two word weights with the seed pinned", () => {
    const state = { ...initialState(), wordA: "italic", wordB: "upright", seed: 42 };
    const at0 = scrubRequest(state, 0);
    expect(at0.words).toEqual([
      { word: "italic", weight: 1 },
      { word: "upright", weight: 0 },
    ]);
    const at1 = scrubRequest(state, 1);
    expect(at1.words[1]).toEqual({ word: "upright", weight: 1 });
    expect(at0.seed).toBe(42);
    expect(at1.seed).toBe(42);
    expect(at0.mode).toBe("sheet");
  });
});

describe("History", () => {
  it("records entries with full request provenance", () => {
    const history = new History();
    const entry = history.record(validSheet(), fakeResponse());
    expect(entry.id).toBe(1);
    expect(entry.request.words[0].word).toBe("bold");
    expect(entry.gridPng).toBe("R0lG");
    expect(history.list()).toHaveLength(1);
  });

  it("persists to storage and restores", () => {
    const store = new Map<string, string>();
    const storage: StorageLike = {
      getItem: (k) => store.get(k) ?? null,
      setItem: (k, v) => void store.set(k, v),
    };
    const first = new History(storage);
    first.record(validSheet(), fakeResponse());
    first.record({ ...validSheet(), seed: 8 }, fakeResponse());
    const second = new History(storage);
    expect(second.list()).toHaveLength(2);
    expect(second.record(validSheet(), fakeResponse()).id).toBe(3);
  });

  it("sheetRequest copies word objects so later edits do not mutate history", () => {
    const state = initialState();
    state.words.push({ word: "bold", weight: 1 });
    const req = sheetRequest(state);
    state.words[0].weight = 0.2;
    expect(req.words[0].weight).toBe(1);
  });
});
