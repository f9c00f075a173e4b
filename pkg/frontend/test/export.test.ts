import { describe, expect, it } from "vitest";

import { base64ToBytes, exportEntry, sidecarJson } from "../src/export.js";
import type { HistoryEntry } from "../src/state.js";

const PNG_BYTES = Uint8Array.from([0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a, 7, 42]);
const PNG_B64 = Buffer.from(PNG_BYTES).toString("base64");

function entry(): HistoryEntry {
  return {
    id: 5,
    request: { words: [{ word: "bold", weight: 1 }], text: "AB", n: 1, seed: 3, mode: "sheet" },
    thumbnail: PNG_B64,
    gridPng: PNG_B64,
    sidecar: { seed: 3, mode: "sheet", words: ["bold"], grid: { rows: 1, cols: 2 } },
    timingMs: 9,
  };
}

describe("export", () => {
  it("decodes base64 to the exact original bytes", () => {
    expect(Array.from(base64ToBytes(PNG_B64))).toEqual(Array.from(PNG_BYTES));
  });

  it("passes the service PNG through untouched", () => {
    const artifact = exportEntry(entry());
    expect(Array.from(artifact.pngBytes)).toEqual(Array.from(PNG_BYTES));
    expect(artifact.baseName).toBe("wordglyph_sheet_5");
  });

  it("serializes the sidecar verbatim (sorted keys, replayable)", () => {
    const text = exportEntry(entry()).sidecarText;
    const parsed = JSON.parse(text);
    expect(parsed).toEqual(entry().sidecar);
    const keys = Object.keys(parsed);
    expect(keys).toEqual([...keys].sort());
  });
});
