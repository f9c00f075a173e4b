// Export helpers: the PNG written here is exactly the service's grid PNG
// (base64-decoded byte for byte), and the sidecar is the service's sidecar
// serialized with sorted keys -- the same artifact pair the CLI writes, so
// replaying an exported sidecar reproduces the image bytes.

import type { HistoryEntry } from "./state.js";

export function base64ToBytes(b64: string): Uint8Array {
  const bin = atob(b64);
  const out = new Uint8Array(bin.length);
  for (let i = 0; i < bin.length; i++) {
    out[i] = bin.charCodeAt(i);
  }
  return out;
}

function sortKeysDeep(value: unknown): unknown {
  if (Array.isArray(value)) {
    return value.map(sortKeysDeep);
  }
  if (value && typeof value === "object") {
    const src = value as Record<string, unknown>;
    const out: Record<string, unknown> = {};
    for (const key of Object.keys(src).sort()) {
      out[key] = sortKeysDeep(src[key]);
    }
    return out;
  }
  return value;
}

export function sidecarJson(sidecar: Record<string, unknown>): string {
  return JSON.stringify(sortKeysDeep(sidecar), null, 2);
}

export interface ExportedArtifact {
  baseName: string;
  pngBytes: Uint8Array;
  sidecarText: string;
}

export function exportEntry(entry: HistoryEntry): ExportedArtifact {
  const mode = (entry.sidecar["mode"] as string) ?? entry.request.mode;
  return {
    baseName: `wordglyph_${mode}_${entry.id}`,
    pngBytes: base64ToBytes(entry.gridPng),
    sidecarText: sidecarJson(entry.sidecar),
  };
}

export function downloadArtifact(artifact: ExportedArtifact, doc: Document = document): void {
  const save = (blob: Blob, name: string) => {
    const anchor = doc.createElement("a");
    anchor.href = URL.createObjectURL(blob);
    anchor.download = name;
    anchor.click();
    URL.revokeObjectURL(anchor.href);
  };
  const pngCopy = new Uint8Array(artifact.pngBytes);
  save(new Blob([pngCopy.buffer], { type: "image/png" }), `${artifact.baseName}.png`);
  save(new Blob([artifact.sidecarText], { type: "application/json" }),
       `${artifact.baseName}.json`);
}
