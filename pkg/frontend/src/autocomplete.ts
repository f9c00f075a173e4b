// Ranking for the word-entry dropdown: prefix matches from the cached
// vocabulary first (training words before unlearned table words, then by
// annotation count), then any server-provided near-misses.

import type { VocabEntry } from "./api.js";

export interface Suggestion {
  word: string;
  learned: boolean;
  count: number;
  source: "vocab" | "near-miss";
}

export class VocabCache {
  entries: VocabEntry[] = [];
  checkpointId = "";

  update(checkpointId: string, words: VocabEntry[], unlearned: VocabEntry[]): boolean {
    const changed = checkpointId !== this.checkpointId;
    this.checkpointId = checkpointId;
    this.entries = [...words, ...unlearned];
    return changed;
  }
}

export function rankSuggestions(
  prefix: string,
  entries: readonly VocabEntry[],
  nearMisses: readonly string[] = [],
  limit = 8,
): Suggestion[] {
  const needle = prefix.trim().toLowerCase();
  if (!needle) {
    return [];
  }
  const matches = entries
    .filter((e) => e.word.startsWith(needle))
    .sort((a, b) => {
      if (a.learned !== b.learned) {
        return a.learned ? -1 : 1;
      }
      if (a.count !== b.count) {
        return b.count - a.count;
      }
      return a.word < b.word ? -1 : 1;
    })
    .map<Suggestion>((e) => ({
      word: e.word,
      learned: e.learned,
      count: e.count,
      source: "vocab",
    }));
  const seen = new Set(matches.map((m) => m.word));
  const extras = nearMisses
    .filter((w) => !seen.has(w))
    .map<Suggestion>((w) => {
      const entry = entries.find((e) => e.word === w);
      return {
        word: w,
        learned: entry?.learned ?? false,
        count: entry?.count ?? 0,
        source: "near-miss",
      };
    });
  return [...matches, ...extras].slice(0, limit);
}
