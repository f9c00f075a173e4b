// DOM wiring for the studio: word chips with weights, autocomplete with
// unlearned badges, seed/mode controls, an interpolation scrub slider, a
// history strip and a side-by-side compare board.

import { ApiClient, GenerateRequest, GenerateResponse } from "./api.js";
import { rankSuggestions, VocabCache } from "./autocomplete.js";
import { downloadArtifact, exportEntry } from "./export.js";
import { LambdaScrubber } from "./scrub.js";
import {
  History,
  HistoryEntry,
  initialState,
  scrubRequest,
  sheetRequest,
  validateRequest,
} from "./state.js";

const api = new ApiClient("");
const state = initialState();
const vocabCache = new VocabCache();
const history = new History(window.localStorage);
const selected = new Set<number>();

const el = <T extends HTMLElement>(id: string): T => {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
};

const wordInput = el<HTMLInputElement>("word-input");
const dropdown = el<HTMLDivElement>("autocomplete");
const chipBox = el<HTMLDivElement>("chips");
const textInput = el<HTMLInputElement>("text-input");
const seedInput = el<HTMLInputElement>("seed-input");
const nInput = el<HTMLInputElement>("n-input");
const lambdaSlider = el<HTMLInputElement>("lambda-slider");
const lambdaValue = el<HTMLSpanElement>("lambda-value");
const wordASelect = el<HTMLInputElement>("word-a");
const wordBSelect = el<HTMLInputElement>("word-b");
const resultBox = el<HTMLDivElement>("result");
const statusLine = el<HTMLDivElement>("status");
const historyBox = el<HTMLDivElement>("history");
const compareBox = el<HTMLDivElement>("compare");
const healthBox = el<HTMLSpanElement>("health");

function setStatus(message: string, isError = false): void {
  statusLine.textContent = message;
  statusLine.className = isError ? "status error" : "status";
}

function renderChips(): void {
  chipBox.innerHTML = "";
  state.words.forEach((ww, idx) => {
    const chip = document.createElement("span");
    chip.className = "chip";
    const label = document.createElement("span");
    label.textContent = ww.word;
    const entry = vocabCache.entries.find((e) => e.word === ww.word);
    if (entry && !entry.learned) {
      const badge = document.createElement("sup");
      badge.className = "badge";
      badge.title = "not in the training vocabulary; conditioned via its word vector";
      badge.textContent = "unlearned";
      label.appendChild(badge);
    }
    const weight = document.createElement("input");
    weight.type = "range";
    weight.min = "0";
    weight.max = "2";
    weight.step = "0.05";
    weight.value = String(ww.weight);
    weight.title = `weight ${ww.weight.toFixed(2)}`;
    weight.oninput = () => {
      state.words[idx].weight = Number(weight.value);
      weight.title = `weight ${Number(weight.value).toFixed(2)}`;
    };
    const close = document.createElement("button");
    close.textContent = "x";
    close.onclick = () => {
      state.words.splice(idx, 1);
      renderChips();
    };
    chip.append(label, weight, close);
    chipBox.appendChild(chip);
  });
}

function showSuggestions(): void {
  const ranked = rankSuggestions(wordInput.value, vocabCache.entries);
  dropdown.innerHTML = "";
  if (!wordInput.value.trim()) {
    dropdown.style.display = "none";
    return;
  }
  if (ranked.length === 0) {
    const hint = document.createElement("div");
    hint.className = "suggestion muted";
    hint.textContent = "no vocabulary match; press Enter to try the raw word";
    dropdown.appendChild(hint);
  }
  ranked.forEach((s) => {
    const row = document.createElement("div");
    row.className = "suggestion";
    row.textContent = s.word + (s.learned ? ` (${s.count})` : "");
    if (!s.learned) {
      const badge = document.createElement("span");
      badge.className = "badge";
      badge.textContent = "unlearned";
      row.appendChild(badge);
    }
    row.onclick = () => {
      addWord(s.word);
    };
    dropdown.appendChild(row);
  });
  dropdown.style.display = "block";
}

function addWord(word: string): void {
  const clean = word.trim().toLowerCase();
  if (clean && !state.words.some((w) => w.word === clean)) {
    state.words.push({ word: clean, weight: 1.0 });
    renderChips();
  }
  wordInput.value = "";
  dropdown.style.display = "none";
}

function renderGrid(target: HTMLElement, res: GenerateResponse): void {
  target.innerHTML = "";
  const img = document.createElement("img");
  img.src = `data:image/png;base64,${res.grid_png}`;
  img.width = res.grid.cols * 64 * 2;
  img.className = "grid-img";
  target.appendChild(img);
  const meta = document.createElement("div");
  meta.className = "muted";
  meta.textContent =
    `${res.grid.rows}x${res.grid.cols} in ${res.timing_ms.toFixed(0)} ms | ` +
    res.condition_summary
      .map((c) => `${c.word ?? "raw"}:${c.weight.toFixed(2)}`)
      .join(" ");
  target.appendChild(meta);
}

async function issue(req: GenerateRequest): Promise<GenerateResponse | null> {
  const problems = validateRequest(req);
  if (problems.length > 0) {
    setStatus(problems.join("; "), true);
    return null;
  }
  setStatus("generating...");
  try {
    const res = await api.generate(req);
    history.record(req, res);
    renderHistory();
    setStatus("ok");
    return res;
  } catch (err) {
    const e = err as { status?: number; detail?: unknown; suggestions?: string[] };
    const hint = e.suggestions?.length ? `; try: ${e.suggestions.join(", ")}` : "";
    setStatus(`request failed (${e.status}): ${JSON.stringify(e.detail)}${hint}`, true);
    return null;
  }
}

function renderHistory(): void {
  historyBox.innerHTML = "";
  [...history.list()].reverse().forEach((entry) => {
    const cellB64 = entry.thumbnail;
    const card = document.createElement("div");
    card.className = "hist-card" + (selected.has(entry.id) ? " selected" : "");
    const img = document.createElement("img");
    img.src = `data:image/png;base64,${cellB64}`;
    img.width = 64;
    const caption = document.createElement("div");
    caption.className = "muted";
    caption.textContent = `#${entry.id} ${entry.request.mode} seed=${entry.request.seed}`;
    card.append(img, caption);
    card.onclick = () => {
      if (selected.has(entry.id)) {
        selected.delete(entry.id);
      } else {
        selected.add(entry.id);
      }
      renderHistory();
      renderCompare();
    };
    historyBox.appendChild(card);
  });
}

function provenanceTable(entry: HistoryEntry): HTMLElement {
  const pre = document.createElement("pre");
  pre.className = "provenance";
  pre.textContent = JSON.stringify(entry.request, null, 1);
  return pre;
}

function renderCompare(): void {
  compareBox.innerHTML = "";
  [...selected].sort((a, b) => a - b).forEach((id) => {
    const entry = history.get(id);
    if (!entry) return;
    const panel = document.createElement("div");
    panel.className = "panel";
    const img = document.createElement("img");
    img.src = `data:image/png;base64,${entry.gridPng}`;
    img.className = "grid-img";
    const exportBtn = document.createElement("button");
    exportBtn.textContent = "export PNG + sidecar";
    exportBtn.onclick = () => downloadArtifact(exportEntry(entry));
    panel.append(img, provenanceTable(entry), exportBtn);
    compareBox.appendChild(panel);
  });
}

const scrubber = new LambdaScrubber<GenerateResponse>(
  (lambda) => api.generate(scrubRequest(state, lambda)),
  ({ lambda, response }) => {
    renderGrid(resultBox, response);
    history.record(scrubRequest(state, lambda), response);
    renderHistory();
    setStatus(`lambda=${lambda.toFixed(2)}`);
  },
  4,
);

async function refreshVocab(): Promise<void> {
  try {
    const health = await api.health();
    healthBox.textContent =
      `model ${health.variant} K=${health.k} D=${health.d} [${health.checkpoint_id}]`;
    if (health.checkpoint_id !== vocabCache.checkpointId) {
      const vocab = await api.vocab();
      vocabCache.update(health.checkpoint_id, vocab.words, vocab.unlearned);
    }
  } catch {
    healthBox.textContent = "service unreachable";
  }
}

function wire(): void {
  wordInput.oninput = showSuggestions;
  wordInput.onkeydown = (ev) => {
    if (ev.key === "Enter") {
      addWord(wordInput.value);
    }
  };
  textInput.oninput = () => {
    state.text = textInput.value.toUpperCase();
    textInput.value = state.text;
  };
  seedInput.onchange = () => {
    state.seed = Number(seedInput.value) | 0;
  };
  nInput.onchange = () => {
    state.n = Number(nInput.value) | 0;
  };
  el<HTMLButtonElement>("reseed").onclick = () => {
    state.seed = Math.floor(Math.random() * 1_000_000);
    seedInput.value = String(state.seed);
  };
  el<HTMLButtonElement>("generate").onclick = async () => {
    const res = await issue(sheetRequest(state));
    if (res) {
      renderGrid(resultBox, res);
    }
  };
  lambdaSlider.oninput = () => {
    const lambda = Number(lambdaSlider.value);
    lambdaValue.textContent = lambda.toFixed(2);
    state.lambda = lambda;
    state.wordA = wordASelect.value.trim().toLowerCase();
    state.wordB = wordBSelect.value.trim().toLowerCase();
    if (state.wordA && state.wordB) {
      scrubber.scrub(lambda);
    } else {
      setStatus("pick two endpoint words to scrub", true);
    }
  };
  el<HTMLButtonElement>("clear-history").onclick = () => {
    history.clear();
    selected.clear();
    renderHistory();
    renderCompare();
  };
  renderChips();
  renderHistory();
  void refreshVocab();
  setInterval(() => void refreshVocab(), 5000);
}

wire();
