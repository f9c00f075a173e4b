"""Inference toolkit: impression-conditioned sheets and interpolation grids.

A sheet is n rows by len(text) columns; each row shares one noise draw so it
reads as a single coherent font across the letters. Interpolation grids vary
the blend coefficient across columns (one row per letter) with either the
condition or the noise interpolated and everything else pinned. Every PNG
gets a JSON sidecar echoing the full request, sufficient to replay the image
byte for byte.
"""

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .corpus import LETTERS, glyph_to_u8, u8_to_glyph
from .lexicon import (WordNotFoundError, interpolate_noise, interpolate_probs,
                      suggest_alternatives, weighted_condition, word_vector)
from .nets import COND_KIND, checkpoint_id, generator_forward

SIDECAR_VERSION = 1


class UnknownWordError(ValueError):
    """An impression word the loaded model cannot condition on."""

    def __init__(self, word, suggestions):
        self.word = word
        self.suggestions = suggestions
        hint = f"; close matches: {', '.join(suggestions)}" if suggestions else ""
        super().__init__(f"cannot resolve impression word {word!r}{hint}")


@dataclass
class SheetSpec:
    text: str
    words: list
    n: int = 4
    seed: int = 0
    weights: list = None
    raw_condition: np.ndarray = None   # bypasses word lookup when given

    def validate(self):
        if not self.text or any(ch not in LETTERS for ch in self.text):
            raise ValueError("text must be non-empty uppercase A-Z")
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.raw_condition is None and not self.words:
            raise ValueError("need at least one impression word")
        if self.weights is not None and len(self.weights) != len(self.words):
            raise ValueError("weights must match words")
        return self


def _letter_onehots(text):
    out = np.zeros((len(text), 26), dtype=np.float32)
    for i, ch in enumerate(text):
        out[i, LETTERS.index(ch)] = 1.0
    return out


def build_condition(bundle, table, words, weights=None):
    """Condition vector for the bundle's variant plus per-word provenance.

    Semantic variant: weighted sum of word vectors from the table (any table
    word works, learned or not). K-wide variants: normalized weights over
    training-vocabulary indices.
    """
    weights = [1.0] * len(words) if weights is None else list(weights)
    if len(weights) != len(words):
        raise ValueError("weights must match words")
    if sum(weights) <= 0:
        raise ValueError("weights must sum to a positive value")
    info = []
    if COND_KIND[bundle.variant] == "semantic":
        if table is None:
            raise ValueError("this checkpoint conditions on word vectors; "
                             "an embedding table is required")
        for w in words:
            try:
                vec = word_vector(table, w)
            except (WordNotFoundError, ValueError):
                raise UnknownWordError(w, suggest_alternatives(table, w)) from None
            info.append({"word": w, "weight": None, "vector_norm": float(np.linalg.norm(vec))})
        cond = weighted_condition(words, weights, table)
        for entry, weight in zip(info, weights):
            entry["weight"] = float(weight)
            entry["contribution_norm"] = entry["vector_norm"] * float(weight)
        return cond.astype(np.float32), info
    vocab = bundle.vocab
    cond = np.zeros(bundle.k, dtype=np.float64)
    for w, weight in zip(words, weights):
        if w not in vocab:
            close = sorted(v for v in vocab.words if v.startswith(w[:3]))[:5]
            raise UnknownWordError(w, close or vocab.words[:5])
        cond[vocab.index(w)] += weight
        info.append({"word": w, "weight": float(weight),
                     "vector_norm": 1.0, "contribution_norm": float(weight)})
    cond = cond / cond.sum()
    return cond.astype(np.float32), info


def _forward_cell(bundle, z, c, cond):
    # cells are rendered one at a time: batched GEMMs round differently for
    # different batch shapes, which would break bit-exact endpoint identities
    return generator_forward(bundle, z[None, :], c[None, :], cond[None, :])[0]


def _render_cells(bundle, z_rows, text, cond):
    """Generate a (rows, cols, 64, 64) cell array: one shared condition,
    noise varying by row, letters by column."""
    rows, cols = len(z_rows), len(text)
    chars = _letter_onehots(text)
    cells = np.empty((rows, cols, 64, 64), dtype=np.float32)
    for r in range(rows):
        for ci in range(cols):
            cells[r, ci] = _forward_cell(bundle, z_rows[r], chars[ci], cond)
    return cells


def assemble_grid(cells):
    """Tile (rows, cols, 64, 64) cells into one image array."""
    rows, cols = cells.shape[:2]
    return cells.transpose(0, 2, 1, 3).reshape(rows * 64, cols * 64)


def encode_png(image) -> bytes:
    import io

    buf = io.BytesIO()
    Image.fromarray(glyph_to_u8(image), mode="L").save(buf, format="PNG")
    return buf.getvalue()


def decode_png(data) -> np.ndarray:
    import io

    return u8_to_glyph(np.asarray(Image.open(io.BytesIO(data)).convert("L")))


def _noise_rows(seed, n, dim):
    return np.random.default_rng(seed).standard_normal((n, dim)).astype(np.float32)


def generate_sheet(bundle, spec: SheetSpec, table=None, ckpt_path=None):
    """Render a sheet: one condition, n noise rows, len(text) columns.

    Returns (cells, sidecar). The condition is shared by every cell; each
    row's noise draw is shared across its letters.
    """
    spec.validate()
    if spec.raw_condition is not None:
        cond = np.asarray(spec.raw_condition, dtype=np.float32)
        info = [{"word": None, "weight": 1.0, "vector_norm": float(np.linalg.norm(cond)),
                 "contribution_norm": float(np.linalg.norm(cond))}]
    else:
        cond, info = build_condition(bundle, table, spec.words, spec.weights)
    z_rows = _noise_rows(spec.seed, spec.n, bundle.dims.noise_dim)
    cells = _render_cells(bundle, z_rows, spec.text, cond)
    sidecar = _sidecar("sheet", bundle, ckpt_path, words=spec.words,
                       weights=spec.weights, text=spec.text, n=spec.n,
                       seed=spec.seed, condition=cond, condition_info=info,
                       grid={"rows": spec.n, "cols": len(spec.text)})
    return cells, sidecar


def impression_interpolation_grid(bundle, word_a, word_b, steps, text, seed,
                                  table=None, ckpt_path=None):
    """Blend two impression words across columns with the noise pinned.

    Column t uses coefficient t/(steps-1); the endpoint columns reproduce the
    corresponding single-word sheets exactly.
    """
    if steps < 2:
        raise ValueError("steps must be >= 2")
    cond_a, _ = build_condition(bundle, table, [word_a])
    cond_b, _ = build_condition(bundle, table, [word_b])
    lerp = interpolate_noise if COND_KIND[bundle.variant] == "semantic" else interpolate_probs
    lambdas = [t / (steps - 1) for t in range(steps)]
    cond_cols = np.stack([lerp(cond_a.astype(np.float64), cond_b.astype(np.float64), lam)
                          for lam in lambdas]).astype(np.float32)
    z = _noise_rows(seed, 1, bundle.dims.noise_dim)[0]

    chars = _letter_onehots(text)
    cells = np.empty((len(text), steps, 64, 64), dtype=np.float32)
    for li in range(len(text)):
        for t in range(steps):
            cells[li, t] = _forward_cell(bundle, z, chars[li], cond_cols[t])
    sidecar = _sidecar("lerp-words", bundle, ckpt_path, word_a=word_a, word_b=word_b,
                       steps=steps, text=text, seed=seed, lambdas=lambdas,
                       condition=cond_cols,
                       grid={"rows": len(text), "cols": steps})
    return cells, sidecar


def noise_interpolation_grid(bundle, words, z_seed_1, z_seed_2, steps, text,
                             table=None, weights=None, ckpt_path=None):
    """Blend two noise draws across columns with the condition pinned."""
    if steps < 2:
        raise ValueError("steps must be >= 2")
    cond, info = build_condition(bundle, table, words, weights)
    z1 = _noise_rows(z_seed_1, 1, bundle.dims.noise_dim)[0].astype(np.float64)
    z2 = _noise_rows(z_seed_2, 1, bundle.dims.noise_dim)[0].astype(np.float64)
    lambdas = [t / (steps - 1) for t in range(steps)]
    z_cols = np.stack([interpolate_noise(z1, z2, lam) for lam in lambdas]).astype(np.float32)

    chars = _letter_onehots(text)
    cells = np.empty((len(text), steps, 64, 64), dtype=np.float32)
    for li in range(len(text)):
        for t in range(steps):
            cells[li, t] = _forward_cell(bundle, z_cols[t], chars[li], cond)
    sidecar = _sidecar("lerp-noise", bundle, ckpt_path, words=words, weights=weights,
                       seed_a=z_seed_1, seed_b=z_seed_2, steps=steps, text=text,
                       lambdas=lambdas, condition=cond, condition_info=info,
                       grid={"rows": len(text), "cols": steps})
    return cells, sidecar


def _sidecar(mode, bundle, ckpt_path, condition=None, condition_info=None, **fields):
    doc = {"format_version": SIDECAR_VERSION, "mode": mode, "variant": bundle.variant,
           "k": bundle.k, "d": bundle.d}
    if ckpt_path is not None:
        doc["checkpoint"] = str(ckpt_path)
        doc["checkpoint_id"] = checkpoint_id(ckpt_path)
    if condition is not None:
        doc["condition"] = np.asarray(condition, dtype=np.float64).tolist()
    if condition_info is not None:
        doc["condition_info"] = condition_info
    doc.update({k: v for k, v in fields.items() if v is not None})
    return doc


def write_outputs(cells, sidecar, out_path):
    """Write the grid PNG and its JSON sidecar; returns both paths."""
    out_path = Path(out_path)
    png = encode_png(assemble_grid(cells))
    out_path.write_bytes(png)
    sidecar_path = out_path.with_suffix(".json")
    sidecar_path.write_text(json.dumps(sidecar, indent=2, sort_keys=True))
    return out_path, sidecar_path


def replay_sidecar(sidecar, bundle, table=None):
    """Re-run the generation a sidecar documents; returns (cells, sidecar)."""
    if isinstance(sidecar, (str, Path)):
        sidecar = json.loads(Path(sidecar).read_text())
    mode = sidecar["mode"]
    ckpt = sidecar.get("checkpoint")
    if mode == "sheet":
        spec = SheetSpec(text=sidecar["text"], words=sidecar.get("words") or [],
                         n=sidecar["n"], seed=sidecar["seed"],
                         weights=sidecar.get("weights"))
        return generate_sheet(bundle, spec, table, ckpt_path=ckpt)
    if mode == "lerp-words":
        return impression_interpolation_grid(
            bundle, sidecar["word_a"], sidecar["word_b"], sidecar["steps"],
            sidecar["text"], sidecar["seed"], table, ckpt_path=ckpt)
    if mode == "lerp-noise":
        return noise_interpolation_grid(
            bundle, sidecar.get("words") or [], sidecar["seed_a"], sidecar["seed_b"],
            sidecar["steps"], sidecar["text"], table,
            weights=sidecar.get("weights"), ckpt_path=ckpt)
    raise ValueError(f"unknown sidecar mode {mode!r}")
