"""Word-vector table and condition algebra.

The embedding table maps impression words to real-valued semantic vectors.
Conditions for the generator are built from these vectors: a probability
vector over the vocabulary is collapsed to a single semantic vector by a
probability-weighted sum, and multi-word conditions are plain vector sums.
"""

import logging
import struct
from dataclasses import dataclass, field
from math import fsum
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)

PROB_TOL = 1e-6


class WordNotFoundError(KeyError):
    """Raised when a word cannot be resolved to a semantic vector."""

    def __init__(self, word, missing=None):
        self.word = word
        self.missing = list(missing) if missing else [word]
        super().__init__(f"no semantic vector for {word!r}")


@dataclass
class EmbeddingTable:
    """Immutable word -> vector lookup. All vectors share one dimension."""

    dim: int
    index: dict = field(default_factory=dict)   # lowercase word -> row
    vectors: np.ndarray = None                  # (V, dim) float64

    def __len__(self):
        return len(self.index)

    def __contains__(self, word):
        return word.lower() in self.index

    def words(self):
        return list(self.index)

    def get(self, word):
        """Direct lookup of a single word; None if absent."""
        row = self.index.get(word.lower())
        if row is None:
            return None
        return self.vectors[row]


def load_table(path) -> EmbeddingTable:
    """Load a text-format embedding table.

    Format: first line ``<count> <dim>``, then one ``<word> <v1> ... <vdim>``
    line per word. Duplicate words keep the last occurrence (with a warning);
    a row whose vector length disagrees with the header is an error.
    """
    path = Path(path)
    index = {}
    rows = []
    with path.open("r", encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise ValueError(f"{path}: malformed header line, expected '<count> <dim>'")
        count, dim = int(header[0]), int(header[1])
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split(" ")
            word = parts[0].lower()
            vals = parts[1:]
            if len(vals) != dim:
                raise ValueError(
                    f"{path}: line {lineno}: expected {dim} components for "
                    f"{word!r}, got {len(vals)}"
                )
            vec = np.array([float(v) for v in vals], dtype=np.float64)
            if word in index:
                log.warning("duplicate word %r at line %d, keeping last", word, lineno)
                rows[index[word]] = vec
            else:
                index[word] = len(rows)
                rows.append(vec)
    if len(rows) != count:
        log.warning("%s: header declared %d words, found %d", path, count, len(rows))
    vectors = np.vstack(rows) if rows else np.zeros((0, dim))
    return EmbeddingTable(dim=dim, index=index, vectors=vectors)


def save_table(table: EmbeddingTable, path):
    """Write a table in the text format accepted by load_table."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        fh.write(f"{len(table)} {table.dim}\n")
        for word, row in table.index.items():
            comps = " ".join(repr(float(v)) for v in table.vectors[row])
            fh.write(f"{word} {comps}\n")


def convert_binary_table(src, dest):
    """Convert a binary word-vector file (the widespread .bin layout: text
    header, then per word a space-terminated token followed by dim float32s)
    into the text format used by load_table. Returns the word count."""
    src = Path(src)
    with src.open("rb") as fh:
        header = fh.readline().split()
        count, dim = int(header[0]), int(header[1])
        with Path(dest).open("w", encoding="utf-8") as out:
            out.write(f"{count} {dim}\n")
            for _ in range(count):
                chars = []
                while True:
                    ch = fh.read(1)
                    if ch == b" ":
                        break
                    if ch == b"":
                        raise ValueError(f"{src}: truncated file")
                    if ch != b"\n":
                        chars.append(ch)
                word = b"".join(chars).decode("utf-8", errors="replace")
                vec = struct.unpack(f"<{dim}f", fh.read(4 * dim))
                out.write(word + " " + " ".join(repr(float(v)) for v in vec) + "\n")
    return count


def word_vector(table: EmbeddingTable, word: str) -> np.ndarray:
    """Resolve a word to its semantic vector.

    Direct lookup first; a hyphenated word absent from the table falls back
    to the sum of the vectors of its resolvable sub-words. Fails only when
    nothing resolves.
    """
    if not word:
        raise ValueError("empty word")
    direct = table.get(word)
    if direct is not None:
        return direct.copy()
    parts = [p for p in word.split("-") if p]
    found = [table.get(p) for p in parts]
    kept = [v for v in found if v is not None]
    if len(parts) < 2 or not kept:
        raise WordNotFoundError(word, [p for p, v in zip(parts, found) if v is None])
    missing = [p for p, v in zip(parts, found) if v is None]
    if missing:
        log.warning("word %r: sub-words %s not in table, summing the rest", word, missing)
    out = np.zeros(table.dim, dtype=np.float64)
    for v in kept:
        out += v
    return out


def resolvable(table: EmbeddingTable, word: str) -> bool:
    try:
        word_vector(table, word)
        return True
    except (WordNotFoundError, ValueError):
        return False


def check_prob_vector(probs, tol=PROB_TOL):
    """Validate a probability vector: nonnegative, sums to 1 within tol."""
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim != 1:
        raise ValueError(f"probability vector must be 1-D, got shape {probs.shape}")
    if np.any(probs < 0):
        raise ValueError("probability vector has negative components")
    total = probs.sum()
    if abs(total - 1.0) > tol:
        raise ValueError(f"probability vector sums to {total}, expected 1")
    return probs


def embed_impressions(probs, word_matrix) -> np.ndarray:
    """Collapse a probability vector over the vocabulary into one semantic
    vector: the probability-weighted sum of the per-word vectors.

    Uses exactly rounded summation per output component, so the result is
    invariant under permuting (probability, vector) pairs -- in particular,
    moving mass between two words with identical vectors cannot change it.
    """
    probs = check_prob_vector(probs)
    W = np.asarray(word_matrix, dtype=np.float64)
    if W.ndim != 2 or W.shape[0] != probs.shape[0]:
        raise ValueError(
            f"word matrix shape {W.shape} does not match {probs.shape[0]} probabilities"
        )
    return np.array(
        [fsum(probs[k] * W[k, d] for k in range(W.shape[0])) for d in range(W.shape[1])],
        dtype=np.float64,
    )


def l2_normalized(vector):
    norm = float(np.linalg.norm(vector))
    if norm == 0.0:
        raise ValueError("cannot normalize a zero vector")
    return np.asarray(vector, dtype=np.float64) / norm


def compose_condition(words, table: EmbeddingTable, reduce="sum", normalize=False) -> np.ndarray:
    """Combine one or more impression words into a single semantic condition.

    The default is the plain sum of the raw word vectors (order-independent);
    normalizing would break the linearity the weighted-sum module relies on,
    so ``normalize=True`` (unit-length vectors before summing) is off unless
    asked for. ``reduce="mean"`` is an experimental alternative to the sum.
    """
    if not words:
        raise ValueError("need at least one word")
    if reduce not in ("sum", "mean"):
        raise ValueError(f"unknown reduce mode {reduce!r}")
    missing = [w for w in words if not resolvable(table, w)]
    if missing:
        raise WordNotFoundError(", ".join(missing), missing)
    vecs = [word_vector(table, w) for w in words]
    if normalize:
        vecs = [l2_normalized(v) for v in vecs]
    out = np.array([fsum(v[d] for v in vecs) for d in range(table.dim)], dtype=np.float64)
    if reduce == "mean":
        out /= len(vecs)
    return out


def weighted_condition(words, weights, table: EmbeddingTable) -> np.ndarray:
    """Arbitrary nonnegative weights over words; generalizes the two-word
    interpolation to convex blends of any arity. Weights are used as given
    (not normalized)."""
    if len(words) != len(weights):
        raise ValueError("words and weights differ in length")
    weights = np.asarray(weights, dtype=np.float64)
    if np.any(weights < 0):
        raise ValueError("weights must be nonnegative")
    if weights.sum() <= 0:
        raise ValueError("weights must sum to a positive value")
    vecs = [word_vector(table, w) for w in words]
    return np.array(
        [fsum(w * v[d] for w, v in zip(weights, vecs)) for d in range(table.dim)],
        dtype=np.float64,
    )


def _check_lambda(lam):
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"interpolation coefficient {lam} outside [0, 1]")


def interpolate_probs(a, b, lam) -> np.ndarray:
    """Convex combination (1-lam)*a + lam*b of two probability vectors."""
    _check_lambda(lam)
    a = check_prob_vector(a)
    b = check_prob_vector(b)
    if a.shape != b.shape:
        raise ValueError("probability vectors differ in length")
    if lam == 0.0:
        return a.copy()
    if lam == 1.0:
        return b.copy()
    return (1.0 - lam) * a + lam * b


def interpolate_noise(z1, z2, lam) -> np.ndarray:
    """Linear blend of two noise vectors; endpoints are returned exactly."""
    _check_lambda(lam)
    z1 = np.asarray(z1, dtype=np.float64)
    z2 = np.asarray(z2, dtype=np.float64)
    if z1.shape != z2.shape:
        raise ValueError("noise vectors differ in shape")
    if lam == 0.0:
        return z1.copy()
    if lam == 1.0:
        return z2.copy()
    return (1.0 - lam) * z1 + lam * z2


def nearest_words(table: EmbeddingTable, vector, topn=5):
    """Words closest to a vector by cosine similarity, best first."""
    vector = np.asarray(vector, dtype=np.float64)
    norms = np.linalg.norm(table.vectors, axis=1) * (np.linalg.norm(vector) or 1.0)
    norms[norms == 0] = 1.0
    sims = table.vectors @ vector / norms
    order = np.argsort(-sims, kind="stable")[:topn]
    words = table.words()
    return [(words[i], float(sims[i])) for i in order]


def suggest_alternatives(table: EmbeddingTable, word: str, topn=5):
    """Suggestions for an unresolvable word: nearest neighbours of whatever
    sub-words do resolve, otherwise prefix matches from the table."""
    parts = [p for p in word.lower().split("-") if p]
    partial = [table.get(p) for p in parts]
    partial = [v for v in partial if v is not None]
    if partial:
        probe = np.sum(partial, axis=0)
        return [w for w, _ in nearest_words(table, probe, topn)]
    prefix = word.lower()[:3]
    hits = [w for w in table.index if w.startswith(prefix)]
    return sorted(hits)[:topn]


def vocab_matrix(table: EmbeddingTable, words) -> np.ndarray:
    """Stack word vectors into a (K, dim) matrix aligned with ``words``."""
    return np.vstack([word_vector(table, w) for w in words])
