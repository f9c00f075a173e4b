"""Glyph/impression dataset handling: on-disk layout, vocabulary, batching.

Dataset layout on disk: ``<root>/<font_id>/<LETTER>.png`` (8-bit grayscale,
64x64) plus ``<root>/<font_id>/tags.txt`` with one lowercase word per line.
Glyph pixels map linearly from [0, 255] to [-1, 1]; ink is dark (-1).
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

log = logging.getLogger(__name__)

GLYPH_SIZE = 64
LETTERS = "ABCDEFGHIJKLMNOPQRSTUVWXYZ"
N_LETTERS = 26


def glyph_to_u8(glyph):
    """Map a [-1, 1] glyph to 8-bit grayscale."""
    arr = np.asarray(glyph, dtype=np.float64)
    return np.clip(np.rint((arr + 1.0) * 127.5), 0, 255).astype(np.uint8)


def u8_to_glyph(u8):
    """Map 8-bit grayscale back to [-1, 1] float32."""
    return (np.asarray(u8, dtype=np.float32) / 255.0) * 2.0 - 1.0


def quantize_glyph(glyph):
    """Snap a [-1, 1] array onto the 256-level grid used on disk, so that a
    save/load round trip is bit-identical."""
    return u8_to_glyph(glyph_to_u8(glyph))


@dataclass
class FontRecord:
    """One font: 64x64 glyphs for its letters plus impression indices."""

    font_id: str
    glyphs: dict                 # letter -> (64, 64) float32 in [-1, 1]
    impressions: list            # sorted, deduplicated vocabulary indices

    def validate(self, k=None):
        if not self.impressions:
            raise ValueError(f"{self.font_id}: empty impression list")
        if len(set(self.impressions)) != len(self.impressions):
            raise ValueError(f"{self.font_id}: duplicate impression indices")
        if k is not None and any(not 0 <= i < k for i in self.impressions):
            raise ValueError(f"{self.font_id}: impression index out of range")
        for letter, glyph in self.glyphs.items():
            if glyph.shape != (GLYPH_SIZE, GLYPH_SIZE):
                raise ValueError(f"{self.font_id}/{letter}: bad shape {glyph.shape}")
            if glyph.min() < -1.0 or glyph.max() > 1.0:
                raise ValueError(f"{self.font_id}/{letter}: values outside [-1, 1]")
        return self


@dataclass
class Vocabulary:
    """Ordered impression-word list with per-word annotated-font counts."""

    words: list
    counts: list = field(default_factory=list)

    def __post_init__(self):
        if len(set(self.words)) != len(self.words):
            raise ValueError("vocabulary words must be unique")
        if not self.counts:
            self.counts = [0] * len(self.words)
        self._index = {w: i for i, w in enumerate(self.words)}

    def __len__(self):
        return len(self.words)

    def __contains__(self, word):
        return word in self._index

    def index(self, word):
        return self._index[word]


@dataclass
class TrainingBatch:
    """Images paired with one-hot letter and one-hot impression conditions."""

    images: np.ndarray             # (B, 64, 64) float32
    char_onehots: np.ndarray       # (B, 26) float32
    impression_onehots: np.ndarray  # (B, K) float32

    def __len__(self):
        return self.images.shape[0]


def save_fonts(records, vocab: Vocabulary, root):
    """Write records in the on-disk dataset layout."""
    root = Path(root)
    for rec in records:
        d = root / rec.font_id
        d.mkdir(parents=True, exist_ok=True)
        for letter, glyph in rec.glyphs.items():
            Image.fromarray(glyph_to_u8(glyph), mode="L").save(d / f"{letter}.png")
        tags = [vocab.words[i] for i in rec.impressions]
        (d / "tags.txt").write_text("".join(t + "\n" for t in tags))
    return root


def load_fonts(root, vocab: Vocabulary, letters=None):
    """Load FontRecords from the on-disk layout.

    Tags not in the vocabulary are dropped; fonts left with no impressions
    are dropped. A font directory missing a glyph file is skipped with a
    warning; an unreadable or wrongly sized image is an error. When
    ``letters`` is None the expected letter set is inferred from the first
    font directory.
    """
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"dataset root {root} does not exist")
    font_dirs = sorted(p for p in root.iterdir() if p.is_dir())
    if letters is None:
        for d in font_dirs:
            found = sorted(p.stem for p in d.glob("?.png") if p.stem in LETTERS)
            if found:
                letters = "".join(found)
                break
        else:
            letters = LETTERS
    records = []
    for d in font_dirs:
        tag_file = d / "tags.txt"
        if not tag_file.is_file():
            log.warning("skipping %s: no tags.txt", d.name)
            continue
        tags = [t.strip().lower() for t in tag_file.read_text().splitlines() if t.strip()]
        impressions = sorted({vocab.index(t) for t in tags if t in vocab})
        if not impressions:
            continue
        glyphs = {}
        missing = False
        for letter in letters:
            png = d / f"{letter}.png"
            if not png.is_file():
                log.warning("skipping font %s: missing glyph %s.png", d.name, letter)
                missing = True
                break
            try:
                img = Image.open(png)
                arr = np.asarray(img.convert("L"))
            except Exception as exc:
                raise ValueError(f"malformed glyph image {png}: {exc}") from exc
            if arr.shape != (GLYPH_SIZE, GLYPH_SIZE):
                raise ValueError(f"malformed glyph image {png}: shape {arr.shape}")
            glyphs[letter] = u8_to_glyph(arr)
        if missing:
            continue
        records.append(FontRecord(d.name, glyphs, impressions).validate(k=len(vocab)))
    return records


def build_vocabulary(tag_lists, table) -> Vocabulary:
    """Build a vocabulary from per-font tag lists, keeping only words the
    embedding table can resolve (directly or by hyphen splitting).

    Words are lowercased and sorted; counts are the number of fonts carrying
    each surviving word. Applying the function to its own output changes
    nothing.
    """
    from .lexicon import resolvable

    counts = {}
    for tags in tag_lists:
        for word in {t.strip().lower() for t in tags if t.strip()}:
            counts[word] = counts.get(word, 0) + 1
    kept = sorted(w for w in counts if resolvable(table, w))
    if not kept:
        raise ValueError("no tag word resolvable by the embedding table")
    return Vocabulary(words=kept, counts=[counts[w] for w in kept])


def sample_batch(records, batch_size, rng_seed, k=None) -> TrainingBatch:
    """Sample a training batch: uniform (font, letter) pairs, each paired
    with ONE impression drawn uniformly from that font's list (one-hot, never
    multi-hot). Deterministic given rng_seed.

    k fixes the one-hot width; by default it is inferred from the records,
    which is only safe when every vocabulary word is actually present."""
    if not records:
        raise ValueError("no records to sample from")
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    if k is None:
        k = max(max(r.impressions) for r in records) + 1
    rng = np.random.default_rng(rng_seed)
    pairs = [(ri, letter) for ri, r in enumerate(records) for letter in sorted(r.glyphs)]
    picks = rng.integers(0, len(pairs), size=batch_size)

    images = np.empty((batch_size, GLYPH_SIZE, GLYPH_SIZE), dtype=np.float32)
    chars = np.zeros((batch_size, N_LETTERS), dtype=np.float32)
    imps = np.zeros((batch_size, k), dtype=np.float32)
    for b, pick in enumerate(picks):
        ri, letter = pairs[pick]
        rec = records[ri]
        images[b] = rec.glyphs[letter]
        chars[b, LETTERS.index(letter)] = 1.0
        imps[b, rec.impressions[rng.integers(0, len(rec.impressions))]] = 1.0
    return TrainingBatch(images=images, char_onehots=chars, impression_onehots=imps)


def multi_hot_labels(records, k):
    """(N_fonts, K) multi-hot matrix of every annotated impression."""
    out = np.zeros((len(records), k), dtype=np.float32)
    for i, rec in enumerate(records):
        out[i, rec.impressions] = 1.0
    return out


def split_records(records, test_fraction, seed):
    """Deterministic font-level train/test split."""
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(records))
    n_test = max(1, int(round(len(records) * test_fraction)))
    test_idx = set(order[:n_test].tolist())
    train = [r for i, r in enumerate(records) if i not in test_idx]
    test = [r for i, r in enumerate(records) if i in test_idx]
    return train, test
