"""Procedural desk-scale glyph corpus with known ground-truth style attributes.

Letters are rendered from polyline skeletons through a distance field, so a
handful of scalar style parameters (stroke half-width, slant shear, corner
rounding, horizontal compression) deterministically control the shape. Each
style attribute word names one pole of one parameter axis, which gives a
corpus where the tags are true by construction -- the stand-in for a large
scraped font/tag collection when testing the pipeline end to end.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.ndimage import gaussian_filter

from .corpus import FontRecord, Vocabulary, quantize_glyph
from .lexicon import EmbeddingTable

GLYPH_SIZE = 64
LETTERS = "ABCDEFGHIJKLMNOPQRSTUVWXYZ"

# axis -> {pole word: (low, high) sampling range}, plus the neutral range
# used when an axis is not under the corpus config's control.
STYLE_AXES = {
    "weight": {"bold": (4.5, 5.5), "thin": (1.0, 1.5)},
    "slant": {"italic": (0.16, 0.26), "upright": (-0.02, 0.02)},
    "rounding": {"round": (0.50, 0.68), "square": (0.00, 0.06)},
    "width": {"wide": (0.95, 1.10), "condensed": (0.55, 0.68)},
}
NEUTRAL = {"weight": (2.4, 3.2), "slant": (0.0, 0.04), "rounding": (0.18, 0.28), "width": (0.78, 0.90)}

ATTRIBUTE_AXIS = {word: axis for axis, poles in STYLE_AXES.items() for word in poles}


def opposite_pole(word):
    axis = ATTRIBUTE_AXIS[word]
    return next(w for w in STYLE_AXES[axis] if w != word)


# Polyline skeletons on a unit box, x rightward, y downward.
SKELETONS = {
    "A": [[(0, 1), (0.5, 0), (1, 1)], [(0.22, 0.62), (0.78, 0.62)]],
    "B": [[(0, 0), (0, 1)],
          [(0, 0), (0.55, 0), (0.72, 0.10), (0.72, 0.38), (0.55, 0.48), (0, 0.48)],
          [(0, 0.48), (0.60, 0.48), (0.80, 0.60), (0.80, 0.88), (0.60, 1), (0, 1)]],
    "C": [[(0.88, 0.14), (0.62, 0), (0.30, 0), (0.06, 0.20), (0, 0.42), (0, 0.58),
           (0.06, 0.80), (0.30, 1), (0.62, 1), (0.88, 0.86)]],
    "D": [[(0, 0), (0, 1)],
          [(0, 0), (0.50, 0), (0.82, 0.16), (0.94, 0.40), (0.94, 0.60), (0.82, 0.84), (0.50, 1), (0, 1)]],
    "E": [[(0, 0), (0, 1)], [(0, 0), (0.9, 0)], [(0, 0.5), (0.7, 0.5)], [(0, 1), (0.9, 1)]],
    "F": [[(0, 0), (0, 1)], [(0, 0), (0.9, 0)], [(0, 0.5), (0.7, 0.5)]],
    "G": [[(0.88, 0.14), (0.62, 0), (0.30, 0), (0.06, 0.20), (0, 0.42), (0, 0.58),
           (0.06, 0.80), (0.30, 1), (0.64, 1), (0.88, 0.84), (0.88, 0.56)],
          [(0.52, 0.56), (0.88, 0.56)]],
    "H": [[(0, 0), (0, 1)], [(1, 0), (1, 1)], [(0, 0.5), (1, 0.5)]],
    "I": [[(0.5, 0), (0.5, 1)], [(0.2, 0), (0.8, 0)], [(0.2, 1), (0.8, 1)]],
    "J": [[(0.72, 0), (0.72, 0.74), (0.56, 0.95), (0.32, 1), (0.10, 0.90), (0.02, 0.72)],
          [(0.40, 0), (1, 0)]],
    "K": [[(0, 0), (0, 1)], [(0.9, 0), (0, 0.55)], [(0.3, 0.38), (0.95, 1)]],
    "L": [[(0, 0), (0, 1), (0.9, 1)]],
    "M": [[(0, 1), (0, 0), (0.5, 0.6), (1, 0), (1, 1)]],
    "N": [[(0, 1), (0, 0), (1, 1), (1, 0)]],
    "O": [[(0.30, 0), (0.70, 0), (0.95, 0.26), (0.95, 0.74), (0.70, 1), (0.30, 1),
           (0.05, 0.74), (0.05, 0.26), (0.30, 0)]],
    "P": [[(0, 0), (0, 1)],
          [(0, 0), (0.60, 0), (0.80, 0.12), (0.80, 0.40), (0.60, 0.52), (0, 0.52)]],
    "Q": [[(0.30, 0), (0.70, 0), (0.95, 0.26), (0.95, 0.74), (0.70, 1), (0.30, 1),
           (0.05, 0.74), (0.05, 0.26), (0.30, 0)],
          [(0.60, 0.66), (0.98, 0.98)]],
    "R": [[(0, 0), (0, 1)],
          [(0, 0), (0.60, 0), (0.80, 0.12), (0.80, 0.40), (0.60, 0.52), (0, 0.52)],
          [(0.35, 0.52), (0.95, 1)]],
    "S": [[(0.88, 0.12), (0.64, 0), (0.30, 0), (0.08, 0.14), (0.08, 0.34), (0.30, 0.48),
           (0.70, 0.54), (0.92, 0.68), (0.92, 0.86), (0.66, 1), (0.30, 1), (0.08, 0.86)]],
    "T": [[(0, 0), (1, 0)], [(0.5, 0), (0.5, 1)]],
    "U": [[(0, 0), (0, 0.72), (0.14, 0.93), (0.38, 1), (0.62, 1), (0.86, 0.93), (1, 0.72), (1, 0)]],
    "V": [[(0, 0), (0.5, 1), (1, 0)]],
    "W": [[(0, 0), (0.22, 1), (0.5, 0.45), (0.78, 1), (1, 0)]],
    "X": [[(0, 0), (1, 1)], [(1, 0), (0, 1)]],
    "Y": [[(0, 0), (0.5, 0.45)], [(1, 0), (0.5, 0.45)], [(0.5, 0.45), (0.5, 1)]],
    "Z": [[(0, 0), (1, 0), (0, 1), (1, 1)]],
}

_PIXEL_GRID = np.stack(
    np.meshgrid(np.arange(GLYPH_SIZE, dtype=np.float64) + 0.5,
                np.arange(GLYPH_SIZE, dtype=np.float64) + 0.5, indexing="xy"),
    axis=-1,
).reshape(-1, 2)  # (size*size, 2) pixel centres as (x, y)


@dataclass
class SynthConfig:
    """Knobs for the synthetic corpus.

    attributes must name at least two style words from STYLE_AXES. tag_mode
    "single" gives every font exactly one tag (one attribute drawn uniformly,
    remaining axes neutral); "per_axis" draws one pole per configured axis so
    fonts carry one tag per axis. Aliases map extra synonym words onto an
    attribute; with probability alias_rate an emitted tag is swapped for one
    of its aliases. noise_rate flips a tag to the opposite pole of its axis.
    """

    n_fonts: int = 60
    attributes: tuple = ("bold", "thin", "italic", "upright")
    tag_mode: str = "single"
    aliases: dict = field(default_factory=dict)
    alias_rate: float = 0.3
    noise_rate: float = 0.0
    seed: int = 0
    letters: str = LETTERS

    @classmethod
    def from_json(cls, path):
        raw = json.loads(Path(path).read_text())
        raw["attributes"] = tuple(raw.get("attributes", cls.attributes))
        return cls(**raw)

    def validate(self):
        if len(self.attributes) < 2:
            raise ValueError("need at least two style attributes")
        for word in self.attributes:
            if word not in ATTRIBUTE_AXIS:
                raise ValueError(
                    f"unknown attribute {word!r}; known: {sorted(ATTRIBUTE_AXIS)}"
                )
        for alias, base in self.aliases.items():
            if base not in self.attributes:
                raise ValueError(f"alias {alias!r} points at unconfigured attribute {base!r}")
            if alias in ATTRIBUTE_AXIS:
                raise ValueError(f"alias {alias!r} shadows a style attribute")
        if self.tag_mode not in ("single", "per_axis"):
            raise ValueError(f"unknown tag_mode {self.tag_mode!r}")
        if not self.letters or any(ch not in LETTERS for ch in self.letters):
            raise ValueError("letters must be uppercase A-Z")
        return self


def _segment_distances(points, seg_a, seg_b):
    """Distance from each point to the segment a-b."""
    ab = seg_b - seg_a
    denom = float(ab @ ab)
    if denom == 0.0:
        return np.linalg.norm(points - seg_a, axis=1)
    t = np.clip((points - seg_a) @ ab / denom, 0.0, 1.0)
    proj = seg_a + t[:, None] * ab
    return np.linalg.norm(points - proj, axis=1)


def render_glyph(letter, half_width, slant=0.0, rounding=0.0, width_scale=0.85):
    """Rasterize one letter to a 64x64 glyph in [-1, 1] (ink dark at -1).

    half_width is the stroke half-width in pixels; slant shears around the
    vertical centre; rounding is a blur radius relative to half_width that
    softens corners and caps; width_scale compresses horizontally.
    """
    segs = []
    for polyline in SKELETONS[letter]:
        pts = np.array(polyline, dtype=np.float64)
        x = 0.5 + (pts[:, 0] - 0.5) * width_scale
        x = x + slant * (0.5 - pts[:, 1])
        px = 32.0 + (x - 0.5) * 40.0
        py = 32.0 + (pts[:, 1] - 0.5) * 44.0
        mapped = np.stack([px, py], axis=1)
        for a, b in zip(mapped[:-1], mapped[1:]):
            segs.append((a, b))
    dist = np.min(
        np.stack([_segment_distances(_PIXEL_GRID, a, b) for a, b in segs]), axis=0
    ).reshape(GLYPH_SIZE, GLYPH_SIZE)

    mask = np.clip((half_width - dist) / 1.2 + 0.5, 0.0, 1.0)
    sigma = min(rounding, 0.6) * half_width
    if sigma > 0.05:
        mask = gaussian_filter(mask, sigma=sigma, mode="constant")
        mask = np.clip((mask - 0.5) / 0.35 + 0.5, 0.0, 1.0)
    return quantize_glyph(1.0 - 2.0 * mask)


def _sample_style(rng, lo, hi):
    return float(lo + (hi - lo) * rng.random())


def synthesize_corpus(config: SynthConfig):
    """Build (records, vocabulary) from a SynthConfig.

    Deterministic given config.seed. The vocabulary covers every word that
    was actually emitted as a tag, with per-word font counts.
    """
    config.validate()
    rng = np.random.default_rng(config.seed)
    axes_in_play = sorted({ATTRIBUTE_AXIS[w] for w in config.attributes})
    poles_by_axis = {
        axis: [w for w in config.attributes if ATTRIBUTE_AXIS[w] == axis]
        for axis in axes_in_play
    }
    aliases_of = {}
    for alias, base in config.aliases.items():
        aliases_of.setdefault(base, []).append(alias)

    fonts = []
    for fi in range(config.n_fonts):
        params = {axis: _sample_style(rng, *NEUTRAL[axis]) for axis in NEUTRAL}
        if config.tag_mode == "single":
            chosen = [str(rng.choice(list(config.attributes)))]
        else:
            chosen = [str(rng.choice(poles_by_axis[axis])) for axis in axes_in_play]
        for word in chosen:
            axis = ATTRIBUTE_AXIS[word]
            params[axis] = _sample_style(rng, *STYLE_AXES[axis][word])

        tags = []
        for word in chosen:
            tag = word
            if config.noise_rate > 0 and rng.random() < config.noise_rate:
                others = poles_by_axis[ATTRIBUTE_AXIS[word]]
                tag = opposite_pole(word) if len(others) == 2 else word
            if tag in aliases_of and config.alias_rate > 0 and rng.random() < config.alias_rate:
                tag = str(rng.choice(aliases_of[tag]))
            tags.append(tag)
        fonts.append((f"synth{fi:04d}", params, sorted(set(tags))))

    counts = {}
    for _, _, tags in fonts:
        for tag in tags:
            counts[tag] = counts.get(tag, 0) + 1
    words = sorted(counts)
    vocab = Vocabulary(words=words, counts=[counts[w] for w in words])

    records = []
    for font_id, params, tags in fonts:
        glyphs = {
            ch: render_glyph(
                ch,
                half_width=params["weight"],
                slant=params["slant"],
                rounding=params["rounding"],
                width_scale=params["width"],
            )
            for ch in config.letters
        }
        records.append(
            FontRecord(
                font_id=font_id,
                glyphs=glyphs,
                impressions=sorted(vocab.index(t) for t in tags),
            )
        )
    return records, vocab


def synthesize_embedding_table(attributes, aliases=None, dim=16, seed=0, extra_words=()):
    """Word vectors matching the synthetic corpus semantics.

    Each style axis gets one direction of an orthonormal basis; the two poles
    of an axis sit at +/- that direction, and every alias sits next to its
    base word (small isotropic jitter). Extra words get unrelated vectors.
    """
    aliases = aliases or {}
    rng = np.random.default_rng(seed)
    axes = sorted({ATTRIBUTE_AXIS[w] for w in attributes})
    if dim < len(axes):
        raise ValueError(f"dim={dim} too small for {len(axes)} style axes")
    basis, _ = np.linalg.qr(rng.normal(size=(dim, dim)))
    axis_dir = {axis: basis[:, i] for i, axis in enumerate(axes)}

    def pole_vector(word):
        axis = ATTRIBUTE_AXIS[word]
        sign = 1.0 if word == sorted(STYLE_AXES[axis])[0] else -1.0
        return sign * axis_dir[axis]

    index, rows = {}, []

    def add(word, vec):
        index[word] = len(rows)
        rows.append(vec + rng.normal(scale=0.05, size=dim))

    for word in attributes:
        add(word, pole_vector(word))
    for alias, base in aliases.items():
        add(alias, pole_vector(base))
    for word in extra_words:
        add(word, rng.normal(scale=0.6, size=dim))
    return EmbeddingTable(dim=dim, index=index, vectors=np.vstack(rows))


def ink_coverage(glyph):
    """Fraction of ink mass in a glyph (0 = blank page, 1 = solid black)."""
    return float(np.mean((1.0 - glyph) / 2.0))


def slant_estimate(glyph):
    """Shear estimate from ink-weighted image moments; positive leans right."""
    ink = (1.0 - np.asarray(glyph, dtype=np.float64)) / 2.0
    total = ink.sum()
    if total <= 0:
        return 0.0
    ys, xs = np.mgrid[0:glyph.shape[0], 0:glyph.shape[1]]
    mx = (ink * xs).sum() / total
    my = (ink * ys).sum() / total
    cov_xy = (ink * (xs - mx) * (ys - my)).sum() / total
    var_y = (ink * (ys - my) ** 2).sum() / total
    return float(-cov_xy / max(var_y, 1e-9))
