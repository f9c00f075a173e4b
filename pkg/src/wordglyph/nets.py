"""Generator, discriminator and auxiliary classifier, plus the four
condition-wiring variants (cgan+, acgan+, cpgan+, imp2font).

All variants share the same trunk: the generator projects Concat(noise,
letter) and the impression condition through two parallel FC layers, merges
them, expands to a 16x16 feature map and deconvolves up to a 64x64 tanh
raster; the discriminator stacks two spectrally normalized stride-2 convs on
the image concatenated with the spatially tiled letter one-hot, ending in a
real/fake head and a K-way impression classifier head. The variants differ
only in what the generator's condition input is: a one-hot word (cgan+,
acgan+), the classifier posterior (cpgan+), or the posterior collapsed
through the word-vector matrix into a semantic vector (imp2font).
"""

import hashlib
import io
import json
from dataclasses import dataclass, asdict, field

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F
from torch.nn.utils import spectral_norm

from .corpus import Vocabulary

CHECKPOINT_VERSION = 1

VARIANTS = ("cgan+", "acgan+", "cpgan+", "imp2font")

# generator condition source per variant: one-hot label, classifier
# posterior, or semantic vector; and whether the generator's loss uses the
# classifier head (cgan+ never consumes it).
COND_KIND = {"cgan+": "onehot", "acgan+": "onehot", "cpgan+": "probs", "imp2font": "semantic"}
G_USES_CLASSIFIER = {"cgan+": False, "acgan+": True, "cpgan+": True, "imp2font": True}


@dataclass(frozen=True)
class NetDims:
    """Width plan for both nets. Defaults follow the reference layer plan;
    smaller presets keep the same topology for cheap CPU experiments."""

    noise_dim: int = 300
    char_dim: int = 26
    fc_width: int = 1500
    trunk_side: int = 16
    gen_trunk_ch: int = 128
    gen_mid_ch: int = 64
    disc_ch1: int = 64
    disc_ch2: int = 128

    @property
    def image_side(self):
        return self.trunk_side * 4


PAPER_DIMS = NetDims()
DESK_DIMS = NetDims(noise_dim=64, fc_width=160, gen_trunk_ch=32, gen_mid_ch=32,
                    disc_ch1=24, disc_ch2=48)


class Generator(nn.Module):
    def __init__(self, cond_dim, dims: NetDims = PAPER_DIMS):
        super().__init__()
        self.dims = dims
        self.cond_dim = cond_dim
        trunk = dims.trunk_side * dims.trunk_side * dims.gen_trunk_ch
        self.proj_zc = nn.Linear(dims.noise_dim + dims.char_dim, dims.fc_width)
        self.proj_cond = nn.Linear(cond_dim, dims.fc_width)
        self.fc = nn.Linear(2 * dims.fc_width, trunk)
        self.bn_fc = nn.BatchNorm1d(trunk)
        self.deconv1 = nn.ConvTranspose2d(dims.gen_trunk_ch, dims.gen_mid_ch, 4, stride=2, padding=1)
        self.bn1 = nn.BatchNorm2d(dims.gen_mid_ch)
        self.deconv2 = nn.ConvTranspose2d(dims.gen_mid_ch, 1, 4, stride=2, padding=1)

    def forward(self, z, c, cond):
        h = torch.cat([self.proj_zc(torch.cat([z, c], dim=1)), self.proj_cond(cond)], dim=1)
        h = F.leaky_relu(self.bn_fc(self.fc(h)), 0.2)
        h = h.view(-1, self.dims.gen_trunk_ch, self.dims.trunk_side, self.dims.trunk_side)
        h = F.leaky_relu(self.bn1(self.deconv1(h)), 0.2)
        return torch.tanh(self.deconv2(h))


class Discriminator(nn.Module):
    """Shared trunk with a real/fake head and a K-way classifier head."""

    def __init__(self, k, dims: NetDims = PAPER_DIMS):
        super().__init__()
        self.dims = dims
        self.k = k
        self.conv1 = spectral_norm(nn.Conv2d(1 + dims.char_dim, dims.disc_ch1, 4, stride=2, padding=1))
        self.conv2 = spectral_norm(nn.Conv2d(dims.disc_ch1, dims.disc_ch2, 4, stride=2, padding=1))
        flat = dims.disc_ch2 * dims.trunk_side * dims.trunk_side
        self.head_adv = nn.Linear(flat, 1)
        self.head_cls = nn.Linear(flat, k)

    def forward(self, x, c):
        if x.dim() == 3:
            x = x.unsqueeze(1)
        planes = c[:, :, None, None].expand(-1, -1, x.shape[2], x.shape[3])
        h = torch.cat([x, planes], dim=1)
        h = F.leaky_relu(self.conv1(h), 0.2)
        h = F.leaky_relu(self.conv2(h), 0.2)
        h = h.flatten(1)
        return self.head_adv(h).squeeze(1), self.head_cls(h)


@dataclass
class ModelBundle:
    """A variant tag plus its nets and the frozen vocabulary/word matrix."""

    variant: str
    generator: Generator
    discriminator: Discriminator
    k: int
    d: int
    dims: NetDims
    vocab: Vocabulary = None
    word_matrix: np.ndarray = None           # (K, D) float; imp2font condition basis
    _w_tensor: torch.Tensor = field(default=None, repr=False)

    @property
    def cond_dim(self):
        return self.d if COND_KIND[self.variant] == "semantic" else self.k

    def word_tensor(self):
        if self._w_tensor is None:
            if self.word_matrix is None:
                raise ValueError("bundle carries no word matrix")
            self._w_tensor = torch.from_numpy(np.asarray(self.word_matrix, dtype=np.float32))
        return self._w_tensor

    def eval_mode(self):
        self.generator.eval()
        self.discriminator.eval()
        return self


def _init_weights(module, gen):
    """DCGAN-style init: conv/linear N(0, 0.02), batch-norm gamma N(1, 0.02)."""
    for m in module.modules():
        if isinstance(m, (nn.Conv2d, nn.ConvTranspose2d, nn.Linear)):
            weight = getattr(m, "weight_orig", None)
            if weight is None:
                weight = m.weight
            with torch.no_grad():
                weight.normal_(0.0, 0.02, generator=gen)
                if m.bias is not None:
                    m.bias.zero_()
        elif isinstance(m, (nn.BatchNorm1d, nn.BatchNorm2d)):
            with torch.no_grad():
                m.weight.normal_(1.0, 0.02, generator=gen)
                m.bias.zero_()


def build_variant(tag, k, d, rng_seed, dims: NetDims = PAPER_DIMS,
                  vocab=None, word_matrix=None) -> ModelBundle:
    """Construct an initialized bundle; identical seeds give identical weights."""
    if tag not in VARIANTS:
        raise ValueError(f"unknown variant {tag!r}; expected one of {VARIANTS}")
    if COND_KIND[tag] == "semantic" and word_matrix is not None:
        word_matrix = np.asarray(word_matrix)
        if word_matrix.shape != (k, d):
            raise ValueError(f"word matrix shape {word_matrix.shape} != ({k}, {d})")
    cond_dim = d if COND_KIND[tag] == "semantic" else k
    with torch.random.fork_rng():
        torch.manual_seed(rng_seed)
        g = Generator(cond_dim, dims)
        disc = Discriminator(k, dims)
    gen = torch.Generator().manual_seed(rng_seed)
    _init_weights(g, gen)
    _init_weights(disc, gen)
    return ModelBundle(variant=tag, generator=g, discriminator=disc, k=k, d=d,
                       dims=dims, vocab=vocab, word_matrix=word_matrix)


def _as_batch(arr, name, width=None):
    t = torch.as_tensor(np.asarray(arr), dtype=torch.float32)
    single = t.dim() == 1 or (name == "image" and t.dim() == 2)
    if single:
        t = t.unsqueeze(0)
    if width is not None and t.shape[-1] != width:
        raise ValueError(f"{name} has width {t.shape[-1]}, expected {width}")
    return t, single


def generator_forward(bundle: ModelBundle, z, c, cond):
    """Deterministic inference pass; accepts single vectors or batches of
    them and returns float32 glyph arrays in (-1, 1)."""
    zt, single = _as_batch(z, "noise", bundle.dims.noise_dim)
    ct, _ = _as_batch(c, "letter one-hot", bundle.dims.char_dim)
    qt, _ = _as_batch(cond, "condition", bundle.cond_dim)
    if not (zt.shape[0] == ct.shape[0] == qt.shape[0]):
        raise ValueError("batch sizes disagree")
    bundle.generator.eval()
    with torch.no_grad():
        out = bundle.generator(zt, ct, qt).squeeze(1).numpy()
    return out[0] if single else out


def discriminator_forward(bundle: ModelBundle, x, c):
    """Inference pass: (adversarial score pre-sigmoid, K impression logits)."""
    xt, single = _as_batch(x, "image")
    ct, _ = _as_batch(c, "letter one-hot", bundle.dims.char_dim)
    bundle.discriminator.eval()
    with torch.no_grad():
        adv, logits = bundle.discriminator(xt, ct)
    adv, logits = adv.numpy(), logits.numpy()
    return (float(adv[0]), logits[0]) if single else (adv, logits)


def classifier_posterior(logits):
    """Softmax over impression logits; returns a valid probability vector."""
    if isinstance(logits, torch.Tensor):
        return torch.softmax(logits, dim=-1)
    logits = np.asarray(logits, dtype=np.float64)
    shifted = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def trunk_signature(bundle: ModelBundle):
    """Shapes of everything except the condition projection; used to assert
    that variants differ only in condition wiring."""
    sig = []
    for name, p in sorted(bundle.generator.named_parameters()):
        if not name.startswith("proj_cond"):
            sig.append(("g." + name, tuple(p.shape)))
    for name, p in sorted(bundle.discriminator.named_parameters()):
        sig.append(("d." + name, tuple(p.shape)))
    return sig


def weight_checksum(module: nn.Module) -> str:
    """SHA-256 over all parameters and buffers, in state-dict order."""
    h = hashlib.sha256()
    for name, t in module.state_dict().items():
        h.update(name.encode())
        h.update(t.detach().cpu().numpy().tobytes())
    return h.hexdigest()


def bundle_checksum(bundle: ModelBundle) -> str:
    h = hashlib.sha256()
    h.update(weight_checksum(bundle.generator).encode())
    h.update(weight_checksum(bundle.discriminator).encode())
    return h.hexdigest()


def top_singular_value(conv_module) -> float:
    """Largest singular value of a conv's effective (normalized) weight."""
    w = conv_module.weight.detach()
    return float(torch.linalg.matrix_norm(w.flatten(1), ord=2))


def save_checkpoint(bundle: ModelBundle, path):
    """Write a single-archive checkpoint: weights, variant tag, dims, K, D,
    vocabulary and word matrix. Round-trips bit-exactly."""
    if bundle.vocab is None:
        raise ValueError("bundle has no vocabulary attached; cannot checkpoint")
    arrays = {}
    for prefix, module in (("g", bundle.generator), ("d", bundle.discriminator)):
        for name, t in module.state_dict().items():
            arrays[f"{prefix}.{name}"] = t.detach().cpu().numpy()
    if bundle.word_matrix is not None:
        arrays["word_matrix"] = np.asarray(bundle.word_matrix)
    meta = {
        "format_version": CHECKPOINT_VERSION,
        "variant": bundle.variant,
        "k": bundle.k,
        "d": bundle.d,
        "dims": asdict(bundle.dims),
        "vocab_words": list(bundle.vocab.words),
        "vocab_counts": [int(c) for c in bundle.vocab.counts],
    }
    arrays["meta_json"] = np.frombuffer(json.dumps(meta).encode("utf-8"), dtype=np.uint8)
    buf = io.BytesIO()
    np.savez(buf, **arrays)
    data = buf.getvalue()
    path = str(path)
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(data)
    import os

    os.replace(tmp, path)
    return path


def load_checkpoint(path) -> ModelBundle:
    with np.load(path) as npz:
        meta = json.loads(bytes(npz["meta_json"]).decode("utf-8"))
        if meta["format_version"] != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {meta['format_version']}")
        dims = NetDims(**meta["dims"])
        vocab = Vocabulary(words=meta["vocab_words"], counts=meta["vocab_counts"])
        word_matrix = npz["word_matrix"] if "word_matrix" in npz else None
        cond_dim = meta["d"] if COND_KIND[meta["variant"]] == "semantic" else meta["k"]
        g = Generator(cond_dim, dims)
        disc = Discriminator(meta["k"], dims)
        g_state = {n[2:]: torch.from_numpy(npz[n].copy()) for n in npz.files if n.startswith("g.")}
        d_state = {n[2:]: torch.from_numpy(npz[n].copy()) for n in npz.files if n.startswith("d.")}
    g.load_state_dict(g_state)
    disc.load_state_dict(d_state)
    return ModelBundle(variant=meta["variant"], generator=g, discriminator=disc,
                       k=meta["k"], d=meta["d"], dims=dims, vocab=vocab,
                       word_matrix=word_matrix)


def checkpoint_id(path) -> str:
    """Content checksum identifying a checkpoint file."""
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()[:16]
