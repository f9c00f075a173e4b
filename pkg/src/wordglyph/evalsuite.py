"""Quantitative evaluation: feature-space Frechet distance and mean average
precision with independently trained multi-label predictors.

The feature extractor is a small convolutional encoder trained on the letter
classification task of the evaluation corpus (stand-in for a large
pretrained image encoder, so distances are comparable only within one
extractor). Two multi-label predictors score condition fidelity: one trained
on real images ("pred-real", scored on generated images: map_train), one
trained on generated images ("pred-gen", scored on real images: map_test).
"""

import json
import logging
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np
import scipy.linalg
import torch
import torch.nn as nn
import torch.nn.functional as F

from .corpus import LETTERS, multi_hot_labels
from .lexicon import word_vector
from .nets import COND_KIND, load_checkpoint, checkpoint_id, weight_checksum

log = logging.getLogger(__name__)

COV_REG = 1e-6
SQRTM_IMAG_TOL = 1e-3
LEADERBOARD_COLUMNS = ["checkpoint_id", "variant", "fid", "map_train", "map_test", "seed"]


class _ConvEncoder(nn.Module):
    """Three stride-2 convs to an embedding plus a linear head."""

    def __init__(self, feature_dim, head_dim):
        super().__init__()
        self.conv = nn.Sequential(
            nn.Conv2d(1, 16, 4, stride=2, padding=1), nn.LeakyReLU(0.2),
            nn.Conv2d(16, 32, 4, stride=2, padding=1), nn.LeakyReLU(0.2),
            nn.Conv2d(32, 64, 4, stride=2, padding=1), nn.LeakyReLU(0.2),
        )
        self.embed = nn.Linear(64 * 8 * 8, feature_dim)
        self.head = nn.Linear(feature_dim, head_dim)

    def features(self, x):
        if x.dim() == 3:
            x = x.unsqueeze(1)
        return self.embed(self.conv(x).flatten(1))

    def forward(self, x):
        return self.head(F.leaky_relu(self.features(x), 0.2))


@dataclass
class FeatureExtractor:
    """Frozen encoder mapping glyphs to feature vectors."""

    net: _ConvEncoder
    feature_dim: int
    train_accuracy: float = 0.0

    def __call__(self, images, batch_size=256):
        self.net.eval()
        out = []
        arr = np.asarray(images, dtype=np.float32)
        with torch.no_grad():
            for i in range(0, len(arr), batch_size):
                out.append(self.net.features(torch.from_numpy(arr[i:i + batch_size])).numpy())
        return np.concatenate(out, axis=0).astype(np.float64)

    def checksum(self):
        return weight_checksum(self.net)


@dataclass
class MultiLabelPredictor:
    """Per-impression scorer with its training-side tag recorded."""

    net: _ConvEncoder
    k: int
    side_tag: str
    seed: int = 0

    def scores(self, images, batch_size=256):
        self.net.eval()
        arr = np.asarray(images, dtype=np.float32)
        out = []
        with torch.no_grad():
            for i in range(0, len(arr), batch_size):
                out.append(self.net(torch.from_numpy(arr[i:i + batch_size])).numpy())
        return np.concatenate(out, axis=0).astype(np.float64)


def _train_encoder(net, images, targets, loss_fn, seed, epochs, batch_size=128, lr=1e-3):
    rng = np.random.default_rng(seed)
    opt = torch.optim.Adam(net.parameters(), lr=lr)
    images = np.asarray(images, dtype=np.float32)
    net.train()
    for _ in range(epochs):
        order = rng.permutation(len(images))
        for i in range(0, len(order), batch_size):
            idx = order[i:i + batch_size]
            opt.zero_grad(set_to_none=True)
            pred = net(torch.from_numpy(images[idx]))
            loss = loss_fn(pred, idx)
            loss.backward()
            opt.step()
    net.eval()
    return net


def train_feature_extractor(records, seed=0, feature_dim=64, epochs=6) -> FeatureExtractor:
    """Fit the encoder on letter classification over the given records."""
    images, letter_ids = [], []
    for rec in records:
        for letter, glyph in sorted(rec.glyphs.items()):
            images.append(glyph)
            letter_ids.append(LETTERS.index(letter))
    images = np.stack(images)
    target = torch.tensor(letter_ids, dtype=torch.long)

    with torch.random.fork_rng():
        torch.manual_seed(seed)
        net = _ConvEncoder(feature_dim, head_dim=len(LETTERS))
    _train_encoder(net, images, target, lambda pred, idx: F.cross_entropy(pred, target[idx]),
                   seed=seed, epochs=epochs)
    with torch.no_grad():
        pred = []
        for i in range(0, len(images), 256):
            pred.append(net(torch.from_numpy(images[i:i + 256].astype(np.float32))).argmax(1))
        acc = float((torch.cat(pred) == target).float().mean())
    return FeatureExtractor(net=net, feature_dim=feature_dim, train_accuracy=acc)


def train_predictor(images, labels, side_tag, seed=0, epochs=8, feature_dim=64) -> MultiLabelPredictor:
    """Fit a multi-label impression predictor on (image, multi-hot) pairs."""
    labels = np.asarray(labels, dtype=np.float32)
    if labels.ndim != 2:
        raise ValueError("labels must be (N, K) multi-hot")
    positives = (labels.sum(axis=0) > 0).sum()
    if positives < 2:
        raise ValueError(f"degenerate label set: only {int(positives)} class(es) with positives")
    k = labels.shape[1]
    target = torch.from_numpy(labels)
    with torch.random.fork_rng():
        torch.manual_seed(seed)
        net = _ConvEncoder(feature_dim, head_dim=k)
    _train_encoder(net, images, target,
                   lambda pred, idx: F.binary_cross_entropy_with_logits(pred, target[idx]),
                   seed=seed, epochs=epochs)
    return MultiLabelPredictor(net=net, k=k, side_tag=side_tag, seed=seed)


def fid_from_moments(mu1, sigma1, mu2, sigma2, reg=COV_REG):
    """Frechet distance between two Gaussians given their moments."""
    mu1 = np.asarray(mu1, dtype=np.float64)
    mu2 = np.asarray(mu2, dtype=np.float64)
    sigma1 = np.asarray(sigma1, dtype=np.float64) + reg * np.eye(len(mu1))
    sigma2 = np.asarray(sigma2, dtype=np.float64) + reg * np.eye(len(mu2))
    covmean = scipy.linalg.sqrtm(sigma1 @ sigma2)
    if np.iscomplexobj(covmean):
        imag_max = np.abs(covmean.imag).max()
        scale = max(np.abs(covmean.real).max(), 1.0)
        if imag_max / scale > SQRTM_IMAG_TOL:
            raise ValueError(
                f"matrix square root has non-negligible imaginary part ({imag_max:.3g})")
        covmean = covmean.real
    diff = mu1 - mu2
    value = float(diff @ diff + np.trace(sigma1) + np.trace(sigma2) - 2.0 * np.trace(covmean))
    if value < -1e-6:
        raise ValueError(f"numerically invalid negative distance {value}")
    return max(value, 0.0)


def fid(real_features, gen_features) -> float:
    """Frechet distance between Gaussian fits of two feature sets."""
    real = np.asarray(real_features, dtype=np.float64)
    gen = np.asarray(gen_features, dtype=np.float64)
    if real.ndim != 2 or gen.ndim != 2 or real.shape[1] != gen.shape[1]:
        raise ValueError("feature sets must be (N, F) with matching F")
    for name, arr in (("real", real), ("generated", gen)):
        if len(arr) <= arr.shape[1]:
            log.warning("%s feature set has N=%d <= F=%d; covariance is regularized",
                        name, len(arr), arr.shape[1])
    return fid_from_moments(real.mean(0), np.cov(real, rowvar=False),
                            gen.mean(0), np.cov(gen, rowvar=False))


def average_precision(scores, labels):
    """AP of one class: mean of precision at each positive, ranked by
    descending score (stable ties)."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels).astype(bool)
    order = np.argsort(-scores, kind="stable")
    ranked = labels[order]
    n_pos = int(ranked.sum())
    if n_pos == 0:
        raise ValueError("no positives for this class")
    hits = np.cumsum(ranked)
    precision_at = hits / (np.arange(len(ranked)) + 1)
    return float(precision_at[ranked].sum() / n_pos)


def mean_average_precision(scores, labels):
    """Mean over classes of average precision.

    Returns (map, per_class list, skipped class indices). Classes without a
    single positive are skipped and reported; if every class is empty that
    is an error.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape:
        raise ValueError("scores and labels must have matching shape")
    per_class, skipped = {}, []
    for k in range(scores.shape[1]):
        if labels[:, k].sum() == 0:
            skipped.append(k)
            continue
        per_class[k] = average_precision(scores[:, k], labels[:, k])
    if not per_class:
        raise ValueError("every class has zero positives")
    return float(np.mean(list(per_class.values()))), per_class, skipped


def map_score(predictor: MultiLabelPredictor, images, labels):
    """mAP of a predictor on an image set with multi-hot ground truth."""
    value, per_class, skipped = mean_average_precision(predictor.scores(images), labels)
    if skipped:
        log.info("map_score: skipped %d empty classes: %s", len(skipped), skipped)
    return value, per_class, skipped


@dataclass
class Report:
    fid: float
    map_train: float
    map_test: float
    per_class: dict
    seeds: dict
    checkpoint_id: str
    variant: str
    extras: dict = field(default_factory=dict)

    def to_json(self, path=None):
        payload = json.dumps(asdict(self), indent=2, sort_keys=True)
        if path is not None:
            Path(path).write_text(payload)
        return payload


def external_condition(bundle, word_idx, table=None):
    """Inference-time condition for one vocabulary word, per variant: one-hot
    (or a probability vector) for the K-wide variants, the word's semantic
    vector for the semantic variant."""
    if COND_KIND[bundle.variant] == "semantic":
        if table is None:
            raise ValueError("semantic variant needs an embedding table")
        return word_vector(table, bundle.vocab.words[word_idx]).astype(np.float32)
    onehot = np.zeros(bundle.k, dtype=np.float32)
    onehot[word_idx] = 1.0
    return onehot


def generate_matched_set(bundle, records, table, seed):
    """Generate one glyph per (font, letter) of the records, each conditioned
    on an impression drawn from that font's list. Returns (images, one-hot
    labels, word indices)."""
    rng = np.random.default_rng(seed)
    z_list, c_list, cond_list, words = [], [], [], []
    for rec in records:
        for letter in sorted(rec.glyphs):
            widx = int(rng.choice(rec.impressions))
            words.append(widx)
            z_list.append(rng.standard_normal(bundle.dims.noise_dim).astype(np.float32))
            onehot = np.zeros(26, dtype=np.float32)
            onehot[LETTERS.index(letter)] = 1.0
            c_list.append(onehot)
            cond_list.append(external_condition(bundle, widx, table))
    from .nets import generator_forward

    images = []
    z_arr, c_arr, q_arr = np.stack(z_list), np.stack(c_list), np.stack(cond_list)
    for i in range(0, len(z_arr), 256):
        images.append(generator_forward(bundle, z_arr[i:i + 256], c_arr[i:i + 256], q_arr[i:i + 256]))
    images = np.concatenate(images, axis=0)
    labels = np.zeros((len(words), bundle.k), dtype=np.float32)
    labels[np.arange(len(words)), words] = 1.0
    return images, labels, words


def evaluate_run(checkpoint, real_test, table, seed=0, extractor=None,
                 pred_real=None, train_records=None, generator_fn=None) -> Report:
    """Score one checkpoint: FID plus map_train / map_test.

    Deterministic given ``seed``. The extractor and pred-real predictor are
    trained on ``train_records`` (falling back to the test records) unless
    supplied, so cross-variant comparisons should pass shared instances.
    ``generator_fn`` may override generation (testing hook); it must return
    (images, one-hot labels, word indices).
    """
    bundle = load_checkpoint(checkpoint) if not hasattr(checkpoint, "generator") else checkpoint
    ck_id = checkpoint_id(checkpoint) if isinstance(checkpoint, (str, Path)) else "in-memory"
    words = bundle.vocab.words
    seeds = {"master": seed, "generate": seed * 7 + 1, "pred_gen": seed * 7 + 2,
             "extractor": 1000003, "pred_real": 1000007}

    basis = train_records if train_records is not None else real_test
    for rec in basis + real_test:
        if any(i >= len(words) for i in rec.impressions):
            raise ValueError("vocabulary mismatch between checkpoint and record set")
    if extractor is None:
        extractor = train_feature_extractor(basis, seed=seeds["extractor"])
    if pred_real is None:
        base_imgs = np.stack([g for r in basis for _, g in sorted(r.glyphs.items())])
        base_lbls = np.repeat(multi_hot_labels(basis, len(words)),
                              [len(r.glyphs) for r in basis], axis=0)
        pred_real = train_predictor(base_imgs, base_lbls, side_tag="pred-real",
                                    seed=seeds["pred_real"])

    gen_fn = generator_fn or (lambda: generate_matched_set(bundle, real_test, table, seeds["generate"]))
    gen_images, gen_labels, _ = gen_fn()

    real_images = np.stack([g for r in real_test for _, g in sorted(r.glyphs.items())])
    real_labels = np.repeat(multi_hot_labels(real_test, len(words)),
                            [len(r.glyphs) for r in real_test], axis=0)

    fid_value = fid(extractor(real_images), extractor(gen_images))
    map_train, ap_train, _ = map_score(pred_real, gen_images, gen_labels)
    pred_gen = train_predictor(gen_images, gen_labels, side_tag="pred-gen",
                               seed=seeds["pred_gen"])
    map_test, ap_test, _ = map_score(pred_gen, real_images, real_labels)

    per_class = {words[k]: {"ap_train": ap_train.get(k), "ap_test": ap_test.get(k)}
                 for k in sorted(set(ap_train) | set(ap_test))}
    return Report(fid=fid_value, map_train=map_train, map_test=map_test,
                  per_class=per_class, seeds=seeds, checkpoint_id=ck_id,
                  variant=bundle.variant,
                  extras={"extractor_checksum": extractor.checksum()[:16],
                          "n_real": len(real_images), "n_gen": len(gen_images)})


def leaderboard_append(csv_path, report: Report):
    """Append one row of the cross-variant comparison table."""
    import csv as _csv

    path = Path(csv_path)
    fresh = not path.exists()
    with path.open("a", newline="") as fh:
        writer = _csv.writer(fh)
        if fresh:
            writer.writerow(LEADERBOARD_COLUMNS)
        writer.writerow([report.checkpoint_id, report.variant, f"{report.fid:.6f}",
                         f"{report.map_train:.6f}", f"{report.map_test:.6f}",
                         report.seeds.get("master")])
    return path
