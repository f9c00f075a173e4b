"""Adversarial training loop for all condition-wiring variants.

One schedule for every variant: each data batch takes a discriminator step,
and every d_steps_per_g_step-th batch also takes a generator step. The
discriminator is trained with the binary real/fake objective plus a KL term
pulling the classifier posterior towards the sampled one-hot impression of
the real batch; the generator is trained with the non-saturating adversarial
objective plus (except for cgan+) a KL condition-matching term and a mode
seeking term rewarding output diversity per unit noise distance.
"""

import csv
import json
import logging
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F

from .corpus import sample_batch
from .nets import (COND_KIND, G_USES_CLASSIFIER, ModelBundle, build_variant,
                   save_checkpoint, load_checkpoint)

log = logging.getLogger(__name__)

LOG_COLUMNS = ["epoch", "d_adv", "g_adv", "kl_real", "kl_gen", "ms", "d_steps", "g_steps", "seconds"]


class TrainingDiverged(RuntimeError):
    """Raised when a loss goes non-finite; carries a diagnostic dump path."""

    def __init__(self, message, dump_path=None):
        super().__init__(message)
        self.dump_path = dump_path


@dataclass
class TrainConfig:
    epochs: int = 100
    learning_rate: float = 2e-4
    batch_size: int = 512
    d_steps_per_g_step: int = 5
    lambda_ms: float = 1.0
    lambda_cls: float = 1.0
    seed: int = 0
    adam_betas: tuple = (0.5, 0.999)
    ms_eps: float = 1e-5
    kl_direction: str = "real_to_gen"   # KL(target‖posterior-of-generated) default
    keep_epoch_checkpoints: bool = False

    def validate(self):
        if self.epochs < 1 or self.batch_size < 1 or self.learning_rate <= 0:
            raise ValueError("epochs, batch_size and learning_rate must be positive")
        if self.d_steps_per_g_step < 1:
            raise ValueError("d_steps_per_g_step must be >= 1")
        if self.kl_direction not in ("real_to_gen", "gen_to_real"):
            raise ValueError(f"unknown kl_direction {self.kl_direction!r}")
        return self

    @classmethod
    def from_file(cls, path):
        path = Path(path)
        if path.suffix == ".toml":
            try:
                import tomllib
            except ImportError as exc:
                raise RuntimeError("TOML configs need Python >= 3.11; use JSON") from exc
            raw = tomllib.loads(path.read_text())
        else:
            raw = json.loads(path.read_text())
        if "adam_betas" in raw:
            raw["adam_betas"] = tuple(raw["adam_betas"])
        return cls(**raw).validate()


@dataclass
class StepReport:
    d_adv: float = 0.0
    g_adv: float = 0.0
    kl_real: float = 0.0
    kl_gen: float = 0.0
    ms: float = 0.0
    epoch: int = 0
    step: int = 0


@dataclass
class TrainResult:
    checkpoints: list = field(default_factory=list)   # (epoch, path)
    final_checkpoint: str = None
    log_path: str = None
    epoch_reports: list = field(default_factory=list)
    diverged: bool = False


def kl_to_posterior(target_probs, logits):
    """KL(target ‖ softmax(logits)), exact at one-hot targets, >= 0."""
    log_q = F.log_softmax(logits, dim=-1)
    kl = (torch.xlogy(target_probs, target_probs) - target_probs * log_q).sum(-1)
    return kl.mean().clamp_min(0.0)


def mode_seeking_term(generator, z1, z2, c, cond, eps=1e-5):
    """Penalty that shrinks as output diversity per unit noise distance grows.

    Per sample: RMS distance between the two noise draws divided by the mean
    absolute pixel distance between the two generated images (plus eps), so
    a generator that collapses to one output pays d_z/eps.
    """
    x1 = generator(z1, c, cond)
    x2 = generator(z2, c, cond)
    d_img = (x1 - x2).abs().flatten(1).mean(1)
    d_z = ((z1 - z2) ** 2).mean(1).sqrt()
    return (d_z / (d_img + eps)).mean()


def _check_finite(value, label, dump_dir, context):
    if torch.isfinite(value).all():
        return
    dump_path = None
    if dump_dir is not None:
        dump_dir = Path(dump_dir)
        dump_dir.mkdir(parents=True, exist_ok=True)
        dump_path = dump_dir / "divergence_dump.json"
        dump_path.write_text(json.dumps(
            {"non_finite_loss": label, **{k: repr(v) for k, v in context.items()}}, indent=2))
    raise TrainingDiverged(f"non-finite {label}", dump_path)


def _gen_conditions(bundle: ModelBundle, images, chars, imp_onehots):
    """Condition tensors for generated data, derived from a real batch.

    One-hot variants reuse the sampled impression labels; posterior variants
    run the real batch through the classifier; the semantic variant further
    collapses that posterior through the word-vector matrix.
    """
    kind = COND_KIND[bundle.variant]
    if kind == "onehot":
        return imp_onehots, imp_onehots
    with torch.no_grad():
        _, logits = bundle.discriminator(images, chars)
        posterior = torch.softmax(logits, dim=-1)
    if kind == "probs":
        return posterior, posterior
    return posterior @ bundle.word_tensor(), posterior


def discriminator_step(bundle, opt_d, batch, z, config, dump_dir=None) -> StepReport:
    """One discriminator update. Touches only discriminator parameters."""
    bundle.generator.train()
    bundle.discriminator.train()
    images = torch.from_numpy(batch.images)
    chars = torch.from_numpy(batch.char_onehots)
    onehots = torch.from_numpy(batch.impression_onehots)
    cond, _ = _gen_conditions(bundle, images, chars, onehots)
    with torch.no_grad():
        fake = bundle.generator(z, chars, cond)

    opt_d.zero_grad(set_to_none=True)
    adv_real, logits_real = bundle.discriminator(images, chars)
    adv_fake, logits_fake = bundle.discriminator(fake, chars)
    loss_adv = (F.binary_cross_entropy_with_logits(adv_real, torch.ones_like(adv_real))
                + F.binary_cross_entropy_with_logits(adv_fake, torch.zeros_like(adv_fake)))
    kl_real = kl_to_posterior(onehots, logits_real)
    loss = loss_adv + config.lambda_cls * kl_real
    kl_gen = torch.zeros(())
    if bundle.variant == "acgan+":
        # this variant also trains the classifier on generated data
        kl_gen = kl_to_posterior(onehots, logits_fake)
        loss = loss + config.lambda_cls * kl_gen
    _check_finite(loss, "discriminator loss", dump_dir,
                  {"adv": loss_adv.item() if torch.isfinite(loss_adv) else "nan",
                   "variant": bundle.variant})
    loss.backward()
    opt_d.step()
    return StepReport(d_adv=loss_adv.item(), kl_real=kl_real.item(), kl_gen=kl_gen.item())


def generator_step(bundle, opt_g, batch, z1, z2, config, dump_dir=None) -> StepReport:
    """One generator update. Touches only generator parameters."""
    bundle.generator.train()
    bundle.discriminator.train()
    images = torch.from_numpy(batch.images)
    chars = torch.from_numpy(batch.char_onehots)
    onehots = torch.from_numpy(batch.impression_onehots)
    cond, posterior_real = _gen_conditions(bundle, images, chars, onehots)

    opt_g.zero_grad(set_to_none=True)
    fake = bundle.generator(z1, chars, cond)
    adv_fake, logits_fake = bundle.discriminator(fake, chars)
    loss_adv = F.binary_cross_entropy_with_logits(adv_fake, torch.ones_like(adv_fake))
    loss = loss_adv

    kl_gen = torch.zeros(())
    if G_USES_CLASSIFIER[bundle.variant]:
        target = onehots if COND_KIND[bundle.variant] == "onehot" else posterior_real
        if config.kl_direction == "real_to_gen":
            kl_gen = kl_to_posterior(target, logits_fake)
        else:
            log_t = torch.log(target.clamp_min(1e-12))
            post_fake = torch.softmax(logits_fake, dim=-1)
            kl_gen = (torch.xlogy(post_fake, post_fake) - post_fake * log_t).sum(-1).mean().clamp_min(0.0)
        loss = loss + config.lambda_cls * kl_gen

    # mode seeking, reusing the adversarial fake as the first of the pair
    fake2 = bundle.generator(z2, chars, cond)
    d_img = (fake - fake2).abs().flatten(1).mean(1)
    d_z = ((z1 - z2) ** 2).mean(1).sqrt()
    ms = (d_z / (d_img + config.ms_eps)).mean()
    loss = loss + config.lambda_ms * ms
    _check_finite(loss, "generator loss", dump_dir,
                  {"adv": loss_adv.item() if torch.isfinite(loss_adv) else "nan",
                   "variant": bundle.variant})
    loss.backward()
    opt_g.step()
    return StepReport(g_adv=loss_adv.item(), kl_gen=kl_gen.item(), ms=ms.item())


def _epoch_seed(seed, epoch):
    return int(np.random.SeedSequence([seed, epoch]).generate_state(1)[0])


def _noise(rng, n, dim):
    return torch.from_numpy(rng.standard_normal((n, dim)).astype(np.float32))


def _count_glyphs(records):
    return sum(len(r.glyphs) for r in records)


def train(config: TrainConfig, records, vocab, word_matrix, variant,
          out_dir, dims=None, resume_from=None) -> TrainResult:
    """Run the full loop; deterministic given config.seed.

    Emits ``last.npz`` (atomic) plus a resumable optimizer/epoch state file
    every epoch, a final checkpoint, and a fixed-column CSV metrics log. On
    divergence the loop stops and the last completed epoch's checkpoint is
    kept.
    """
    from .nets import DESK_DIMS  # default desk dims keep CPU runs cheap
    config.validate()
    if not records:
        raise ValueError("empty corpus")
    dims = dims or DESK_DIMS
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    state_path = out_dir / "trainer_state.pt"

    if resume_from is not None:
        state = torch.load(resume_from, weights_only=False)
        bundle = load_checkpoint(state["checkpoint"])
        start_epoch = state["epoch"] + 1
    else:
        bundle = build_variant(variant, k=len(vocab), d=word_matrix.shape[1],
                               rng_seed=config.seed, dims=dims, vocab=vocab,
                               word_matrix=word_matrix)
        start_epoch = 0
    opt_g = torch.optim.Adam(bundle.generator.parameters(),
                             lr=config.learning_rate, betas=config.adam_betas)
    opt_d = torch.optim.Adam(bundle.discriminator.parameters(),
                             lr=config.learning_rate, betas=config.adam_betas)
    if resume_from is not None:
        opt_g.load_state_dict(state["opt_g"])
        opt_d.load_state_dict(state["opt_d"])

    log_path = out_dir / "metrics.csv"
    if start_epoch == 0 or not log_path.exists():
        with log_path.open("w", newline="") as fh:
            csv.writer(fh).writerow(LOG_COLUMNS)

    result = TrainResult(log_path=str(log_path))
    batches_per_epoch = max(1, -(-_count_glyphs(records) // config.batch_size))
    noise_dim = dims.noise_dim

    for epoch in range(start_epoch, config.epochs):
        rng = np.random.default_rng(_epoch_seed(config.seed, epoch))
        t0 = time.time()
        sums = StepReport(epoch=epoch)
        d_steps = g_steps = 0
        try:
            for step in range(batches_per_epoch):
                batch = sample_batch(records, config.batch_size,
                                     rng_seed=int(rng.integers(0, 2**63 - 1)),
                                     k=bundle.k)
                rep = discriminator_step(bundle, opt_d, batch,
                                         _noise(rng, len(batch), noise_dim),
                                         config, dump_dir=out_dir)
                sums.d_adv += rep.d_adv
                sums.kl_real += rep.kl_real
                d_steps += 1
                last_batch = step == batches_per_epoch - 1
                if (step + 1) % config.d_steps_per_g_step == 0 or (last_batch and g_steps == 0):
                    rep = generator_step(bundle, opt_g, batch,
                                         _noise(rng, len(batch), noise_dim),
                                         _noise(rng, len(batch), noise_dim),
                                         config, dump_dir=out_dir)
                    sums.g_adv += rep.g_adv
                    sums.kl_gen += rep.kl_gen
                    sums.ms += rep.ms
                    g_steps += 1
        except TrainingDiverged as exc:
            log.error("training diverged at epoch %d: %s (dump: %s)", epoch, exc, exc.dump_path)
            result.diverged = True
            break

        seconds = time.time() - t0
        row = [epoch,
               sums.d_adv / max(d_steps, 1), sums.g_adv / max(g_steps, 1),
               sums.kl_real / max(d_steps, 1), sums.kl_gen / max(g_steps, 1),
               sums.ms / max(g_steps, 1), d_steps, g_steps, round(seconds, 3)]
        with log_path.open("a", newline="") as fh:
            csv.writer(fh).writerow(row)
        result.epoch_reports.append(dict(zip(LOG_COLUMNS, row)))

        ckpt_path = out_dir / "last.npz"
        save_checkpoint(bundle, ckpt_path)
        if config.keep_epoch_checkpoints:
            epoch_path = out_dir / f"epoch_{epoch:04d}.npz"
            save_checkpoint(bundle, epoch_path)
            result.checkpoints.append((epoch, str(epoch_path)))
        else:
            result.checkpoints.append((epoch, str(ckpt_path)))
        tmp = str(state_path) + ".tmp"
        torch.save({"epoch": epoch, "checkpoint": str(ckpt_path),
                    "opt_g": opt_g.state_dict(), "opt_d": opt_d.state_dict()}, tmp)
        os.replace(tmp, state_path)

    final = out_dir / "final.npz"
    if (out_dir / "last.npz").exists():
        final.write_bytes((out_dir / "last.npz").read_bytes())
        result.final_checkpoint = str(final)
    return result
