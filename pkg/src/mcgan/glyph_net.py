"""GlyphNet: the 26-channel glyph-stack generator G1, its local+global discriminator D1,
the pretraining loss and the pretraining loop.

The same loop trains the 78-channel color baseline (``channels_per_letter=3``).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from . import checkpoint as ckpt
from .config import NetConfig, PretrainConfig
from .errors import CheckpointError, ManifestError
from .font_data import N_LETTERS, DatasetManifest, letter_mask, to_net
from .losses import check_finite, l1, lsgan_discriminator, lsgan_generator
from .networks import (Discriminator, Generator, build_baseline_spec, build_d_spec, build_g1_spec)
from .training import LossLog, adam

log = logging.getLogger(__name__)


@dataclass
class GlyphNetLossTerms:
    l1: torch.Tensor
    lsgan_local: torch.Tensor
    lsgan_global: torch.Tensor
    lam: float
    d_local: torch.Tensor | None = None
    d_global: torch.Tensor | None = None

    @property
    def generator(self):
        return self.lam * self.l1 + self.lsgan_local + self.lsgan_global

    @property
    def discriminator(self):
        if self.d_local is None:
            raise ValueError("discriminator terms need the outputs on real stacks")
        return self.d_local + self.d_global

    def as_dict(self) -> dict:
        d = {"l1": self.l1, "g_local": self.lsgan_local, "g_global": self.lsgan_global}
        if self.d_local is not None:
            d.update(d_local=self.d_local, d_global=self.d_global)
        return {k: v.item() for k, v in d.items()}


def glyphnet_loss(g_out, target, d_real_outputs, d_fake_outputs, lam: float) -> GlyphNetLossTerms:
    """L1 to the ground-truth stack plus local and global LSGAN terms.

    ``d_*_outputs`` are ``(local_map, global_map)`` pairs; ``d_real_outputs`` may be
    None when only the generator side is needed.
    """
    check_finite(g_out=g_out, target=target, d_fake_local=d_fake_outputs[0], d_fake_global=d_fake_outputs[1])
    terms = GlyphNetLossTerms(
        l1=l1(g_out, target),
        lsgan_local=lsgan_generator(d_fake_outputs[0]),
        lsgan_global=lsgan_generator(d_fake_outputs[1]),
        lam=lam,
    )
    if d_real_outputs is not None:
        check_finite(d_real_local=d_real_outputs[0], d_real_global=d_real_outputs[1])
        terms.d_local = lsgan_discriminator(d_real_outputs[0], d_fake_outputs[0])
        terms.d_global = lsgan_discriminator(d_real_outputs[1], d_fake_outputs[1])
    return terms


class SubsetSampler:
    """Random observed-letter subsets: size uniform in [lo, hi], letters uniform without replacement."""

    def __init__(self, lo: int = 1, hi: int = 8, n_letters: int = N_LETTERS):
        if not 1 <= lo <= hi < n_letters:
            raise ValueError(f"bad subset size range [{lo}, {hi}]")
        self.lo, self.hi, self.n = lo, hi, n_letters

    def size_probabilities(self) -> dict[int, float]:
        k = self.hi - self.lo + 1
        return {s: 1.0 / k for s in range(self.lo, self.hi + 1)}

    def sample_size(self, rng: np.random.Generator) -> int:
        return int(rng.integers(self.lo, self.hi + 1))

    def sample(self, rng: np.random.Generator) -> frozenset[int]:
        return frozenset(int(i) for i in rng.choice(self.n, size=self.sample_size(rng), replace=False))


def make_glyphnet(net: NetConfig, image_size: int = 64, channels_per_letter: int = 1):
    if channels_per_letter == 1:
        gspec = build_g1_spec(net.g_widths, net.g_blocks, net.dropout)
    elif channels_per_letter == 3:
        gspec = build_baseline_spec(net.g_widths, net.g_blocks, net.dropout)
    else:
        raise ValueError("channels_per_letter must be 1 or 3")
    local, glob = build_d_spec(2 * gspec.channels_in, net.d_widths, "D1" if channels_per_letter == 1 else "Dbase")
    return Generator(gspec, image_size), Discriminator(local, glob)


def _fonts_tensor(fonts) -> torch.Tensor:
    """(N, 26, H, W) or (N, 26, 3, H, W) in [0, 1] -> uint8 (N, C, H, W)."""
    if isinstance(fonts, DatasetManifest):
        if len(fonts) == 0:
            raise ManifestError("training manifest is empty")
        fonts = fonts.load_all()
    a = np.asarray(fonts)
    if len(a) == 0:
        raise ManifestError("training set is empty")
    a = a.reshape(a.shape[0], -1, a.shape[-2], a.shape[-1])
    if a.dtype != np.uint8:
        a = np.round(np.clip(a, 0, 1) * 255).astype(np.uint8)
    return torch.from_numpy(a)


@dataclass
class PretrainResult:
    generator: Generator
    discriminator: Discriminator
    log: LossLog
    checkpoints: list[Path] = field(default_factory=list)
    step: int = 0


def sample_batch(data: torch.Tensor, rng: np.random.Generator, sampler: SubsetSampler,
                 batch_size: int, channels_per_letter: int = 1):
    """Masked inputs and full targets, both mapped to [-1, 1]."""
    idx = rng.integers(len(data), size=batch_size)
    masks = np.stack([letter_mask(sampler.sample(rng), channels_per_letter) for _ in range(batch_size)])
    y = data[torch.from_numpy(idx)].float() / 255.0
    x = y * torch.from_numpy(masks).float()[:, :, None, None]
    return to_net(x), to_net(y)


def pretrain_glyphnet(
    fonts,
    cfg: PretrainConfig,
    net: NetConfig | None = None,
    seed: int = 0,
    ckpt_dir=None,
    resume=None,
    log_path=None,
    channels_per_letter: int = 1,
    tag: str = "glyphnet",
) -> PretrainResult:
    """Pretrain G1/D1 on random observed subsets.

    Every step draws a batch of fonts, masks each to a random observed subset,
    updates D1 on the LSGAN terms and then G1 on lambda*L1 + LSGAN. Checkpoints
    land in ``ckpt_dir`` every ``cfg.checkpoint_every`` steps and at the end.
    """
    net = net or NetConfig()
    data = _fonts_tensor(fonts)
    if data.shape[1] != N_LETTERS * channels_per_letter:
        raise ValueError(f"expected {N_LETTERS * channels_per_letter} channels per font, got {data.shape[1]}")
    torch.manual_seed(seed)
    rng = np.random.default_rng(seed)
    g, d = make_glyphnet(net, data.shape[-1], channels_per_letter)
    opt_g = adam(g.parameters(), cfg.lr, cfg.beta1, cfg.beta2)
    opt_d = adam(d.parameters(), cfg.lr, cfg.beta1, cfg.beta2)
    nets, opts = {"g": g, "d": d}, {"g": opt_g, "d": opt_d}
    start = 0
    if resume is not None:
        start = ckpt.restore(ckpt.read_checkpoint(resume), nets=nets, optimizers=opts, rng=rng, path=resume)
        log.info("resumed %s from %s at step %d", tag, resume, start)
    sampler = SubsetSampler(cfg.subset_min, cfg.subset_max)
    losses = LossLog(log_path, append=resume is not None)
    result = PretrainResult(g, d, losses, step=start)
    g.train(), d.train()

    for step in range(start, cfg.steps):
        x, y = sample_batch(data, rng, sampler, cfg.batch_size, channels_per_letter)
        fake = g(x)

        d_terms = glyphnet_loss(fake.detach(), y, d(x, y), d(x, fake.detach()), cfg.lam)
        opt_d.zero_grad()
        d_terms.discriminator.backward()
        opt_d.step()

        g_terms = glyphnet_loss(fake, y, None, d(x, fake), cfg.lam)
        opt_g.zero_grad()
        g_terms.generator.backward()
        opt_g.step()

        if step % cfg.log_every == 0 or step == cfg.steps - 1:
            terms = g_terms.as_dict()
            terms.update(d_local=d_terms.d_local.item(), d_global=d_terms.d_global.item())
            losses.add(step, terms)
        result.step = step + 1
        if ckpt_dir is not None and (result.step % cfg.checkpoint_every == 0 or result.step == cfg.steps):
            path = Path(ckpt_dir) / f"{tag}_{result.step:07d}.pt"
            ckpt.save_checkpoint(path, nets=nets, optimizers=opts, iteration=result.step, rng=rng,
                                 extra={"image_size": int(data.shape[-1]), "kind": tag,
                                        "channels_per_letter": channels_per_letter})
            result.checkpoints.append(path)
    return result


def load_generator(path, key: str = "g") -> Generator:
    """Rebuild a generator from the specs stored in a checkpoint."""
    payload = ckpt.read_checkpoint(path)
    if key not in payload["specs"]:
        raise CheckpointError(f"{path}: no network {key!r}")
    (spec,) = ckpt.checkpoint_specs(payload, key)
    g = Generator(spec, payload["extra"].get("image_size", 64))
    ckpt.restore(payload, nets={key: g}, restore_rng=False, path=path)
    g.eval()
    return g
