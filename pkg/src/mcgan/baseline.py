"""Image-translation baseline: one network over 78-channel (26 letters x RGB) stacks,
trained once on the color dataset and applied without per-font tuning."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from PIL import Image

from .config import NetConfig, PretrainConfig
from .errors import ShapeError
from .font_data import N_LETTERS, ColorGlyphSet, GlyphStack, from_net, mask_color_set, mask_stack, to_net, to_uint8
from .glyph_net import PretrainResult, pretrain_glyphnet
from .mcgan_stack import contact_sheet
from .networks import Generator


@dataclass(frozen=True)
class ColorStack:
    """(78, H, W) letter-major RGB planes; unobserved letters all zero."""

    channels: np.ndarray
    observed: frozenset[int]

    def __post_init__(self):
        if self.channels.ndim != 3 or self.channels.shape[0] != 3 * N_LETTERS:
            raise ShapeError(f"color stack must have 78 channels, got {self.channels.shape}")

    @classmethod
    def from_glyphs(cls, glyphs: ColorGlyphSet) -> "ColorStack":
        masked = mask_color_set(glyphs, glyphs.observed)
        return cls(masked.images.reshape(3 * N_LETTERS, *masked.images.shape[2:]), masked.observed)


def train_baseline(color_fonts, cfg: PretrainConfig, net: NetConfig | None = None, seed: int = 0,
                   ckpt_dir=None, resume=None, log_path=None) -> PretrainResult:
    """Train the 78-channel translation network on random observed subsets of color fonts."""
    return pretrain_glyphnet(color_fonts, cfg, net, seed, ckpt_dir, resume, log_path,
                             channels_per_letter=3, tag="baseline")


@torch.no_grad()
def predict_baseline(g: Generator, observed: ColorStack | ColorGlyphSet) -> ColorGlyphSet:
    """Single eval-mode forward pass."""
    if isinstance(observed, ColorGlyphSet):
        observed = ColorStack.from_glyphs(observed)
    if g.spec.channels_in != 3 * N_LETTERS:
        raise ShapeError(f"baseline generator must take 78 channels, has {g.spec.channels_in}")
    was_training = g.training
    g.eval()
    try:
        out = g(to_net(torch.from_numpy(observed.channels).float()[None]))
    finally:
        g.train(was_training)
    images = from_net(out[0]).clamp(0, 1).double().numpy()
    return ColorGlyphSet(images.reshape(N_LETTERS, 3, *images.shape[1:]), observed.observed)


def comparison_inputs(glyphs: ColorGlyphSet) -> tuple[GlyphStack, ColorStack]:
    """The observed letters as MC-GAN sees them (gray stack) and as the baseline sees them.

    Both come from the same masked color set.
    """
    masked = mask_color_set(glyphs, glyphs.observed)
    return mask_stack(masked.grayscale(), masked.observed), ColorStack.from_glyphs(masked)


def save_comparison_sheet(path, baseline: ColorGlyphSet, mcgan: ColorGlyphSet,
                          truth: ColorGlyphSet | None = None) -> Path:
    """Rows: [ground truth], baseline, MC-GAN; each a 26-letter strip."""
    rows = ([truth] if truth is not None else []) + [baseline, mcgan]
    sheet = np.concatenate([contact_sheet(r.images, cols=N_LETTERS) for r in rows], axis=0)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(to_uint8(sheet)).save(path, format="PNG")
    return path
