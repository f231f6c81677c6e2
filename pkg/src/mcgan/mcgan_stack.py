"""End-to-end MC-GAN: leave-one-out stacking, the gray-to-RGB reshape, the GlyphNet-side
regularizers and per-font joint fine-tuning of G1 with a fresh OrnaNet."""
from __future__ import annotations

import copy
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np
import torch
from PIL import Image

from .config import NetConfig, TrainConfig
from .errors import ConfigError, DivergenceError, EmptyObservationSet, ShapeError, UntrainedStateError
from .font_data import (LETTERS, N_LETTERS, ColorGlyphSet, GlyphStack, from_net, letter_mask, mask_stack,
                        to_net, to_uint8)
from .glyph_net import load_generator
from .losses import check_same_shape, mask_mse
from .networks import Discriminator, Generator
from .orna_net import make_ornanet, ornanet_loss
from .training import LossLog, adam

log = logging.getLogger(__name__)


# -- leave-one-out plan --------------------------------------------------------------

@dataclass(frozen=True)
class LeaveOneOutPlan:
    """Conditioning sets for the G1 batch and, per letter, which output stack to read it from.

    ``conditions[i]`` is the observed set of input stack ``i``; ``extract[l]`` is
    ``(stack_index, l)``.
    """

    observed: frozenset[int]
    conditions: tuple[frozenset[int], ...]
    extract: tuple[tuple[int, int], ...]

    def __len__(self):
        return len(self.conditions)

    def masked_stacks(self, stack: GlyphStack) -> list[GlyphStack]:
        return [mask_stack(stack, c) for c in self.conditions]

    def source_index(self) -> torch.Tensor:
        return torch.tensor([s for s, _ in self.extract])


def build_leave_one_out_plan(observed: Iterable[int]) -> LeaveOneOutPlan:
    """One stack per observed letter conditioned on the others, plus one stack on all of them.

    With a single observed letter there are no "others"; its stack is conditioned on
    the letter itself.
    """
    S = frozenset(int(i) for i in observed)
    if not S:
        raise EmptyObservationSet("leave-one-out plan needs at least one observed letter")
    if len(S) >= N_LETTERS:
        raise ValueError("all 26 letters observed: nothing to synthesize")
    if any(not 0 <= i < N_LETTERS for i in S):
        raise ValueError(f"observed indices out of range: {sorted(S)}")
    order = sorted(S)
    conditions = [S - {l} if len(S) > 1 else S for l in order] + [S]
    source = {l: i for i, l in enumerate(order)}
    extract = tuple((source.get(l, len(order)), l) for l in range(N_LETTERS))
    return LeaveOneOutPlan(S, tuple(conditions), extract)


def assemble(g1_out, plan: LeaveOneOutPlan):
    """(n+1, 26, H, W) G1 outputs -> (1, 26, H, W), each letter from its plan stack."""
    if g1_out.dim() != 4 or g1_out.shape[:2] != (len(plan), N_LETTERS):
        raise ShapeError(f"expected ({len(plan)}, 26, H, W) G1 outputs, got {tuple(g1_out.shape)}")
    return g1_out[plan.source_index(), torch.arange(N_LETTERS)].unsqueeze(0)


def transform_T(full_stack):
    """(1, L, H, W) glyph stack -> batch of L three-channel images, gray plane repeated."""
    if full_stack.dim() != 4 or full_stack.shape[0] != 1:
        raise ShapeError(f"expected (1, letters, H, W), got {tuple(full_stack.shape)}")
    return full_stack[0].unsqueeze(1).repeat(1, 3, 1, 1)


# -- GlyphNet regularizers -----------------------------------------------------------

@dataclass
class EndLossTerms:
    weighted_l1: torch.Tensor
    mask_mse: torch.Tensor
    lambda3: float
    lambda4: float

    @property
    def total(self):
        return self.lambda3 * self.weighted_l1 + self.lambda4 * self.mask_mse

    def as_dict(self):
        return {"g1_wl1": self.weighted_l1.item(), "g1_mask": self.mask_mse.item()}


def glyphnet_end_loss(g1_out, g1_frozen_out, y2_observed, observed, weights, lambda3: float, lambda4: float,
                      sharpness: float = 20.0, mask_reduce: str = "max") -> EndLossTerms:
    """Per-letter weighted L1 to the frozen pretrained predictions, plus mask MSE between
    observed ground-truth glyphs and the reshaped G1 predictions of those letters."""
    check_same_shape(g1_out, g1_frozen_out, "G1 vs frozen G1")
    w = torch.as_tensor(weights, dtype=g1_out.dtype).reshape(1, -1, 1, 1)
    wl1 = (w * (g1_out - g1_frozen_out).abs()).mean()
    fake_obs = transform_T(g1_out)[list(observed)]
    return EndLossTerms(wl1, mask_mse(y2_observed, fake_obs, sharpness, mask_reduce), lambda3, lambda4)


# -- fine-tuning ---------------------------------------------------------------------

@dataclass
class FineTuneState:
    g1: Generator
    g1_frozen: torch.Tensor  # pretrained G1 predictions on the plan, (1, 26, H, W)
    g2: Generator
    d2: Discriminator
    opt_g: torch.optim.Optimizer
    opt_d: torch.optim.Optimizer
    plan: LeaveOneOutPlan
    x1: torch.Tensor
    y2: torch.Tensor  # observed letters' ground truth in [-1, 1], plan order
    config: TrainConfig
    epoch: int = 0
    log: LossLog = field(default_factory=LossLog)

    @property
    def observed(self) -> list[int]:
        return sorted(self.plan.observed)

    def g1_forward(self):
        return assemble(self.g1(self.x1), self.plan)


def _set_modes(state: FineTuneState, training: bool) -> None:
    state.g1.train(training and state.config.g1_mode == "train")
    state.g2.train(training)
    state.d2.train(training)


def init_finetune(observed_set: ColorGlyphSet, g1_pretrained: Generator, config: TrainConfig,
                  net: NetConfig | None = None, seed: int = 0, log_path=None) -> FineTuneState:
    problems = config.validate()
    if problems:
        raise ConfigError(problems)
    plan = build_leave_one_out_plan(observed_set.observed)
    torch.manual_seed(seed)
    gray = observed_set.grayscale()
    x1 = torch.from_numpy(np.stack([s.channels for s in plan.masked_stacks(gray)])).float()
    obs = sorted(plan.observed)
    y2 = torch.from_numpy(observed_set.images[obs]).float()
    g1 = copy.deepcopy(g1_pretrained)
    g2, d2 = make_ornanet(net or NetConfig(), g1.image_size)
    if config.orna_init:
        g2.load_state_dict(load_generator(config.orna_init).state_dict())
    state = FineTuneState(
        g1=g1, g1_frozen=torch.empty(0), g2=g2, d2=d2,
        opt_g=adam(list(g1.parameters()) + list(g2.parameters()), config.lr, config.beta1, config.beta2),
        opt_d=adam(d2.parameters(), config.lr, config.beta1, config.beta2),
        plan=plan, x1=to_net(x1), y2=to_net(y2), config=config, log=LossLog(log_path),
    )
    _set_modes(state, True)
    with torch.no_grad():
        state.g1_frozen = state.g1_forward().detach().clone()
    return state


def _check_terms(epoch: int, terms: dict) -> None:
    bad = [k for k, v in terms.items() if not math.isfinite(v)]
    if bad:
        raise DivergenceError(f"epoch {epoch}: non-finite loss term(s): {', '.join(bad)}")


def finetune_step(state: FineTuneState) -> dict:
    """One D2 update followed by one joint G1+G2 update."""
    cfg, obs = state.config, state.observed
    _set_modes(state, True)
    g1_out = state.g1_forward()
    x2 = transform_T(g1_out)
    fake = state.g2(x2)

    d_real = state.d2(x2[obs].detach(), state.y2)
    d_fake = state.d2(x2.detach(), fake.detach())
    d_terms = ornanet_loss(fake.detach(), x2.detach(), state.y2, obs, d_fake, 0.0, 0.0, d2_real_outputs=d_real,
                           sharpness=cfg.mask_sharpness, mask_reduce=cfg.mask_reduce)
    d_loss = d_terms.discriminator
    _check_terms(state.epoch, {"d2_local": d_terms.d_local.item(), "d2_global": d_terms.d_global.item()})
    if cfg.use_lsgan:
        state.opt_d.zero_grad()
        d_loss.backward()
        state.opt_d.step()

    orna = ornanet_loss(
        fake, x2, state.y2, obs, state.d2(x2, fake),
        lambda1=cfg.lambda1 if cfg.use_l1 else 0.0,
        lambda2=cfg.lambda2(state.epoch) if cfg.use_mask_g2 else 0.0,
        sharpness=cfg.mask_sharpness, mask_reference=cfg.mask_reference, mask_reduce=cfg.mask_reduce,
        use_lsgan=cfg.use_lsgan,
    )
    end = glyphnet_end_loss(
        g1_out, state.g1_frozen, state.y2, obs, cfg.letter_weights(state.plan.observed),
        lambda3=cfg.lambda3 if cfg.use_weighted_l1_g1 else 0.0,
        lambda4=cfg.lambda4 if cfg.use_mask_g1 else 0.0,
        sharpness=cfg.mask_sharpness, mask_reduce=cfg.mask_reduce,
    )
    terms = {**orna.as_dict(), **end.as_dict(), "d2_local": d_terms.d_local.item(),
             "d2_global": d_terms.d_global.item()}
    _check_terms(state.epoch, terms)
    state.opt_g.zero_grad()
    (orna.generator + end.total).backward()
    state.opt_g.step()
    state.log.add(state.epoch, terms)
    state.epoch += 1
    return terms


def finetune(observed_set: ColorGlyphSet, g1_pretrained: Generator, config: TrainConfig,
             net: NetConfig | None = None, seed: int = 0, log_path=None, epochs: int | None = None):
    """Specialize G1 and a fresh OrnaNet to one font's observed letters.

    Returns the trained state and the predicted 26 color glyphs.
    """
    state = init_finetune(observed_set, g1_pretrained, config, net, seed, log_path)
    n = config.epochs if epochs is None else epochs
    for _ in range(n):
        terms = finetune_step(state)
        if state.epoch % 50 == 0:
            log.info("epoch %d l1 %.4f mask %.4f", state.epoch, terms["g2_l1"], terms["g2_mask"])
    return state, synthesize(state)


@torch.no_grad()
def synthesize(state: FineTuneState) -> ColorGlyphSet:
    """Eval-mode forward through plan -> G1 -> reshape -> G2; images in [0, 1]."""
    if state.epoch == 0:
        raise UntrainedStateError("fine-tuning state has not been trained")
    _set_modes(state, False)
    try:
        out = state.g2(transform_T(state.g1_forward()))
    finally:
        _set_modes(state, True)
    images = from_net(out).clamp(0, 1).double().numpy()
    return ColorGlyphSet(images, state.plan.observed)


# -- persistence ---------------------------------------------------------------------

def contact_sheet(images: np.ndarray, cols: int = 13) -> np.ndarray:
    """(26, 3, H, W) -> (rows*H, cols*W, 3) grid, letters row-major."""
    n, _, h, w = images.shape
    rows = -(-n // cols)
    sheet = np.zeros((rows * h, cols * w, 3))
    for i, im in enumerate(images):
        r, c = divmod(i, cols)
        sheet[r * h:(r + 1) * h, c * w:(c + 1) * w] = np.moveaxis(im, 0, -1)
    return sheet


def save_glyph_set(glyphs: ColorGlyphSet, out_dir) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for ch, im in zip(LETTERS, glyphs.images):
        p = out_dir / f"{ch}.png"
        Image.fromarray(to_uint8(np.moveaxis(im, 0, -1))).save(p, format="PNG")
        paths.append(p)
    sheet = out_dir / "contact_sheet.png"
    Image.fromarray(to_uint8(contact_sheet(glyphs.images))).save(sheet, format="PNG")
    return paths + [sheet]


