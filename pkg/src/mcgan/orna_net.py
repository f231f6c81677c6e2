"""OrnaNet: RGB ornamentation generator G2, its discriminator D2 and the OrnaNet loss."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import torch

from .config import NetConfig
from .errors import EmptyObservationSet
from .losses import binary_mask, check_finite, l1, lsgan_discriminator, lsgan_generator, mask_mse
from .networks import Discriminator, Generator, build_d2_spec, build_g2_spec

__all__ = ["OrnaNetLossTerms", "binary_mask", "make_ornanet", "ornanet_loss"]


def make_ornanet(net: NetConfig, image_size: int = 64):
    g2 = Generator(build_g2_spec(net.g_widths, net.g_blocks, net.dropout), image_size)
    d2 = Discriminator(*build_d2_spec(net.d_widths))
    return g2, d2


@dataclass
class OrnaNetLossTerms:
    lsgan_local: torch.Tensor
    lsgan_global: torch.Tensor
    l1: torch.Tensor
    mask_mse: torch.Tensor
    lambda1: float
    lambda2: float
    use_lsgan: bool = True
    d_local: torch.Tensor | None = None
    d_global: torch.Tensor | None = None

    @property
    def generator(self):
        total = self.lambda1 * self.l1 + self.lambda2 * self.mask_mse
        if self.use_lsgan:
            total = total + self.lsgan_local + self.lsgan_global
        return total

    @property
    def discriminator(self):
        return self.d_local + self.d_global

    def as_dict(self) -> dict:
        d = {"g2_local": self.lsgan_local, "g2_global": self.lsgan_global, "g2_l1": self.l1,
             "g2_mask": self.mask_mse}
        if self.d_local is not None:
            d.update(d2_local=self.d_local, d2_global=self.d_global)
        return {k: v.item() for k, v in d.items()}


def ornanet_loss(
    g2_out,
    x2,
    y2_observed,
    observed: Sequence[int],
    d2_fake_outputs,
    lambda1: float,
    lambda2: float,
    d2_real_outputs=None,
    sharpness: float = 20.0,
    mask_reference: str = "target",
    mask_reduce: str = "max",
    use_lsgan: bool = True,
) -> OrnaNetLossTerms:
    """Loss on top of OrnaNet for one font.

    ``g2_out`` and ``x2`` hold all 26 letters (26, 3, H, W); ``y2_observed`` holds
    the ground truth of the ``observed`` letters only, in that order. The L1 and
    LSGAN-real terms see only observed letters; the LSGAN-fake term sees all 26.
    With ``mask_reference="target"`` the mask term compares sigma(y2) with
    sigma(G2(x2)) on observed letters, with ``"input"`` it compares sigma(x2) with
    sigma(G2(x2)) on every letter.
    """
    observed = list(observed)
    if not observed:
        raise EmptyObservationSet("OrnaNet loss needs at least one observed letter")
    if len(observed) != len(y2_observed):
        raise ValueError(f"{len(observed)} observed letters but {len(y2_observed)} ground-truth images")
    check_finite(g2_out=g2_out, x2=x2, y2=y2_observed)
    fake_obs = g2_out[observed]
    if mask_reference == "target":
        mterm = mask_mse(y2_observed, fake_obs, sharpness, mask_reduce)
    elif mask_reference == "input":
        mterm = mask_mse(x2, g2_out, sharpness, mask_reduce)
    else:
        raise ValueError(f"unknown mask reference {mask_reference!r}")
    terms = OrnaNetLossTerms(
        lsgan_local=lsgan_generator(d2_fake_outputs[0]),
        lsgan_global=lsgan_generator(d2_fake_outputs[1]),
        l1=l1(fake_obs, y2_observed),
        mask_mse=mterm,
        lambda1=lambda1,
        lambda2=lambda2,
        use_lsgan=use_lsgan,
    )
    if d2_real_outputs is not None:
        terms.d_local = lsgan_discriminator(d2_real_outputs[0], d2_fake_outputs[0])
        terms.d_global = lsgan_discriminator(d2_real_outputs[1], d2_fake_outputs[1])
    return terms
