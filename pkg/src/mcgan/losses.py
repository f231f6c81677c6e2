"""Loss primitives shared by the glyph and ornamentation networks."""
from __future__ import annotations

import torch

from .errors import ShapeError


def check_finite(**tensors) -> None:
    for name, t in tensors.items():
        if t is not None and not torch.isfinite(t).all():
            raise ValueError(f"non-finite values in {name}")


def check_same_shape(a, b, what="tensors") -> None:
    if a.shape != b.shape:
        raise ShapeError(f"{what}: shape {tuple(a.shape)} vs {tuple(b.shape)}")


def l1(pred, target):
    check_same_shape(pred, target, "l1")
    return (pred - target).abs().mean()


def lsgan_generator(d_fake):
    """Generator side: push patch decisions on fakes towards 1."""
    return ((d_fake - 1) ** 2).mean()


def lsgan_discriminator(d_real, d_fake):
    """(D(real) - 1)^2 + D(fake)^2, each averaged over the patch map."""
    return ((d_real - 1) ** 2).mean() + (d_fake ** 2).mean()


def binary_mask(img, sharpness: float = 20.0):
    """Soft binary mask sigma(k * v) of an image in [-1, 1]."""
    return torch.sigmoid(sharpness * img)


def reduce_channels(img, how: str):
    """Collapse (N, 3, H, W) color images to one plane before masking."""
    if how == "max":
        return img.amax(dim=1, keepdim=True)
    if how == "none":
        return img
    raise ValueError(f"unknown channel reduction {how!r}")


def mask_mse(a, b, sharpness: float = 20.0, reduce: str = "none"):
    """Mean squared difference of the soft masks of ``a`` and ``b``."""
    ma = binary_mask(reduce_channels(a, reduce) if a.dim() == 4 and a.shape[1] == 3 else a, sharpness)
    mb = binary_mask(reduce_channels(b, reduce) if b.dim() == 4 and b.shape[1] == 3 else b, sharpness)
    check_same_shape(ma, mb, "mask_mse")
    return ((ma - mb) ** 2).mean()
