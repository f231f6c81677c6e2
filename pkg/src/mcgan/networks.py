"""Declarative layer specs for the generators/discriminators and their torch realization.

Notation follows the usual pix2pix shorthand: CRk = conv-batchnorm-relu,
Ck = conv-batchnorm, CRDk = conv-batchnorm-relu-dropout, CLk = conv-leakyrelu.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from typing import Sequence

import torch
from torch import nn

from .errors import ShapeError

POINTWISE = {"batchnorm", "relu", "leaky-relu", "dropout", "tanh", "sigmoid"}
CONV_KINDS = {"conv", "grouped-conv"}

LEAKY_SLOPE = 0.2
DROPOUT_RATE = 0.5

# Kernel sizes are not given for the generators; the discriminator kernel is
# the one that makes the local receptive field come out at 21.
GEN_KERNEL = 3
GROUPED_KERNEL = 7
DISC_KERNEL = 5


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    channels_in: int
    channels_out: int
    kernel: int = 0
    stride: int = 1
    up: bool = False
    groups: int = 1
    slope: float = 0.0
    rate: float = 0.0
    body: tuple["LayerSpec", ...] = ()

    @property
    def is_conv(self) -> bool:
        return self.kind in CONV_KINDS

    def n_params(self) -> int:
        """Trainable parameter count (conv weight+bias, batchnorm affine)."""
        if self.is_conv:
            return self.kernel * self.kernel * self.channels_in // self.groups * self.channels_out + self.channels_out
        if self.kind == "batchnorm":
            return 2 * self.channels_out
        if self.kind == "resnet-block":
            return sum(l.n_params() for l in self.body)
        return 0


@dataclass(frozen=True)
class NetworkSpec:
    name: str
    layers: tuple[LayerSpec, ...] = field(default_factory=tuple)

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        _check_chain(self.layers, self.name)

    @property
    def channels_in(self) -> int:
        return self.layers[0].channels_in

    @property
    def channels_out(self) -> int:
        return self.layers[-1].channels_out

    def conv_layers(self) -> list[LayerSpec]:
        out = []
        for layer in self.layers:
            if layer.kind == "resnet-block":
                out.extend(l for l in layer.body if l.is_conv)
            elif layer.is_conv:
                out.append(layer)
        return out

    def factors(self) -> list[tuple[str, int]]:
        """('down'|'up', factor) for every convolution in order."""
        return [("up" if l.up else "down", l.stride) for l in self.conv_layers()]

    def to_dict(self) -> dict:
        return {"name": self.name, "layers": [asdict(l) for l in self.layers]}

    @classmethod
    def from_dict(cls, d: dict) -> "NetworkSpec":
        return cls(d["name"], tuple(_layer_from_dict(l) for l in d["layers"]))

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()

    def n_params(self) -> int:
        return sum(l.n_params() for l in self.layers)


def _layer_from_dict(d: dict) -> LayerSpec:
    d = dict(d)
    d["body"] = tuple(_layer_from_dict(b) for b in d.get("body", ()))
    return LayerSpec(**d)


def _check_chain(layers: Sequence[LayerSpec], name: str) -> None:
    if not layers:
        raise ValueError(f"{name}: empty network spec")
    prev = None
    for i, layer in enumerate(layers):
        if layer.stride not in (1, 2):
            raise ValueError(f"{name}[{i}]: stride {layer.stride} not in {{1, 2}}")
        if layer.is_conv and (layer.channels_in % layer.groups or layer.channels_out % layer.groups):
            raise ValueError(f"{name}[{i}]: channels not divisible by groups={layer.groups}")
        if layer.kind not in CONV_KINDS | POINTWISE | {"resnet-block"}:
            raise ValueError(f"{name}[{i}]: unknown layer kind {layer.kind!r}")
        if layer.kind in POINTWISE and layer.channels_in != layer.channels_out:
            raise ValueError(f"{name}[{i}]: pointwise layer changes channel count")
        if prev is not None and prev.channels_out != layer.channels_in:
            raise ValueError(
                f"{name}[{i}]: expects {layer.channels_in} input channels, previous layer gives {prev.channels_out}"
            )
        if layer.kind == "resnet-block":
            _check_chain(layer.body, f"{name}[{i}].body")
            if layer.body[0].channels_in != layer.channels_in or layer.body[-1].channels_out != layer.channels_out:
                raise ValueError(f"{name}[{i}]: resnet body does not match block channels")
        prev = layer


# -- shorthand constructors ----------------------------------------------------------

def conv(cin, cout, k, stride=1, up=False, groups=1) -> LayerSpec:
    kind = "grouped-conv" if groups > 1 else "conv"
    return LayerSpec(kind, cin, cout, kernel=k, stride=stride, up=up, groups=groups)


def CR(cin, cout, k=GEN_KERNEL, stride=1, up=False, groups=1) -> list[LayerSpec]:
    return [conv(cin, cout, k, stride, up, groups), LayerSpec("batchnorm", cout, cout), LayerSpec("relu", cout, cout)]


def CL(cin, cout, k=DISC_KERNEL, stride=1, slope=LEAKY_SLOPE) -> list[LayerSpec]:
    return [conv(cin, cout, k, stride), LayerSpec("leaky-relu", cout, cout, slope=slope)]


def resnet_block(c, k=GEN_KERNEL, dropout=DROPOUT_RATE) -> LayerSpec:
    """(CRD-C) pair with an additive skip."""
    body = (
        conv(c, c, k),
        LayerSpec("batchnorm", c, c),
        LayerSpec("relu", c, c),
        LayerSpec("dropout", c, c, rate=dropout),
        conv(c, c, k),
        LayerSpec("batchnorm", c, c),
    )
    return LayerSpec("resnet-block", c, c, body=body)


# -- builders ------------------------------------------------------------------------

def build_generator_spec(
    name: str,
    channels: int,
    groups: int | None,
    widths: Sequence[int] = (64, 192, 576),
    n_blocks: Sequence[int] = (3, 3),
    dropout: float = DROPOUT_RATE,
) -> NetworkSpec:
    """Encoder-resnet-decoder generator.

    With ``groups`` set, the first layer is a grouped CR layer keeping ``channels``
    channels (one group per letter); the final conv maps back to ``channels``
    channels followed by tanh.
    """
    w1, w2, w3 = widths
    layers: list[LayerSpec] = []
    cin = channels
    if groups:
        layers += CR(channels, channels, GROUPED_KERNEL, groups=groups)
    layers += CR(cin, w1)
    layers += CR(w1, w2, stride=2)
    layers += CR(w2, w3, stride=2)
    layers += [resnet_block(w3, dropout=dropout) for _ in range(n_blocks[0] + n_blocks[1])]
    layers += CR(w3, w2, stride=2, up=True)
    layers += CR(w2, w1, stride=2, up=True)
    layers += [conv(w1, channels, GEN_KERNEL), LayerSpec("tanh", channels, channels)]
    return NetworkSpec(name, tuple(layers))


def build_g1_spec(widths=(64, 192, 576), n_blocks=(3, 3), dropout=DROPOUT_RATE, letters: int = 26) -> NetworkSpec:
    return build_generator_spec("G1", letters, letters, widths, n_blocks, dropout)


def build_g2_spec(widths=(64, 192, 576), n_blocks=(3, 3), dropout=DROPOUT_RATE) -> NetworkSpec:
    return build_generator_spec("G2", 3, None, widths, n_blocks, dropout)


def build_baseline_spec(widths=(64, 192, 576), n_blocks=(3, 3), dropout=DROPOUT_RATE) -> NetworkSpec:
    # one group of 3 RGB planes per letter
    return build_generator_spec("baseline", 78, 26, widths, n_blocks, dropout)


def build_d_spec(in_channels: int, widths=(64, 128), name="D") -> tuple[NetworkSpec, NetworkSpec]:
    """(local, global-extension) discriminator specs.

    ``in_channels`` counts the conditioning input and the judged image together.
    The global extension is two stride-2 CR blocks that keep the channel count
    and then feed into the (shared) local layers.
    """
    w1, w2 = widths
    local = CL(in_channels, w1, stride=2) + CL(w1, w2) + [conv(w2, 1, DISC_KERNEL)]
    ext = CR(in_channels, in_channels, DISC_KERNEL, stride=2) + CR(in_channels, in_channels, DISC_KERNEL, stride=2)
    return NetworkSpec(f"{name}.local", tuple(local)), NetworkSpec(f"{name}.global", tuple(ext))


def build_d1_spec(widths=(64, 128), letters: int = 26):
    return build_d_spec(2 * letters, widths, "D1")


def build_d2_spec(widths=(64, 128)):
    return build_d_spec(6, widths, "D2")


def receptive_field(spec: NetworkSpec | Sequence[LayerSpec]) -> int:
    """Input extent seen by one output unit of a pure conv chain."""
    layers = spec.layers if isinstance(spec, NetworkSpec) else spec
    r, jump = 1, 1
    for layer in layers:
        if layer.kind in POINTWISE:
            continue
        if not layer.is_conv or layer.up:
            raise ValueError(f"receptive_field: unsupported layer kind {layer.kind!r}{' (up)' if layer.up else ''}")
        r += (layer.kernel - 1) * jump
        jump *= layer.stride
    return r


# -- torch realization ---------------------------------------------------------------

def _make_layer(l: LayerSpec) -> nn.Module:
    if l.kind in CONV_KINDS:
        pad = l.kernel // 2
        if l.up:
            return nn.ConvTranspose2d(l.channels_in, l.channels_out, l.kernel, l.stride, pad,
                                      output_padding=l.stride - 1, groups=l.groups)
        return nn.Conv2d(l.channels_in, l.channels_out, l.kernel, l.stride, pad, groups=l.groups)
    if l.kind == "batchnorm":
        return nn.BatchNorm2d(l.channels_out, momentum=0.1)
    if l.kind == "relu":
        return nn.ReLU()
    if l.kind == "leaky-relu":
        return nn.LeakyReLU(l.slope)
    if l.kind == "dropout":
        return nn.Dropout(l.rate)
    if l.kind == "tanh":
        return nn.Tanh()
    if l.kind == "sigmoid":
        return nn.Sigmoid()
    if l.kind == "resnet-block":
        return ResnetBlock(l)
    raise ValueError(l.kind)


class ResnetBlock(nn.Module):
    def __init__(self, spec: LayerSpec):
        super().__init__()
        self.body = nn.Sequential(*[_make_layer(l) for l in spec.body])

    def forward(self, x):
        return x + self.body(x)


def build_sequential(spec: NetworkSpec) -> nn.Sequential:
    return nn.Sequential(*[_make_layer(l) for l in spec.layers])


def init_weights(module: nn.Module) -> None:
    """N(0, 0.02) conv weights, N(1, 0.02) batchnorm scales, zero biases."""
    for m in module.modules():
        if isinstance(m, (nn.Conv2d, nn.ConvTranspose2d)):
            nn.init.normal_(m.weight, 0.0, 0.02)
            nn.init.zeros_(m.bias)
        elif isinstance(m, nn.BatchNorm2d):
            nn.init.normal_(m.weight, 1.0, 0.02)
            nn.init.zeros_(m.bias)


class Generator(nn.Module):
    def __init__(self, spec: NetworkSpec, image_size: int = 64):
        super().__init__()
        self.spec = spec
        self.image_size = image_size
        self.net = build_sequential(spec)
        init_weights(self)

    def forward(self, x):
        expected = (self.spec.channels_in, self.image_size, self.image_size)
        if x.dim() != 4 or tuple(x.shape[1:]) != expected:
            raise ShapeError(f"{self.spec.name}: expected input (B, {', '.join(map(str, expected))}), got {tuple(x.shape)}")
        return self.net(x)


class Discriminator(nn.Module):
    """Local PatchGAN plus a global path that reuses the local layers."""

    def __init__(self, local: NetworkSpec, global_ext: NetworkSpec):
        super().__init__()
        self.specs = (local, global_ext)
        self.local = build_sequential(local)
        self.global_ext = build_sequential(global_ext)
        init_weights(self)

    def forward(self, cond, img):
        x = torch.cat([cond, img], dim=1)
        if x.shape[1] != self.specs[0].channels_in:
            raise ShapeError(f"discriminator expects {self.specs[0].channels_in} channels, got {x.shape[1]}")
        return self.local(x), self.local(self.global_ext(x))


def count_params(module: nn.Module) -> int:
    return sum(p.numel() for p in module.parameters())


def spec_digest(*specs: NetworkSpec) -> str:
    return hashlib.sha256("".join(s.digest() for s in specs).encode()).hexdigest()
