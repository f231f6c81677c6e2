"""Analytic gradients of every loss term against central finite differences.

Reduced float64 networks: 4 letters, 8x8 images, width-4 layers, one ResNet block.
Dropout is set to 0 so every perturbed forward sees the same function, and
batchnorm uses batch statistics without tracking running averages (its train-mode
behavior), which lets the perturbed forwards run as one vmapped batch.
"""
import pytest
import torch
from torch.func import functional_call, vmap

from mcgan.glyph_net import glyphnet_loss
from mcgan.mcgan_stack import glyphnet_end_loss, transform_T
from mcgan.networks import Discriminator, Generator, build_d1_spec, build_d2_spec, build_g1_spec, build_g2_spec
from mcgan.orna_net import ornanet_loss

L, S, W = 4, 8, (4, 4, 4)
# FLOOR scales with the largest gradient entry: biases feeding a batchnorm have exact
# zero gradient, where central differences only return rounding noise
EPS, RTOL, FLOOR = 1e-6, 1e-3, 1e-7
CHUNK = 512


def _prep(module):
    module.double()
    for m in module.modules():
        if isinstance(m, torch.nn.BatchNorm2d):
            m.track_running_stats = False
            m.running_mean = m.running_var = m.num_batches_tracked = None
        if isinstance(m, (torch.nn.Conv2d, torch.nn.ConvTranspose2d)):
            torch.nn.init.normal_(m.weight, 0.0, 0.3)
            torch.nn.init.normal_(m.bias, 0.0, 0.1)
    return module


def make_nets():
    torch.manual_seed(0)
    return {
        "g1": _prep(Generator(build_g1_spec(W, (1, 0), dropout=0.0, letters=L), S)),
        "d1": _prep(Discriminator(*build_d1_spec((4, 4), letters=L))),
        "g2": _prep(Generator(build_g2_spec(W, (1, 0), dropout=0.0), S)),
        "d2": _prep(Discriminator(*build_d2_spec((4, 4)))),
    }


def make_data():
    g = torch.Generator().manual_seed(1)
    r = lambda *s: torch.rand(*s, generator=g, dtype=torch.float64) * 2 - 1  # noqa: E731
    return {"x1": r(2, L, S, S), "y1": r(2, L, S, S), "y2": r(2, 3, S, S),
            "frozen": r(1, L, S, S)}


@pytest.fixture(scope="module")
def nets():
    return make_nets()


@pytest.fixture(scope="module")
def data():
    return make_data()


class Flat:
    """Parameters of several modules packed in one vector."""

    def __init__(self, nets, keys):
        self.entries = [(k, n, p.shape) for k in keys for n, p in nets[k].named_parameters()]
        self.theta = torch.cat([p.detach().flatten() for k in keys for p in nets[k].parameters()])

    def unpack(self, theta):
        out, i = {}, 0
        for k, n, shape in self.entries:
            out.setdefault(k, {})[n] = theta[i:i + shape.numel()].view(shape)
            i += shape.numel()
        return out


def fd_check(nets, keys, forward, terms):
    """``forward(params) -> tuple of tensors`` is differentiated w.r.t. the modules in
    ``keys``; ``terms(outputs) -> {name: scalar}`` are the loss terms under test."""
    flat = Flat(nets, keys)

    def fwd(theta):
        p = flat.unpack(theta)
        own = {k: {n: v for n, v in m.named_parameters()} for k, m in nets.items()}
        own.update(p)
        return forward(lambda k, *args: functional_call(nets[k], own[k], args))

    theta = flat.theta.clone().requires_grad_(True)
    values = terms(fwd(theta))
    analytic = {k: torch.autograd.grad(v, theta, retain_graph=True)[0] for k, v in values.items()}

    n = theta.numel()
    numeric = {k: torch.empty(n, dtype=torch.float64) for k in values}
    base = flat.theta
    for lo in range(0, n, CHUNK):
        idx = torch.arange(lo, min(n, lo + CHUNK))
        step = torch.zeros(len(idx), n, dtype=torch.float64)
        step[torch.arange(len(idx)), idx] = EPS
        with torch.no_grad():
            up = vmap(fwd)(base + step)
            down = vmap(fwd)(base - step)
        for j, i in enumerate(idx.tolist()):
            tu = terms(tuple(o[j] for o in up))
            td = terms(tuple(o[j] for o in down))
            for k in values:
                numeric[k][i] = (tu[k] - td[k]) / (2 * EPS)

    for k in values:
        a, f = analytic[k], numeric[k]
        bad = (a - f).abs() > FLOOR * f.abs().max() + RTOL * torch.maximum(a.abs(), f.abs())
        if bad.any():
            i = bad.nonzero()[:5, 0]
            print(k, i.tolist(), a[i].tolist(), f[i].tolist(), f.abs().max().item())
        assert not bad.any(), f"{k}: {int(bad.sum())}/{n} entries off"
        assert f.abs().max() > 1e-4, f"{k}: gradient vanished, check is vacuous"
    return n


# -- GlyphNet pretraining loss -----------------------------------------------------------

def _glyph_forward(data):
    def forward(call):
        out = call("g1", data["x1"])
        return out, *call("d1", data["x1"], data["y1"]), *call("d1", data["x1"], out)
    return forward


def _glyph_terms(data):
    def terms(o):
        t = glyphnet_loss(o[0], data["y1"], (o[1], o[2]), (o[3], o[4]), 1.0)
        return {"l1": t.l1, "lsgan_local": t.lsgan_local, "lsgan_global": t.lsgan_global,
                "d_local": t.d_local, "d_global": t.d_global}
    return terms


def test_glyphnet_loss_generator_side(nets, data):
    terms = _glyph_terms(data)
    gen = lambda o: {k: v for k, v in terms(o).items() if not k.startswith("d_")}  # noqa: E731
    fd_check(nets, ["g1"], _glyph_forward(data), gen)


def test_glyphnet_loss_discriminator_side(nets, data):
    terms = _glyph_terms(data)
    disc = lambda o: {k: v for k, v in terms(o).items() if k.startswith("d_")}  # noqa: E731
    fd_check(nets, ["d1"], _glyph_forward(data), disc)


# -- fine-tuning losses --------------------------------------------------------------------

OBS = [0, 2]


def _pipeline_forward(data):
    def forward(call):
        out = call("g1", data["x1"])
        # leave-one-out style assembly: letter 0 from stack 0, the rest from stack 1
        full = torch.stack([out[0, 0], out[1, 1], out[1, 2], out[1, 3]]).unsqueeze(0)
        x2 = transform_T(full)
        fake = call("g2", x2)
        return full, x2, fake, *call("d2", x2, fake), *call("d2", x2[OBS], data["y2"])
    return forward


def _orna_terms(data, which):
    def terms(o):
        full, x2, fake, fl, fg, rl, rg = o
        t = ornanet_loss(fake, x2, data["y2"], OBS, (fl, fg), 1.0, 1.0, d2_real_outputs=(rl, rg), sharpness=3.0)
        all_terms = {"l1": t.l1, "mask_mse": t.mask_mse, "lsgan_local": t.lsgan_local,
                     "lsgan_global": t.lsgan_global, "d_local": t.d_local, "d_global": t.d_global}
        return {k: all_terms[k] for k in which}
    return terms


def test_ornanet_loss_generator_side(nets, data):
    # gradients reach G2 and, through the reshape, G1
    fd_check(nets, ["g1", "g2"], _pipeline_forward(data),
             _orna_terms(data, ["l1", "mask_mse", "lsgan_local", "lsgan_global"]))


def test_ornanet_loss_discriminator_side(nets, data):
    fd_check(nets, ["d2"], _pipeline_forward(data), _orna_terms(data, ["d_local", "d_global"]))


def test_ornanet_input_mask_variant(nets, data):
    def terms(o):
        full, x2, fake, fl, fg, *_ = o
        return {"mask_mse": ornanet_loss(fake, x2, data["y2"], OBS, (fl, fg), 1.0, 1.0, sharpness=3.0,
                                         mask_reference="input").mask_mse}
    fd_check(nets, ["g1", "g2"], _pipeline_forward(data), terms)


def test_end_loss(nets, data):
    def terms(o):
        t = glyphnet_end_loss(o[0], data["frozen"], data["y2"], OBS, [10.0, 1.0, 10.0, 1.0], 1.0, 1.0,
                              sharpness=3.0)
        return {"weighted_l1": t.weighted_l1, "mask_mse": t.mask_mse}
    fd_check(nets, ["g1"], _pipeline_forward(data), terms)
