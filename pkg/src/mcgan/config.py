"""Training configs and the flat ``key = value`` run-config format.

Run-config files hold one assignment per line. Keys are either top-level
(``seed``, ``out_dir``...) or ``section.field`` for the nested configs
(``pretrain.steps``, ``finetune.lambda3``, ``net.g_widths``...). A line
``include = other.conf`` pulls in another file first; later assignments win.
"""
from __future__ import annotations

import dataclasses
import os
import typing
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError

DATA_ROOT_ENV = "MCGAN_DATA_ROOT"


@dataclass
class NetConfig:
    g_widths: tuple[int, int, int] = (64, 192, 576)
    g_blocks: tuple[int, int] = (3, 3)
    d_widths: tuple[int, int] = (64, 128)
    dropout: float = 0.5

    @classmethod
    def reduced(cls) -> "NetConfig":
        """Small networks for CPU-scale runs."""
        return cls(g_widths=(32, 32, 64), g_blocks=(2, 2), d_widths=(16, 32))


@dataclass
class PretrainConfig:
    steps: int = 20000
    batch_size: int = 16
    lam: float = 100.0
    lr: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.999
    subset_min: int = 1
    subset_max: int = 8
    checkpoint_every: int = 1000
    log_every: int = 1


@dataclass
class TrainConfig:
    """Per-font end-to-end fine-tuning settings."""

    lambda1: float = 300.0
    lambda2_early: float = 300.0
    lambda2_late: float = 3.0
    lambda2_switch: int = 200
    lambda3: float = 10.0
    lambda4: float = 300.0
    w_observed: float = 10.0
    w_unobserved: float = 1.0
    epochs: int = 400
    lr: float = 2e-4
    beta1: float = 0.5
    beta2: float = 0.999
    mask_sharpness: float = 20.0
    # "target": sigma(y2) vs sigma(G2(x2)) as in the loss formula; "input": sigma(x2) vs sigma(G2(x2))
    mask_reference: str = "target"
    # how RGB images are collapsed before the sigmoid mask: "max" over channels, or "none"
    mask_reduce: str = "max"
    # G1 mode during fine-tuning: "eval" keeps running BN stats and disables dropout
    g1_mode: str = "eval"
    # ablation switches
    use_lsgan: bool = True
    use_l1: bool = True
    use_mask_g2: bool = True
    use_weighted_l1_g1: bool = True
    use_mask_g1: bool = True
    orna_init: str = ""  # optional G2 checkpoint; empty = random init

    def lambda2(self, epoch: int) -> float:
        return self.lambda2_early if epoch < self.lambda2_switch else self.lambda2_late

    def letter_weights(self, observed) -> list[float]:
        return [self.w_observed if i in observed else self.w_unobserved for i in range(26)]

    def validate(self) -> list[str]:
        problems = []
        if self.mask_reference not in ("target", "input"):
            problems.append(f"finetune.mask_reference must be 'target' or 'input', got {self.mask_reference!r}")
        if self.mask_reduce not in ("max", "none"):
            problems.append(f"finetune.mask_reduce must be 'max' or 'none', got {self.mask_reduce!r}")
        if self.g1_mode not in ("eval", "train"):
            problems.append(f"finetune.g1_mode must be 'eval' or 'train', got {self.g1_mode!r}")
        if self.epochs < 1:
            problems.append("finetune.epochs must be >= 1")
        return problems


@dataclass
class RunConfig:
    data_dir: str = "data"
    checkpoint_dir: str = "checkpoints"
    out_dir: str = "out"
    seed: int = 0
    device: str = "cpu"
    verbosity: str = "info"
    net: NetConfig = field(default_factory=NetConfig)
    pretrain: PretrainConfig = field(default_factory=PretrainConfig)
    baseline: PretrainConfig = field(default_factory=PretrainConfig)
    finetune: TrainConfig = field(default_factory=TrainConfig)

    SECTIONS: typing.ClassVar[tuple[str, ...]] = ("net", "pretrain", "baseline", "finetune")

    def resolve_path(self, p: str) -> Path:
        """Relative paths are taken under $MCGAN_DATA_ROOT when it is set."""
        root = os.environ.get(DATA_ROOT_ENV)
        path = Path(p)
        return path if path.is_absolute() or not root else Path(root) / path

    def validate(self) -> list[str]:
        problems = list(self.finetune.validate())
        if not 0 <= self.seed < 2**64:
            problems.append(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if self.device != "cpu" and not self.device.startswith("cuda"):
            problems.append(f"device must be 'cpu' or 'cuda[:N]', got {self.device!r}")
        if self.verbosity not in ("debug", "info", "warning", "error"):
            problems.append(f"verbosity must be debug/info/warning/error, got {self.verbosity!r}")
        for name in ("pretrain", "baseline"):
            pc = getattr(self, name)
            if not 1 <= pc.subset_min <= pc.subset_max <= 25:
                problems.append(f"{name}.subset_min/subset_max must satisfy 1 <= min <= max <= 25")
        return problems


def _convert(raw: str, tp):
    origin = typing.get_origin(tp)
    if origin is tuple:
        args = typing.get_args(tp)
        parts = [p.strip() for p in raw.split(",") if p.strip()]
        if len(parts) != len(args):
            raise ValueError(f"expected {len(args)} comma-separated values")
        return tuple(a(p) for a, p in zip(args, parts))
    if tp is bool:
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError("expected a boolean")
    if tp is int:
        return int(raw, 0)
    return tp(raw)


def _field_types(cls) -> dict:
    hints = typing.get_type_hints(cls)
    return {f.name: hints[f.name] for f in dataclasses.fields(cls)}


def read_config_lines(path: Path, seen=None) -> list[tuple[str, str, str]]:
    """(key, value, location) triples from a config file, includes expanded in place."""
    path = Path(path)
    seen = set() if seen is None else seen
    if path.resolve() in seen:
        raise ConfigError(f"{path}: include cycle")
    seen.add(path.resolve())
    out = []
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror}") from exc
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        loc = f"{path}:{lineno}"
        if "=" not in line:
            out.append(("", line, loc))
            continue
        key, value = (s.strip() for s in line.split("=", 1))
        if key == "include":
            out.extend(read_config_lines(path.parent / value, seen))
        else:
            out.append((key, value, loc))
    return out


def apply_assignments(cfg: RunConfig, assignments) -> RunConfig:
    """Apply (key, value, location) triples; all problems are reported together."""
    problems = []
    top = {k: v for k, v in _field_types(RunConfig).items() if k not in RunConfig.SECTIONS}
    for key, value, loc in assignments:
        if not key:
            problems.append(f"{loc}: expected 'key = value', got {value!r}")
            continue
        section, _, name = key.rpartition(".")
        if section:
            if section not in RunConfig.SECTIONS:
                problems.append(f"{loc}: unknown section {section!r}")
                continue
            target = getattr(cfg, section)
            types = _field_types(type(target))
        else:
            target, types = cfg, top
        if name not in types:
            problems.append(f"{loc}: unknown key {key!r}")
            continue
        try:
            setattr(target, name, _convert(value, types[name]))
        except ValueError as exc:
            problems.append(f"{loc}: bad value for {key!r}: {value!r} ({exc})")
    if problems:
        raise ConfigError(problems)
    return cfg


def load_run_config(path=None, overrides=(), base: RunConfig | None = None) -> RunConfig:
    cfg = base or RunConfig()
    assignments = read_config_lines(Path(path)) if path else []
    for item in overrides:
        key, sep, value = item.partition("=")
        assignments.append((key.strip() if sep else "", value.strip() if sep else item, "--set"))
    apply_assignments(cfg, assignments)
    problems = cfg.validate()
    if problems:
        raise ConfigError(problems)
    return cfg


def dump_run_config(cfg: RunConfig) -> str:
    lines = []
    for f in dataclasses.fields(cfg):
        value = getattr(cfg, f.name)
        if f.name in RunConfig.SECTIONS:
            for sf in dataclasses.fields(value):
                lines.append(f"{f.name}.{sf.name} = {_fmt(getattr(value, sf.name))}")
        else:
            lines.append(f"{f.name} = {_fmt(value)}")
    return "\n".join(lines) + "\n"


def _fmt(v) -> str:
    if isinstance(v, tuple):
        return ",".join(map(str, v))
    return str(v)
