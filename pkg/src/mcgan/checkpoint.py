"""Versioned checkpoint container.

One ``torch.save`` dict holding network specs (and their hash), parameter and
optimizer state, the iteration counter and RNG states. Loading refuses a
checkpoint whose spec hash differs from the networks it is loaded into.
"""
from __future__ import annotations

import io
import pickle
from pathlib import Path

import numpy as np
import torch

from .errors import CheckpointError
from .networks import NetworkSpec, spec_digest

FORMAT_VERSION = 1


def module_specs(module) -> tuple[NetworkSpec, ...]:
    if hasattr(module, "spec"):
        return (module.spec,)
    return tuple(module.specs)


def save_checkpoint(path, *, nets: dict, optimizers: dict | None = None, iteration: int = 0,
                    rng: np.random.Generator | None = None, extra: dict | None = None) -> Path:
    path = Path(path)
    payload = {
        "format_version": FORMAT_VERSION,
        "specs": {k: [s.to_dict() for s in module_specs(m)] for k, m in nets.items()},
        "spec_hash": {k: spec_digest(*module_specs(m)) for k, m in nets.items()},
        "state": {k: m.state_dict() for k, m in nets.items()},
        "optim": {k: o.state_dict() for k, o in (optimizers or {}).items()},
        "iteration": iteration,
        "torch_rng": torch.get_rng_state(),
        "np_rng": rng.bit_generator.state if rng is not None else None,
        "extra": extra or {},
    }
    buf = io.BytesIO()
    torch.save(payload, buf)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(buf.getvalue())
    except OSError as exc:
        raise CheckpointError(f"cannot write checkpoint {path}: {exc}") from exc
    return path


def read_checkpoint(path) -> dict:
    try:
        payload = torch.load(path, map_location="cpu", weights_only=False)
    except (OSError, RuntimeError, EOFError, pickle.UnpicklingError) as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    if not isinstance(payload, dict) or payload.get("format_version") != FORMAT_VERSION:
        version = payload.get("format_version") if isinstance(payload, dict) else None
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    return payload


def checkpoint_specs(payload: dict, key: str) -> list[NetworkSpec]:
    return [NetworkSpec.from_dict(d) for d in payload["specs"][key]]


def restore(payload: dict, *, nets: dict, optimizers: dict | None = None,
            rng: np.random.Generator | None = None, restore_rng: bool = True, path="checkpoint") -> int:
    """Load state into live objects; returns the stored iteration."""
    for k, m in nets.items():
        if k not in payload["state"]:
            raise CheckpointError(f"{path}: no state for network {k!r}")
        want = spec_digest(*module_specs(m))
        if payload["spec_hash"][k] != want:
            raise CheckpointError(f"{path}: spec hash mismatch for {k!r} (checkpoint {payload['spec_hash'][k][:12]}, "
                                  f"network {want[:12]})")
        m.load_state_dict(payload["state"][k])
    for k, o in (optimizers or {}).items():
        o.load_state_dict(payload["optim"][k])
    if restore_rng:
        torch.set_rng_state(payload["torch_rng"])
        if rng is not None and payload["np_rng"] is not None:
            rng.bit_generator.state = payload["np_rng"]
    return payload["iteration"]
