"""Small pieces shared by the training loops."""
from __future__ import annotations

import math
from pathlib import Path

import torch

from .errors import DivergenceError


class LossLog:
    """Collects ``(step, term, value)`` records, optionally mirrored to a ``step<TAB>term<TAB>value`` file."""

    def __init__(self, path=None, append: bool = False):
        self.records: list[tuple[int, str, float]] = []
        self.path = Path(path) if path else None
        if self.path:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            if not append:
                self.path.write_text("")

    def add(self, step: int, terms: dict) -> None:
        rows = [(step, k, float(v)) for k, v in terms.items()]
        bad = [k for _, k, v in rows if not math.isfinite(v)]
        if bad:
            raise DivergenceError(f"step {step}: non-finite loss term(s): {', '.join(bad)}")
        self.records.extend(rows)
        if self.path:
            with self.path.open("a") as fh:
                fh.writelines(f"{s}\t{k}\t{v!r}\n" for s, k, v in rows)

    def series(self, term: str) -> list[float]:
        return [v for _, k, v in self.records if k == term]


def read_loss_log(path) -> list[tuple[int, str, float]]:
    out = []
    for line in Path(path).read_text().splitlines():
        s, k, v = line.split("\t")
        out.append((int(s), k, float(v)))
    return out


def adam(params, lr, beta1, beta2):
    return torch.optim.Adam(params, lr=lr, betas=(beta1, beta2))


def set_determinism() -> None:
    torch.use_deterministic_algorithms(True, warn_only=True)
