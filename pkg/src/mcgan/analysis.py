"""SSIM, the letter-correlation and observed-count studies of a pretrained GlyphNet,
and the nearest-neighbor train/test leakage scan."""
from __future__ import annotations

import itertools
from collections import defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
import torch
from scipy import ndimage

from .errors import ManifestError, ShapeError
from .font_data import LETTERS, N_LETTERS, DatasetManifest, from_net, letter_mask, to_net
from .networks import Generator


@dataclass(frozen=True)
class SsimConfig:
    window: int = 11
    sigma: float = 1.5
    dynamic_range: float = 1.0
    k1: float = 0.01
    k2: float = 0.03

    def __post_init__(self):
        if self.window % 2 == 0 or self.window < 1:
            raise ValueError("SSIM window must be a positive odd size")
        if self.sigma <= 0 or self.dynamic_range <= 0 or self.k1 <= 0 or self.k2 <= 0:
            raise ValueError("SSIM constants must be positive")

    @property
    def c1(self) -> float:
        return (self.k1 * self.dynamic_range) ** 2

    @property
    def c2(self) -> float:
        return (self.k2 * self.dynamic_range) ** 2


def gaussian_kernel_1d(cfg: SsimConfig) -> np.ndarray:
    r = cfg.window // 2
    g = np.exp(-(np.arange(-r, r + 1) ** 2) / (2 * cfg.sigma**2))
    return g / g.sum()


def _local_mean(x: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Separable Gaussian weighting over the last two axes, 'valid' region only."""
    r = len(g) // 2
    y = ndimage.correlate1d(x, g, axis=-1, mode="constant")
    y = ndimage.correlate1d(y, g, axis=-2, mode="constant")
    return y[..., r:x.shape[-2] - r, r:x.shape[-1] - r]


def ssim(a, b, cfg: SsimConfig = SsimConfig()) -> np.ndarray | float:
    """Mean SSIM over all full windows; leading axes are treated as a batch."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"ssim: shape {a.shape} vs {b.shape}")
    if min(a.shape[-2:]) < cfg.window:
        raise ShapeError(f"ssim: images {a.shape[-2:]} smaller than the {cfg.window}px window")
    g = gaussian_kernel_1d(cfg)
    mu_a, mu_b = _local_mean(a, g), _local_mean(b, g)
    var_a = _local_mean(a * a, g) - mu_a**2
    var_b = _local_mean(b * b, g) - mu_b**2
    cov = _local_mean(a * b, g) - mu_a * mu_b
    num = (2 * mu_a * mu_b + cfg.c1) * (2 * cov + cfg.c2)
    den = (mu_a**2 + mu_b**2 + cfg.c1) * (var_a + var_b + cfg.c2)
    out = (num / den).mean(axis=(-2, -1))
    return float(out) if out.ndim == 0 else out


# -- running a pretrained GlyphNet ---------------------------------------------------

@torch.no_grad()
def predict_stacks(g1: Generator, fonts: np.ndarray, observed: Sequence[Iterable[int]], batch: int = 32) -> np.ndarray:
    """G1 predictions in [0, 1] for each font masked to its observed set."""
    was_training = g1.training
    g1.eval()
    out = []
    try:
        for i in range(0, len(fonts), batch):
            masks = np.stack([letter_mask(o) for o in observed[i:i + batch]])
            x = torch.from_numpy(fonts[i:i + batch] * masks[:, :, None, None]).float()
            out.append(from_net(g1(to_net(x))).clamp(0, 1).double().numpy())
    finally:
        g1.train(was_training)
    return np.concatenate(out)


def _subset(fonts, n_fonts: int | None, rng: np.random.Generator) -> np.ndarray:
    if isinstance(fonts, DatasetManifest):
        fonts = fonts.load_all()
    fonts = np.asarray(fonts, dtype=np.float64)
    if len(fonts) == 0:
        raise ManifestError("analysis subset is empty")
    if n_fonts is not None and n_fonts < len(fonts):
        fonts = fonts[np.sort(rng.choice(len(fonts), n_fonts, replace=False))]
    return fonts


# -- letter correlation --------------------------------------------------------------

@dataclass
class CorrelationTable:
    """SSIM scores of generating letter alpha when only letter beta is observed."""

    scores: dict[tuple[int, int], list[float]] = field(default_factory=lambda: defaultdict(list))

    def given(self, alpha: int, beta: int) -> list[float]:
        return self.scores.get((alpha, beta), [])

    def given_other(self, alpha: int, beta: int) -> list[float]:
        """Scores for alpha pooled over every observed letter except beta."""
        return [s for (a, b), v in sorted(self.scores.items()) if a == alpha and b != beta for s in v]

    def informative(self, alpha: int, k: int = 2) -> tuple[list[int], list[int]]:
        """(k most, k least) informative observed letters for alpha, ranked by median SSIM."""
        meds = {b: float(np.median(v)) for (a, b), v in self.scores.items() if a == alpha and v}
        ranked = sorted(meds, key=lambda b: (-meds[b], b))
        return ranked[:k], ranked[::-1][:k]


def correlation_study(g1: Generator, fonts, n_fonts: int | None = 1500, seed: int = 0,
                      cfg: SsimConfig = SsimConfig()) -> CorrelationTable:
    """Observe one random letter per font, generate the rest, score each generated letter."""
    rng = np.random.default_rng(seed)
    fonts = _subset(fonts, n_fonts, rng)
    betas = rng.integers(N_LETTERS, size=len(fonts))
    preds = predict_stacks(g1, fonts, [{int(b)} for b in betas])
    scores = ssim(preds, fonts, cfg)
    table = CorrelationTable()
    for f, beta in enumerate(betas):
        for alpha in range(N_LETTERS):
            if alpha != beta:
                table.scores[(alpha, int(beta))].append(float(scores[f, alpha]))
    return table


# -- number of observed letters ------------------------------------------------------

@dataclass
class CountStudy:
    scores: dict[int, list[float]]

    @property
    def medians(self) -> dict[int, float]:
        return {n: float(np.median(v)) for n, v in self.scores.items()}


def observed_count_study(g1: Generator, fonts, n_range: Iterable[int] = range(1, 9), n_fonts: int | None = 1500,
                         seed: int = 0, cfg: SsimConfig = SsimConfig()) -> CountStudy:
    """For each n, observe n random letters per font and score the unobserved ones."""
    n_range = list(n_range)
    bad = [n for n in n_range if not 1 <= n <= 25]
    if bad:
        raise ValueError(f"observed counts must lie in [1, 25], got {bad}")
    rng = np.random.default_rng(seed)
    fonts = _subset(fonts, n_fonts, rng)
    out = {}
    for n in n_range:
        observed = [frozenset(int(i) for i in rng.choice(N_LETTERS, n, replace=False)) for _ in fonts]
        scores = ssim(predict_stacks(g1, fonts, observed), fonts, cfg)
        out[n] = [float(scores[f, a]) for f, o in enumerate(observed) for a in range(N_LETTERS) if a not in o]
    return CountStudy(out)


# -- leakage check -------------------------------------------------------------------

def stack_distance(a, b) -> float:
    """Root-mean-square per-pixel difference between two glyph stacks."""
    return float(np.sqrt(np.mean((np.asarray(a, np.float64) - np.asarray(b, np.float64)) ** 2)))


def nearest_neighbor_check(query, fonts, ids: Sequence[str] | None = None) -> tuple[str, float]:
    if isinstance(fonts, DatasetManifest):
        ids = fonts.ids()
        fonts = fonts.load_all()
    fonts = np.asarray(fonts, dtype=np.float64)
    if len(fonts) == 0:
        raise ManifestError("nearest-neighbor scan needs a nonempty manifest")
    ids = list(ids) if ids is not None else [str(i) for i in range(len(fonts))]
    q = np.asarray(query, dtype=np.float64)
    d = np.sqrt(((fonts - q[None]) ** 2).reshape(len(fonts), -1).mean(axis=1))
    i = int(np.argmin(d))
    return ids[i], float(d[i])


# -- persistence ---------------------------------------------------------------------

def _write_scores(path: Path, scores: Iterable[float]) -> None:
    path.write_text("".join(f"{s!r}\n" for s in scores))


def write_correlation_table(table: CorrelationTable, out_dir, plot: bool = True) -> Path:
    out_dir = Path(out_dir)
    raw = out_dir / "scores"
    raw.mkdir(parents=True, exist_ok=True)
    for (a, b), v in sorted(table.scores.items()):
        _write_scores(raw / f"{LETTERS[a]}_given_{LETTERS[b]}.txt", v)
    lines = ["alpha\tmost_informative\tleast_informative"]
    for a in range(N_LETTERS):
        most, least = table.informative(a)
        lines.append(f"{LETTERS[a]}\t{','.join(LETTERS[b] for b in most)}\t{','.join(LETTERS[b] for b in least)}")
    summary = out_dir / "informative.tsv"
    summary.write_text("\n".join(lines) + "\n")
    if plot:
        _plot_correlation(table, out_dir / "correlation.png")
    return summary


def write_count_study(study: CountStudy, out_dir, plot: bool = True) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for n, v in study.scores.items():
        _write_scores(out_dir / f"n{n}.txt", v)
    summary = out_dir / "medians.tsv"
    summary.write_text("n\tmedian_ssim\tcount\n" + "".join(
        f"{n}\t{m!r}\t{len(study.scores[n])}\n" for n, m in study.medians.items()))
    if plot:
        _plot_counts(study, out_dir / "observed_count.png")
    return summary


def _plot_counts(study: CountStudy, path: Path) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    ns = sorted(study.scores)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.boxplot([study.scores[n] for n in ns], positions=ns, showfliers=False)
    ax.plot(ns, [study.medians[n] for n in ns], "r-")
    ax.set_xlabel("observed letters")
    ax.set_ylabel("SSIM")
    fig.tight_layout()
    fig.savefig(path, dpi=100)
    plt.close(fig)


def _plot_correlation(table: CorrelationTable, path: Path) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, axes = plt.subplots(13, 2, figsize=(10, 30))
    for a, ax in zip(range(N_LETTERS), axes.flat):
        most, least = table.informative(a)
        betas = most + least
        data, labels = [], []
        for b in betas:
            data += [table.given(a, b), table.given_other(a, b)]
            labels += [f"{LETTERS[a]}|{LETTERS[b]}", f"{LETTERS[a]}|~{LETTERS[b]}"]
        if data:
            parts = ax.violinplot([d if d else [np.nan] for d in data], showmedians=True)
            for body, color in zip(parts["bodies"], itertools.cycle(["tab:blue", "tab:red"])):
                body.set_facecolor(color)
            ax.set_xticks(range(1, len(labels) + 1), labels, fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=80)
    plt.close(fig)
