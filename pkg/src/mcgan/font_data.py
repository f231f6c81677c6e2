"""Glyph normalization, glyph stacks, synthetic color-gradient fonts and dataset manifests.

Pixel convention: foreground is white (1.0) on a black (0.0) background. Images
are stored in [0, 1]; the mapping to [-1, 1] happens at the network boundary
(:func:`to_net` / :func:`from_net`).
"""
from __future__ import annotations

import logging
import os
import string
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from PIL import Image
from scipy import ndimage

from .errors import EmptyGlyph, EmptyObservationSet, ManifestError, ShapeError

log = logging.getLogger(__name__)

SIZE = 64
N_LETTERS = 26
LETTERS = string.ascii_uppercase


def letter_index(ch: str) -> int:
    i = LETTERS.find(ch.upper())
    if len(ch) != 1 or i < 0:
        raise ValueError(f"not a capital letter: {ch!r}")
    return i


def to_net(x):
    return x * 2 - 1


def from_net(x):
    return (x + 1) / 2


def _as_float(raw) -> np.ndarray:
    a = np.asarray(raw)
    if a.dtype == np.uint8:
        return a.astype(np.float64) / 255.0
    return a.astype(np.float64)


# -- glyph images ---------------------------------------------------------------------

def _resize(plane: np.ndarray, h: int, w: int) -> np.ndarray:
    if plane.shape == (h, w):
        return plane.copy()
    down = h <= plane.shape[0] and w <= plane.shape[1]
    resample = Image.BOX if down else Image.BILINEAR
    img = Image.fromarray(plane.astype(np.float32), mode="F")
    return np.asarray(img.resize((w, h), resample=resample), dtype=np.float64)


def _fit(planes: np.ndarray, fg: np.ndarray, size: int) -> np.ndarray:
    """Crop ``planes`` (C, H, W) to the bbox of ``fg``, scale longest side to ``size``, center-pad."""
    rows = np.flatnonzero(fg.any(axis=1))
    cols = np.flatnonzero(fg.any(axis=0))
    crop = planes[:, rows[0]:rows[-1] + 1, cols[0]:cols[-1] + 1]
    h, w = crop.shape[1:]
    scale = size / max(h, w)
    nh, nw = max(1, min(size, round(h * scale))), max(1, min(size, round(w * scale)))
    out = np.zeros((planes.shape[0], size, size))
    top, left = (size - nh) // 2, (size - nw) // 2
    for c in range(planes.shape[0]):
        out[c, top:top + nh, left:left + nw] = _resize(crop[c], nh, nw)
    return np.clip(out, 0.0, 1.0)


def normalize_glyph(raw, threshold: float = 0.0, size: int = SIZE) -> np.ndarray:
    """Tight-crop a grayscale glyph, scale its longer side to 64 and center it on a 64x64 canvas.

    ``raw`` is white-on-black, uint8 or float in [0, 1]. Pixels strictly above
    ``threshold`` count as foreground.
    """
    a = _as_float(raw)
    if a.ndim != 2:
        raise ShapeError(f"expected a 2-D grayscale image, got shape {a.shape}")
    fg = a > threshold
    if not fg.any():
        raise EmptyGlyph("glyph has no foreground pixel")
    return _fit(a[None], fg, size)[0]


def normalize_color_glyph(raw, threshold: float = 0.0, size: int = SIZE) -> np.ndarray:
    """RGB counterpart of :func:`normalize_glyph`; accepts (H, W, 3) or (3, H, W), returns (3, 64, 64)."""
    a = _as_float(raw)
    if a.ndim == 3 and a.shape[-1] in (3, 4) and a.shape[0] not in (3, 4):
        a = np.moveaxis(a[..., :3], -1, 0)
    if a.ndim != 3 or a.shape[0] != 3:
        raise ShapeError(f"expected an RGB image, got shape {a.shape}")
    fg = a.max(axis=0) > threshold
    if not fg.any():
        raise EmptyGlyph("glyph has no foreground pixel")
    return _fit(a, fg, size)


def color_to_glyph(img: np.ndarray) -> np.ndarray:
    """Grayscale shape of an ornamented glyph (3, H, W) -> (H, W).

    Brightest channel, rescaled so the typical foreground pixel reaches 1.
    """
    v = np.asarray(img, dtype=np.float64).max(axis=0)
    fg = v > 0.02
    if not fg.any():
        return np.zeros_like(v)
    return np.clip(v / np.median(v[fg]), 0.0, 1.0)


# -- stacks ---------------------------------------------------------------------------

def _check_observed(observed: Iterable[int]) -> frozenset[int]:
    obs = frozenset(int(i) for i in observed)
    if not obs:
        raise EmptyObservationSet("observed letter set is empty")
    bad = sorted(i for i in obs if not 0 <= i < N_LETTERS)
    if bad:
        raise ValueError(f"observed indices out of range 0..25: {bad}")
    return obs


@dataclass(frozen=True)
class GlyphStack:
    """26 grayscale 64x64 glyphs (A..Z) and the set of observed letter indices."""

    channels: np.ndarray
    observed: frozenset[int] = frozenset(range(N_LETTERS))

    def __post_init__(self):
        if self.channels.ndim != 3 or self.channels.shape[0] != N_LETTERS:
            raise ShapeError(f"glyph stack must be (26, H, W), got {self.channels.shape}")


@dataclass(frozen=True)
class ColorGlyphSet:
    """26 RGB glyphs (26, 3, 64, 64) in [0, 1]."""

    images: np.ndarray
    observed: frozenset[int] = frozenset(range(N_LETTERS))

    def __post_init__(self):
        if self.images.ndim != 4 or self.images.shape[:2] != (N_LETTERS, 3):
            raise ShapeError(f"color glyph set must be (26, 3, H, W), got {self.images.shape}")

    def grayscale(self) -> GlyphStack:
        return GlyphStack(np.stack([color_to_glyph(im) for im in self.images]), self.observed)


def letter_mask(observed: Iterable[int], channels_per_letter: int = 1) -> np.ndarray:
    m = np.zeros(N_LETTERS, dtype=bool)
    m[list(observed)] = True
    return np.repeat(m, channels_per_letter)


def mask_stack(stack: GlyphStack, observed: Iterable[int]) -> GlyphStack:
    obs = _check_observed(observed)
    out = np.where(letter_mask(obs)[:, None, None], stack.channels, 0.0).astype(stack.channels.dtype)
    return GlyphStack(out, obs)


def mask_color_set(glyphs: ColorGlyphSet, observed: Iterable[int]) -> ColorGlyphSet:
    obs = _check_observed(observed)
    out = np.where(letter_mask(obs)[:, None, None, None], glyphs.images, 0.0).astype(glyphs.images.dtype)
    return ColorGlyphSet(out, obs)


# -- synthetic ornamentation ---------------------------------------------------------

MIN_COLOR = 0.05


@dataclass(frozen=True)
class GradientSpec:
    color_a: tuple[float, float, float]
    color_b: tuple[float, float, float]
    direction: tuple[float, float]  # (dx along columns, dy along rows)
    outline_color: tuple[float, float, float] | None = None
    outline_width: int = 0

    def __post_init__(self):
        if abs(np.hypot(*self.direction) - 1.0) > 1e-9:
            raise ValueError(f"gradient direction must have unit norm, got {self.direction}")
        for c in (self.color_a, self.color_b) + ((self.outline_color,) if self.outline_color else ()):
            if len(c) != 3 or not all(0.0 <= v <= 1.0 for v in c):
                raise ValueError(f"color outside [0,1]^3: {c}")

    @classmethod
    def random(cls, rng: np.random.Generator, outline_prob: float = 0.5) -> "GradientSpec":
        # a floor keeps every lit pixel visibly nonzero, so the color mask equals the glyph mask
        a, b = rng.uniform(MIN_COLOR, 1.0, 3), rng.uniform(MIN_COLOR, 1.0, 3)
        theta = rng.uniform(0.0, 2 * np.pi)
        outline, width = None, 0
        if rng.random() < outline_prob:
            outline, width = tuple(rng.uniform(MIN_COLOR, 1.0, 3).tolist()), int(rng.integers(1, 3))
        return cls(tuple(a.tolist()), tuple(b.tolist()), (float(np.cos(theta)), float(np.sin(theta))), outline, width)


def gradient_position(mask: np.ndarray, direction: Sequence[float]) -> np.ndarray:
    """Per-pixel interpolation parameter t in [0, 1] across the mask's bounding box."""
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    dx, dy = direction
    corners = [(c, r) for c in (cols[0], cols[-1]) for r in (rows[0], rows[-1])]
    proj = [c * dx + r * dy for c, r in corners]
    lo, hi = min(proj), max(proj)
    yy, xx = np.mgrid[: mask.shape[0], : mask.shape[1]]
    p = xx * dx + yy * dy
    if hi - lo < 1e-12:
        return np.zeros(mask.shape)
    return np.clip((p - lo) / (hi - lo), 0.0, 1.0)


def apply_gradient(glyph: np.ndarray, spec: GradientSpec) -> np.ndarray:
    """Color a glyph: (64, 64) in [0,1] -> (3, 64, 64).

    Foreground pixels get the linear blend of ``color_a`` -> ``color_b`` along the
    gradient direction; an inner ring ``outline_width`` px wide takes the outline
    color. Coverage (anti-aliasing) scales the color; the background stays black.
    """
    glyph = np.asarray(glyph, dtype=np.float64)
    mask = glyph > 0
    if not mask.any():
        raise EmptyGlyph("cannot ornament an empty glyph")
    t = gradient_position(mask, spec.direction)
    a, b = np.asarray(spec.color_a), np.asarray(spec.color_b)
    color = (1 - t)[None] * a[:, None, None] + t[None] * b[:, None, None]
    if spec.outline_color is not None and spec.outline_width > 0:
        inner = ndimage.binary_erosion(mask, iterations=spec.outline_width, border_value=0)
        ring = mask & ~inner
        color = np.where(ring[None], np.asarray(spec.outline_color)[:, None, None], color)
    return color * glyph[None]


def ornament_font(glyphs: np.ndarray, spec: GradientSpec) -> np.ndarray:
    """(26, 64, 64) grayscale font -> (26, 3, 64, 64) color font sharing one gradient spec."""
    return np.stack([apply_gradient(g, spec) if (g > 0).any() else np.zeros((3,) + g.shape) for g in glyphs])


# -- on-disk records -----------------------------------------------------------------

def save_record(path: Path, glyphs: np.ndarray) -> None:
    """Pack 26 glyphs side by side into one 8-bit PNG tile (grayscale or RGB)."""
    glyphs = np.asarray(glyphs)
    if glyphs.ndim == 3:
        tile = np.concatenate(list(glyphs), axis=1)
    else:
        tile = np.concatenate([np.moveaxis(g, 0, -1) for g in glyphs], axis=1)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(to_uint8(tile)).save(path, format="PNG")


def load_record(path: Path) -> np.ndarray:
    """Inverse of :func:`save_record`: (26, 64, 64) or (26, 3, 64, 64) floats in [0, 1]."""
    with Image.open(path) as im:
        a = np.asarray(im, dtype=np.float64) / 255.0
    h = a.shape[0]
    if a.shape[1] != N_LETTERS * h:
        raise ShapeError(f"{path}: tile must be {N_LETTERS * h}x{h}, got {a.shape[1]}x{h}")
    parts = np.split(a, N_LETTERS, axis=1)
    if a.ndim == 2:
        return np.stack(parts)
    return np.stack([np.moveaxis(p[..., :3], -1, 0) for p in parts])


def to_uint8(a: np.ndarray) -> np.ndarray:
    return np.round(np.clip(a, 0.0, 1.0) * 255).astype(np.uint8)


# -- manifests ------------------------------------------------------------------------

@dataclass(frozen=True)
class ManifestEntry:
    font_id: str
    path: str


@dataclass
class DatasetManifest:
    """Font records listed relative to ``root`` (the manifest file's directory)."""

    entries: list[ManifestEntry] = field(default_factory=list)
    split: str | None = None
    root: Path = Path(".")

    def __post_init__(self):
        ids = [e.font_id for e in self.entries]
        dup = sorted({i for i in ids if ids.count(i) > 1})
        if dup:
            raise ManifestError(f"duplicate font ids: {', '.join(dup)}")

    def __len__(self):
        return len(self.entries)

    def resolve(self, entry: ManifestEntry) -> Path:
        return Path(self.root) / entry.path

    def ids(self) -> list[str]:
        return [e.font_id for e in self.entries]

    def load_all(self) -> np.ndarray:
        """Stack every record into one array; raises with the offending font id on failure."""
        out = []
        for e in self.entries:
            try:
                out.append(load_record(self.resolve(e)))
            except (OSError, ValueError) as exc:
                raise ManifestError(f"font {e.font_id}: {exc}") from exc
        if not out:
            return np.zeros((0, N_LETTERS, SIZE, SIZE))
        return np.stack(out)


def save_manifest(manifest: DatasetManifest, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = []
    if manifest.split:
        lines.append(f"#split={manifest.split}")
    for e in manifest.entries:
        rel = os.path.relpath(Path(manifest.root, e.path).resolve(), path.parent.resolve())
        lines.append(f"{e.font_id}\t{Path(rel).as_posix()}")
    path.write_text("".join(l + "\n" for l in lines), encoding="utf-8")


def load_manifest(path, check_files: bool = True) -> DatasetManifest:
    path = Path(path)
    entries, split, errors = [], None, []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        if line.startswith("#"):
            if line.startswith("#split="):
                split = line[len("#split="):].strip()
            continue
        parts = line.split("\t")
        if len(parts) != 2 or not parts[0] or not parts[1]:
            errors.append(f"{path}:{lineno}: expected 'font_id<TAB>path', got {line!r}")
            continue
        entries.append(ManifestEntry(parts[0], parts[1]))
    if errors:
        raise ManifestError("; ".join(errors))
    manifest = DatasetManifest(entries, split, path.parent)
    if check_files:
        missing = [str(manifest.resolve(e)) for e in entries if not manifest.resolve(e).is_file()]
        if missing:
            raise ManifestError(f"{path}: missing files: {', '.join(missing)}")
    return manifest


def _check_seed(seed: int) -> int:
    if not 0 <= int(seed) < 2**64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return int(seed)


def entry_rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([_check_seed(seed), *key]))


def generate_color_dataset(
    manifest: DatasetManifest,
    out_dir,
    variants_per_font: int = 2,
    seed: int = 0,
    outline_prob: float = 0.5,
) -> DatasetManifest:
    """Ornament every font with ``variants_per_font`` random gradients.

    Each (font, variant) draws from its own seed stream, so output does not depend
    on processing order.
    """
    out_dir = Path(out_dir)
    entries = []
    for i, e in enumerate(manifest.entries):
        try:
            glyphs = load_record(manifest.resolve(e))
        except (OSError, ValueError) as exc:
            raise ManifestError(f"font {e.font_id}: {exc}") from exc
        for v in range(variants_per_font):
            spec = GradientSpec.random(entry_rng(seed, i, v), outline_prob)
            rel = f"color/{e.font_id}_c{v}.png"
            try:
                save_record(out_dir / rel, ornament_font(glyphs, spec))
            except OSError as exc:
                raise ManifestError(f"font {e.font_id}: {exc}") from exc
            entries.append(ManifestEntry(f"{e.font_id}_c{v}", rel))
    log.info("wrote %d color fonts to %s", len(entries), out_dir)
    return DatasetManifest(entries, manifest.split, out_dir)


def prepare_fonts(raw_dir, out_dir, invert: bool = False, threshold: float = 0.0) -> DatasetManifest:
    """Normalize ``raw_dir/<font_id>/<A..Z>.png`` folders into packed records under ``out_dir``.

    Fonts lacking any of the 26 letters are skipped with a warning.
    """
    raw_dir, out_dir = Path(raw_dir), Path(out_dir)
    entries = []
    for font_dir in sorted(p for p in raw_dir.iterdir() if p.is_dir()):
        files = {p.stem.upper(): p for p in font_dir.glob("*.png") if len(p.stem) == 1}
        missing = [c for c in LETTERS if c not in files]
        if missing:
            log.warning("skipping %s: missing letters %s", font_dir.name, "".join(missing))
            continue
        glyphs = []
        for c in LETTERS:
            with Image.open(files[c]) as im:
                a = np.asarray(im.convert("L"), dtype=np.float64) / 255.0
            glyphs.append(normalize_glyph(1.0 - a if invert else a, threshold))
        rel = f"fonts/{font_dir.name}.png"
        save_record(out_dir / rel, np.stack(glyphs))
        entries.append(ManifestEntry(font_dir.name, rel))
    return DatasetManifest(entries, None, out_dir)
