"""Procedural stroke fonts for toy corpora.

Each letter is a set of polylines on a unit box (x right, y down). A font is a
random draw of style parameters shared by all 26 letters: stroke weight, slant,
width, stroke contrast, serifs and cap shape. That shared style is what a glyph
network can learn to transfer between letters.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from PIL import Image, ImageDraw

from .font_data import LETTERS, normalize_glyph


def _arc(cx, cy, rx, ry, a0, a1, n=16):
    t = np.radians(np.linspace(a0, a1, n))
    return list(zip(cx + rx * np.cos(t), cy - ry * np.sin(t)))


_P_BOWL = [(0, 1), (0, 0), (0.55, 0)] + _arc(0.55, 0.27, 0.45, 0.27, 90, -90) + [(0, 0.54)]

SKELETONS: dict[str, list[list[tuple[float, float]]]] = {
    "A": [[(0, 1), (0.5, 0), (1, 1)], [(0.22, 0.62), (0.78, 0.62)]],
    "B": [[(0, 0), (0, 1)], [(0, 0), (0.55, 0)] + _arc(0.55, 0.25, 0.4, 0.25, 90, -90) + [(0, 0.5)],
          [(0, 0.5), (0.58, 0.5)] + _arc(0.58, 0.75, 0.42, 0.25, 90, -90) + [(0, 1)]],
    "C": [_arc(0.5, 0.5, 0.5, 0.5, 45, 315, 28)],
    "D": [[(0, 0), (0, 1)], [(0, 0), (0.45, 0)] + _arc(0.45, 0.5, 0.55, 0.5, 90, -90, 20) + [(0, 1)]],
    "E": [[(1, 0), (0, 0), (0, 1), (1, 1)], [(0, 0.5), (0.8, 0.5)]],
    "F": [[(1, 0), (0, 0), (0, 1)], [(0, 0.5), (0.8, 0.5)]],
    "G": [_arc(0.5, 0.5, 0.5, 0.5, 45, 360, 28) + [(1, 0.55), (0.55, 0.55)]],
    "H": [[(0, 0), (0, 1)], [(1, 0), (1, 1)], [(0, 0.5), (1, 0.5)]],
    "I": [[(0.5, 0), (0.5, 1)], [(0.2, 0), (0.8, 0)], [(0.2, 1), (0.8, 1)]],
    "J": [[(1, 0), (1, 0.68)] + _arc(0.5, 0.68, 0.5, 0.32, 0, -180)],
    "K": [[(0, 0), (0, 1)], [(1, 0), (0, 0.6)], [(0.3, 0.38), (1, 1)]],
    "L": [[(0, 0), (0, 1), (1, 1)]],
    "M": [[(0, 1), (0, 0), (0.5, 0.62), (1, 0), (1, 1)]],
    "N": [[(0, 1), (0, 0), (1, 1), (1, 0)]],
    "O": [_arc(0.5, 0.5, 0.5, 0.5, 0, 360, 32)],
    "P": [_P_BOWL],
    "Q": [_arc(0.5, 0.5, 0.5, 0.5, 0, 360, 32), [(0.6, 0.72), (1, 1)]],
    "R": [_P_BOWL, [(0.4, 0.54), (1, 1)]],
    "S": [_arc(0.5, 0.25, 0.48, 0.25, 20, 270) + _arc(0.5, 0.75, 0.5, 0.25, 90, -160)],
    "T": [[(0, 0), (1, 0)], [(0.5, 0), (0.5, 1)]],
    "U": [[(0, 0), (0, 0.6)] + _arc(0.5, 0.6, 0.5, 0.4, 180, 360) + [(1, 0)]],
    "V": [[(0, 0), (0.5, 1), (1, 0)]],
    "W": [[(0, 0), (0.25, 1), (0.5, 0.35), (0.75, 1), (1, 0)]],
    "X": [[(0, 0), (1, 1)], [(1, 0), (0, 1)]],
    "Y": [[(0, 0), (0.5, 0.5), (1, 0)], [(0.5, 0.5), (0.5, 1)]],
    "Z": [[(0, 0), (1, 0), (0, 1), (1, 1)]],
}

# narrow letters keep their own proportions regardless of font width
_LETTER_WIDTH = {"I": 0.5, "J": 0.6, "L": 0.75, "E": 0.8, "F": 0.8, "M": 1.15, "W": 1.3}


@dataclass(frozen=True)
class StrokeStyle:
    weight: float  # stroke width relative to cap height
    slant: float  # horizontal shear per unit height
    width: float  # letter box width relative to cap height
    contrast: float  # 0 = monoline, 1 = horizontals vanish
    serif: float  # serif half-length relative to cap height, 0 = sans
    round_caps: bool

    @classmethod
    def random(cls, rng: np.random.Generator) -> "StrokeStyle":
        return cls(
            weight=float(rng.uniform(0.05, 0.17)),
            slant=float(rng.uniform(-0.3, 0.3)),
            width=float(rng.uniform(0.55, 1.0)),
            contrast=float(rng.uniform(0.0, 0.7)),
            serif=float(rng.choice([0.0, rng.uniform(0.06, 0.14)])),
            round_caps=bool(rng.random() < 0.5),
        )


def render_letter(letter: str, style: StrokeStyle, canvas: int = 256) -> np.ndarray:
    """Render one capital letter white-on-black at ``canvas`` px; returns floats in [0, 1]."""
    img = Image.new("L", (canvas, canvas), 0)
    draw = ImageDraw.Draw(img)
    height = canvas * 0.6
    width = height * style.width * _LETTER_WIDTH.get(letter, 1.0)
    ox, oy = canvas * 0.5 - width / 2, canvas * 0.2

    def place(u, v):
        return ox + u * width + style.slant * (1 - v) * height, oy + v * height

    base = style.weight * height
    for stroke in SKELETONS[letter]:
        pts = [place(u, v) for u, v in stroke]
        for (x0, y0), (x1, y1) in zip(pts, pts[1:]):
            seg = np.hypot(x1 - x0, y1 - y0)
            horiz = abs(x1 - x0) / seg if seg else 0.0
            w = max(1.0, base * (1 - style.contrast * horiz**2))
            draw.line([(x0, y0), (x1, y1)], fill=255, width=int(round(w)))
            if style.round_caps:
                r = w / 2
                for x, y in ((x0, y0), (x1, y1)):
                    draw.ellipse([x - r, y - r, x + r, y + r], fill=255)
        if style.serif > 0:
            s = style.serif * height
            for x, y in (pts[0], pts[-1]):
                draw.line([(x - s, y), (x + s, y)], fill=255, width=max(1, int(round(base * 0.5))))
    return np.asarray(img, dtype=np.float64) / 255.0


def render_font(style: StrokeStyle, canvas: int = 256) -> list[np.ndarray]:
    return [render_letter(c, style, canvas) for c in LETTERS]


def synthetic_font(rng: np.random.Generator) -> np.ndarray:
    """A random style rendered and normalized to (26, 64, 64)."""
    style = StrokeStyle.random(rng)
    return np.stack([normalize_glyph(g) for g in render_font(style)])


def synthetic_corpus(n_fonts: int, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return np.stack([synthetic_font(rng) for _ in range(n_fonts)])
