"""Reference run for the overfit smoke test: pretrain a reduced GlyphNet on 5 synthetic
fonts, then fine-tune on one gradient-ornamented font given 5 letters.

    python scripts/overfit_smoke.py --steps 1200 --batch 4 --epochs 400 --out runs/smoke
"""
import argparse
import time
from pathlib import Path

import numpy as np
import torch

from mcgan.analysis import predict_stacks
from mcgan.config import NetConfig, PretrainConfig, TrainConfig
from mcgan.font_data import ColorGlyphSet, GradientSpec, ornament_font
from mcgan.glyph_net import pretrain_glyphnet
from mcgan.mcgan_stack import finetune, save_glyph_set
from mcgan.synthetic import synthetic_corpus

TOWER = frozenset({19, 14, 22, 4, 17})
SMOKE_GRADIENT = GradientSpec((0.95, 0.35, 0.1), (0.2, 0.4, 0.95), (0.0, 1.0))


def held_out_error(pred: ColorGlyphSet, truth: np.ndarray, observed) -> float:
    rest = [i for i in range(26) if i not in observed]
    return float(np.abs(pred.images[rest] - truth[rest]).mean())


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--steps", type=int, default=1200)
    ap.add_argument("--batch", type=int, default=4)
    ap.add_argument("--epochs", type=int, default=400)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="runs/smoke")
    args = ap.parse_args()

    torch.set_num_threads(1)
    out = Path(args.out)
    fonts = synthetic_corpus(5, seed=args.seed)
    t = time.time()
    res = pretrain_glyphnet(fonts, PretrainConfig(steps=args.steps, batch_size=args.batch), NetConfig.reduced(),
                            seed=args.seed, log_path=out / "pretrain_loss.tsv")
    l1 = res.log.series("l1")
    print(f"pretrain {time.time() - t:.0f}s  l1 first10 {np.mean(l1[:10]):.4f} last50 {np.mean(l1[-50:]):.4f}")

    rest = [i for i in range(26) if i not in TOWER]
    g1_pred = predict_stacks(res.generator, fonts[:1], [TOWER])[0]
    print(f"G1 held-out MAE {np.abs(g1_pred[rest] - fonts[0][rest]).mean():.4f} "
          f"(all-black {fonts[0][rest].mean():.4f})")

    truth = ornament_font(fonts[0], SMOKE_GRADIENT)
    observed = ColorGlyphSet(truth, TOWER)
    zero = held_out_error(ColorGlyphSet(np.zeros_like(truth), TOWER), truth, TOWER)
    t = time.time()
    state, pred = finetune(observed, res.generator, TrainConfig(epochs=args.epochs), NetConfig.reduced(),
                           seed=args.seed, log_path=out / "finetune_loss.tsv")
    obs = sorted(TOWER)
    print(f"finetune {time.time() - t:.0f}s  held-out MAE {held_out_error(pred, truth, TOWER):.4f} "
          f"(all-black {zero:.4f})  observed MAE {np.abs(pred.images[obs] - truth[obs]).mean():.4f}")
    save_glyph_set(pred, out / "glyphs")


if __name__ == "__main__":
    main()
