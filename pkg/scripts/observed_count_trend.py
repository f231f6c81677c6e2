"""Pretrain a reduced GlyphNet on a synthetic corpus and run the observed-count study.

    python scripts/observed_count_trend.py --fonts 100 --steps 1200 --batch 4 --out runs/count
"""
import argparse
import time
from pathlib import Path

import torch

from mcgan.analysis import observed_count_study, write_count_study
from mcgan.config import NetConfig, PretrainConfig
from mcgan.glyph_net import pretrain_glyphnet
from mcgan.synthetic import synthetic_corpus


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--fonts", type=int, default=100)
    ap.add_argument("--heldout", type=int, default=0)
    ap.add_argument("--steps", type=int, default=1200)
    ap.add_argument("--batch", type=int, default=4)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", default="runs/count")
    args = ap.parse_args()

    torch.set_num_threads(1)
    out = Path(args.out)
    fonts = synthetic_corpus(args.fonts + args.heldout, seed=args.seed)
    train, test = fonts[:args.fonts], fonts[args.fonts:]
    cfg = PretrainConfig(steps=args.steps, batch_size=args.batch, checkpoint_every=args.steps)
    t = time.time()
    res = pretrain_glyphnet(train, cfg, NetConfig.reduced(), seed=args.seed, ckpt_dir=out,
                            log_path=out / "pretrain_loss.tsv")
    l1 = res.log.series("l1")
    print(f"pretrain {time.time() - t:.0f}s  l1 {l1[0]:.3f} -> {sum(l1[-50:]) / 50:.3f}")
    for name, data in (("train", train), ("heldout", test)):
        if len(data) == 0:
            continue
        study = observed_count_study(res.generator, data, range(1, 9), n_fonts=None, seed=args.seed)
        write_count_study(study, out / name)
        print(name, {n: round(m, 4) for n, m in study.medians.items()})


if __name__ == "__main__":
    main()
