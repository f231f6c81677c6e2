"""Command-line entry point: ``mcgan <command> ...``.

Errors are reported as one tab-separated line on stderr,
``error<TAB><ErrorType><TAB><message>``, with a nonzero exit code.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np
from PIL import Image

from .config import RunConfig, load_run_config
from .errors import ConfigError, McganError
from .font_data import (LETTERS, N_LETTERS, ColorGlyphSet, generate_color_dataset, load_manifest, load_record,
                        normalize_color_glyph, prepare_fonts, save_manifest)

log = logging.getLogger("mcgan")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--seed", type=int, help="random seed (overrides config)")
    p.add_argument("--out", help="output directory (overrides config out_dir)")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override one config key")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mcgan", description="Few-shot ornamented font synthesis")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prepare-data", help="normalize raw glyph folders into packed records + manifest")
    p.add_argument("raw_dir")
    p.add_argument("--invert", action="store_true", help="raw glyphs are dark on light")
    p.add_argument("--split", default=None)
    _common(p)

    p = sub.add_parser("make-color", help="synthesize the color-gradient dataset")
    p.add_argument("manifest")
    p.add_argument("--variants", type=int, default=2)
    _common(p)

    p = sub.add_parser("pretrain", help="pretrain GlyphNet on a grayscale manifest")
    p.add_argument("manifest")
    p.add_argument("--fresh", action="store_true", help="ignore existing checkpoints")
    _common(p)

    p = sub.add_parser("train-baseline", help="train the 78-channel translation baseline")
    p.add_argument("manifest")
    p.add_argument("--fresh", action="store_true", help="ignore existing checkpoints")
    _common(p)

    p = sub.add_parser("synthesize", help="fine-tune on observed letters and write all 26 glyphs")
    p.add_argument("observed_dir", help="directory of letter-labeled images, e.g. T.png O.png W.png")
    p.add_argument("--g1", required=True, help="pretrained GlyphNet checkpoint")
    p.add_argument("--baseline", help="baseline checkpoint; adds a side-by-side comparison sheet")
    _common(p)

    p = sub.add_parser("analyze", help="correlation / observed-count / nearest-neighbor studies")
    p.add_argument("kind", choices=["corr", "count", "nn"])
    p.add_argument("manifest")
    p.add_argument("--g1", help="pretrained GlyphNet checkpoint (corr, count)")
    p.add_argument("--query", help="packed font record to look up (nn)")
    p.add_argument("--n-fonts", type=int, default=1500)
    p.add_argument("--n-max", type=int, default=8)
    _common(p)
    return parser


def _config(args) -> RunConfig:
    overrides = list(args.set)
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    if args.out is not None:
        overrides.append(f"out_dir={args.out}")
    return load_run_config(args.config, overrides)


def _latest_checkpoint(directory: Path, tag: str) -> Path | None:
    found = sorted(directory.glob(f"{tag}_*.pt")) if directory.is_dir() else []
    return found[-1] if found else None


def read_observed_dir(path) -> ColorGlyphSet:
    """Load ``A.png``..``Z.png`` style files; every image file must be named by its letter."""
    path = Path(path)
    if not path.is_dir():
        raise McganError(f"observed directory not found: {path}")
    files = sorted(p for p in path.iterdir() if p.suffix.lower() in (".png", ".jpg", ".jpeg", ".bmp"))
    unlabeled = [p.name for p in files if len(p.stem) != 1 or p.stem.upper() not in LETTERS]
    if unlabeled:
        raise McganError(f"files without a letter label (expected A.png..Z.png): {', '.join(unlabeled)}")
    if not files:
        raise McganError(f"no observed glyph images in {path}")
    images = np.zeros((N_LETTERS, 3, 64, 64))
    observed = set()
    for p in files:
        i = LETTERS.index(p.stem.upper())
        if i in observed:
            raise McganError(f"letter {LETTERS[i]} given twice in {path}")
        with Image.open(p) as im:
            images[i] = normalize_color_glyph(np.asarray(im.convert("RGB")))
        observed.add(i)
    if len(observed) == N_LETTERS:
        raise McganError("all 26 letters observed: nothing to synthesize")
    return ColorGlyphSet(images, frozenset(observed))


def cmd_prepare_data(args, cfg: RunConfig) -> None:
    out = cfg.resolve_path(cfg.out_dir)
    manifest = prepare_fonts(cfg.resolve_path(args.raw_dir), out, invert=args.invert)
    manifest.split = args.split
    save_manifest(manifest, out / "manifest.tsv")
    log.info("prepared %d fonts -> %s", len(manifest), out / "manifest.tsv")


def cmd_make_color(args, cfg: RunConfig) -> None:
    out = cfg.resolve_path(cfg.out_dir)
    manifest = generate_color_dataset(load_manifest(cfg.resolve_path(args.manifest)), out, args.variants, cfg.seed)
    save_manifest(manifest, out / "manifest.tsv")


def _train(args, cfg: RunConfig, baseline: bool) -> None:
    from .baseline import train_baseline
    from .glyph_net import pretrain_glyphnet

    tag = "baseline" if baseline else "glyphnet"
    ckpt_dir = cfg.resolve_path(cfg.checkpoint_dir)
    resume = None if args.fresh else _latest_checkpoint(ckpt_dir, tag)
    fonts = load_manifest(cfg.resolve_path(args.manifest))
    out = cfg.resolve_path(cfg.out_dir)
    log_path = out / f"{tag}_loss.tsv"
    if baseline:
        res = train_baseline(fonts, cfg.baseline, cfg.net, cfg.seed, ckpt_dir, resume, log_path)
    else:
        res = pretrain_glyphnet(fonts, cfg.pretrain, cfg.net, cfg.seed, ckpt_dir, resume, log_path)
    log.info("%s finished at step %d; last checkpoint %s", tag, res.step, res.checkpoints[-1:] or resume)


def cmd_synthesize(args, cfg: RunConfig) -> None:
    from .baseline import predict_baseline, save_comparison_sheet
    from .glyph_net import load_generator
    from .mcgan_stack import finetune, save_glyph_set

    observed = read_observed_dir(args.observed_dir)
    g1 = load_generator(cfg.resolve_path(args.g1))
    out = cfg.resolve_path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _, predicted = finetune(observed, g1, cfg.finetune, cfg.net, cfg.seed, out / "loss_log.tsv")
    save_glyph_set(predicted, out)
    if args.baseline:
        base = predict_baseline(load_generator(cfg.resolve_path(args.baseline)), observed)
        save_comparison_sheet(out / "comparison.png", base, predicted)
    log.info("wrote 26 glyphs to %s", out)


def cmd_analyze(args, cfg: RunConfig) -> None:
    from . import analysis
    from .glyph_net import load_generator

    manifest = load_manifest(cfg.resolve_path(args.manifest))
    out = cfg.resolve_path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if args.kind == "nn":
        if not args.query:
            raise ConfigError("analyze nn needs --query")
        font_id, dist = analysis.nearest_neighbor_check(load_record(cfg.resolve_path(args.query)), manifest)
        (out / "nearest.tsv").write_text(f"{font_id}\t{dist!r}\n")
        print(f"{font_id}\t{dist!r}")
        return
    if not args.g1:
        raise ConfigError(f"analyze {args.kind} needs --g1")
    g1 = load_generator(cfg.resolve_path(args.g1))
    if args.kind == "corr":
        table = analysis.correlation_study(g1, manifest, args.n_fonts, cfg.seed)
        analysis.write_correlation_table(table, out / "correlation")
    else:
        study = analysis.observed_count_study(g1, manifest, range(1, args.n_max + 1), args.n_fonts, cfg.seed)
        analysis.write_count_study(study, out / "observed_count")
        for n, m in study.medians.items():
            print(f"{n}\t{m:.4f}")


COMMANDS = {
    "prepare-data": cmd_prepare_data,
    "make-color": cmd_make_color,
    "pretrain": lambda a, c: _train(a, c, baseline=False),
    "train-baseline": lambda a, c: _train(a, c, baseline=True),
    "synthesize": cmd_synthesize,
    "analyze": cmd_analyze,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _config(args)
        logging.basicConfig(level=cfg.verbosity.upper(), format="%(levelname)s %(name)s: %(message)s")
        COMMANDS[args.command](args, cfg)
    except (McganError, OSError, ValueError) as exc:
        msg = " ".join(str(exc).split())
        print(f"error\t{type(exc).__name__}\t{msg}", file=sys.stderr)
        return 2 if isinstance(exc, ConfigError) else 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
