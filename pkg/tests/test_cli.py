import numpy as np
import pytest
from PIL import Image

from mcgan.cli import main
from mcgan.font_data import GradientSpec, apply_gradient, to_uint8
from mcgan.synthetic import synthetic_corpus

TINY_SET = ["net.g_widths=4,8,8", "net.g_blocks=1,0", "net.d_widths=4,8"]


def _sets(*extra):
    out = []
    for s in TINY_SET + list(extra):
        out += ["--set", s]
    return out


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("ws")
    fonts = synthetic_corpus(3, seed=5)
    for i, font in enumerate(fonts):
        d = root / "raw" / f"font{i}"
        d.mkdir(parents=True)
        for ch, g in zip("ABCDEFGHIJKLMNOPQRSTUVWXYZ", font):
            # raw glyphs as dark-on-light images at another size
            img = 255 - to_uint8(np.pad(g, 8))
            Image.fromarray(img).save(d / f"{ch}.png")
    assert main(["prepare-data", str(root / "raw"), "--invert", "--out", str(root / "gray")]) == 0
    assert main(["pretrain", str(root / "gray" / "manifest.tsv"), "--out", str(root / "pre"),
                 *_sets("pretrain.steps=2", "pretrain.batch_size=2", f"checkpoint_dir={root / 'ckpt'}")]) == 0
    obs = root / "tower"
    obs.mkdir()
    spec = GradientSpec((0.9, 0.1, 0.1), (0.9, 0.8, 0.1), (0.0, 1.0))
    for ch in "TOWER":
        rgb = np.moveaxis(apply_gradient(fonts[0][ord(ch) - 65], spec), 0, -1)
        Image.fromarray(to_uint8(rgb)).save(obs / f"{ch}.png")
    return root


def test_prepare_data_outputs(workspace):
    lines = (workspace / "gray" / "manifest.tsv").read_text().splitlines()
    assert len([l for l in lines if not l.startswith("#")]) == 3


def test_pretrain_writes_checkpoint(workspace):
    assert (workspace / "ckpt" / "glyphnet_0000002.pt").exists()
    assert (workspace / "pre" / "glyphnet_loss.tsv").read_text().count("\tl1\t") == 2


def _synth(workspace, out, seed="7"):
    return main(["synthesize", str(workspace / "tower"), "--g1", str(workspace / "ckpt" / "glyphnet_0000002.pt"),
                 "--out", str(out), "--seed", seed, *_sets("finetune.epochs=2")])


def test_synthesize_tower(workspace, tmp_path):
    assert _synth(workspace, tmp_path / "a") == 0
    pngs = sorted(p.name for p in (tmp_path / "a").glob("*.png"))
    assert len(pngs) == 27 and "contact_sheet.png" in pngs
    with Image.open(tmp_path / "a" / "Q.png") as im:
        assert im.size == (64, 64) and im.mode == "RGB"
    log = (tmp_path / "a" / "loss_log.tsv").read_text().splitlines()
    assert all(len(l.split("\t")) == 3 for l in log)


def test_synthesize_is_reproducible(workspace, tmp_path):
    assert _synth(workspace, tmp_path / "a") == 0
    assert _synth(workspace, tmp_path / "b") == 0
    for p in (tmp_path / "a").iterdir():
        assert p.read_bytes() == (tmp_path / "b" / p.name).read_bytes(), p.name


def test_synthesize_empty_dir(workspace, tmp_path, capsys):
    (tmp_path / "empty").mkdir()
    code = main(["synthesize", str(tmp_path / "empty"), "--g1", str(workspace / "ckpt" / "glyphnet_0000002.pt"),
                 "--out", str(tmp_path / "o")])
    assert code == 1
    err = capsys.readouterr().err.strip()
    assert err.startswith("error\tMcganError\t") and "no observed glyph" in err


def test_synthesize_unlabeled_files(workspace, tmp_path, capsys):
    d = tmp_path / "obs"
    d.mkdir()
    Image.new("RGB", (10, 10), (255, 0, 0)).save(d / "glyph1.png")
    code = main(["synthesize", str(d), "--g1", str(workspace / "ckpt" / "glyphnet_0000002.pt"),
                 "--out", str(tmp_path / "o")])
    assert code == 1 and "glyph1.png" in capsys.readouterr().err


def test_bad_config_exit_code(workspace, tmp_path, capsys):
    code = main(["synthesize", str(workspace / "tower"), "--g1", "x.pt", "--set", "finetune.nope=1"])
    assert code == 2
    assert "error\tConfigError" in capsys.readouterr().err


def test_make_color_and_nn(workspace, tmp_path, capsys):
    manifest = workspace / "gray" / "manifest.tsv"
    assert main(["make-color", str(manifest), "--variants", "1", "--out", str(tmp_path / "color")]) == 0
    assert len(list((tmp_path / "color" / "color").glob("*.png"))) == 3
    query = next((workspace / "gray").glob("**/*.png"))
    assert main(["analyze", "nn", str(manifest), "--query", str(query), "--out", str(tmp_path / "nn")]) == 0
    font_id, dist = capsys.readouterr().out.strip().split("\t")
    assert float(dist) == 0.0


def test_analyze_count(workspace, tmp_path, capsys):
    code = main(["analyze", "count", str(workspace / "gray" / "manifest.tsv"), "--g1",
                 str(workspace / "ckpt" / "glyphnet_0000002.pt"), "--n-max", "2", "--n-fonts", "2",
                 "--out", str(tmp_path / "cnt")])
    assert code == 0
    assert len(capsys.readouterr().out.strip().splitlines()) == 2


def test_analyze_needs_g1(workspace, capsys):
    assert main(["analyze", "corr", str(workspace / "gray" / "manifest.tsv")]) == 2
