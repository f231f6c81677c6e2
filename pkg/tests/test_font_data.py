import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from mcgan.errors import EmptyGlyph, EmptyObservationSet, ManifestError
from mcgan.synthetic import synthetic_corpus
from mcgan.font_data import (ColorGlyphSet, DatasetManifest, GlyphStack, GradientSpec, ManifestEntry,
                             apply_gradient, color_to_glyph, generate_color_dataset, gradient_position,
                             load_manifest, load_record, mask_stack, normalize_glyph, ornament_font,
                             save_manifest, save_record, MIN_COLOR)

TOWER = [19, 14, 22, 4]
_CORPUS = synthetic_corpus(6, seed=123)


def random_stack(rng):
    return GlyphStack(rng.random((26, 64, 64)))


# -- normalize_glyph ---------------------------------------------------------------

def test_normalize_wide_glyph_is_padded_vertically():
    raw = np.ones((32, 128))  # 32 rows, 128 columns
    out = normalize_glyph(raw)
    assert out.shape == (64, 64)
    np.testing.assert_allclose(out[24:40], 1.0)
    assert out[:24].max() == 0 and out[40:].max() == 0


def test_normalize_tight_64_is_identity(rng):
    raw = rng.random((64, 64)) * 0.9 + 0.05
    np.testing.assert_array_equal(normalize_glyph(raw), raw)


def test_normalize_crops_to_bounding_box():
    raw = np.zeros((100, 100))
    raw[10:30, 40:50] = 1.0  # 20 tall, 10 wide -> 64 x 32
    out = normalize_glyph(raw)
    cols = np.flatnonzero(out.max(axis=0) > 0.5)
    assert out[:, 16:48].min() > 0.99
    assert cols[0] == 16 and cols[-1] == 47


def test_normalize_upscales_small_glyph():
    raw = np.zeros((10, 10))
    raw[2:6, 3:5] = 1.0
    out = normalize_glyph(raw)
    rows = np.flatnonzero(out.max(axis=1) > 0)
    assert rows[0] == 0 and rows[-1] == 63


def test_normalize_empty_raises():
    with pytest.raises(EmptyGlyph):
        normalize_glyph(np.zeros((40, 40)))


def test_normalize_accepts_uint8():
    raw = np.zeros((20, 20), np.uint8)
    raw[5:15, 5:15] = 255
    assert normalize_glyph(raw).max() == pytest.approx(1.0)


@st.composite
def blobs(draw):
    h = draw(st.integers(4, 150))
    w = draw(st.integers(4, 150))
    img = np.zeros((h, w))
    for _ in range(draw(st.integers(1, 4))):
        r0, c0 = draw(st.integers(0, h - 1)), draw(st.integers(0, w - 1))
        r1, c1 = draw(st.integers(r0, h - 1)), draw(st.integers(c0, w - 1))
        img[r0:r1 + 1, c0:c1 + 1] = draw(st.floats(0.1, 1.0))
    return img


@settings(max_examples=60, deadline=None)
@given(blobs())
def test_normalize_always_valid(raw):
    out = normalize_glyph(raw)
    assert out.shape == (64, 64)
    assert out.min() >= 0 and out.max() <= 1
    assert (out > 0).any()
    rows = np.flatnonzero(out.any(axis=1))
    cols = np.flatnonzero(out.any(axis=0))
    # longer side fills the canvas
    assert max(rows[-1] - rows[0], cols[-1] - cols[0]) + 1 == 64


# -- mask_stack --------------------------------------------------------------------

def test_mask_single_letter(rng):
    s = random_stack(rng)
    m = mask_stack(s, {0})
    np.testing.assert_array_equal(m.channels[0], s.channels[0])
    assert not m.channels[1:].any()
    assert m.observed == {0}


def test_mask_all_is_identity(rng):
    s = random_stack(rng)
    np.testing.assert_array_equal(mask_stack(s, range(26)).channels, s.channels)


def test_mask_tower(rng):
    m = mask_stack(random_stack(rng), TOWER)
    nonzero = [i for i in range(26) if m.channels[i].any()]
    assert nonzero == sorted(TOWER)


def test_mask_empty_raises(rng):
    with pytest.raises(EmptyObservationSet):
        mask_stack(random_stack(rng), [])


@settings(max_examples=30, deadline=None)
@given(st.sets(st.integers(0, 25), min_size=1))
def test_mask_idempotent(observed):
    s = random_stack(np.random.default_rng(len(observed)))
    once = mask_stack(s, observed)
    twice = mask_stack(once, observed)
    np.testing.assert_array_equal(once.channels, twice.channels)


# -- apply_gradient ----------------------------------------------------------------

def spec(a=(1, 0, 0), b=(0, 0, 1), d=(1.0, 0.0), outline=None, width=0):
    return GradientSpec(a, b, d, outline, width)


def test_constant_gradient():
    glyph = np.zeros((64, 64))
    glyph[10:50, 20:30] = 1.0
    out = apply_gradient(glyph, spec((0.2, 0.5, 0.7), (0.2, 0.5, 0.7)))
    np.testing.assert_allclose(out[:, 10:50, 20:30], np.array([0.2, 0.5, 0.7])[:, None, None] * np.ones((40, 10)))
    assert not out[:, :10].any()


def test_horizontal_gradient_is_affine_in_column():
    out = apply_gradient(np.ones((64, 64)), spec(d=(1.0, 0.0)))
    cols = np.arange(64)
    for c in range(3):
        plane = out[c]
        assert np.ptp(plane, axis=0).max() < 1e-12  # constant down each column
        coef = np.polyfit(cols, plane[0], 1)
        assert np.abs(np.polyval(coef, cols) - plane[0]).max() < 1e-12


def _oracle_pixel(glyph, s, r, c):
    """Scalar re-derivation of one output pixel."""
    ys, xs = np.nonzero(glyph > 0)
    dx, dy = s.direction
    projs = [x * dx + y * dy for x in (xs.min(), xs.max()) for y in (ys.min(), ys.max())]
    lo, hi = min(projs), max(projs)
    t = 0.0 if hi == lo else min(1.0, max(0.0, (c * dx + r * dy - lo) / (hi - lo)))
    col = [(1 - t) * s.color_a[k] + t * s.color_b[k] for k in range(3)]
    if s.outline_color is not None and glyph[r, c] > 0:
        # inside-ring: a foreground pixel within outline_width steps (4-connected) of background
        w = s.outline_width
        near_bg = False
        for rr in range(r - w, r + w + 1):
            for cc in range(c - w, c + w + 1):
                if abs(rr - r) + abs(cc - c) > w:
                    continue
                if not (0 <= rr < 64 and 0 <= cc < 64) or glyph[rr, cc] <= 0:
                    near_bg = True
        if near_bg:
            col = list(s.outline_color)
    return [v * glyph[r, c] for v in col]


@pytest.mark.parametrize("seed", [0, 1, 2, 3])
def test_gradient_matches_scalar_oracle(corpus, seed):
    rng = np.random.default_rng(seed)
    s = GradientSpec.random(rng, outline_prob=0.5 if seed < 2 else 1.0)
    glyph = corpus[seed][rng.integers(26)]
    out = apply_gradient(glyph, s)
    for r, c in zip(rng.integers(0, 64, 300), rng.integers(0, 64, 300)):
        np.testing.assert_allclose(out[:, r, c], _oracle_pixel(glyph, s, r, c), atol=1e-12)


color = st.tuples(*[st.floats(0.05, 1.0)] * 3)


@settings(max_examples=40, deadline=None)
@given(color, color, st.floats(0, 2 * np.pi), st.one_of(st.none(), color), st.integers(1, 2),
       st.integers(0, 5), st.integers(0, 25))
def test_gradient_preserves_mask(a, b, theta, outline, width, font, letter):
    glyph = _CORPUS[font][letter]
    s = GradientSpec(a, b, (float(np.cos(theta)), float(np.sin(theta))), outline, width if outline else 0)
    out = apply_gradient(glyph, s)
    lum = out.sum(axis=0)
    np.testing.assert_array_equal(lum > 0, glyph > 0)


def test_gradient_direction_must_be_unit():
    with pytest.raises(ValueError):
        GradientSpec((0, 0, 0), (1, 1, 1), (1.0, 1.0))


def test_gradient_position_spans_bbox():
    m = np.zeros((64, 64), bool)
    m[10:20, 5:45] = True
    t = gradient_position(m, (1.0, 0.0))
    assert t[15, 5] == 0.0 and t[15, 44] == 1.0


def test_color_to_glyph_recovers_shape(corpus):
    g = corpus[0][0]
    col = apply_gradient(g, spec((0.9, 0.1, 0.1), (0.1, 0.1, 0.8)))
    rec = color_to_glyph(col)
    assert np.abs(rec - g).mean() < 0.05


# -- records, manifests, color dataset ---------------------------------------------

def _write_fonts(tmp_path, fonts):
    entries = []
    for i, f in enumerate(fonts):
        save_record(tmp_path / "fonts" / f"f{i}.png", f)
        entries.append(ManifestEntry(f"f{i}", f"fonts/f{i}.png"))
    m = DatasetManifest(entries, "train", tmp_path)
    save_manifest(m, tmp_path / "manifest.tsv")
    return m


def test_record_roundtrip(tmp_path, corpus):
    save_record(tmp_path / "a.png", corpus[0])
    back = load_record(tmp_path / "a.png")
    assert np.abs(back - corpus[0]).max() <= 0.5 / 255 + 1e-12
    col = ornament_font(corpus[0], spec())
    save_record(tmp_path / "c.png", col)
    assert load_record(tmp_path / "c.png").shape == (26, 3, 64, 64)


def test_manifest_roundtrip(tmp_path, corpus):
    m = _write_fonts(tmp_path, corpus[:3])
    back = load_manifest(tmp_path / "manifest.tsv")
    assert back.entries == m.entries and back.split == "train"
    assert back.load_all().shape == (3, 26, 64, 64)


def test_manifest_saved_elsewhere_keeps_paths(tmp_path, corpus):
    _write_fonts(tmp_path, corpus[:2])
    m = load_manifest(tmp_path / "manifest.tsv")
    save_manifest(m, tmp_path / "sub" / "m.tsv")
    assert load_manifest(tmp_path / "sub" / "m.tsv").load_all().shape[0] == 2


def test_manifest_missing_files_listed(tmp_path):
    (tmp_path / "m.tsv").write_text("a\tx.png\nb\ty.png\n")
    with pytest.raises(ManifestError, match="x.png.*y.png"):
        load_manifest(tmp_path / "m.tsv")


def test_manifest_parse_error_cites_line(tmp_path):
    (tmp_path / "m.tsv").write_text("#split=test\na\tx.png\nbroken line\n")
    with pytest.raises(ManifestError, match=r"m.tsv:3"):
        load_manifest(tmp_path / "m.tsv", check_files=False)


def test_empty_manifest(tmp_path):
    (tmp_path / "m.tsv").write_text("")
    assert len(load_manifest(tmp_path / "m.tsv")) == 0


def test_manifest_duplicate_ids():
    with pytest.raises(ManifestError):
        DatasetManifest([ManifestEntry("a", "x"), ManifestEntry("a", "y")])


def test_color_dataset_counts_and_determinism(tmp_path, corpus):
    m = _write_fonts(tmp_path / "gray", corpus[:2])
    a = generate_color_dataset(m, tmp_path / "c1", variants_per_font=2, seed=7)
    b = generate_color_dataset(m, tmp_path / "c2", variants_per_font=2, seed=7)
    assert len(a) == 4
    for ea, eb in zip(a.entries, b.entries):
        assert a.resolve(ea).read_bytes() == b.resolve(eb).read_bytes()
    one = generate_color_dataset(DatasetManifest(m.entries[:1], None, m.root), tmp_path / "c3", 2, seed=7)
    x, y = (load_record(one.resolve(e)) for e in one.entries)
    assert not np.array_equal(x, y)


def test_color_dataset_reports_font_id(tmp_path):
    m = DatasetManifest([ManifestEntry("ghost", "nope.png")], None, tmp_path)
    with pytest.raises(ManifestError, match="ghost"):
        generate_color_dataset(m, tmp_path / "out")


def test_color_glyph_set_grayscale(corpus):
    cs = ColorGlyphSet(ornament_font(corpus[1], spec()))
    assert cs.grayscale().channels.shape == (26, 64, 64)


@settings(max_examples=50)
@given(st.integers(0, 2**32 - 1))
def test_random_gradient_colors_have_floor(seed):
    s = GradientSpec.random(np.random.default_rng(seed), outline_prob=1.0)
    for c in (s.color_a, s.color_b, s.outline_color):
        assert min(c) >= MIN_COLOR and max(c) <= 1.0
    assert 1 <= s.outline_width <= 2


def test_saved_color_record_keeps_mask(tmp_path):
    glyph = _CORPUS[2][0]
    col = apply_gradient(glyph, GradientSpec((0.05,) * 3, (0.05,) * 3, (1.0, 0.0)))
    save_record(tmp_path / "c.png", np.stack([col] * 26))
    back = load_record(tmp_path / "c.png")[0]
    # only faint anti-aliased edge pixels may round to zero
    lost = (glyph > 0) & (back.sum(axis=0) == 0)
    assert (glyph[lost] < 0.5).all()
