import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from prg import data, glyphs
from prg.data import DataError

FIXTURE = Path(__file__).parent / "fixtures" / "uji_small.txt"


@pytest.fixture(scope="module")
def corpus():
    return data.synth_glyphs(np.random.default_rng(0), per_class=200)


def _processed(ch, seed=0):
    return data.process_stroke(glyphs.jittered(ch, np.random.default_rng(seed)))


# --- ingestion ---

def test_load_empty_file(tmp_path):
    p = tmp_path / "empty.txt"
    p.write_text("")
    assert data.load_ujipen(p) == []


def test_load_fixture_keeps_one_stroke_alphabet_chars():
    recs = data.load_ujipen(FIXTURE)
    chars = [data.ALPHABET[lab] for _, lab in recs]
    # 'A' has two strokes and 'ñ' is outside the alphabet
    assert chars == ["a", "l", "7"]
    stroke, lab = recs[0]
    assert lab == data.label_of("a")
    assert stroke.shape == (13, 2)
    assert tuple(stroke[0]) == (60.0, -40.0)  # tablet y is flipped to point up


def test_load_malformed_reports_line(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("WORD a x\n  NUMSTROKES 1\n  POINTS 3 # 1 2 3 4\n")
    with pytest.raises(DataError, match="line 3"):
        data.load_ujipen(p)
    p.write_text("// header\nWORD a x\n  STROKES 1\n")
    with pytest.raises(DataError, match="line 3"):
        data.load_ujipen(p)


def test_fixture_strokes_process():
    for stroke, _ in data.load_ujipen(FIXTURE):
        traj = data.process_stroke(stroke)
        assert data.is_equidistant(traj)


# --- resampling ---

def test_resample_straight_segment():
    out = data.resample_equidistant(np.array([[0.0, 0.0], [1.0, 0.0]]))
    assert out.shape == (100, 2)
    np.testing.assert_allclose(out[:, 0], np.arange(100) / 99, atol=1e-12)
    np.testing.assert_allclose(out[:, 1], 0.0, atol=1e-12)


def test_resample_circle_chords_equal():
    t = np.linspace(0, 2 * np.pi, 37)
    circle = np.stack([np.cos(t), np.sin(t)], axis=1)
    out = data.resample_equidistant(circle)
    d = data.chord_lengths(out)
    assert (d.max() - d.min()) / d.mean() < 0.01
    # equal chords on a closed polygon of near-unit radius span its perimeter
    perimeter = data.chord_lengths(circle).sum()
    assert abs(d.sum() - perimeter) / perimeter < 0.01
    np.testing.assert_allclose(out[[0, -1]], circle[[0, -1]], atol=1e-12)


def test_resample_fixed_point():
    traj = data.resample_equidistant(glyphs.jittered("k", np.random.default_rng(3)))
    np.testing.assert_allclose(data.resample_equidistant(traj), traj, atol=1e-9)


def test_resample_degenerate():
    with pytest.raises(DataError):
        data.resample_equidistant(np.ones((5, 2)))
    with pytest.raises(DataError):
        data.resample_equidistant(np.zeros((1, 2)))


def test_resample_handles_hairpin():
    # pen goes up and comes straight back down the same line
    stroke = np.array([[0.0, 0.0], [0.0, 1.0], [0.0, 0.2], [0.3, 0.0]])
    out = data.resample_equidistant(stroke)
    assert data.is_equidistant(out)
    np.testing.assert_allclose(out[[0, -1]], stroke[[0, -1]], atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(3, 30))
def test_resample_random_walks(seed, n):
    stroke = np.cumsum(np.random.default_rng(seed).normal(size=(n, 2)), axis=0)
    assert data.is_equidistant(data.resample_equidistant(stroke))


# --- normalization ---

def test_normalize_box():
    traj = np.array([[0.0, 0.0], [4.0, 2.0], [2.0, 1.0]])
    out = data.normalize_char(traj)
    np.testing.assert_allclose(out.min(axis=0), [-1.0, -0.5])
    np.testing.assert_allclose(out.max(axis=0), [1.0, 0.5])


def test_normalize_zero_box():
    with pytest.raises(DataError):
        data.normalize_char(np.full((10, 2), 3.0))


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (100, 2), elements=st.floats(-50, 50)))
def test_normalize_properties(traj):
    span = traj.max(axis=0) - traj.min(axis=0)
    if span.max() < 1e-6:
        return
    out = data.normalize_char(traj)
    long_axis = int(np.argmax(span))
    assert abs(np.abs(out[:, long_axis]).max() - 1.0) < 1e-9
    np.testing.assert_allclose(data.normalize_char(out), out, atol=1e-12)
    out_span = out.max(axis=0) - out.min(axis=0)
    np.testing.assert_allclose(out_span * span.max(), span * 2.0, atol=1e-9)


# --- rasterization ---

def test_rasterize_single_point():
    img = data.rasterize(np.zeros((100, 2)))
    assert 0 < img.sum() < 5


def test_rasterize_horizontal_line():
    x = np.linspace(-1, 1, 100)
    img = data.rasterize(np.stack([x, np.full(100, 0.1)], axis=1))
    rows = np.flatnonzero(img.sum(axis=1) > 0)
    assert len(rows) <= 3 and rows.max() - rows.min() == len(rows) - 1


def test_rasterize_y_points_up():
    img = data.rasterize(np.array([[0.0, 0.9], [0.0, 0.9]]))
    assert np.argmax(img.sum(axis=1)) < 6


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, (100, 2), elements=st.floats(-1.5, 1.5)))
def test_rasterize_range(traj):
    img = data.rasterize(traj)
    assert img.shape == (28, 28)
    assert img.min() >= 0.0 and img.max() <= 1.0


# --- per-class model ---

def test_fit_identical_samples():
    traj = _processed("e")
    m = data.fit_char_model([traj] * 5, data.label_of("e"))
    np.testing.assert_allclose(m.mean, traj.ravel())
    assert np.all(m.factor == 0.0)


def test_fit_two_samples_direction():
    a, b = _processed("e", 1), _processed("e", 2)
    m = data.fit_char_model([a, b], 0)
    x = np.stack([a.ravel(), b.ravel()])
    evals, evecs = np.linalg.eigh(np.cov(x, rowvar=False))
    top = evecs[:, -1]
    assert np.linalg.matrix_rank(m.factor, tol=1e-9) == 1
    col = m.factor[:, np.argmax(np.linalg.norm(m.factor, axis=0))]
    assert abs(abs(col @ top) / np.linalg.norm(col) - 1.0) < 1e-9
    np.testing.assert_allclose(m.covariance, np.cov(x, rowvar=False), atol=1e-12)
    assert np.all(np.linalg.eigvalsh(m.covariance) > -1e-12)


def test_fit_needs_two():
    with pytest.raises(DataError):
        data.fit_char_model([_processed("e")], 0)


def test_fit_explains_variance(corpus):
    x = corpus.trajectories[corpus.labels == data.label_of("g")].reshape(-1, 200)
    m = data.fit_char_model(x, data.label_of("g"), k=20)
    xc = x - m.mean
    q, _ = np.linalg.qr(m.factor)
    explained = np.sum((xc @ q) ** 2) / np.sum(xc**2)
    assert explained >= 0.90


def test_augment_zero_factor_returns_mean():
    traj = _processed("s")
    m = data.CharModel(5, traj.ravel(), np.zeros((200, 3)), 0.1)
    out = data.sample_augmented(m, np.random.default_rng(0))
    np.testing.assert_allclose(out.trajectory, traj, atol=1e-9)
    assert out.label == 5


def test_augment_samples_statistics(corpus):
    x = corpus.trajectories[corpus.labels == data.label_of("S")]
    m = data.fit_char_model(x, data.label_of("S"))
    rng = np.random.default_rng(7)
    draws = [data.sample_augmented(m, rng) for _ in range(1000)]
    ds = data.Dataset.from_samples(draws, "augmented")
    data.check_invariants(ds)
    mean = ds.trajectories.reshape(-1, 200).mean(axis=0)
    # coordinates live in [-1, 1], so 5% is judged against that scale
    assert np.abs(mean - m.mean).max() < 0.05


def test_augment_too_loose_raises():
    traj = _processed("s")
    m = data.CharModel(5, traj.ravel(), np.random.default_rng(1).normal(size=(200, 2)), 1e-6)
    with pytest.raises(DataError, match="rejected"):
        data.sample_augmented(m, np.random.default_rng(0), max_tries=5)


def test_augment_tops_up(corpus):
    small = corpus.with_classes([0, 1]).subset(np.r_[0:30, 200:230])
    out = data.augment(small, 50, np.random.default_rng(0))
    assert out.class_counts() == {"0": 50, "1": 50}
    assert (out.provenance == data.PROVENANCE.index("augmented")).sum() == 40
    same = data.augment(small, 10, np.random.default_rng(0))
    assert len(same) == len(small)


# --- synthetic corpus ---

def test_synth_count_and_invariants(corpus):
    assert len(corpus) == 12400
    assert set(corpus.class_counts().values()) == {200}
    data.check_invariants(corpus)


def test_synth_scatter(corpus):
    x = corpus.trajectories.reshape(len(corpus), -1)
    grand = x.mean(axis=0)
    within = between = 0.0
    for c in range(data.N_CLASSES):
        xc = x[corpus.labels == c]
        mu = xc.mean(axis=0)
        within += np.sum((xc - mu) ** 2)
        between += len(xc) * np.sum((mu - grand) ** 2)
    assert within < between


def test_synth_deterministic():
    a = data.synth_glyphs(np.random.default_rng(4), per_class=3, classes="xyz")
    b = data.synth_glyphs(np.random.default_rng(4), per_class=3, classes="xyz")
    assert np.array_equal(a.trajectories, b.trajectories)
    assert np.array_equal(a.images, b.images)


def test_split_per_class(corpus):
    tr, te = data.train_test_split(corpus, seed=1)
    assert len(tr) + len(te) == len(corpus)
    assert set(te.class_counts().values()) == {20}
    assert tr.split == "train" and te.split == "test"


# --- files ---

def test_dataset_round_trip(tmp_path, corpus):
    ds = corpus.subset(np.arange(0, 12400, 97))
    ds.meta["note"] = "x"
    p = tmp_path / "d.prgd"
    data.save_dataset(ds, p)
    back = data.load_dataset(p)
    for name in ("trajectories", "images", "labels", "provenance"):
        assert np.array_equal(getattr(back, name), getattr(ds, name))
    assert back.meta["note"] == "x"
    p.write_bytes(b"junk" + p.read_bytes())
    with pytest.raises(DataError):
        data.load_dataset(p)


def test_export_jsonl(tmp_path, corpus):
    ds = corpus.subset([0, 500])
    p = tmp_path / "d.jsonl"
    data.export_jsonl(ds, p)
    rows = [json.loads(line) for line in p.read_text().splitlines()]
    assert [r["char"] for r in rows] == [data.ALPHABET[i] for i in ds.labels]
    assert np.asarray(rows[0]["trajectory"]).shape == (100, 2)


def test_nearest_centroid_recovers_classes(corpus):
    cents = data.centroids(corpus)
    pred = data.nearest_centroid(corpus.trajectories[::10], cents)
    assert np.mean(pred == corpus.labels[::10]) > 0.9
