"""Character dataset: UJI ingestion, resampling, normalization, rasterization,
per-class PCA augmentation and a synthetic glyph corpus."""

from __future__ import annotations

import json
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels, glyphs

log = logging.getLogger(__name__)

ALPHABET = "0123456789ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz"
N_CLASSES = len(ALPHABET)
N_POINTS = 100
IMG = 28
LABEL_OF = {ch: i for i, ch in enumerate(ALPHABET)}

PROVENANCE = ("ingested", "augmented", "synthetic")


class DataError(ValueError):
    pass


def label_of(ch: str) -> int:
    try:
        return LABEL_OF[ch]
    except KeyError:
        raise DataError(f"character {ch!r} is not in the 62-class alphabet") from None


@dataclass(frozen=True)
class CharacterSample:
    trajectory: np.ndarray  # (100, 2)
    image: np.ndarray  # (28, 28)
    label: int

    @property
    def char(self) -> str:
        return ALPHABET[self.label]


# --- UJI Pen Characters 2 ---------------------------------------------------

def load_ujipen(path) -> list[tuple[np.ndarray, int]]:
    """Parse the UJI Pen Characters v2 text format.

    Records look like::

        WORD a W01-a-1
          NUMSTROKES 1
          POINTS 23 # x0 y0 x1 y1 ...

    Only one-stroke characters from the 62-class alphabet are kept. The tablet
    y axis points down, so y is negated to get y-up strokes.
    """
    lines = Path(path).read_text(encoding="utf-8", errors="replace").splitlines()
    out: list[tuple[np.ndarray, int]] = []
    i = 0

    def next_content(i):
        while i < len(lines) and (not lines[i].strip() or lines[i].lstrip().startswith("//")):
            i += 1
        return i

    while True:
        i = next_content(i)
        if i >= len(lines):
            break
        head = lines[i].split()
        if head[0] != "WORD" or len(head) < 2:
            raise DataError(f"line {i + 1}: expected 'WORD <char> <id>', got {lines[i].strip()!r}")
        char = head[1]
        i = next_content(i + 1)
        parts = lines[i].split() if i < len(lines) else []
        if len(parts) != 2 or parts[0] != "NUMSTROKES" or not parts[1].isdigit():
            raise DataError(f"line {i + 1}: expected 'NUMSTROKES <n>'")
        n_strokes = int(parts[1])
        strokes = []
        for _ in range(n_strokes):
            i = next_content(i + 1)
            if i >= len(lines):
                raise DataError(f"line {i + 1}: unexpected end of file inside a record")
            strokes.append(_parse_points(lines[i], i + 1))
        i += 1
        if n_strokes != 1 or char not in LABEL_OF:
            continue
        out.append((strokes[0], LABEL_OF[char]))
    return out


def _parse_points(line: str, lineno: int) -> np.ndarray:
    left, sep, right = line.partition("#")
    head = left.split()
    if not sep or len(head) != 2 or head[0] != "POINTS":
        raise DataError(f"line {lineno}: expected 'POINTS <n> # x y ...'")
    try:
        n = int(head[1])
        vals = [float(v) for v in right.split()]
    except ValueError as exc:
        raise DataError(f"line {lineno}: {exc}") from None
    if len(vals) != 2 * n:
        raise DataError(f"line {lineno}: declared {n} points but found {len(vals) / 2:g}")
    pts = np.asarray(vals).reshape(n, 2)
    pts[:, 1] *= -1.0
    return pts


# --- geometry ---------------------------------------------------------------

def _arc_positions(pts: np.ndarray) -> np.ndarray:
    return np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(pts, axis=0), axis=1))])


def _interp_path(pts: np.ndarray, s_knots: np.ndarray, s: np.ndarray) -> np.ndarray:
    return np.stack([np.interp(s, s_knots, pts[:, 0]), np.interp(s, s_knots, pts[:, 1])], axis=1)


def chord_lengths(traj: np.ndarray) -> np.ndarray:
    return np.linalg.norm(np.diff(traj, axis=0), axis=1)


def _open_folds(pts: np.ndarray, radius: float) -> np.ndarray:
    """Retrace ``pts`` with turning radius >= ``radius`` (hairpins become U-turns)."""
    ds = radius / 8.0
    s_knots = _arc_positions(pts)
    dense = _interp_path(pts, s_knots, np.linspace(0.0, s_knots[-1], int(s_knots[-1] / (ds / 2)) + 2))
    return _kernels.pursue(dense, radius, ds, 20 * len(dense))


def resample_equidistant(stroke, n: int = N_POINTS) -> np.ndarray:
    """Resample a polyline to ``n`` points with equal consecutive chord lengths.

    A divider of fixed opening is walked along the path from its first point
    and the opening is searched so the last step lands on the path's end;
    endpoints are preserved. Where the stroke doubles back more tightly than
    the point spacing, no opening may fit; the fold is then opened into a
    U-turn about one spacing wide, which 100 points cannot resolve anyway,
    and the search is repeated.
    """
    pts = np.asarray(stroke, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 2:
        raise DataError(f"stroke must be (n>=2, 2), got {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise DataError("stroke has non-finite points")
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    if seg.sum() <= 0:
        raise DataError("degenerate stroke: all points equal")
    pts = np.ascontiguousarray(pts[np.concatenate([[True], seg > 0])])
    ok, out = _kernels.equal_chord_resample(pts, n, 160, 60, 2e-3)
    spacing = seg.sum() / (n - 1)
    for factor in (0.5, 1.0, 2.0):
        if ok:
            break
        ok, out = _kernels.equal_chord_resample(_open_folds(pts, factor * spacing), n, 160, 60, 2e-3)
    if not ok:
        raise DataError("could not resample stroke to equal spacing")
    return out


def normalize_char(traj) -> np.ndarray:
    """Center on the bounding box and scale isotropically so the long side is 2."""
    t = np.asarray(traj, dtype=float)
    lo, hi = t.min(axis=0), t.max(axis=0)
    side = float(np.max(hi - lo))
    if not np.isfinite(side) or side <= 1e-12:
        raise DataError("zero-size bounding box")
    return (t - (lo + hi) / 2.0) * (2.0 / side)


def is_equidistant(traj: np.ndarray, rtol: float = 0.01) -> bool:
    d = chord_lengths(traj)
    return bool(d.mean() > 0 and (d.max() - d.min()) <= rtol * d.mean())


def rasterize(traj, size: int = IMG, width: float = 1.5, margin: float = 2.0) -> np.ndarray:
    """Anti-aliased polyline raster, linear coverage falloff, values in [0, 1].

    The normalized box [-1, 1]^2 maps to [margin, size - margin] pixels, y up.
    Pixel ink is ``clip(width/2 + 0.5 - d, 0, 1)`` with ``d`` the distance from
    the pixel center to the polyline.
    """
    t = np.asarray(traj, dtype=float).reshape(-1, 2)
    half = (size - 2 * margin) / 2.0
    pu = np.stack([size / 2.0 + t[:, 0] * half, size / 2.0 - t[:, 1] * half], axis=1)
    a, b = (pu[:-1], pu[1:]) if len(pu) > 1 else (pu, pu)
    reach = width / 2.0 + 0.5
    seg_len = np.linalg.norm(b - a, axis=1)
    r = int(np.ceil(seg_len.max() / 2.0 + reach)) + 1
    mid = np.floor((a + b) / 2.0).astype(int)
    off = np.arange(-r, r + 1)
    ox, oy = np.meshgrid(off, off, indexing="xy")
    cols = mid[:, 0, None] + ox.reshape(1, -1)
    rows = mid[:, 1, None] + oy.reshape(1, -1)
    px = np.stack([cols + 0.5, rows + 0.5], axis=-1)  # (S, W, 2)
    ab = (b - a)[:, None, :]
    pa = px - a[:, None, :]
    denom = np.maximum(np.sum(ab * ab, axis=2), 1e-12)
    h = np.clip(np.sum(pa * ab, axis=2) / denom, 0.0, 1.0)
    dist = np.linalg.norm(pa - h[..., None] * ab, axis=2)
    ink = np.clip(reach - dist, 0.0, 1.0)
    ok = (rows >= 0) & (rows < size) & (cols >= 0) & (cols < size) & (ink > 0)
    img = np.zeros(size * size)
    np.maximum.at(img, rows[ok] * size + cols[ok], ink[ok])
    return img.reshape(size, size)


def process_stroke(stroke) -> np.ndarray:
    """resample -> normalize, giving a trajectory that satisfies sample invariants."""
    return normalize_char(resample_equidistant(stroke))


def make_sample(stroke, label: int) -> CharacterSample:
    traj = process_stroke(stroke)
    return CharacterSample(traj, rasterize(traj), int(label))


# --- per-class probabilistic model -------------------------------------------

@dataclass(frozen=True)
class CharModel:
    label: int
    mean: np.ndarray  # (200,)
    factor: np.ndarray  # (200, k)
    max_dev: float  # largest point-to-mean distance seen in training

    @property
    def covariance(self) -> np.ndarray:
        return self.factor @ self.factor.T


def fit_char_model(trajectories, label: int, k: int = 20) -> CharModel:
    x = np.asarray(trajectories, dtype=float).reshape(len(trajectories), -1)
    if len(x) < 2:
        raise DataError(f"need at least 2 samples to fit class {label}, got {len(x)}")
    mu = x.mean(axis=0)
    xc = x - mu
    _, sv, vt = np.linalg.svd(xc, full_matrices=False)
    k = min(k, len(sv))
    scale = sv[:k] / np.sqrt(len(x) - 1)
    scale[scale < 1e-12 * max(1.0, sv[0] if len(sv) else 1.0)] = 0.0
    factor = vt[:k].T * scale
    dev = np.linalg.norm((x - mu).reshape(len(x), -1, 2), axis=2).max()
    return CharModel(int(label), mu, factor, float(dev))


def sample_augmented(model: CharModel, rng: np.random.Generator, max_tries: int = 50) -> CharacterSample:
    mean_traj = model.mean.reshape(-1, 2)
    limit = 3.0 * model.max_dev
    for _ in range(max_tries):
        eps = rng.standard_normal(model.factor.shape[1])
        raw = (model.mean + model.factor @ eps).reshape(-1, 2)
        try:
            traj = normalize_char(resample_equidistant(normalize_char(raw)))
        except DataError:
            continue
        if np.linalg.norm(traj - mean_traj, axis=1).max() > limit + 1e-12:
            continue
        return CharacterSample(traj, rasterize(traj), model.label)
    raise DataError(f"class {ALPHABET[model.label]!r}: {max_tries} rejected draws, model too loose")


# --- dataset container --------------------------------------------------------

@dataclass
class Dataset:
    trajectories: np.ndarray  # (N, 100, 2)
    images: np.ndarray  # (N, 28, 28)
    labels: np.ndarray  # (N,)
    provenance: np.ndarray  # (N,) index into PROVENANCE
    split: str = "train"
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.labels)

    def __getitem__(self, i: int) -> CharacterSample:
        return CharacterSample(self.trajectories[i], self.images[i], int(self.labels[i]))

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    @classmethod
    def from_samples(cls, samples, provenance: str, split: str = "train") -> "Dataset":
        samples = list(samples)
        code = PROVENANCE.index(provenance)
        if not samples:
            return cls(np.zeros((0, N_POINTS, 2)), np.zeros((0, IMG, IMG)), np.zeros(0, np.int64),
                       np.zeros(0, np.uint8), split)
        return cls(np.stack([s.trajectory for s in samples]),
                   np.stack([s.image for s in samples]),
                   np.array([s.label for s in samples], dtype=np.int64),
                   np.full(len(samples), code, dtype=np.uint8), split)

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        if idx.dtype != bool:
            idx = idx.astype(np.int64)
        return Dataset(self.trajectories[idx], self.images[idx], self.labels[idx],
                       self.provenance[idx], self.split, dict(self.meta))

    def with_classes(self, labels) -> "Dataset":
        return self.subset(np.flatnonzero(np.isin(self.labels, list(labels))))

    def class_counts(self) -> dict[str, int]:
        counts = np.bincount(self.labels, minlength=N_CLASSES)
        return {ALPHABET[i]: int(c) for i, c in enumerate(counts) if c}

    @staticmethod
    def concat(parts: list["Dataset"], split: str = "train") -> "Dataset":
        return Dataset(np.concatenate([p.trajectories for p in parts]),
                       np.concatenate([p.images for p in parts]),
                       np.concatenate([p.labels for p in parts]),
                       np.concatenate([p.provenance for p in parts]), split)


def check_invariants(ds: Dataset) -> None:
    """Raise DataError on the first sample that breaks a CharacterSample invariant."""
    if ds.trajectories.shape[1:] != (N_POINTS, 2) or ds.images.shape[1:] != (IMG, IMG):
        raise DataError(f"bad array shapes {ds.trajectories.shape}, {ds.images.shape}")
    if len(ds) and (ds.labels.min() < 0 or ds.labels.max() >= N_CLASSES):
        raise DataError("label outside [0, 61]")
    if not np.all(np.isfinite(ds.trajectories)):
        raise DataError("non-finite trajectory")
    if np.any(ds.images < 0) or np.any(ds.images > 1):
        raise DataError("image values outside [0, 1]")
    d = np.linalg.norm(np.diff(ds.trajectories, axis=1), axis=2)
    spread = (d.max(axis=1) - d.min(axis=1)) / d.mean(axis=1)
    bad = np.flatnonzero(spread > 0.01)
    if bad.size:
        raise DataError(f"sample {bad[0]} not equidistant (spread {spread[bad[0]]:.4f})")
    ext = np.abs(ds.trajectories).max(axis=(1, 2))
    if np.any(np.abs(ext - 1.0) > 1e-9):
        raise DataError("trajectory not normalized to [-1, 1] on its long axis")


def train_test_split(ds: Dataset, test_frac: float = 0.1, seed: int = 0) -> tuple[Dataset, Dataset]:
    """Per-class seeded split."""
    rng = np.random.default_rng(seed)
    train_idx, test_idx = [], []
    for c in np.unique(ds.labels):
        idx = np.flatnonzero(ds.labels == c)
        idx = idx[rng.permutation(len(idx))]
        n_test = int(round(test_frac * len(idx)))
        test_idx.extend(idx[:n_test])
        train_idx.extend(idx[n_test:])
    tr, te = ds.subset(np.sort(train_idx)), ds.subset(np.sort(test_idx))
    tr.split, te.split = "train", "test"
    return tr, te


def synth_glyphs(rng: np.random.Generator, per_class: int = 200, classes=ALPHABET) -> Dataset:
    """Jittered template glyphs for ``classes`` (characters), fully processed."""
    samples = []
    for ch in classes:
        lab = label_of(ch)
        for _ in range(per_class):
            samples.append(make_sample(glyphs.jittered(ch, rng), lab))
    ds = Dataset.from_samples(samples, "synthetic")
    ds.meta["classes"] = "".join(classes)
    return ds


def augment(ds: Dataset, per_class_target: int, rng: np.random.Generator, k: int = 20) -> Dataset:
    """Top every class up to ``per_class_target`` samples drawn from its PCA model."""
    parts = [ds]
    for lab in np.unique(ds.labels):
        idx = np.flatnonzero(ds.labels == lab)
        missing = per_class_target - len(idx)
        if missing <= 0:
            continue
        model = fit_char_model(ds.trajectories[idx], int(lab), k)
        parts.append(Dataset.from_samples([sample_augmented(model, rng) for _ in range(missing)], "augmented"))
    out = Dataset.concat(parts, ds.split) if len(parts) > 1 else ds
    out.meta = dict(ds.meta)
    return out


# --- file formats ---------------------------------------------------------------

_MAGIC = b"PRGDATA\x00"
_VERSION = 1
_RECORD = np.dtype([("label", "<i4"), ("provenance", "u1"),
                    ("trajectory", "<f8", (N_POINTS, 2)), ("image", "<f8", (IMG, IMG))])


def save_dataset(ds: Dataset, path) -> None:
    rec = np.zeros(len(ds), dtype=_RECORD)
    rec["label"] = ds.labels
    rec["provenance"] = ds.provenance
    rec["trajectory"] = ds.trajectories
    rec["image"] = ds.images
    meta = json.dumps({"split": ds.split, **ds.meta}, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<IQI", _VERSION, len(ds), len(meta)))
        fh.write(meta)
        fh.write(rec.tobytes())


def load_dataset(path) -> Dataset:
    raw = Path(path).read_bytes()
    if raw[:8] != _MAGIC:
        raise DataError(f"{path}: not a dataset file")
    version, count, mlen = struct.unpack("<IQI", raw[8:24])
    if version != _VERSION:
        raise DataError(f"{path}: unsupported dataset version {version}")
    meta = json.loads(raw[24:24 + mlen])
    body = raw[24 + mlen:]
    if len(body) != count * _RECORD.itemsize:
        raise DataError(f"{path}: expected {count} records, payload has {len(body)} bytes")
    rec = np.frombuffer(body, dtype=_RECORD)
    split = meta.pop("split", "train")
    return Dataset(rec["trajectory"].astype(np.float64), rec["image"].astype(np.float64),
                   rec["label"].astype(np.int64), rec["provenance"].astype(np.uint8), split, meta)


def export_jsonl(ds: Dataset, path) -> None:
    with open(path, "w") as fh:
        for i in range(len(ds)):
            fh.write(json.dumps({
                "label": int(ds.labels[i]),
                "char": ALPHABET[ds.labels[i]],
                "provenance": PROVENANCE[ds.provenance[i]],
                "trajectory": ds.trajectories[i].round(6).tolist(),
                "image": ds.images[i].round(4).tolist(),
            }) + "\n")


def centroids(ds: Dataset) -> dict[int, np.ndarray]:
    """Class mean trajectories (200-vectors) used by the nearest-centroid judge."""
    return {int(c): ds.trajectories[ds.labels == c].reshape(-1, 2 * N_POINTS).mean(axis=0)
            for c in np.unique(ds.labels)}


def nearest_centroid(trajs: np.ndarray, cents: dict[int, np.ndarray]) -> np.ndarray:
    keys = np.array(sorted(cents))
    mat = np.stack([cents[k] for k in keys])
    x = np.asarray(trajs, dtype=float).reshape(-1, 2 * N_POINTS)
    d = ((x[:, None, :] - mat[None]) ** 2).sum(axis=2)
    return keys[np.argmin(d, axis=1)]
