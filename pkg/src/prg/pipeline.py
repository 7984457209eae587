"""Word commands to placed, connected letter trajectories.

perceive -> represent (encode) -> decode -> scale and place -> connect.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import data, models as M
from .connect import ConnectConfig, connect

DESCENDERS = frozenset("fgjpqy")


class PipelineError(ValueError):
    pass


@dataclass(frozen=True)
class CompositionConfig:
    height: float = 1.0  # uppercase and digit height
    ratio: float = 0.5  # lowercase height / uppercase height
    descenders: frozenset = DESCENDERS
    drop: float = 0.4  # descender anchor below the baseline
    gap: float = 0.25  # horizontal clearance between letter boxes
    connect: ConnectConfig = field(default_factory=ConnectConfig)

    def __post_init__(self):
        if not self.height > 0:
            raise ValueError(f"height must be positive, got {self.height}")
        if not 0 < self.ratio <= 1:
            raise ValueError(f"ratio must be in (0, 1], got {self.ratio}")
        if not self.gap > 0:
            raise ValueError(f"gap must be positive, got {self.gap}")
        if self.drop < 0:
            raise ValueError(f"drop must be non-negative, got {self.drop}")

    @classmethod
    def scaled(cls, height: float = 1.0, **kw) -> "CompositionConfig":
        """Defaults with drop, gap and connection step proportional to ``height``."""
        kw.setdefault("drop", 0.4 * height)
        kw.setdefault("gap", 0.25 * height)
        kw.setdefault("connect", ConnectConfig.for_height(height))
        return cls(height=height, **kw)


@dataclass
class WordCommand:
    """A word given as text, as letter images or as letter trajectories (exactly one)."""

    text: str | None = None
    images: np.ndarray | None = None
    trajectories: np.ndarray | None = None

    def __post_init__(self):
        given = [k for k in ("text", "images", "trajectories") if getattr(self, k) is not None]
        if len(given) != 1:
            raise PipelineError(f"a word command needs exactly one of text, images, trajectories; got {given}")
        if self.text is not None:
            perceive_text(self.text)
        elif self.images is not None:
            self.images = perceive_images(self.images)
        else:
            t = np.asarray(self.trajectories, dtype=np.float64)
            if t.ndim != 3 or t.shape[1:] != (data.N_POINTS, 2) or len(t) == 0:
                raise PipelineError(f"trajectories must be (N>0, {data.N_POINTS}, 2), got {t.shape}")
            self.trajectories = t

    @property
    def modality(self) -> str:
        return "S" if self.text is not None else "I" if self.images is not None else "T"

    def __len__(self) -> int:
        return len(self.text) if self.text is not None else len(self.images if self.images is not None
                                                               else self.trajectories)


@dataclass
class ComposedWord:
    labels: np.ndarray
    letters: list[np.ndarray]
    connections: list[np.ndarray]
    full: np.ndarray
    segments: list[tuple[str, int, int]]  # (kind, start, stop) row ranges of ``full``


def perceive_text(text: str) -> np.ndarray:
    if not text:
        raise PipelineError("empty text")
    bad = [ch for ch in text if ch not in data.LABEL_OF]
    if bad:
        raise PipelineError(f"character {bad[0]!r} is not in the alphabet")
    return np.array([data.LABEL_OF[ch] for ch in text], dtype=np.int64)


def perceive_images(images) -> np.ndarray:
    """Stack to (N, 28, 28) in [0, 1]; images with values above 1 are read as 0..255."""
    arr = np.asarray(images, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[None]
    if arr.ndim != 3 or arr.shape[1:] != (data.IMG, data.IMG) or len(arr) == 0:
        raise PipelineError(f"images must be (N>0, {data.IMG}, {data.IMG}), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise PipelineError("images contain non-finite values")
    big = arr.reshape(len(arr), -1).max(axis=1) > 1.0
    arr = arr.copy()
    arr[big] /= 255.0
    return np.clip(arr, 0.0, 1.0)


def represent(command: WordCommand, model: M.Model, sample: bool = False,
              rng: np.random.Generator | None = None) -> M.Latent:
    """One latent per letter, from whichever modality carries the command."""
    if command.text is not None:
        inputs = {"S": perceive_text(command.text)}
    elif command.images is not None:
        inputs = {"I": command.images}
    else:
        inputs = {"T": command.trajectories.reshape(len(command), -1)}
    return M.encode(model, inputs, sample=sample, rng=rng)


def infer_labels(command: WordCommand, model: M.Model | None, latent: M.Latent | None) -> np.ndarray:
    """Labels used for letter sizing: the text itself, else the model's label decoder."""
    if command.text is not None:
        return perceive_text(command.text)
    if model is not None and latent is not None and "S" in model.vaes:
        return M.decode(model, latent, "S").argmax(axis=1)
    raise PipelineError("letter labels are needed for sizing; pass labels or use a model with a label decoder")


def letter_height(label: int, cfg: CompositionConfig) -> float:
    ch = data.ALPHABET[int(label)]
    return cfg.height * (cfg.ratio if ch.islower() else 1.0)


def scale_and_place(trajs, labels, cfg: CompositionConfig = CompositionConfig()) -> list[np.ndarray]:
    """Scale each letter to its case height, sit it on its anchor line and space the boxes."""
    trajs = [np.asarray(t, dtype=np.float64) for t in trajs]
    labels = np.asarray(labels)
    if len(trajs) != len(labels) or not trajs:
        raise PipelineError(f"need one label per trajectory, got {len(trajs)} and {len(labels)}")
    out, right = [], None
    for t, lab in zip(trajs, labels):
        span = t[:, 1].max() - t[:, 1].min()
        if span < 1e-12:
            raise PipelineError(f"decoded letter {data.ALPHABET[int(lab)]!r} has zero height")
        t = t * (letter_height(lab, cfg) / span)
        anchor = -cfg.drop if data.ALPHABET[int(lab)] in cfg.descenders else 0.0
        left = 0.0 if right is None else right + cfg.gap
        t = t + np.array([left - t[:, 0].min(), anchor - t[:, 1].min()])
        right = t[:, 0].max()
        out.append(t)
    return out


def join(letters: list[np.ndarray], cfg: CompositionConfig = CompositionConfig(), labels=None) -> ComposedWord:
    """Connect placed letters in order and concatenate everything into one stroke."""
    conns = [connect(a, b, cfg.connect) for a, b in zip(letters[:-1], letters[1:])]
    parts, segments, pos = [], [], 0
    for i, letter in enumerate(letters):
        pieces = [("letter", letter)] + ([("connection", conns[i])] if i < len(conns) else [])
        for kind, arr in pieces:
            parts.append(arr)
            segments.append((kind, pos, pos + len(arr)))
            pos += len(arr)
    labels = np.asarray(labels if labels is not None else np.full(len(letters), -1))
    return ComposedWord(labels, letters, conns, np.concatenate(parts), segments)


def compose_word(command: WordCommand, model: M.Model | None = None,
                 cfg: CompositionConfig = CompositionConfig(), labels=None, sample: bool = False,
                 rng: np.random.Generator | None = None) -> ComposedWord:
    """Full word trajectory for ``command``.

    Trajectory commands skip the model. ``labels`` overrides the sizing labels
    (needed for image or trajectory commands without a label decoder).
    """
    if command.trajectories is not None and model is None:
        trajs, latent = command.trajectories, None
    else:
        if model is None:
            raise PipelineError("text and image commands need a trained model")
        latent = represent(command, model, sample, rng)
        trajs = M.decode_trajectory(model, latent)
    labels = np.asarray(labels) if labels is not None else infer_labels(command, model, latent)
    if len(labels) != len(command):
        raise PipelineError(f"{len(labels)} labels for a {len(command)}-letter word")
    return join(scale_and_place(trajs, labels, cfg), cfg, labels)
