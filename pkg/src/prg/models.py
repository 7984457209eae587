"""Multimodal VAEs over trajectories (T), labels (S) and images (I).

Three model kinds share the same per-modality building blocks:

* ``cvae``: one VAE over trajectories, encoder and decoder conditioned on a
  one-hot label.
* ``avae-ts`` / ``avae-ti``: one VAE per modality, latent spaces tied by a
  symmetric KL between paired posteriors.
* ``muse``: three modality VAEs plus a top-level VAE over the concatenated
  modality posterior means, with an 8-d top latent.

All likelihood terms are per-sample sums; losses are batch means.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import data
from .tensor_nn import AdamState, Network, Tensor, adam_step, no_grad, reparameterize
from .tensor_nn import autodiff as ad
from .tensor_nn import checkpoint
from .tensor_nn import layers as L

LATENT = 16
TOP_LATENT = 8
MODALITIES = ("T", "S", "I")
KINDS = ("cvae", "avae-ts", "avae-ti", "muse")
PROFILES = {"desk": (16, 32, 64), "paper": (64, 128, 256)}
LOG_2PI = float(np.log(2 * np.pi))
TRAJ_DIM = 2 * data.N_POINTS
DEFAULT_BATCH = {"cvae": 128, "avae-ts": 128, "avae-ti": 128, "muse": 64}


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class LossWeights:
    """Loss constants; defaults follow the published hyper-parameter table."""

    alpha: float = 1.0  # AVAE association
    alpha_t: float = 1.0
    alpha_s: float = 1.0
    alpha_i: float = 1.0
    lambda_t: float = 1.0
    lambda_s: float = 50.0
    lambda_i: float = 1.0
    gamma_t: float = 10.0
    gamma_s: float = 10.0
    gamma_i: float = 10.0
    beta: float = 1.0
    delta: float = 1.0

    def a(self, m: str) -> float:
        return getattr(self, f"alpha_{m.lower()}")

    def lam(self, m: str) -> float:
        return getattr(self, f"lambda_{m.lower()}")

    def gamma(self, m: str) -> float:
        return getattr(self, f"gamma_{m.lower()}")


# --- Gaussian helpers ----------------------------------------------------------

def gaussian_kl(mu: Tensor, log_sigma: Tensor) -> Tensor:
    """KL(N(mu, sigma^2) || N(0, I)) summed over the last axis, shape (B,)."""
    ls = ad.clamp(log_sigma, -10.0, 10.0)
    var = ad.exp(ls * 2.0)
    return (ad.square(mu) + var - 1.0 - ls * 2.0).sum(axis=-1) * 0.5


def symmetric_kl(mu1: Tensor, ls1: Tensor, mu2: Tensor, ls2: Tensor) -> Tensor:
    """KL(q1||q2) + KL(q2||q1) for diagonal Gaussians, shape (B,)."""
    ls1, ls2 = ad.clamp(ls1, -10.0, 10.0), ad.clamp(ls2, -10.0, 10.0)
    v1, v2 = ad.exp(ls1 * 2.0), ad.exp(ls2 * 2.0)
    d2 = ad.square(mu1 - mu2)
    # the log-variance terms cancel between the two directions
    kl = (v1 + d2) * ad.exp(ls2 * -2.0) * 0.5 + (v2 + d2) * ad.exp(ls1 * -2.0) * 0.5 - 1.0
    return kl.sum(axis=-1)


def log_normal(z: np.ndarray, mu: np.ndarray, log_sigma: np.ndarray) -> np.ndarray:
    """Diagonal Gaussian log-density summed over the last axis."""
    ls = np.clip(log_sigma, -10.0, 10.0)
    return -0.5 * np.sum(((z - mu) * np.exp(-ls)) ** 2 + 2 * ls + LOG_2PI, axis=-1)


def one_hot(labels, n: int = data.N_CLASSES) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.ndim == 2:
        return labels.astype(np.float64)
    out = np.zeros((len(labels), n))
    out[np.arange(len(labels)), labels.astype(np.int64)] = 1.0
    return out


# --- per-modality VAE ------------------------------------------------------------

def _mlp(sizes, final_act: bool) -> list[L.LayerSpec]:
    specs = []
    for a, b in zip(sizes[:-1], sizes[1:]):
        specs += [L.dense(a, b), L.lrelu()]
    return specs if final_act else specs[:-1]


def _modality_specs(m: str, profile: str, cond: int = 0):
    """(encoder trunk, trunk width, decoder) layer lists for modality ``m``."""
    if m == "T":
        return (_mlp([TRAJ_DIM + cond, 512, 512, 512], True), 512,
                _mlp([LATENT + cond, 512, 512, 512, TRAJ_DIM], False))
    if m == "S":
        return ([L.embedding(data.N_CLASSES, 256)] + _mlp([256, 256, 256], True), 256,
                _mlp([LATENT, 256, 256, 256, data.N_CLASSES], False))
    if m == "I":
        c1, c2, c3 = PROFILES[profile]
        enc = [L.unflatten(1, data.IMG, data.IMG),
               L.conv(1, c1), L.lrelu(), L.conv(c1, c2), L.lrelu(), L.conv(c2, c3), L.lrelu(),
               L.flatten(), L.dense(c3 * 9, 512), L.lrelu()]
        # the last deconvolution emits Bernoulli logits, so it has no activation
        dec = [L.dense(LATENT, 512), L.lrelu(), L.dense(512, c3 * 9), L.lrelu(),
               L.unflatten(c3, 3, 3), L.deconv(c3, c2, output_padding=1), L.lrelu(),
               L.deconv(c2, c1), L.lrelu(), L.deconv(c1, 1), L.unflatten(data.IMG, data.IMG)]
        return enc, 512, dec
    raise ModelError(f"unknown modality {m!r}")


class ModalityVAE:
    """Encoder trunk with mean / log-sigma heads and a decoder for one modality."""

    def __init__(self, modality: str, nets: dict[str, Network]):
        self.m = modality
        self.enc, self.mu_head, self.ls_head, self.dec = (nets[k] for k in ("enc", "mu", "logsig", "dec"))

    @classmethod
    def build(cls, modality: str, profile: str, rng: np.random.Generator, cond: int = 0) -> "ModalityVAE":
        enc, width, dec = _modality_specs(modality, profile, cond)
        return cls(modality, {"enc": Network(enc, rng), "mu": Network([L.dense(width, LATENT)], rng),
                              "logsig": Network([L.dense(width, LATENT)], rng), "dec": Network(dec, rng)})

    def networks(self) -> dict[str, Network]:
        return {"enc": self.enc, "mu": self.mu_head, "logsig": self.ls_head, "dec": self.dec}

    def posterior(self, x) -> tuple[Tensor, Tensor]:
        h = self.enc(x)
        return self.mu_head(h), self.ls_head(h)

    def decode(self, z) -> Tensor:
        return self.dec(z)

    def nll(self, x, out: Tensor, constant: bool = True) -> Tensor:
        """-log p(x | decoder output), shape (B,).

        T: unit-variance Gaussian (``constant`` adds the normalizer);
        S: categorical over 62 logits; I: Bernoulli per pixel from logits.
        """
        if self.m == "T":
            nll = ad.square(out - x).sum(axis=-1) * 0.5
            return nll + 0.5 * TRAJ_DIM * LOG_2PI if constant else nll
        if self.m == "S":
            return -ad.pick(ad.log_softmax(out), x)
        flat_logits = out.reshape(out.shape[0], -1)
        target = np.asarray(x.data if isinstance(x, Tensor) else x).reshape(out.shape[0], -1)
        return (ad.softplus(flat_logits) - flat_logits * target).sum(axis=-1)


def nll_numpy(m: str, x: np.ndarray, out: np.ndarray) -> np.ndarray:
    """Same as :meth:`ModalityVAE.nll` (with constant) on plain arrays, any leading dims."""
    if m == "T":
        return 0.5 * np.sum((out - x) ** 2, axis=-1) + 0.5 * TRAJ_DIM * LOG_2PI
    if m == "S":
        z = out - out.max(axis=-1, keepdims=True)
        lse = np.log(np.exp(z).sum(axis=-1))
        return lse - np.take_along_axis(z, x[..., None], axis=-1)[..., 0]
    lg = out.reshape(out.shape[:-2] + (-1,))
    t = x.reshape(x.shape[:-2] + (-1,))
    return np.sum(np.logaddexp(0.0, lg) - lg * t, axis=-1)


# --- models ---------------------------------------------------------------------------

@dataclass
class Model:
    kind: str
    profile: str
    weights: LossWeights
    vaes: dict[str, ModalityVAE]
    top: dict[str, Network] = field(default_factory=dict)

    @property
    def modalities(self) -> tuple[str, ...]:
        return tuple(m for m in MODALITIES if m in self.vaes) if self.kind != "cvae" else ("T", "S")

    def networks(self) -> dict[str, Network]:
        nets = {f"{m}.{k}": n for m, v in self.vaes.items() for k, n in v.networks().items()}
        nets.update({f"top.{k}": n for k, n in self.top.items()})
        return nets

    def parameters(self) -> dict[str, Tensor]:
        out = {}
        for name, net in sorted(self.networks().items()):
            out.update(net.named_parameters(f"{name}."))
        return out

    def supported_sets(self) -> list[frozenset]:
        if self.kind == "cvae":
            return [frozenset("S"), frozenset("TS")]
        if self.kind == "muse":
            return [frozenset(c) for r in (1, 2, 3) for c in itertools.combinations(MODALITIES, r)]
        return [frozenset(m) for m in self.modalities]


def build_model(kind: str, profile: str = "desk", weights: LossWeights | None = None,
                seed: int = 0) -> Model:
    if kind not in KINDS:
        raise ModelError(f"unknown model kind {kind!r}; expected one of {KINDS}")
    if profile not in PROFILES:
        raise ModelError(f"unknown profile {profile!r}; expected one of {tuple(PROFILES)}")
    rng = np.random.default_rng(seed)
    weights = weights or LossWeights()
    if kind == "cvae":
        return Model(kind, profile, weights, {"T": ModalityVAE.build("T", profile, rng, cond=data.N_CLASSES)})
    mods = {"avae-ts": "TS", "avae-ti": "TI", "muse": "TSI"}[kind]
    vaes = {m: ModalityVAE.build(m, profile, rng) for m in mods}
    top = {}
    if kind == "muse":
        c_dim = LATENT * len(MODALITIES)
        top = {"enc": Network(_mlp([c_dim, 512, 512, 512], True), rng),
               "mu": Network([L.dense(512, TOP_LATENT)], rng),
               "logsig": Network([L.dense(512, TOP_LATENT)], rng),
               "dec": Network(_mlp([TOP_LATENT, 512, 512, 512, c_dim], False), rng)}
    return Model(kind, profile, weights, vaes, top)


def _as_input(m: str, x):
    if m == "S":
        return np.asarray(x, dtype=np.int64)
    arr = np.asarray(x, dtype=np.float64)
    return Tensor(arr.reshape(len(arr), TRAJ_DIM) if m == "T" else arr.reshape(len(arr), data.IMG, data.IMG))


def _check_finite(parts: dict[str, float]) -> None:
    for name, v in parts.items():
        if not np.isfinite(v):
            raise FloatingPointError(f"non-finite loss term {name!r}")


# --- losses -------------------------------------------------------------------------

def elbo(vae: ModalityVAE, x, rng: np.random.Generator, constant: bool = True):
    """Negative ELBO of one modality VAE: batch mean of NLL + KL, plus parts."""
    xin = _as_input(vae.m, x)
    mu, ls = vae.posterior(xin)
    z = reparameterize(mu, ls, rng)
    nll = vae.nll(xin, vae.decode(z), constant).mean()
    kl = gaussian_kl(mu, ls).mean()
    parts = {f"nll_{vae.m}": nll.item(), f"kl_{vae.m}": kl.item()}
    _check_finite(parts)
    return nll + kl, parts


def cvae_loss(model: Model, x_t, x_s, rng: np.random.Generator, constant: bool = False):
    """Label-conditioned trajectory ELBO; ``x_s`` is labels or (B, 62) conditioning vectors."""
    vae = model.vaes["T"]
    xt = _as_input("T", x_t)
    cond = Tensor(one_hot(x_s))
    mu, ls = vae.posterior(ad.concat([xt, cond], axis=1))
    z = reparameterize(mu, ls, rng)
    nll = vae.nll(xt, vae.decode(ad.concat([z, cond], axis=1)), constant).mean()
    kl = gaussian_kl(mu, ls).mean()
    parts = {"nll_T": nll.item(), "kl_T": kl.item()}
    _check_finite(parts)
    return nll + kl, parts


def avae_loss(model: Model, x_a, x_b, rng: np.random.Generator, constant: bool = False):
    """ELBO_A + ELBO_B + alpha * symmetric KL between the paired posteriors."""
    ma, mb = model.modalities
    post, total, parts = {}, 0.0, {}
    for m, x in ((ma, x_a), (mb, x_b)):
        vae = model.vaes[m]
        xin = _as_input(m, x)
        mu, ls = vae.posterior(xin)
        z = reparameterize(mu, ls, rng)
        nll = vae.nll(xin, vae.decode(z), constant).mean()
        kl = gaussian_kl(mu, ls).mean()
        total = total + nll + kl
        parts[f"nll_{m}"], parts[f"kl_{m}"] = nll.item(), kl.item()
        post[m] = (mu, ls)
    assoc = symmetric_kl(*post[ma], *post[mb]).mean()
    parts["assoc"] = assoc.item()
    _check_finite(parts)
    return total + assoc * model.weights.alpha, parts


def _slot(m: str) -> slice:
    i = MODALITIES.index(m)
    return slice(i * LATENT, (i + 1) * LATENT)


def muse_loss(model: Model, batch: dict, rng: np.random.Generator, dropout: float = 0.3,
              constant: bool = False):
    """MUSE objective over the modalities present in ``batch`` ({'T','S','I'} -> array).

    Each present modality adds alpha_m * (lambda_m * NLL_m + KL_m). The joint
    code c concatenates stop-gradient posterior means, zeroing modalities that
    are absent or dropped for this batch. The top level adds beta * KL_pi, a
    delta-weighted reconstruction of the kept slots of c and, for every
    present modality, a gamma_m-weighted reconstruction of its mean from z_pi.
    Absent modalities' networks are never evaluated.
    """
    w = model.weights
    present = [m for m in MODALITIES if batch.get(m) is not None]
    if not present:
        raise ModelError("muse_loss needs at least one modality")
    total, parts, means = 0.0, {}, {}
    for m in present:
        vae = model.vaes[m]
        xin = _as_input(m, batch[m])
        mu, ls = vae.posterior(xin)
        z = reparameterize(mu, ls, rng)
        nll = vae.nll(xin, vae.decode(z), constant).mean()
        kl = gaussian_kl(mu, ls).mean()
        total = total + (nll * w.lam(m) + kl) * w.a(m)
        parts[f"nll_{m}"], parts[f"kl_{m}"] = nll.item(), kl.item()
        means[m] = mu.data
    keep = np.ones(len(present), dtype=bool)
    if dropout > 0 and len(present) > 1:
        keep = rng.random(len(present)) >= dropout
        if not keep.any():
            keep[rng.integers(len(present))] = True
    kept = [m for m, k in zip(present, keep) if k]
    bsz = len(next(iter(means.values())))
    c = np.zeros((bsz, LATENT * len(MODALITIES)))
    for m in kept:
        c[:, _slot(m)] = means[m]
    h = model.top["enc"](Tensor(c))
    mu_p, ls_p = model.top["mu"](h), model.top["logsig"](h)
    c_hat = model.top["dec"](reparameterize(mu_p, ls_p, rng))
    kl_top = gaussian_kl(mu_p, ls_p).mean()
    rec_top = sum(ad.square(c_hat[:, _slot(m)] - c[:, _slot(m)]).sum(axis=-1) * 0.5 for m in kept).mean()
    cross = sum(ad.square(c_hat[:, _slot(m)] - means[m]).sum(axis=-1) * (0.5 * w.gamma(m))
                for m in present).mean()
    parts.update(kl_top=kl_top.item(), rec_top=rec_top.item(), cross=cross.item())
    _check_finite(parts)
    return total + kl_top * w.beta + rec_top * w.delta + cross, parts


def batch_of(ds: data.Dataset, idx) -> dict:
    return {"T": ds.trajectories[idx].reshape(len(idx), TRAJ_DIM), "S": ds.labels[idx],
            "I": ds.images[idx]}


def model_loss(model: Model, batch: dict, rng: np.random.Generator, dropout: float = 0.3):
    if model.kind == "cvae":
        return cvae_loss(model, batch["T"], batch["S"], rng)
    if model.kind == "muse":
        return muse_loss(model, batch, rng, dropout)
    a, b = model.modalities
    return avae_loss(model, batch[a], batch[b], rng)


# --- inference -------------------------------------------------------------------------

@dataclass
class Latent:
    """Encoded sub-commands: ``z`` (B, d); ``cond`` carries CVAE labels."""

    kind: str
    z: np.ndarray
    cond: np.ndarray | None = None


def _check_subset(model: Model, inputs: dict) -> frozenset:
    avail = frozenset(m for m, x in inputs.items() if x is not None)
    if avail not in model.supported_sets():
        sets = ", ".join("{" + ",".join(sorted(s)) + "}" for s in model.supported_sets())
        raise ModelError(f"{model.kind} cannot encode from {sorted(avail)}; supported sets: {sets}")
    return avail


def top_posterior(model: Model, means: dict[str, np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    bsz = len(next(iter(means.values())))
    c = np.zeros((bsz, LATENT * len(MODALITIES)))
    for m, mu in means.items():
        c[:, _slot(m)] = mu
    with no_grad():
        h = model.top["enc"](Tensor(c))
        return model.top["mu"](h).data, model.top["logsig"](h).data


def modality_posterior(model: Model, m: str, x) -> tuple[np.ndarray, np.ndarray]:
    with no_grad():
        mu, ls = model.vaes[m].posterior(_as_input(m, x))
    return mu.data, ls.data


def encode(model: Model, inputs: dict, sample: bool = False,
           rng: np.random.Generator | None = None) -> Latent:
    """Map available modalities ({'T','S','I'} -> batch) to the model's latent.

    Returns posterior means unless ``sample`` is set. For the CVAE the label
    alone gives the prior mean (zero) and is carried along as conditioning.
    """
    avail = _check_subset(model, inputs)
    if sample and rng is None:
        raise ModelError("sampling mode needs an rng")

    def draw(mu, ls):
        return mu + np.exp(np.clip(ls, -10, 10)) * rng.standard_normal(mu.shape) if sample else mu

    if model.kind == "cvae":
        labels = np.asarray(inputs["S"])
        if "T" in avail:
            xt = _as_input("T", inputs["T"])
            with no_grad():
                mu, ls = model.vaes["T"].posterior(ad.concat([xt, Tensor(one_hot(labels))], axis=1))
            return Latent("cvae", draw(mu.data, ls.data), labels)
        z = np.zeros((len(labels), LATENT))
        return Latent("cvae", draw(z, np.zeros_like(z)), labels)
    if model.kind == "muse":
        means = {m: modality_posterior(model, m, inputs[m])[0] for m in sorted(avail)}
        return Latent("muse", draw(*top_posterior(model, means)))
    (m,) = avail
    return Latent(model.kind, draw(*modality_posterior(model, m, inputs[m])))


def decode_modality_latent(model: Model, latent: Latent, m: str) -> np.ndarray:
    """Modality-``m`` latent (B, 16) implied by ``latent``."""
    z = np.atleast_2d(np.asarray(latent.z, dtype=np.float64))
    if model.kind == "muse":
        if z.shape[1] != TOP_LATENT:
            raise ModelError(f"muse latent must be {TOP_LATENT}-d, got {z.shape[1]}")
        with no_grad():
            return model.top["dec"](Tensor(z)).data[:, _slot(m)]
    if z.shape[1] != LATENT:
        raise ModelError(f"{model.kind} latent must be {LATENT}-d, got {z.shape[1]}")
    return z


def decode_trajectory(model: Model, latent: Latent) -> np.ndarray:
    """Decoded trajectory means, shape (B, 100, 2)."""
    zt = decode_modality_latent(model, latent, "T")
    with no_grad():
        if model.kind == "cvae":
            zt = ad.concat([Tensor(zt), Tensor(one_hot(latent.cond))], axis=1)
        out = model.vaes["T"].decode(zt if isinstance(zt, Tensor) else Tensor(zt)).data
    return out.reshape(len(out), data.N_POINTS, 2)


def decode(model: Model, latent: Latent, m: str) -> np.ndarray:
    """Decoder output for modality ``m``: trajectory means, label logits or image logits."""
    if m == "T":
        return decode_trajectory(model, latent)
    if m not in model.vaes:
        raise ModelError(f"{model.kind} has no {m} decoder")
    with no_grad():
        return model.vaes[m].decode(Tensor(decode_modality_latent(model, latent, m))).data


def labels_to_trajectories(model: Model, labels) -> np.ndarray:
    return decode_trajectory(model, encode(model, {"S": np.asarray(labels)}))


def images_to_trajectories(model: Model, images) -> np.ndarray:
    return decode_trajectory(model, encode(model, {"I": np.asarray(images)}))


# --- training -------------------------------------------------------------------------

@dataclass
class TrainConfig:
    steps: int = 5000
    batch_size: int | None = None  # None: published default for the model kind
    lr: float = 1e-4
    seed: int = 0
    dropout: float = 0.3
    log_every: int = 50


@dataclass
class TrainState:
    adam: AdamState
    rng: np.random.Generator
    history: list[dict] = field(default_factory=list)
    order: np.ndarray | None = None  # current epoch's sample order
    pos: int = 0

    @property
    def step(self) -> int:
        return self.adam.step


def new_train_state(cfg: TrainConfig) -> TrainState:
    return TrainState(AdamState(lr=cfg.lr), np.random.default_rng(cfg.seed))


def train(model: Model, ds: data.Dataset, cfg: TrainConfig, state: TrainState | None = None,
          on_log=None) -> TrainState:
    """Run ``cfg.steps`` Adam steps on shuffled minibatches; resumable via ``state``."""
    state = state or new_train_state(cfg)
    bsz = cfg.batch_size or DEFAULT_BATCH[model.kind]
    params = model.parameters()
    n = len(ds)
    if n == 0:
        raise ModelError("cannot train on an empty dataset")
    if state.order is None or len(state.order) != n:
        state.order, state.pos = state.rng.permutation(n), 0
    acc, acc_n = 0.0, 0
    for _ in range(cfg.steps):
        if state.pos + min(bsz, n) > n:
            state.order, state.pos = state.rng.permutation(n), 0
        idx = state.order[state.pos:state.pos + min(bsz, n)]
        state.pos += len(idx)
        for p in params.values():
            p.grad = None
        loss, parts = model_loss(model, batch_of(ds, idx), state.rng, cfg.dropout)
        loss.backward()
        adam_step(state.adam, params)
        acc += loss.item()
        acc_n += 1
        if state.step % cfg.log_every == 0:
            rec = {"step": state.step, "loss": acc / acc_n, **parts}
            state.history.append(rec)
            acc, acc_n = 0.0, 0
            if on_log:
                on_log(rec)
    return state


# --- persistence -------------------------------------------------------------------------

def sidecar_path(path) -> Path:
    return Path(str(path) + ".json")


def save_model(path, model: Model, state: TrainState | None = None) -> None:
    """Checkpoint (networks + optional Adam moments) plus a JSON sidecar."""
    meta = {"kind": model.kind, "profile": model.profile, "weights": asdict(model.weights)}
    arrays = {}
    if state is not None:
        meta["train"] = {"step": state.adam.step, "lr": state.adam.lr, "pos": state.pos,
                         "rng": state.rng.bit_generator.state, "history": state.history}
        if state.order is not None:
            arrays["train.order"] = state.order.astype(np.int64)
        for k in state.adam.m:
            arrays[f"adam.m.{k}"] = state.adam.m[k]
            arrays[f"adam.v.{k}"] = state.adam.v[k]
    checkpoint.save(path, model.networks(), meta, arrays)
    side = {"kind": model.kind, "profile": model.profile, "weights": asdict(model.weights),
            "step": state.adam.step if state else 0}
    sidecar_path(path).write_text(json.dumps(side, indent=2, sort_keys=True) + "\n")


def load_model(path) -> tuple[Model, TrainState | None]:
    nets, meta, arrays = checkpoint.load(path)
    kind, profile = meta["kind"], meta["profile"]
    weights = LossWeights(**meta["weights"])
    vaes = {}
    for m in MODALITIES:
        if f"{m}.enc" in nets:
            vaes[m] = ModalityVAE(m, {k: nets[f"{m}.{k}"] for k in ("enc", "mu", "logsig", "dec")})
    top = {k: nets[f"top.{k}"] for k in ("enc", "mu", "logsig", "dec") if f"top.{k}" in nets}
    model = Model(kind, profile, weights, vaes, top)
    state = None
    if "train" in meta:
        tr = meta["train"]
        adam = AdamState(lr=tr["lr"], step=tr["step"])
        order = arrays.pop("train.order", None)
        for name, arr in arrays.items():
            _, which, pname = name.split(".", 2)
            (adam.m if which == "m" else adam.v)[pname] = arr.copy()
        rng = np.random.default_rng()
        rng.bit_generator.state = tr["rng"]
        state = TrainState(adam, rng, list(tr["history"]),
                           None if order is None else order.astype(np.int64), tr.get("pos", 0))
    return model, state
