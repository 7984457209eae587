"""Importance-weighted log-likelihoods and cross-modal coherence.

An estimate of log p(x_target | x_cond) draws K latents from a Gaussian
proposal q(z | x_cond) and averages p(x_target | z) p(z) / q(z | x_cond) in
log space. With x_cond = x_target this is the usual marginal estimate.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import data, models as M
from .tensor_nn import Tensor, no_grad
from .tensor_nn import autodiff as ad

K_MARGINAL = 1000
K_CONDITIONAL = 5000
# rows pushed through a decoder at once
CHUNK_ROWS = 20000

NOTE = ("Estimates come from a desk-scale synthetic fixture; absolute values are not "
        "comparable to published tables, only orderings and magnitudes are meaningful.")


class EvalError(ValueError):
    pass


def logsumexp(a, axis=-1) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    m = np.max(a, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.sum(np.exp(a - m), axis=axis, keepdims=True)) + m
    return np.squeeze(out, axis=axis)


def log_std_normal(z: np.ndarray) -> np.ndarray:
    return -0.5 * np.sum(z**2 + M.LOG_2PI, axis=-1)


class IWTarget:
    """Interface for importance-weighted estimation.

    ``proposal(x_cond)`` gives diagonal Gaussian (mu, log_sigma), each (B, d);
    ``log_lik(x_target, z)`` gives log p(x_target[b] | z[b, k]) as (B, k) for
    z of shape (B, k, d). The latent prior is N(0, I).
    """

    def proposal(self, x_cond):
        raise NotImplementedError

    def log_lik(self, x_target, z):
        raise NotImplementedError


@dataclass
class LinearGaussian(IWTarget):
    """z ~ N(0, I), x | z ~ N(W z + b, s^2 I), with a deliberately imperfect proposal."""

    W: np.ndarray
    b: np.ndarray
    s: float
    proposal_scale: float = 1.5
    proposal_shift: float = 0.1

    def marginal(self, x) -> np.ndarray:
        """Exact log p(x) under N(b, W W^T + s^2 I)."""
        x = np.atleast_2d(x)
        cov = self.W @ self.W.T + self.s**2 * np.eye(len(self.b))
        sign, logdet = np.linalg.slogdet(cov)
        r = x - self.b
        maha = np.sum(r * np.linalg.solve(cov, r.T).T, axis=1)
        return -0.5 * (maha + logdet + len(self.b) * M.LOG_2PI)

    def posterior(self, x):
        d = self.W.shape[1]
        prec = np.eye(d) + self.W.T @ self.W / self.s**2
        cov = np.linalg.inv(prec)
        mu = (np.atleast_2d(x) - self.b) @ self.W @ cov.T / self.s**2
        return mu, cov

    def proposal(self, x_cond):
        mu, cov = self.posterior(x_cond)
        sd = np.sqrt(np.diag(cov)) * self.proposal_scale
        return mu + self.proposal_shift, np.broadcast_to(np.log(sd), mu.shape).copy()

    def log_lik(self, x_target, z):
        mean = z @ self.W.T + self.b
        r = np.atleast_2d(x_target)[:, None, :] - mean
        n = len(self.b)
        return -0.5 * (np.sum(r**2, axis=-1) / self.s**2 + n * np.log(self.s**2) + n * M.LOG_2PI)


def iw_values(target: IWTarget, x_target, x_cond, K: int, rng: np.random.Generator) -> np.ndarray:
    """Per-sample importance-weighted estimates, shape (B,)."""
    if int(K) != K or K <= 0:
        raise EvalError(f"number of importance samples must be a positive integer, got {K}")
    mu, ls = target.proposal(x_cond)
    ls = np.clip(ls, -10.0, 10.0)
    bsz, d = mu.shape
    chunk = max(1, min(K, CHUNK_ROWS // max(bsz, 1)))
    acc = np.full(bsz, -np.inf)
    done = 0
    while done < K:
        k = min(chunk, K - done)
        eps = rng.standard_normal((bsz, k, d))
        z = mu[:, None] + np.exp(ls)[:, None] * eps
        log_q = -0.5 * np.sum(eps**2 + 2 * ls[:, None] + M.LOG_2PI, axis=-1)
        log_w = target.log_lik(x_target, z) + log_std_normal(z) - log_q
        acc = np.logaddexp(acc, logsumexp(log_w, axis=1))
        done += k
    return acc - np.log(K)


# --- adapters for the trained models --------------------------------------------------

def _flat_decode(net, z: np.ndarray) -> np.ndarray:
    with no_grad():
        return net(Tensor(z.reshape(-1, z.shape[-1]))).data


@dataclass
class ModelTarget(IWTarget):
    """log p(x_target | x_cond) for a trained model; ``cond`` names the proposal modalities."""

    model: M.Model
    target: str
    cond: tuple

    def __post_init__(self):
        kind = self.model.kind
        if kind == "cvae":
            if (self.target, tuple(self.cond)) != ("T", ("S",)):
                raise EvalError("the cvae only supports log p(x_T | x_S)")
        elif self.target not in self.model.vaes or any(m not in self.model.vaes for m in self.cond):
            raise EvalError(f"{kind} has no {self.target}|{','.join(self.cond)} pair")
        elif kind != "muse" and len(self.cond) != 1:
            raise EvalError(f"{kind} proposals come from a single modality")

    def proposal(self, x_cond):
        model = self.model
        if model.kind == "cvae":
            xt, labels = x_cond
            with no_grad():
                inp = ad.concat([M._as_input("T", xt), Tensor(M.one_hot(labels))], axis=1)
                mu, ls = model.vaes["T"].posterior(inp)
            return mu.data, ls.data
        if model.kind == "muse":
            means = {m: M.modality_posterior(model, m, x_cond[m])[0] for m in self.cond}
            return M.top_posterior(model, means)
        (m,) = self.cond
        return M.modality_posterior(model, m, x_cond[m])

    def log_lik(self, x_target, z):
        model, m = self.model, self.target
        bsz, k, _ = z.shape
        if model.kind == "cvae":
            xt, labels = x_target
            cond = np.repeat(M.one_hot(labels), k, axis=0)
            out = _flat_decode(model.vaes["T"].dec, np.concatenate([z.reshape(bsz * k, -1), cond], axis=1))
            return -M.nll_numpy("T", np.asarray(xt).reshape(bsz, 1, -1), out.reshape(bsz, k, -1))
        if model.kind == "muse":
            z = _flat_decode(model.top["dec"], z)[:, M._slot(m)].reshape(bsz, k, -1)
        out = _flat_decode(model.vaes[m].dec, z)
        x = np.asarray(x_target)
        if m == "T":
            return -M.nll_numpy("T", x.reshape(bsz, 1, -1), out.reshape(bsz, k, -1))
        if m == "S":
            return -M.nll_numpy("S", np.repeat(x[:, None], k, axis=1), out.reshape(bsz, k, -1))
        return -M.nll_numpy("I", x[:, None], out.reshape(bsz, k, data.IMG, data.IMG))


def _inputs(ds: data.Dataset) -> dict:
    return {"T": ds.trajectories.reshape(len(ds), -1), "S": ds.labels, "I": ds.images}


def iw_marginal_ll(model, x, K: int = K_MARGINAL, rng: np.random.Generator | None = None,
                   modality: str = "T") -> float:
    """Mean importance-weighted log p(x) over a batch.

    ``model`` is a trained :class:`models.Model` (``x`` a batch of ``modality``)
    or any :class:`IWTarget`.
    """
    rng = rng or np.random.default_rng(0)
    if isinstance(model, IWTarget):
        return float(np.mean(iw_values(model, x, x, K, rng)))
    return float(np.mean(iw_values(ModelTarget(model, modality, (modality,)), x, {modality: x}, K, rng)))


def iw_conditional_ll(model: M.Model, x_target, x_cond, K: int = K_CONDITIONAL,
                      rng: np.random.Generator | None = None, target: str = "T",
                      cond: str = "S") -> float:
    """Mean importance-weighted log p(x_target | x_cond) with proposal q(z | x_cond)."""
    rng = rng or np.random.default_rng(0)
    t = ModelTarget(model, target, (cond,))
    if model.kind == "cvae":
        pair = (x_target, x_cond)
        return float(np.mean(iw_values(t, pair, pair, K, rng)))
    return float(np.mean(iw_values(t, x_target, {cond: x_cond}, K, rng)))


# --- report --------------------------------------------------------------------------

QUANTITIES = {
    "cvae": [("T", "S")],
    "avae-ts": [("T", None), ("S", None), ("T", "S"), ("S", "T")],
    "avae-ti": [("T", None), ("I", None), ("T", "I"), ("I", "T")],
    "muse": [("T", None), ("S", None), ("I", None), ("T", "S"), ("T", "I"), ("S", "T"), ("I", "T")],
}


def quantity_name(target: str, cond: str | None) -> str:
    return f"log p(x_{target})" if cond is None else f"log p(x_{target}|x_{cond})"


def quantity_values(model: M.Model, ds: data.Dataset, target: str, cond: str | None, K: int,
                    rng: np.random.Generator) -> np.ndarray:
    """Per-sample estimates of one quantity on ``ds``."""
    x = _inputs(ds)
    if model.kind == "cvae":
        pair = (x["T"], x["S"])
        return iw_values(ModelTarget(model, "T", ("S",)), pair, pair, K, rng)
    c = target if cond is None else cond
    return iw_values(ModelTarget(model, target, (c,)), x[target], {c: x[c]}, K, rng)


@dataclass
class LikelihoodReport:
    kind: str
    n_samples: int
    rows: dict[str, dict] = field(default_factory=dict)  # name -> {mean, se, K}
    note: str = NOTE

    def add(self, name: str, values: np.ndarray, K: int) -> None:
        values = np.asarray(values, dtype=np.float64)
        se = float(values.std(ddof=1) / np.sqrt(len(values))) if len(values) > 1 else 0.0
        self.rows[name] = {"mean": float(values.mean()), "se": se, "K": int(K)}

    def to_dict(self) -> dict:
        return {"kind": self.kind, "n_samples": self.n_samples, "note": self.note, "quantities": self.rows}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "LikelihoodReport":
        return cls(d["kind"], d["n_samples"], dict(d["quantities"]), d.get("note", NOTE))

    def to_table(self) -> str:
        names = list(self.rows)
        width = max(len(n) for n in names + ["quantity"])
        lines = [f"model {self.kind}, {self.n_samples} test samples",
                 f"{'quantity':<{width}}  {'mean':>10}  {'se':>8}  {'K':>5}"]
        for n in names:
            r = self.rows[n]
            lines.append(f"{n:<{width}}  {r['mean']:>10.2f}  {r['se']:>8.2f}  {r['K']:>5d}")
        lines.append(self.note)
        return "\n".join(lines) + "\n"

    def save(self, stem) -> tuple[Path, Path]:
        stem = Path(stem)
        js, txt = stem.with_suffix(".json"), stem.with_suffix(".txt")
        js.write_text(self.to_json())
        txt.write_text(self.to_table())
        return js, txt


def likelihood_report(model: M.Model, ds: data.Dataset, k_marginal: int = K_MARGINAL,
                      k_conditional: int = K_CONDITIONAL, seed: int = 0) -> LikelihoodReport:
    if len(ds) == 0:
        raise EvalError("empty evaluation set")
    rng = np.random.default_rng(seed)
    report = LikelihoodReport(model.kind, len(ds))
    for target, cond in QUANTITIES[model.kind]:
        k = k_marginal if cond is None else k_conditional
        report.add(quantity_name(target, cond), quantity_values(model, ds, target, cond, k, rng), k)
    return report


def validate_report(d: dict) -> None:
    """Raise EvalError unless ``d`` has the report JSON layout."""
    for key, typ in (("kind", str), ("n_samples", int), ("note", str), ("quantities", dict)):
        if not isinstance(d.get(key), typ):
            raise EvalError(f"report field {key!r} missing or not {typ.__name__}")
    for name, row in d["quantities"].items():
        if set(row) != {"mean", "se", "K"}:
            raise EvalError(f"quantity {name!r} must have exactly mean, se, K")
        if not isinstance(row["K"], int) or row["K"] <= 0:
            raise EvalError(f"quantity {name!r} has invalid K")


# --- coherence -------------------------------------------------------------------------

def cross_modal_accuracy(model: M.Model, ds: data.Dataset, source: str | None = None,
                         centroids: dict | None = None, sample: bool = False,
                         rng: np.random.Generator | None = None) -> float:
    """Fraction of samples whose trajectory generated from ``source`` (S or I) is
    nearest-centroid classified as the true label.

    Centroids default to the class means of ``ds`` itself.
    """
    if len(ds) == 0:
        raise EvalError("empty evaluation set")
    if source is None:
        source = "S" if "S" in model.modalities else "I"
    if source not in ("S", "I"):
        raise EvalError(f"source modality must be S or I, got {source!r}")
    cents = centroids if centroids is not None else data.centroids(ds)
    x = ds.labels if source == "S" else ds.images
    lat = M.encode(model, {source: x}, sample=sample, rng=rng)
    pred = data.nearest_centroid(M.decode_trajectory(model, lat), cents)
    return float(np.mean(pred == ds.labels))
