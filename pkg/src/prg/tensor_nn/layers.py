"""Layer vocabulary for the encoders/decoders and a sequential container."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor

KINDS = ("Dense", "Conv2d", "ConvTranspose2d", "LeakyRelu", "Embedding", "Flatten", "Reshape")


class ShapeError(ValueError):
    pass


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    n_in: int = 0
    n_out: int = 0
    kernel: int = 0
    stride: int = 1
    padding: int = 0
    output_padding: int = 0
    shape: tuple[int, ...] = field(default=())

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown layer kind {self.kind!r}")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["shape"] = list(self.shape)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "LayerSpec":
        d = dict(d)
        d["shape"] = tuple(d.get("shape", ()))
        return cls(**d)


def dense(n_in: int, n_out: int) -> LayerSpec:
    return LayerSpec("Dense", n_in, n_out)


def conv(n_in: int, n_out: int) -> LayerSpec:
    return LayerSpec("Conv2d", n_in, n_out, kernel=4, stride=2, padding=1)


def deconv(n_in: int, n_out: int, output_padding: int = 0) -> LayerSpec:
    return LayerSpec("ConvTranspose2d", n_in, n_out, kernel=4, stride=2, padding=1,
                     output_padding=output_padding)


def lrelu() -> LayerSpec:
    return LayerSpec("LeakyRelu")


def embedding(n_classes: int, dim: int) -> LayerSpec:
    return LayerSpec("Embedding", n_classes, dim)


def flatten() -> LayerSpec:
    return LayerSpec("Flatten")


def unflatten(*shape: int) -> LayerSpec:
    return LayerSpec("Reshape", shape=tuple(shape))


def init_params(spec: LayerSpec, rng: np.random.Generator) -> dict[str, Tensor]:
    # PyTorch-style uniform fan-in init
    if spec.kind == "Dense":
        bound = 1.0 / np.sqrt(spec.n_in)
        return {"weight": Tensor(rng.uniform(-bound, bound, (spec.n_in, spec.n_out)), True),
                "bias": Tensor(rng.uniform(-bound, bound, spec.n_out), True)}
    if spec.kind == "Conv2d":
        bound = 1.0 / np.sqrt(spec.n_in * spec.kernel ** 2)
        k = spec.kernel
        return {"weight": Tensor(rng.uniform(-bound, bound, (spec.n_out, spec.n_in, k, k)), True),
                "bias": Tensor(rng.uniform(-bound, bound, spec.n_out), True)}
    if spec.kind == "ConvTranspose2d":
        bound = 1.0 / np.sqrt(spec.n_out * spec.kernel ** 2)
        k = spec.kernel
        return {"weight": Tensor(rng.uniform(-bound, bound, (spec.n_in, spec.n_out, k, k)), True),
                "bias": Tensor(rng.uniform(-bound, bound, spec.n_out), True)}
    if spec.kind == "Embedding":
        return {"weight": Tensor(rng.standard_normal((spec.n_in, spec.n_out)), True)}
    return {}


def apply_layer(spec: LayerSpec, params: dict[str, Tensor], x) -> Tensor:
    kind = spec.kind
    if kind == "Dense":
        return x @ params["weight"] + params["bias"]
    if kind == "LeakyRelu":
        return ad.leaky_relu(x)
    if kind == "Conv2d":
        return ad.conv2d(x, params["weight"], params["bias"], spec.stride, spec.padding)
    if kind == "ConvTranspose2d":
        return ad.conv_transpose2d(x, params["weight"], params["bias"], spec.stride,
                                   spec.padding, spec.output_padding)
    if kind == "Embedding":
        return ad.embedding_lookup(params["weight"], x)
    if kind == "Flatten":
        return x.reshape(x.shape[0], -1)
    if kind == "Reshape":
        return x.reshape((x.shape[0],) + spec.shape)
    raise ValueError(kind)


def _check_input(i: int, spec: LayerSpec, x) -> None:
    shape = np.shape(x.data if isinstance(x, Tensor) else x)
    want = None
    if spec.kind == "Dense" and (len(shape) != 2 or shape[1] != spec.n_in):
        want = f"(batch, {spec.n_in})"
    elif spec.kind in ("Conv2d", "ConvTranspose2d") and (len(shape) != 4 or shape[1] != spec.n_in):
        want = f"(batch, {spec.n_in}, H, W)"
    elif spec.kind == "Embedding":
        arr = np.asarray(x)
        if arr.ndim != 1 or not np.issubdtype(arr.dtype, np.integer):
            want = "(batch,) integer labels"
        elif arr.size and (arr.min() < 0 or arr.max() >= spec.n_in):
            want = f"labels in [0, {spec.n_in})"
    elif spec.kind == "Reshape" and int(np.prod(shape[1:])) != int(np.prod(spec.shape)):
        want = f"(batch, {int(np.prod(spec.shape))} elements)"
    if want is not None:
        raise ShapeError(f"layer {i} ({spec.kind}) expects input {want}, got shape {shape}")


class Network:
    """Sequential stack of layers with named parameters."""

    def __init__(self, specs: list[LayerSpec], rng: np.random.Generator | None = None):
        self.specs = list(specs)
        rng = rng if rng is not None else np.random.default_rng(0)
        self.layer_params = [init_params(s, rng) for s in self.specs]

    def __call__(self, x) -> Tensor:
        for i, (spec, params) in enumerate(zip(self.specs, self.layer_params)):
            _check_input(i, spec, x)
            x = apply_layer(spec, params, x)
        return x

    def named_parameters(self, prefix: str = "") -> dict[str, Tensor]:
        out = {}
        for i, params in enumerate(self.layer_params):
            for k, t in params.items():
                out[f"{prefix}{i}.{k}"] = t
        return out


def forward(network: Network, x) -> Tensor:
    return network(x)
