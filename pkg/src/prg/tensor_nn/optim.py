from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import _kernels
from .autodiff import Tensor, as_tensor, clamp, exp

LOG_SIGMA_RANGE = (-10.0, 10.0)


@dataclass
class AdamState:
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(state: AdamState, params: dict[str, Tensor], grads: dict[str, np.ndarray] | None = None) -> None:
    """In-place Adam update with bias correction. Grads default to ``param.grad``."""
    if state.lr <= 0:
        raise ValueError(f"learning rate must be positive, got {state.lr}")
    if grads is None:
        grads = {k: (p.grad if p.grad is not None else np.zeros_like(p.data)) for k, p in params.items()}
    for name, g in grads.items():
        if not np.isfinite(np.sum(g)):
            raise FloatingPointError(f"non-finite gradient for parameter {name!r}")
        if g.shape != params[name].shape:
            raise ValueError(f"gradient shape {g.shape} != parameter shape {params[name].shape} for {name!r}")

    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    for name, p in params.items():
        g = np.ascontiguousarray(grads[name], dtype=np.float64)
        if name not in state.m:
            state.m[name] = np.zeros_like(p.data)
            state.v[name] = np.zeros_like(p.data)
        if not p.data.flags.c_contiguous:
            p.data = np.ascontiguousarray(p.data)
        _kernels.adam_update(p.data.reshape(-1), g.reshape(-1), state.m[name].reshape(-1),
                             state.v[name].reshape(-1), state.lr, b1, b2, state.eps,
                             1 - b1 ** t, 1 - b2 ** t)


def reparameterize(mu: Tensor, log_sigma: Tensor, rng: np.random.Generator) -> Tensor:
    mu, log_sigma = as_tensor(mu), as_tensor(log_sigma)
    if mu.shape != log_sigma.shape:
        raise ValueError(f"mu {mu.shape} and log_sigma {log_sigma.shape} differ")
    eps = rng.standard_normal(mu.shape)
    return mu + exp(clamp(log_sigma, *LOG_SIGMA_RANGE)) * eps
