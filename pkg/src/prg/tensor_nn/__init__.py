from .autodiff import Tensor, no_grad
from .layers import LayerSpec, Network, ShapeError, forward
from .optim import AdamState, adam_step, reparameterize

__all__ = [
    "Tensor",
    "no_grad",
    "LayerSpec",
    "Network",
    "ShapeError",
    "forward",
    "AdamState",
    "adam_step",
    "reparameterize",
]
