"""Small reverse-mode autodiff engine on numpy arrays."""

from . import functional
from .functional import ShapeError
from .gradcheck import grad_check
from .losses import loss_deep_l1, loss_mae, loss_refine_l2
from .nn import Conv1d, Dropout, Linear, Module, parameter
from .optim import Adam, AdamState, adam_step
from .tensor import Tensor, as_tensor, is_grad_enabled, no_grad

__all__ = [
    "Adam", "AdamState", "Conv1d", "Dropout", "Linear", "Module", "ShapeError", "Tensor",
    "adam_step", "as_tensor", "functional", "grad_check", "is_grad_enabled", "loss_deep_l1",
    "loss_mae", "loss_refine_l2", "no_grad", "parameter",
]
