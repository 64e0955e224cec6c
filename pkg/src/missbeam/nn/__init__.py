from .gradcheck import grad_check
from .layers import Conv1d, Dense, Lstm, Parameter, ReLU, sigmoid
from .losses import mse_grad, mse_loss
from .optim import Adam

__all__ = [
    "Adam",
    "Conv1d",
    "Dense",
    "Lstm",
    "Parameter",
    "ReLU",
    "grad_check",
    "mse_grad",
    "mse_loss",
    "sigmoid",
]
