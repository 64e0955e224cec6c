"""Finite-difference verification of reverse-mode gradients.

Works with any object exposing forward(*inputs) -> prediction,
backward(grad_wrt_prediction), and parameters() -> [(name, Parameter)] —
bare layers and assembled models alike. The check perturbs a random
subsample of parameter coordinates and compares central differences of the
MSE loss against the accumulated analytic gradients.
"""

import numpy as np

from .losses import mse_grad, mse_loss

# Relative error uses an absolute floor so coordinates whose true gradient is
# essentially zero do not blow up the ratio.
GRAD_FLOOR = 1e-6


def grad_check(model, inputs, target, h=1e-5, rng=None, max_coords=16) -> float:
    """Return the worst relative error between analytic and numeric gradients."""
    if h <= 0:
        raise ValueError("step h must be positive")
    if rng is None:
        rng = np.random.default_rng(0)
    if not isinstance(inputs, (tuple, list)):
        inputs = (inputs,)

    for _, p in model.parameters():
        p.grad[...] = 0.0
    pred = model.forward(*inputs)
    model.backward(mse_grad(pred, target))
    analytic = {name: p.grad.copy() for name, p in model.parameters()}

    worst = 0.0
    for name, p in model.parameters():
        flat = p.value.reshape(-1)
        n = flat.size
        coords = rng.choice(n, size=min(n, max_coords), replace=False)
        for j in coords:
            saved = flat[j]
            flat[j] = saved + h
            loss_plus = mse_loss(model.forward(*inputs), target)
            flat[j] = saved - h
            loss_minus = mse_loss(model.forward(*inputs), target)
            flat[j] = saved
            numeric = (loss_plus - loss_minus) / (2.0 * h)
            a = analytic[name].reshape(-1)[j]
            denom = max(abs(a), abs(numeric), GRAD_FLOOR)
            worst = max(worst, abs(a - numeric) / denom)
    # restore a consistent forward cache for the unperturbed parameters
    model.forward(*inputs)
    return worst
