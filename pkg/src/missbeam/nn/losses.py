"""Mean-squared-error loss and its gradient."""

import numpy as np


def mse_loss(predicted, target) -> float:
    """(1/n) * sum((target - predicted)^2) over all elements."""
    p = np.asarray(predicted, dtype=np.float64)
    t = np.asarray(target, dtype=np.float64)
    if p.shape != t.shape:
        raise ValueError(f"shape mismatch: predicted {p.shape} vs target {t.shape}")
    d = t - p
    return float(np.mean(d * d))


def mse_grad(predicted, target) -> np.ndarray:
    """d(mse)/d(predicted) = 2 * (predicted - target) / n."""
    p = np.asarray(predicted, dtype=np.float64)
    t = np.asarray(target, dtype=np.float64)
    if p.shape != t.shape:
        raise ValueError(f"shape mismatch: predicted {p.shape} vs target {t.shape}")
    return 2.0 * (p - t) / p.size
