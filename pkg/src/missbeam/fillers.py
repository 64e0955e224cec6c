"""Model-based estimators for missing beams: moving average and virtual beam."""

from dataclasses import dataclass

import numpy as np

from .geometry import BeamGeometry, BeamVector, forward_beams


@dataclass(frozen=True)
class FillerContext:
    """Measured-beam history (rows oldest first, most recent last) plus the
    previous velocity estimate used by the virtual-beam filler.

    history holds measured values only; callers must not feed previously
    filled beams back in.
    """

    history: np.ndarray
    window: int = 6
    last_velocity: np.ndarray | None = None

    def __post_init__(self):
        hist = np.asarray(self.history, dtype=np.float64)
        if hist.ndim != 2 or hist.shape[1] != 4:
            raise ValueError(f"history must have shape (m, 4), got {hist.shape}")
        if self.window < 1:
            raise ValueError(f"window must be >= 1, got {self.window}")
        object.__setattr__(self, "history", hist)
        if self.last_velocity is not None:
            v = np.asarray(self.last_velocity, dtype=np.float64).reshape(3)
            object.__setattr__(self, "last_velocity", v)


def average_fill(ctx: FillerContext, missing) -> BeamVector:
    """Fill each missing beam with the mean of its last `window` measured values.

    Errors out rather than silently shrinking the window when history is too
    short or contains invalid values inside the window.
    """
    beams = tuple(sorted(set(int(b) for b in missing)))
    n = ctx.history.shape[0]
    if n < ctx.window:
        raise ValueError(
            f"insufficient history: {n} samples, window needs {ctx.window}"
        )
    tail = ctx.history[n - ctx.window :]
    cols = [b - 1 for b in beams]
    if not np.all(np.isfinite(tail[:, cols])):
        raise ValueError("history window contains invalid values for a missing beam")
    return BeamVector(values=tail[:, cols].mean(axis=0), present=beams)


def virtual_beam_fill(geom: BeamGeometry, last_velocity, missing) -> BeamVector:
    """Fill each missing beam with the projection of the previous velocity
    estimate onto that beam's direction."""
    if last_velocity is None:
        raise ValueError("virtual-beam filler requires a previous velocity estimate")
    return forward_beams(geom, last_velocity, present=missing)
