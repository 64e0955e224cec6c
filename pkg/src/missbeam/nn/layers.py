"""Minimal dense / 1-D convolution / LSTM layers with hand-written backprop.

Everything runs unbatched on float64 arrays: dense layers see 1-D feature
vectors, conv layers see (channels, length), the LSTM sees (steps, features).
Each layer caches what its backward pass needs during forward; gradients
accumulate into Parameter.grad until zero_grad().
"""

import numpy as np


class Parameter:
    """A weight array paired with its gradient accumulator."""

    def __init__(self, value: np.ndarray):
        self.value = np.asarray(value, dtype=np.float64)
        self.grad = np.zeros_like(self.value)

    @property
    def shape(self):
        return self.value.shape


def _uniform_init(rng, shape, fan_in):
    # scaled-uniform init keeps pre-activations in the responsive region
    bound = 1.0 / np.sqrt(max(fan_in, 1))
    return rng.uniform(-bound, bound, size=shape)


def sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


class Dense:
    """y = x @ W + b on a 1-D input."""

    def __init__(self, in_features: int, out_features: int, rng):
        self.W = Parameter(_uniform_init(rng, (in_features, out_features), in_features))
        self.b = Parameter(np.zeros(out_features))
        self._x = None

    def forward(self, x):
        self._x = x
        return x @ self.W.value + self.b.value

    def backward(self, dy):
        if self._x is None:
            raise RuntimeError("backward called before forward")
        self.W.grad += np.outer(self._x, dy)
        self.b.grad += dy
        return dy @ self.W.value.T

    def parameters(self):
        return [("W", self.W), ("b", self.b)]


class ReLU:
    def __init__(self):
        self._mask = None

    def forward(self, x):
        self._mask = x > 0
        return np.where(self._mask, x, 0.0)

    def backward(self, dy):
        if self._mask is None:
            raise RuntimeError("backward called before forward")
        return np.where(self._mask, dy, 0.0)

    def parameters(self):
        return []


class Conv1d:
    """Cross-correlation over the last axis: y[o,t] = sum_{c,k} x[c, t*s+k] w[o,c,k] + b[o].

    Input (in_channels, length), output (out_channels, out_length) with
    out_length = (length + 2*padding - kernel) // stride + 1.
    """

    def __init__(self, in_channels, out_channels, kernel_size, rng, stride=1, padding=0):
        if kernel_size < 1 or stride < 1 or padding < 0:
            raise ValueError("kernel_size and stride must be >= 1, padding >= 0")
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel_size = kernel_size
        self.stride = stride
        self.padding = padding
        fan_in = in_channels * kernel_size
        self.W = Parameter(
            _uniform_init(rng, (out_channels, in_channels, kernel_size), fan_in)
        )
        self.b = Parameter(np.zeros(out_channels))
        self._xp = None

    def out_length(self, length):
        padded = length + 2 * self.padding
        if padded < self.kernel_size:
            raise ValueError(
                f"kernel ({self.kernel_size}) longer than padded input ({padded})"
            )
        return (padded - self.kernel_size) // self.stride + 1

    def forward(self, x):
        if x.ndim != 2 or x.shape[0] != self.in_channels:
            raise ValueError(
                f"expected ({self.in_channels}, length) input, got {x.shape}"
            )
        n_out = self.out_length(x.shape[1])
        xp = np.pad(x, ((0, 0), (self.padding, self.padding)))
        y = np.tile(self.b.value[:, None], (1, n_out))
        for k in range(self.kernel_size):
            cols = xp[:, k : k + n_out * self.stride : self.stride]
            y += self.W.value[:, :, k] @ cols
        self._xp = xp
        self._n_out = n_out
        return y

    def backward(self, dy):
        if self._xp is None:
            raise RuntimeError("backward called before forward")
        xp, n_out = self._xp, self._n_out
        dxp = np.zeros_like(xp)
        for k in range(self.kernel_size):
            cols = xp[:, k : k + n_out * self.stride : self.stride]
            self.W.grad[:, :, k] += dy @ cols.T
            dxp[:, k : k + n_out * self.stride : self.stride] += (
                self.W.value[:, :, k].T @ dy
            )
        self.b.grad += dy.sum(axis=1)
        if self.padding:
            return dxp[:, self.padding : -self.padding]
        return dxp

    def parameters(self):
        return [("W", self.W), ("b", self.b)]


GATES = ("f", "i", "g", "o")


class Lstm:
    """Single-layer LSTM over a (steps, features) sequence, returning the
    final hidden state. Gate equations:

        f = sigmoid(x U_f + h W_f + b_f)     forget
        i = sigmoid(x U_i + h W_i + b_i)     input
        g = tanh   (x U_g + h W_g + b_g)     candidate cell
        c = f * c_prev + i * g
        o = sigmoid(x U_o + h W_o + b_o)     output
        h = o * tanh(c)
    """

    def __init__(self, input_size: int, hidden_size: int, rng):
        self.input_size = input_size
        self.hidden_size = hidden_size
        self.U = {}
        self.W = {}
        self.b = {}
        for gate in GATES:
            self.U[gate] = Parameter(
                _uniform_init(rng, (input_size, hidden_size), input_size)
            )
            self.W[gate] = Parameter(
                _uniform_init(rng, (hidden_size, hidden_size), hidden_size)
            )
            self.b[gate] = Parameter(np.zeros(hidden_size))
        self._steps = None

    def step(self, x, h_prev, c_prev):
        """One cell update; returns (h, c, cache)."""
        if x.shape != (self.input_size,):
            raise ValueError(f"expected input shape ({self.input_size},), got {x.shape}")
        if h_prev.shape != (self.hidden_size,) or c_prev.shape != (self.hidden_size,):
            raise ValueError("state shape mismatch")
        pre = {
            g: x @ self.U[g].value + h_prev @ self.W[g].value + self.b[g].value
            for g in GATES
        }
        f = sigmoid(pre["f"])
        i = sigmoid(pre["i"])
        g = np.tanh(pre["g"])
        c = f * c_prev + i * g
        o = sigmoid(pre["o"])
        tc = np.tanh(c)
        h = o * tc
        cache = {"x": x, "h_prev": h_prev, "c_prev": c_prev,
                 "f": f, "i": i, "g": g, "o": o, "c": c, "tc": tc}
        return h, c, cache

    def forward(self, xs):
        if xs.ndim != 2 or xs.shape[1] != self.input_size:
            raise ValueError(
                f"expected (steps, {self.input_size}) input, got {xs.shape}"
            )
        h = np.zeros(self.hidden_size)
        c = np.zeros(self.hidden_size)
        self._steps = []
        for t in range(xs.shape[0]):
            h, c, cache = self.step(xs[t], h, c)
            self._steps.append(cache)
        return h

    def backward(self, dh_last):
        """Backprop through time from a gradient on the final hidden state.

        Returns the gradient with respect to the input sequence.
        """
        if not self._steps:
            raise RuntimeError("backward called before forward")
        dh = np.asarray(dh_last, dtype=np.float64)
        dc = np.zeros(self.hidden_size)
        dxs = np.zeros((len(self._steps), self.input_size))
        for t in range(len(self._steps) - 1, -1, -1):
            s = self._steps[t]
            do = dh * s["tc"]
            dc = dc + dh * s["o"] * (1.0 - s["tc"] ** 2)
            df = dc * s["c_prev"]
            di = dc * s["g"]
            dg = dc * s["i"]
            dc_prev = dc * s["f"]
            dpre = {
                "f": df * s["f"] * (1.0 - s["f"]),
                "i": di * s["i"] * (1.0 - s["i"]),
                "g": dg * (1.0 - s["g"] ** 2),
                "o": do * s["o"] * (1.0 - s["o"]),
            }
            dx = np.zeros(self.input_size)
            dh_prev = np.zeros(self.hidden_size)
            for gate in GATES:
                self.U[gate].grad += np.outer(s["x"], dpre[gate])
                self.W[gate].grad += np.outer(s["h_prev"], dpre[gate])
                self.b[gate].grad += dpre[gate]
                dx += dpre[gate] @ self.U[gate].value.T
                dh_prev += dpre[gate] @ self.W[gate].value.T
            dxs[t] = dx
            dh = dh_prev
            dc = dc_prev
        return dxs

    def parameters(self):
        out = []
        for gate in GATES:
            out.append((f"U_{gate}", self.U[gate]))
            out.append((f"W_{gate}", self.W[gate]))
            out.append((f"b_{gate}", self.b[gate]))
        return out
