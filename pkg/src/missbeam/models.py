"""Multi-head regressors that predict missing beams from past measurements.

The baseline networks feed a window of past per-epoch features (4 beams,
optionally depth and the 3 velocity components) into a recurrent or
convolutional head, concatenate the extracted features with the currently
available beams, and regress the missing ones through two dense layers.
Single-head ablations drop the concatenation and use the past window only.

Training is plain Adam on MSE at the configured batch size (gradients are
averaged over each batch), deterministic under a fixed seed.
"""

import json
from dataclasses import dataclass, field, asdict

import numpy as np

from .dataset import SampleWindow
from .geometry import BEAMS, BeamGeometry, BeamVector, ls_velocity
from .nn import Adam, Conv1d, Dense, Lstm, ReLU, mse_grad, mse_loss

ARCHITECTURES = ("lstm_multihead", "cnn_multihead", "lstm_singlehead", "cnn_singlehead")

MODEL_FORMAT = "missbeam-model-v1"

CNN_CHANNELS = (16, 32)
CNN_KERNEL = 3


class TrainingDivergedError(RuntimeError):
    """Raised when the training loss stops being finite."""


@dataclass(frozen=True)
class ModelSpec:
    """Architecture and training description for one missing-beam combination."""

    missing: tuple[int, ...]
    architecture: str = "lstm_multihead"
    window: int = 6
    use_depth: bool = False
    use_velocity: bool = False
    hidden_size: int = 500
    lstm_output: int = 7
    fc_sizes: tuple[int, ...] = (64,)
    learning_rate: float = 5e-5
    epochs: int = 150
    batch_size: int = 1
    normalize: bool = True

    def __post_init__(self):
        missing = tuple(sorted(set(int(b) for b in self.missing)))
        if not 1 <= len(missing) <= 3 or any(b not in BEAMS for b in missing):
            raise ValueError(
                f"missing must be 1-3 beams out of {BEAMS}, got {self.missing}"
            )
        object.__setattr__(self, "missing", missing)
        object.__setattr__(self, "fc_sizes", tuple(int(s) for s in self.fc_sizes))
        if self.architecture not in ARCHITECTURES:
            raise ValueError(f"unknown architecture '{self.architecture}'")
        if self.window < 1:
            raise ValueError("window must be >= 1")
        if self.hidden_size < 1 or self.lstm_output < 1 or any(s < 1 for s in self.fc_sizes):
            raise ValueError("layer sizes must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        if self.epochs < 0 or self.batch_size < 1:
            raise ValueError("epochs must be >= 0 and batch_size >= 1")

    @property
    def available(self) -> tuple[int, ...]:
        return tuple(b for b in BEAMS if b not in self.missing)

    @property
    def step_features(self) -> int:
        """Per-step feature count of the past-window head."""
        return 4 + (1 if self.use_depth else 0) + (3 if self.use_velocity else 0)

    @property
    def multihead(self) -> bool:
        return self.architecture.endswith("multihead")


@dataclass
class Normalization:
    """Per-channel z-score statistics fitted on the training split."""

    beam_mean: np.ndarray
    beam_std: np.ndarray
    depth_mean: float = 0.0
    depth_std: float = 1.0
    vel_mean: np.ndarray = field(default_factory=lambda: np.zeros(3))
    vel_std: np.ndarray = field(default_factory=lambda: np.ones(3))

    @classmethod
    def identity(cls):
        return cls(beam_mean=np.zeros(4), beam_std=np.ones(4))

    @classmethod
    def fit(cls, windows) -> "Normalization":
        beams = np.concatenate([w.past_beams for w in windows] +
                               [w.current_full.reshape(1, 4) for w in windows])
        norm = cls(beam_mean=beams.mean(axis=0), beam_std=_safe_std(beams))
        depths = [w.past_depth for w in windows if w.past_depth is not None]
        if depths:
            d = np.concatenate(depths)
            norm.depth_mean = float(d.mean())
            norm.depth_std = float(_safe_std(d.reshape(-1, 1))[0])
        vels = [w.past_velocity for w in windows if w.past_velocity is not None]
        if vels:
            v = np.concatenate(vels)
            norm.vel_mean = v.mean(axis=0)
            norm.vel_std = _safe_std(v)
        return norm


def _safe_std(arr):
    std = arr.std(axis=0)
    return np.where(std < 1e-9, 1.0, std)


def encode_window(window: SampleWindow, spec: ModelSpec, norm: Normalization):
    """Build the (window, features) past matrix, the normalized available-beam
    vector, and the normalized target from one sample window."""
    if tuple(window.missing) != spec.missing:
        raise ValueError(
            f"window missing set {window.missing} conflicts with spec {spec.missing}"
        )
    if window.past_beams.shape[0] != spec.window:
        raise ValueError(
            f"window length {window.past_beams.shape[0]} != spec window {spec.window}"
        )
    cols = [(window.past_beams - norm.beam_mean) / norm.beam_std]
    if spec.use_depth:
        if window.past_depth is None:
            raise ValueError("spec requests depth input but window has none")
        cols.append(((window.past_depth - norm.depth_mean) / norm.depth_std)[:, None])
    if spec.use_velocity:
        if window.past_velocity is None:
            raise ValueError("spec requests velocity input but window has none")
        cols.append((window.past_velocity - norm.vel_mean) / norm.vel_std)
    past = np.concatenate(cols, axis=1)
    avail_idx = [b - 1 for b in spec.available]
    current = (window.current - norm.beam_mean[avail_idx]) / norm.beam_std[avail_idx]
    miss_idx = [b - 1 for b in spec.missing]
    target = (window.target - norm.beam_mean[miss_idx]) / norm.beam_std[miss_idx]
    return past, current, target


def denormalize_prediction(pred, spec: ModelSpec, norm: Normalization) -> np.ndarray:
    miss_idx = [b - 1 for b in spec.missing]
    return pred * norm.beam_std[miss_idx] + norm.beam_mean[miss_idx]


class MissBeamModel:
    """Hand-wired forward/backward graph for one ModelSpec."""

    def __init__(self, spec: ModelSpec, rng):
        self.spec = spec
        n_missing = len(spec.missing)
        feats = spec.step_features
        if spec.architecture.startswith("lstm"):
            self.lstm = Lstm(feats, spec.hidden_size, rng)
            self.proj = Dense(spec.hidden_size, spec.lstm_output, rng)
            self.proj_act = ReLU()
            head_width = spec.lstm_output
        else:
            self.conv1 = Conv1d(feats, CNN_CHANNELS[0], CNN_KERNEL, rng, stride=1, padding=1)
            self.act1 = ReLU()
            self.conv2 = Conv1d(CNN_CHANNELS[0], CNN_CHANNELS[1], CNN_KERNEL, rng, stride=1, padding=1)
            self.act2 = ReLU()
            head_width = CNN_CHANNELS[1] * self.conv2.out_length(
                self.conv1.out_length(spec.window)
            )
        self.head_width = head_width
        concat = head_width + (len(spec.available) if spec.multihead else 0)
        self.fc = []
        widths = [concat, *spec.fc_sizes, n_missing]
        for k in range(len(widths) - 1):
            self.fc.append(Dense(widths[k], widths[k + 1], rng))
            if k < len(widths) - 2:
                self.fc.append(ReLU())

    def forward(self, past, current=None):
        if self.spec.architecture.startswith("lstm"):
            h = self.lstm.forward(past)
            feat = self.proj_act.forward(self.proj.forward(h))
        else:
            y = self.act1.forward(self.conv1.forward(past.T))
            y = self.act2.forward(self.conv2.forward(y))
            self._conv_shape = y.shape
            feat = y.reshape(-1)
        if self.spec.multihead:
            if current is None:
                raise ValueError("multi-head model needs the available-beam input")
            x = np.concatenate([feat, current])
        else:
            x = feat
        for layer in self.fc:
            x = layer.forward(x)
        return x

    def backward(self, dout):
        dx = dout
        for layer in reversed(self.fc):
            dx = layer.backward(dx)
        if self.spec.multihead:
            dfeat = dx[: self.head_width]
        else:
            dfeat = dx
        if self.spec.architecture.startswith("lstm"):
            dh = self.proj.backward(self.proj_act.backward(dfeat))
            self.lstm.backward(dh)
        else:
            dy = self.act2.backward(dfeat.reshape(self._conv_shape))
            dy = self.act1.backward(self.conv2.backward(dy))
            self.conv1.backward(dy)

    def _layers(self):
        if self.spec.architecture.startswith("lstm"):
            named = [("lstm", self.lstm), ("proj", self.proj)]
        else:
            named = [("conv1", self.conv1), ("conv2", self.conv2)]
        named += [(f"fc{k}", layer) for k, layer in enumerate(self.fc)
                  if layer.parameters()]
        return named

    def parameters(self):
        out = []
        for prefix, layer in self._layers():
            out.extend((f"{prefix}.{name}", p) for name, p in layer.parameters())
        return out

    def zero_grad(self):
        for _, p in self.parameters():
            p.grad[...] = 0.0

    def state_dict(self):
        return {name: p.value.copy() for name, p in self.parameters()}

    def load_state_dict(self, state):
        for name, p in self.parameters():
            if name not in state:
                raise KeyError(f"missing parameter '{name}' in state")
            arr = np.asarray(state[name], dtype=np.float64)
            if arr.shape != p.value.shape:
                raise ValueError(f"shape mismatch for '{name}': {arr.shape} vs {p.value.shape}")
            p.value[...] = arr


def build_model(spec: ModelSpec, seed: int = 0) -> MissBeamModel:
    """Instantiate an untrained model with seeded initialization."""
    return MissBeamModel(spec, np.random.default_rng(seed))


@dataclass
class TrainedModel:
    """A model plus everything needed to reproduce and apply it."""

    spec: ModelSpec
    model: MissBeamModel
    normalization: Normalization
    seed: int
    loss_history: list[float]

    def save(self, path):
        norm = self.normalization
        doc = {
            "format": MODEL_FORMAT,
            "spec": asdict(self.spec),
            "seed": self.seed,
            "normalization": {
                "beam_mean": norm.beam_mean.tolist(),
                "beam_std": norm.beam_std.tolist(),
                "depth_mean": norm.depth_mean,
                "depth_std": norm.depth_std,
                "vel_mean": norm.vel_mean.tolist(),
                "vel_std": norm.vel_std.tolist(),
            },
            "loss_history": self.loss_history,
            "weights": {
                name: {"shape": list(value.shape), "data": value.reshape(-1).tolist()}
                for name, value in self.model.state_dict().items()
            },
        }
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=1, sort_keys=True)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "TrainedModel":
        with open(path) as fh:
            doc = json.load(fh)
        if doc.get("format") != MODEL_FORMAT:
            raise ValueError(f"{path}: unsupported model format {doc.get('format')!r}")
        raw = dict(doc["spec"])
        raw["missing"] = tuple(raw["missing"])
        raw["fc_sizes"] = tuple(raw["fc_sizes"])
        spec = ModelSpec(**raw)
        model = build_model(spec, seed=doc["seed"])
        state = {
            name: np.array(entry["data"], dtype=np.float64).reshape(entry["shape"])
            for name, entry in doc["weights"].items()
        }
        model.load_state_dict(state)
        n = doc["normalization"]
        norm = Normalization(
            beam_mean=np.array(n["beam_mean"]), beam_std=np.array(n["beam_std"]),
            depth_mean=n["depth_mean"], depth_std=n["depth_std"],
            vel_mean=np.array(n["vel_mean"]), vel_std=np.array(n["vel_std"]),
        )
        return cls(spec=spec, model=model, normalization=norm,
                   seed=doc["seed"], loss_history=list(doc["loss_history"]))


def train(spec: ModelSpec, windows, seed: int = 0) -> TrainedModel:
    """Run the configured epochs of Adam on MSE over the given windows.

    Deterministic for a fixed seed: the same rng drives initialization and
    the per-epoch shuffle. Raises TrainingDivergedError when the loss stops
    being finite.
    """
    if not windows:
        raise ValueError("no training windows supplied")
    rng = np.random.default_rng(seed)
    norm = Normalization.fit(windows) if spec.normalize else Normalization.identity()
    model = MissBeamModel(spec, rng)
    encoded = [encode_window(w, spec, norm) for w in windows]
    opt = Adam(model.parameters(), lr=spec.learning_rate)
    history = []
    for epoch in range(spec.epochs):
        order = rng.permutation(len(encoded))
        total = 0.0
        for chunk_start in range(0, len(order), spec.batch_size):
            chunk = order[chunk_start : chunk_start + spec.batch_size]
            model.zero_grad()
            for idx in chunk:
                past, current, target = encoded[idx]
                pred = model.forward(past, current)
                loss = mse_loss(pred, target)
                if not np.isfinite(loss):
                    raise TrainingDivergedError(
                        f"non-finite loss {loss} at epoch {epoch}, window {idx}"
                    )
                total += loss
                model.backward(mse_grad(pred, target) / len(chunk))
            opt.step()
        history.append(total / len(encoded))
    return TrainedModel(spec=spec, model=model, normalization=norm,
                        seed=seed, loss_history=history)


def regress_missing(trained: TrainedModel, window: SampleWindow) -> BeamVector:
    """Predict the missing beams of one window, de-normalized to m/s."""
    spec = trained.spec
    past, current, _ = encode_window(window, spec, trained.normalization)
    pred = trained.model.forward(past, current if spec.multihead else None)
    values = denormalize_prediction(pred, spec, trained.normalization)
    return BeamVector(values=values, present=spec.missing)


def complete_and_estimate(trained: TrainedModel, geom: BeamGeometry,
                          window: SampleWindow) -> np.ndarray:
    """Regress the missing beams, merge with the measured ones, and run the
    least-squares velocity estimate over the full four-beam set."""
    regressed = regress_missing(trained, window)
    measured = BeamVector(values=window.current, present=window.available)
    return ls_velocity(geom, regressed.merge(measured))
