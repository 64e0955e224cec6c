"""Synthetic AUV trajectories and DVL/pressure measurements.

Gives every pipeline stage a quantitative ground truth without sea data:
closed-form motion profiles at 1 Hz, a Doppler-shift beam error model, and a
pressure/depth relation, all exported in the canonical CSV schema.

Unit convention for the Doppler model: beam velocity in m/s follows

    v = (F + bias + noise) * 1000 * C * (1 + SF) / (2 * f_s)

with C in m/s and f_s in Hz, which makes F (and the bias/noise terms) a
frequency shift expressed in kHz; the literal factor 1000 is the kHz-to-Hz
conversion. At 600 kHz and C = 1500 m/s, 1 m/s of beam velocity corresponds
to a 0.8 kHz shift.
"""

import math
from dataclasses import dataclass

import numpy as np

from .dataset import BeamSample, Mission, save_missions
from .geometry import BeamGeometry, BeamVector, forward_beams

GRAVITY = 9.81            # m/s^2
ATMOSPHERE_KPA = 101.3    # surface pressure
SEAWATER_DENSITY = 1025.0  # kg/m^3

MAX_SPEED = 3.0  # physical AUV bound, m/s

PROFILES = ("constant", "sinusoidal", "lawnmower")


@dataclass(frozen=True)
class DopplerModel:
    """Per-beam frequency-shift error model (shift terms in kHz)."""

    bias: float = 0.0
    noise_std: float = 0.0
    scale_factor: float = 0.0
    sound_speed: float = 1500.0   # m/s
    frequency_hz: float = 600e3

    def __post_init__(self):
        if self.frequency_hz <= 0 or self.sound_speed <= 0:
            raise ValueError("transmit frequency and sound speed must be positive")
        if self.noise_std < 0:
            raise ValueError("noise std must be non-negative")

    @property
    def mps_per_khz(self) -> float:
        """Velocity produced by 1 kHz of frequency shift."""
        return 1000.0 * self.sound_speed * (1.0 + self.scale_factor) / (2.0 * self.frequency_hz)

    @classmethod
    def from_velocity_noise(cls, beam_noise_mps: float, **kwargs) -> "DopplerModel":
        """Build a model whose propagated beam-velocity noise has the given std."""
        base = cls(**kwargs)
        return cls(bias=base.bias, noise_std=beam_noise_mps / base.mps_per_khz,
                   scale_factor=base.scale_factor, sound_speed=base.sound_speed,
                   frequency_hz=base.frequency_hz)


@dataclass(frozen=True)
class TrajectorySpec:
    """1 Hz motion profile. amplitude/period shape the vx oscillation for the
    sinusoidal profile and the leg speed/duration for the lawnmower."""

    duration_s: int = 600
    profile: str = "sinusoidal"
    amplitude: float = 0.5
    period: float = 60.0
    base_velocity: tuple[float, float, float] = (1.0, 0.0, 0.0)
    depth0: float = 30.0
    depth_amplitude: float = 2.0
    depth_period: float = 120.0
    seed: int = 0

    def __post_init__(self):
        if self.profile not in PROFILES:
            raise ValueError(f"unknown profile '{self.profile}'; choose from {PROFILES}")
        if self.duration_s < 8:
            raise ValueError("duration must cover at least 8 samples")
        if self.period <= 0 or self.depth_period <= 0:
            raise ValueError("periods must be positive")
        if self.amplitude < 0:
            raise ValueError("amplitude must be non-negative")
        bx, by, bz = (abs(c) for c in self.base_velocity)
        a = self.amplitude
        if self.profile == "constant":
            peak = math.sqrt(bx * bx + by * by + bz * bz)
        elif self.profile == "sinusoidal":
            peak = math.sqrt((bx + a) ** 2 + (by + 0.5 * a) ** 2 + (bz + 0.1 * a) ** 2)
        else:
            peak = max(a, 0.1)
        if peak > MAX_SPEED:
            raise ValueError(f"profile peak speed {peak:.2f} exceeds {MAX_SPEED} m/s bound")
        if self.depth0 - self.depth_amplitude < 0:
            raise ValueError("depth profile dips above the surface")


def simulate_trajectory(spec: TrajectorySpec):
    """Return (velocities (n,3), depths (n,), times (n,)) for the profile."""
    t = np.arange(spec.duration_s, dtype=np.float64)
    base = np.asarray(spec.base_velocity, dtype=np.float64)
    v = np.tile(base, (spec.duration_s, 1))
    if spec.profile == "sinusoidal":
        a, tau = spec.amplitude, spec.period
        v[:, 0] += a * np.sin(2.0 * math.pi * t / tau)
        # secondary-axis motion keeps the sequence from being a single tone
        v[:, 1] += 0.5 * a * np.sin(2.0 * math.pi * t / (0.73 * tau) + 1.0)
        v[:, 2] += 0.1 * a * np.sin(2.0 * math.pi * t / (0.41 * tau) + 2.0)
    elif spec.profile == "lawnmower":
        speed = max(spec.amplitude, 0.1)
        leg = max(int(spec.period), 4)
        turn = max(leg // 6, 3)
        heading = 0.0
        headings = np.empty(spec.duration_s)
        phase, k = 0, 0  # 0 = straight leg, 1 = turning
        for i in range(spec.duration_s):
            headings[i] = heading
            k += 1
            if phase == 0 and k >= leg:
                phase, k = 1, 0
            elif phase == 1:
                heading += math.pi / turn
                if k >= turn:
                    phase, k = 0, 0
        v[:, 0] = speed * np.cos(headings)
        v[:, 1] = speed * np.sin(headings)
        v[:, 2] = 0.0
    depths = spec.depth0 + spec.depth_amplitude * np.sin(2.0 * math.pi * t / spec.depth_period)
    return v, depths, t


def measure_beams(geom: BeamGeometry, dm: DopplerModel, velocity, rng) -> BeamVector:
    """Synthesize one epoch of four measured beam velocities.

    The true beam velocity is encoded as a Doppler shift so that the
    noise-free conversion is the identity; bias and Gaussian noise enter in
    the frequency domain and propagate back scaled by mps_per_khz:

        measured = (v/K + bias + noise) * K = v + (bias + noise) * K
    """
    true_beams = forward_beams(geom, velocity).values
    noise = rng.normal(0.0, dm.noise_std, size=4) if dm.noise_std > 0 else np.zeros(4)
    measured = true_beams + (dm.bias + noise) * dm.mps_per_khz
    return BeamVector.full(measured)


def measure_depth(depth_m: float, rho: float = SEAWATER_DENSITY,
                  noise_std_kpa: float = 0.0, rng=None) -> float:
    """Pressure in kPa at a given depth: rho*g*h (converted to kPa) plus
    atmospheric pressure, with optional sensor noise."""
    if depth_m < 0:
        raise ValueError(f"depth must be non-negative, got {depth_m}")
    p = rho * GRAVITY * depth_m / 1000.0 + ATMOSPHERE_KPA
    if noise_std_kpa > 0:
        if rng is None:
            raise ValueError("noisy depth measurement needs an rng")
        p += rng.normal(0.0, noise_std_kpa)
    return p


def pressure_to_depth(pressure_kpa: float, rho: float = SEAWATER_DENSITY) -> float:
    """Invert measure_depth (noise-free)."""
    return (pressure_kpa - ATMOSPHERE_KPA) * 1000.0 / (rho * GRAVITY)


def synthesize_mission(spec: TrajectorySpec, geom: BeamGeometry,
                       dm: DopplerModel, mission_id: str = "syn-0") -> Mission:
    """Run a full trajectory through the measurement model."""
    velocities, depths, times = simulate_trajectory(spec)
    rng = np.random.default_rng(spec.seed)
    samples = []
    for k in range(spec.duration_s):
        beams = measure_beams(geom, dm, velocities[k], rng)
        samples.append(BeamSample(
            time_s=float(times[k]),
            beams=beams.values,
            depth=float(depths[k]),
        ))
    return Mission(mission_id=mission_id, samples=samples, source="synthetic")


def export_synthetic(missions, path):
    """Write synthesized missions in the canonical CSV schema."""
    lengths = {m.mission_id: len(m) for m in missions}
    if any(n == 0 for n in lengths.values()):
        raise ValueError(f"empty mission in export: {lengths}")
    save_missions(missions, path)


def true_velocity_table(spec: TrajectorySpec) -> np.ndarray:
    """Ground-truth velocities aligned with a synthesized mission."""
    velocities, _, _ = simulate_trajectory(spec)
    return velocities
