"""Janus transducer geometry and least-squares beam/velocity conversions.

Conventions:
    - Beams are numbered 1..4.
    - Velocities are 3-vectors [vx, vy, vz] in the platform frame, m/s.
    - A beam velocity is the projection of the platform velocity onto the
      beam's unit direction vector.
"""

import math
from dataclasses import dataclass

import numpy as np

BEAMS = (1, 2, 3, 4)

# Normal-matrix condition number above which a solve is refused. Far beyond
# any physical Janus configuration; guards only pathological geometries.
COND_LIMIT = 1e12


@dataclass(frozen=True)
class BeamGeometry:
    """Fixed transducer layout: one pitch angle, one yaw angle per beam (rad)."""

    pitch_rad: float
    yaw_rad: tuple[float, float, float, float]

    def __post_init__(self):
        if not 0.0 < self.pitch_rad < math.pi / 2:
            raise ValueError(
                f"pitch angle must lie in (0, 90) degrees, got {math.degrees(self.pitch_rad):.3f}"
            )
        if len(self.yaw_rad) != 4:
            raise ValueError("exactly four yaw angles required")
        object.__setattr__(self, "yaw_rad", tuple(float(a) for a in self.yaw_rad))

    @classmethod
    def janus(cls, pitch_deg: float = 20.0) -> "BeamGeometry":
        """Standard X-shaped configuration: yaw_i = (i-1)*90 + 45 degrees."""
        yaws = tuple(math.radians((i - 1) * 90.0 + 45.0) for i in BEAMS)
        return cls(pitch_rad=math.radians(pitch_deg), yaw_rad=yaws)


@dataclass(frozen=True)
class BeamVector:
    """Beam-axis velocities for a subset of beams.

    values are stored in ascending beam order; present lists which beams the
    values belong to.
    """

    values: np.ndarray
    present: tuple[int, ...]

    def __post_init__(self):
        present = tuple(sorted(set(int(b) for b in self.present)))
        if not present or any(b not in BEAMS for b in present):
            raise ValueError(f"present must be a non-empty subset of {BEAMS}, got {self.present}")
        values = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if values.shape != (len(present),):
            raise ValueError(
                f"got {values.size} values for {len(present)} present beams"
            )
        values.flags.writeable = False
        object.__setattr__(self, "present", present)
        object.__setattr__(self, "values", values)

    @classmethod
    def full(cls, values) -> "BeamVector":
        return cls(values=np.asarray(values, dtype=np.float64), present=BEAMS)

    def value(self, beam: int) -> float:
        if beam not in self.present:
            raise KeyError(f"beam {beam} not present in {self.present}")
        return float(self.values[self.present.index(beam)])

    def merge(self, other: "BeamVector") -> "BeamVector":
        """Combine two disjoint beam subsets into one vector."""
        overlap = set(self.present) & set(other.present)
        if overlap:
            raise ValueError(f"beam sets overlap: {sorted(overlap)}")
        combined = sorted(self.present + other.present)
        vals = [
            self.value(b) if b in self.present else other.value(b) for b in combined
        ]
        return BeamVector(values=np.array(vals), present=tuple(combined))


def beam_direction(geom: BeamGeometry, beam: int) -> np.ndarray:
    """Unit direction vector of one beam: [cos(psi)sin(theta), sin(psi)sin(theta), cos(theta)]."""
    if beam not in BEAMS:
        raise ValueError(f"beam index must be one of {BEAMS}, got {beam}")
    psi = geom.yaw_rad[beam - 1]
    st = math.sin(geom.pitch_rad)
    return np.array(
        [math.cos(psi) * st, math.sin(psi) * st, math.cos(geom.pitch_rad)],
        dtype=np.float64,
    )


def direction_matrix(geom: BeamGeometry, present=BEAMS) -> np.ndarray:
    """Stack beam direction rows for the given subset, ascending beam order."""
    beams = tuple(sorted(set(int(b) for b in present)))
    if not beams:
        raise ValueError("present beam subset is empty")
    return np.array([beam_direction(geom, b) for b in beams])


def forward_beams(geom: BeamGeometry, velocity, present=BEAMS) -> BeamVector:
    """Project a platform velocity onto the given beams."""
    v = np.asarray(velocity, dtype=np.float64).reshape(3)
    if not np.all(np.isfinite(v)):
        raise ValueError(f"velocity must be finite, got {v}")
    beams = tuple(sorted(set(int(b) for b in present)))
    vals = np.array([beam_direction(geom, b) @ v for b in beams])
    return BeamVector(values=vals, present=beams)


def ls_velocity(geom: BeamGeometry, y: BeamVector) -> np.ndarray:
    """Recover the platform velocity from >=3 beam velocities.

    Uses the exact linear solve for 3 beams and the normal equations
    (A^T A)^-1 A^T y for 4. Raises when fewer than 3 beams are present or
    the normal matrix is ill-conditioned.
    """
    if len(y.present) < 3:
        raise ValueError(
            f"velocity unobservable: need at least 3 beams, got {len(y.present)}"
        )
    a = direction_matrix(geom, y.present)
    ata = a.T @ a
    if np.linalg.cond(ata) > COND_LIMIT:
        raise ValueError("direction matrix is numerically singular for this geometry")
    if len(y.present) == 3:
        return np.linalg.solve(a, y.values)
    return np.linalg.solve(ata, a.T @ y.values)
