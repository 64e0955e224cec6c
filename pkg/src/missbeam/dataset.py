"""Mission ingestion, train/test splitting, and sliding-window construction.

Canonical CSV schema (one header row):

    time_s,b1,b2,b3,b4,valid,depth_m,vx,vy,vz,mission_id

depth_m and vx,vy,vz may be empty; velocities are recomputed from the four
beams when absent. Rows with valid=0 (or non-finite beams) are dropped at
load time and leave a recorded gap, so no window ever spans them.
"""

import csv
import itertools
import json
from dataclasses import dataclass, field

import numpy as np

from .geometry import BEAMS, BeamGeometry, BeamVector, ls_velocity

CSV_HEADER = ["time_s", "b1", "b2", "b3", "b4", "valid",
              "depth_m", "vx", "vy", "vz", "mission_id"]

# nominal sample interval is 1 Hz; a jump larger than this marks a gap
GAP_FACTOR = 1.5


@dataclass
class BeamSample:
    """One DVL epoch: four beam velocities plus optional depth/velocity."""

    time_s: float
    beams: np.ndarray
    depth: float | None = None
    velocity: np.ndarray | None = None

    def __post_init__(self):
        self.beams = np.asarray(self.beams, dtype=np.float64).reshape(4)
        if self.velocity is not None:
            self.velocity = np.asarray(self.velocity, dtype=np.float64).reshape(3)


@dataclass
class Mission:
    """An ordered run of retained samples; gap_before[i] is True when invalid
    data or a time jump separates sample i from sample i-1."""

    mission_id: str
    samples: list[BeamSample]
    source: str = "unknown"
    gap_before: list[bool] = field(default_factory=list)

    def __post_init__(self):
        if not self.gap_before:
            self.gap_before = [False] * len(self.samples)
        if len(self.gap_before) != len(self.samples):
            raise ValueError("gap_before length must match samples")
        times = [s.time_s for s in self.samples]
        if any(b >= a for a, b in zip(times[1:], times)):
            raise ValueError(f"mission {self.mission_id}: timestamps not strictly increasing")

    def __len__(self):
        return len(self.samples)

    def segments(self):
        """Yield (start, end) index pairs of gap-free runs."""
        if not self.samples:
            return
        start = 0
        for i in range(1, len(self.samples)):
            if self.gap_before[i]:
                yield start, i
                start = i
        yield start, len(self.samples)


@dataclass
class SampleWindow:
    """Input unit for the regressors: n past samples plus the masked current
    epoch. current_full keeps all four measured beams so evaluation can form
    the reference velocity."""

    past_beams: np.ndarray           # (n, 4)
    current: np.ndarray              # measured values of the available beams
    target: np.ndarray               # true values of the missing beams
    missing: tuple[int, ...]
    available: tuple[int, ...]
    current_full: np.ndarray         # (4,)
    past_depth: np.ndarray | None = None    # (n,)
    past_velocity: np.ndarray | None = None  # (n, 3)
    mission_id: str = ""
    t_index: int = -1


def _parse_optional(cell: str) -> float | None:
    cell = cell.strip()
    return float(cell) if cell else None


def load_missions(path, fmt: str = "canonical") -> list[Mission]:
    """Parse a recording file into missions, dropping invalid epochs."""
    if fmt not in FORMATS:
        raise ValueError(f"unknown format '{fmt}'; registered: {sorted(FORMATS)}")
    return FORMATS[fmt](path)


def _load_canonical(path) -> list[Mission]:
    order: list[str] = []
    rows: dict[str, list] = {}
    dropped: dict[str, bool] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != CSV_HEADER:
            raise ValueError(f"{path}: expected header {CSV_HEADER}, got {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(CSV_HEADER):
                raise ValueError(f"{path}:{lineno}: expected {len(CSV_HEADER)} fields, got {len(row)}")
            try:
                time_s = float(row[0])
                beams = np.array([float(c) for c in row[1:5]])
                valid = int(row[5])
                depth = _parse_optional(row[6])
                vel_cells = [_parse_optional(c) for c in row[7:10]]
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: malformed row: {exc}") from None
            mission_id = row[10].strip()
            if not mission_id:
                raise ValueError(f"{path}:{lineno}: empty mission_id")
            if mission_id not in rows:
                order.append(mission_id)
                rows[mission_id] = []
                dropped[mission_id] = False
            if valid == 0 or not np.all(np.isfinite(beams)):
                dropped[mission_id] = True
                continue
            velocity = None
            if all(c is not None for c in vel_cells):
                velocity = np.array(vel_cells)
            sample = BeamSample(time_s=time_s, beams=beams, depth=depth, velocity=velocity)
            rows[mission_id].append((sample, dropped[mission_id]))
            dropped[mission_id] = False

    missions = []
    for mid in order:
        samples = [s for s, _ in rows[mid]]
        gaps = [g for _, g in rows[mid]]
        if gaps:
            gaps[0] = False
        # dropped rows inside a 1 Hz stream also show up as time jumps
        for i in range(1, len(samples)):
            if samples[i].time_s - samples[i - 1].time_s > GAP_FACTOR:
                gaps[i] = True
        missions.append(Mission(mission_id=mid, samples=samples, source=str(path), gap_before=gaps))
    return missions


FORMATS = {"canonical": _load_canonical}


def register_format(name: str, loader):
    """Register an adapter for a non-canonical recording format."""
    FORMATS[name] = loader


def save_missions(missions, path):
    """Write missions back out as canonical CSV (retained samples only)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for mission in missions:
            for s in mission.samples:
                vel = ["", "", ""] if s.velocity is None else [repr(float(v)) for v in s.velocity]
                writer.writerow([
                    repr(float(s.time_s)),
                    *[repr(float(b)) for b in s.beams],
                    1,
                    "" if s.depth is None else repr(float(s.depth)),
                    *vel,
                    mission.mission_id,
                ])


def load_split_manifest(path) -> dict:
    with open(path) as fh:
        manifest = json.load(fh)
    for side in ("train", "test"):
        if side not in manifest or not isinstance(manifest[side], list):
            raise ValueError(f"split manifest must list mission ids under '{side}'")
    return manifest


def split_train_test(missions, assignment) -> tuple[list[Mission], list[Mission]]:
    """Split at mission granularity according to an explicit assignment
    ({"train": [...ids], "test": [...ids]})."""
    by_id = {m.mission_id: m for m in missions}
    train_ids = list(assignment["train"])
    test_ids = list(assignment["test"])
    overlap = set(train_ids) & set(test_ids)
    if overlap:
        raise ValueError(f"missions assigned to both sides: {sorted(overlap)}")
    unknown = (set(train_ids) | set(test_ids)) - set(by_id)
    if unknown:
        raise ValueError(f"assignment names unknown missions: {sorted(unknown)}")
    missing = set(by_id) - set(train_ids) - set(test_ids)
    if missing:
        raise ValueError(f"assignment does not cover missions: {sorted(missing)}")
    if not train_ids or not test_ids:
        raise ValueError("both split sides must be non-empty")
    return [by_id[i] for i in train_ids], [by_id[i] for i in test_ids]


def make_windows(mission: Mission, spec, geom: BeamGeometry | None = None) -> list[SampleWindow]:
    """Slide a length-spec.window window over every gap-free segment.

    One window per epoch t >= window within a segment; the target holds the
    true missing-beam values at t and current masks them out. Depth and
    velocity channels are attached per the spec's extra-input flags
    (velocities computed from the four measured beams when not recorded).
    """
    n = spec.window
    if len(mission) < n + 1:
        raise ValueError(
            f"mission {mission.mission_id} has {len(mission)} samples; needs > {n}"
        )
    missing = tuple(sorted(spec.missing))
    available = tuple(b for b in BEAMS if b not in missing)
    if geom is None:
        geom = BeamGeometry.janus()

    def step_velocity(sample):
        if sample.velocity is not None:
            return sample.velocity
        return ls_velocity(geom, BeamVector.full(sample.beams))

    windows = []
    for start, end in mission.segments():
        for t in range(start + n, end):
            past = mission.samples[t - n : t]
            cur = mission.samples[t]
            depth = None
            if spec.use_depth:
                if any(s.depth is None for s in past):
                    raise ValueError(
                        f"mission {mission.mission_id}: depth channel requested but missing"
                    )
                depth = np.array([s.depth for s in past])
            vel = None
            if spec.use_velocity:
                vel = np.stack([step_velocity(s) for s in past])
            windows.append(SampleWindow(
                past_beams=np.stack([s.beams for s in past]),
                current=cur.beams[[b - 1 for b in available]].copy(),
                target=cur.beams[[b - 1 for b in missing]].copy(),
                missing=missing,
                available=available,
                current_full=cur.beams.copy(),
                past_depth=depth,
                past_velocity=vel,
                mission_id=mission.mission_id,
                t_index=t,
            ))
    return windows


def enumerate_combinations() -> list[tuple[int, ...]]:
    """All 14 missing-beam subsets: 4 singletons, 6 pairs, 4 triples."""
    combos = []
    for size in (1, 2, 3):
        combos.extend(itertools.combinations(BEAMS, size))
    return combos
