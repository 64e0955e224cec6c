"""Metrics and comparison matrices over fill methods and beam combinations.

Produces per-combination × per-method cells (missing-beam RMSE, speed error)
on a test split, with CSV round-tripping and a rendered text table. Speed
error defaults to the RMSE of the Euclidean norm of the velocity difference;
an alternative magnitude definition (RMSE of the speed difference) sits
behind the mode flag.
"""

import csv
import itertools
from dataclasses import dataclass, replace

import numpy as np

from .dataset import make_windows
from .fillers import FillerContext, average_fill, virtual_beam_fill
from .geometry import BeamGeometry, BeamVector, ls_velocity
from .models import ModelSpec, TrainedModel, regress_missing, train

METHODS = ("average", "virtual", "three_beams", "missbeam")

SPEED_MODES = ("norm", "magnitude")

HYPER_GRID = {
    "learning_rate": (1e-5, 5e-5, 1e-4),
    "hidden_size": (100, 250, 500, 750),
    "lstm_output": (5, 7),
}


def rmse(actual, predicted) -> float:
    """Root mean squared error over all entries of two same-shape arrays."""
    a = np.asarray(actual, dtype=np.float64)
    p = np.asarray(predicted, dtype=np.float64)
    if a.shape != p.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {p.shape}")
    if a.size == 0:
        raise ValueError("rmse of empty input")
    return float(np.sqrt(np.mean((a - p) ** 2)))


def speed_error(true_v, est_v, mode: str = "norm") -> float:
    """Velocity-accuracy scalar over paired (n, 3) velocity sequences.

    mode="norm": RMSE of the per-sample Euclidean norm of the difference.
    mode="magnitude": RMSE of the per-sample speed (vector norm) difference.
    """
    if mode not in SPEED_MODES:
        raise ValueError(f"mode must be one of {SPEED_MODES}, got '{mode}'")
    t = np.asarray(true_v, dtype=np.float64).reshape(-1, 3)
    e = np.asarray(est_v, dtype=np.float64).reshape(-1, 3)
    if t.shape != e.shape:
        raise ValueError(f"shape mismatch: {t.shape} vs {e.shape}")
    if t.shape[0] == 0:
        raise ValueError("speed_error of empty input")
    if mode == "magnitude":
        diff = np.linalg.norm(e, axis=1) - np.linalg.norm(t, axis=1)
    else:
        diff = np.linalg.norm(e - t, axis=1)
    return float(np.sqrt(np.mean(diff**2)))


def improvement_pct(baseline: float, ours: float) -> float:
    """Relative gain of `ours` over `baseline` in percent."""
    if baseline <= 0:
        raise ValueError(f"baseline must be positive, got {baseline}")
    return 100.0 * (baseline - ours) / baseline


@dataclass(frozen=True)
class ReportCell:
    """One combination × method entry. beam_rmse is None for methods that
    never reconstruct the missing beams (three_beams)."""

    combination: tuple[int, ...]
    method: str
    beam_rmse: float | None
    speed_err: float
    samples: int


CSV_COLUMNS = ["combination", "method", "beam_rmse", "speed_error", "samples"]


@dataclass
class EvaluationReport:
    cells: list[ReportCell]
    metadata: dict

    def cell(self, combination, method: str) -> ReportCell:
        combination = tuple(sorted(combination))
        for c in self.cells:
            if c.combination == combination and c.method == method:
                return c
        raise KeyError(f"no cell for {combination} / {method}")

    def combinations(self):
        seen = []
        for c in self.cells:
            if c.combination not in seen:
                seen.append(c.combination)
        return seen

    def methods(self):
        return [m for m in METHODS if any(c.method == m for c in self.cells)]

    def improvement(self, combination, baseline: str, ours: str = "missbeam",
                    metric: str = "speed_err") -> float:
        base = getattr(self.cell(combination, baseline), metric)
        mine = getattr(self.cell(combination, ours), metric)
        return improvement_pct(base, mine)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            for key in sorted(self.metadata):
                fh.write(f"# {key}={self.metadata[key]}\n")
            writer = csv.writer(fh)
            writer.writerow(CSV_COLUMNS)
            for c in self.cells:
                writer.writerow([
                    "+".join(str(b) for b in c.combination),
                    c.method,
                    "" if c.beam_rmse is None else repr(c.beam_rmse),
                    repr(c.speed_err),
                    c.samples,
                ])

    @classmethod
    def from_csv(cls, path) -> "EvaluationReport":
        metadata = {}
        rows = []
        with open(path, newline="") as fh:
            body = []
            for line in fh:
                if line.startswith("#"):
                    key, _, value = line[1:].strip().partition("=")
                    metadata[key] = value
                else:
                    body.append(line)
            for row in csv.reader(body):
                if row == CSV_COLUMNS:
                    continue
                combo = tuple(int(b) for b in row[0].split("+"))
                rows.append(ReportCell(
                    combination=combo,
                    method=row[1],
                    beam_rmse=None if row[2] == "" else float(row[2]),
                    speed_err=float(row[3]),
                    samples=int(row[4]),
                ))
        return cls(cells=rows, metadata=metadata)

    def pretty(self) -> str:
        """Text tables: one block per metric, combinations as rows, methods
        as columns, plus a gain column when both average and missbeam ran."""
        methods = self.methods()
        combos = self.combinations()
        gains = "average" in methods and "missbeam" in methods
        blocks = []
        for metric, title in (("beam_rmse", "missing-beam RMSE [m/s]"),
                              ("speed_err", "speed error [m/s]")):
            header = ["missing", *methods]
            if gains:
                header.append("gain% vs average")
            body = []
            for combo in combos:
                row = ["+".join(str(b) for b in combo)]
                for m in methods:
                    try:
                        value = getattr(self.cell(combo, m), metric)
                    except KeyError:
                        value = None
                    row.append("-" if value is None else f"{value:.4f}")
                if gains:
                    base = getattr(self.cell(combo, "average"), metric)
                    ours = getattr(self.cell(combo, "missbeam"), metric)
                    row.append("-" if base is None or ours is None
                               else f"{improvement_pct(base, ours):+.1f}")
                body.append(row)
            widths = [max(len(r[k]) for r in [header, *body]) for k in range(len(header))]
            lines = [title]
            for r in [header, *body]:
                lines.append("  ".join(v.ljust(w) for v, w in zip(r, widths)).rstrip())
            blocks.append("\n".join(lines))
        return "\n\n".join(blocks) + "\n"


def _window_spec(combination, window):
    return ModelSpec(missing=tuple(combination), window=window)


def run_matrix(geom: BeamGeometry, missions, combinations, methods,
               models=None, window: int = 6, metadata=None,
               speed_mode: str = "norm") -> EvaluationReport:
    """Evaluate every requested method on every beam combination.

    Ground-truth velocity at each epoch is the least-squares solution over
    the full four measured beams; each method reconstructs the combination's
    missing beams (or, for three_beams, solves from the remaining three
    directly) and is scored on beam RMSE and speed error. `models` maps
    combination tuples to TrainedModel instances and is required whenever
    "missbeam" is requested.
    """
    models = models or {}
    for m in methods:
        if m not in METHODS:
            raise ValueError(f"unknown method '{m}' (choose from {METHODS})")
    combinations = [tuple(sorted(c)) for c in combinations]
    cells = []
    for combo in sorted(combinations, key=lambda c: (len(c), c)):
        trained = models.get(combo)
        if "missbeam" in methods and trained is None:
            raise ValueError(f"missing model for combination {combo}")
        base_spec = trained.spec if trained is not None else _window_spec(combo, window)
        windows = [w for mission in missions
                   for w in make_windows(mission, base_spec, geom)]
        if not windows:
            raise ValueError(f"no evaluation windows for combination {combo}")
        truths = np.array([ls_velocity(geom, BeamVector.full(w.current_full))
                           for w in windows])
        targets = np.array([w.target for w in windows])
        for method in methods:
            if method == "three_beams" and len(combo) != 1:
                continue
            preds = None
            if method == "three_beams":
                est = np.array([
                    ls_velocity(geom, BeamVector(values=w.current, present=w.available))
                    for w in windows
                ])
            else:
                filled = []
                for w in windows:
                    if method == "average":
                        ctx = FillerContext(history=w.past_beams, window=base_spec.window)
                        filled.append(average_fill(ctx, combo))
                    elif method == "virtual":
                        last_v = ls_velocity(geom, BeamVector.full(w.past_beams[-1]))
                        filled.append(virtual_beam_fill(geom, last_v, combo))
                    else:
                        filled.append(regress_missing(trained, w))
                preds = np.array([f.values for f in filled])
                est = np.array([
                    ls_velocity(geom, f.merge(BeamVector(values=w.current,
                                                         present=w.available)))
                    for f, w in zip(filled, windows)
                ])
            cells.append(ReportCell(
                combination=combo,
                method=method,
                beam_rmse=None if preds is None else rmse(targets, preds),
                speed_err=speed_error(truths, est, mode=speed_mode),
                samples=len(windows),
            ))
    return EvaluationReport(cells=cells, metadata=dict(metadata or {}))


def window_sweep(geom: BeamGeometry, train_missions, test_missions,
                 spec: ModelSpec, sizes=range(3, 11), seed: int = 0):
    """Retrain the model at each window size and report test beam RMSE.

    Returns a list of (window, rmse) pairs in the order given.
    """
    points = []
    for n in sizes:
        s = replace(spec, window=int(n))
        windows = [w for m in train_missions for w in make_windows(m, s, geom)]
        trained = train(s, windows, seed=seed)
        report = run_matrix(geom, test_missions, [s.missing], ["missbeam"],
                            models={s.missing: trained})
        points.append((int(n), report.cell(s.missing, "missbeam").beam_rmse))
    return points


def best_window(points):
    """(window, rmse) pair with the smallest rmse; first wins ties."""
    if not points:
        raise ValueError("empty sweep")
    return min(points, key=lambda p: (p[1], p[0]))


def hyperparameter_search(geom: BeamGeometry, train_missions, test_missions,
                          spec: ModelSpec, draws: int = 15, seed: int = 0):
    """Random search (without replacement) over the fixed lr × hidden ×
    lstm-output grid. Returns rows of (learning_rate, hidden_size,
    lstm_output, rmse) in draw order.
    """
    grid = list(itertools.product(*HYPER_GRID.values()))
    if draws < 1:
        raise ValueError("draws must be >= 1")
    if draws > len(grid):
        raise ValueError(f"cannot draw {draws} from {len(grid)} grid points")
    rng = np.random.default_rng(seed)
    picks = rng.choice(len(grid), size=draws, replace=False)
    windows = [w for m in train_missions for w in make_windows(m, spec, geom)]
    rows = []
    for idx in picks:
        lr, hidden, lstm_out = grid[int(idx)]
        s = replace(spec, learning_rate=lr, hidden_size=hidden, lstm_output=lstm_out)
        trained = train(s, windows, seed=seed)
        report = run_matrix(geom, test_missions, [s.missing], ["missbeam"],
                            models={s.missing: trained})
        rows.append((lr, hidden, lstm_out,
                     report.cell(s.missing, "missbeam").beam_rmse))
    return rows


def plot_window_sweep(points, path, title="Missing-beam RMSE vs window size"):
    """Line plot of a window_sweep result, written as a standalone image."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    xs = [p[0] for p in points]
    ys = [p[1] for p in points]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(xs, ys, marker="o")
    ax.set_xlabel("window size [samples]")
    ax.set_ylabel("RMSE [m/s]")
    ax.set_title(title)
    ax.grid(True, alpha=0.4)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
