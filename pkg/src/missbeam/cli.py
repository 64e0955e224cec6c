"""Command-line pipeline: simulate | ingest | train | evaluate | sweep | report.

Every command resolves its parameters from built-in defaults, then an
optional --config JSON file, then explicit flags (flags win), and writes the
fully resolved configuration next to its outputs as <command>_config.json so
any run can be reproduced from its artifacts. MISSBEAM_SEED sets the default
seed. Outputs are byte-stable: rerunning a command with the same inputs
produces identical files.
"""

import argparse
import csv
import json
import os
import sys
from dataclasses import asdict
from pathlib import Path

from .dataset import (enumerate_combinations, load_missions, load_split_manifest,
                      make_windows, save_missions, split_train_test)
from .evaluate import (METHODS, SPEED_MODES, EvaluationReport, best_window,
                       hyperparameter_search, plot_window_sweep, run_matrix,
                       window_sweep)
from .geometry import BeamGeometry
from .models import ARCHITECTURES, ModelSpec, TrainedModel, train
from .simulate import PROFILES, DopplerModel, TrajectorySpec, synthesize_mission

ENV_SEED = "MISSBEAM_SEED"


def default_seed() -> int:
    return int(os.environ.get(ENV_SEED, "0"))


def combo_name(combination) -> str:
    return "+".join(str(b) for b in combination)


def parse_beams(text) -> tuple[int, ...]:
    if isinstance(text, (list, tuple)):
        beams = tuple(int(b) for b in text)
    else:
        beams = tuple(int(b) for b in str(text).replace("+", ",").split(","))
    if len(set(beams)) == 4:
        raise ValueError("all four beams missing leaves nothing to navigate on; "
                         "at least one beam must remain")
    return beams


def parse_combinations(tokens):
    combos = []
    for token in tokens:
        if token == "all":
            combos.extend(enumerate_combinations())
        elif token == "singles":
            combos.extend([(b,) for b in (1, 2, 3, 4)])
        else:
            combos.append(parse_beams(token))
    out = []
    for c in combos:
        c = tuple(sorted(c))
        if c not in out:
            out.append(c)
    return out


def parse_vec3(text):
    parts = [float(x) for x in str(text).split(",")]
    if len(parts) != 3:
        raise ValueError(f"expected 3 comma-joined components, got '{text}'")
    return tuple(parts)


def parse_sizes(text):
    if isinstance(text, (list, tuple)):
        return [int(x) for x in text]
    text = str(text)
    if "-" in text:
        lo, hi = text.split("-", 1)
        sizes = list(range(int(lo), int(hi) + 1))
    else:
        sizes = [int(x) for x in text.split(",")]
    if not sizes or any(s < 1 for s in sizes):
        raise ValueError(f"invalid window sizes '{text}'")
    return sizes


def resolve_config(args, defaults):
    """defaults < JSON config file < explicit flags."""
    cfg = dict(defaults)
    path = getattr(args, "config", None)
    if path:
        with open(path) as fh:
            file_cfg = json.load(fh)
        unknown = set(file_cfg) - set(defaults)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(file_cfg)
    for key in defaults:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = value
    return cfg


def ensure_out(cfg) -> Path:
    if not cfg.get("out"):
        raise ValueError("an output directory is required (--out)")
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def write_resolved(cfg, out: Path, command: str):
    with open(out / f"{command}_config.json", "w") as fh:
        json.dump(cfg, fh, indent=2, sort_keys=True)
        fh.write("\n")


def model_defaults():
    return {
        "missing": "1",
        "arch": "lstm_multihead",
        "window": 6,
        "hidden": 500,
        "lstm_output": 7,
        "fc": "64",
        "lr": 5e-5,
        "epochs": 150,
        "batch": 1,
        "use_depth": False,
        "use_velocity": False,
        "normalize": True,
    }


def add_model_flags(p):
    p.add_argument("--missing", help="missing beams, e.g. 1,2")
    p.add_argument("--arch", choices=ARCHITECTURES)
    p.add_argument("--window", type=int, help="past samples per window")
    p.add_argument("--hidden", type=int, help="LSTM hidden size")
    p.add_argument("--lstm-output", type=int, help="recurrent feature width")
    p.add_argument("--fc", help="dense head widths, e.g. 64")
    p.add_argument("--lr", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--batch", type=int)
    p.add_argument("--use-depth", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--use-velocity", action=argparse.BooleanOptionalAction, default=None)
    p.add_argument("--normalize", action=argparse.BooleanOptionalAction, default=None)


def spec_from_cfg(cfg) -> ModelSpec:
    return ModelSpec(
        missing=parse_beams(cfg["missing"]),
        architecture=cfg["arch"],
        window=int(cfg["window"]),
        use_depth=bool(cfg["use_depth"]),
        use_velocity=bool(cfg["use_velocity"]),
        hidden_size=int(cfg["hidden"]),
        lstm_output=int(cfg["lstm_output"]),
        fc_sizes=tuple(int(x) for x in str(cfg["fc"]).split(",")),
        learning_rate=float(cfg["lr"]),
        epochs=int(cfg["epochs"]),
        batch_size=int(cfg["batch"]),
        normalize=bool(cfg["normalize"]),
    )


def load_sides(cfg):
    """(train side, test side) per the optional split manifest."""
    missions = load_missions(cfg["data"])
    if cfg.get("split"):
        manifest = load_split_manifest(cfg["split"])
        return split_train_test(missions, manifest)
    return missions, missions


# ---------------------------------------------------------------- simulate

def simulate_defaults():
    return {
        "out": None,
        "profile": "sinusoidal",
        "duration": 600,
        "seed": default_seed(),
        "amplitude": 0.5,
        "period": 60.0,
        "base_velocity": "1,0,0",
        "depth0": 30.0,
        "depth_amplitude": 2.0,
        "depth_period": 120.0,
        "bias_khz": 0.0,
        "noise_khz": 0.0,
        "beam_noise": None,
        "scale_factor": 0.0,
        "sound_speed": 1500.0,
        "frequency_hz": 600e3,
        "pitch_deg": 20.0,
        "missions": None,
        "train": None,
        "test": None,
    }


def cmd_simulate(args) -> int:
    cfg = resolve_config(args, simulate_defaults())
    out = ensure_out(cfg)
    geom = BeamGeometry.janus(cfg["pitch_deg"])
    dm_kwargs = dict(bias=float(cfg["bias_khz"]), scale_factor=float(cfg["scale_factor"]),
                     sound_speed=float(cfg["sound_speed"]),
                     frequency_hz=float(cfg["frequency_hz"]))
    if cfg["beam_noise"] is not None:
        dm = DopplerModel.from_velocity_noise(float(cfg["beam_noise"]), **dm_kwargs)
    else:
        dm = DopplerModel(noise_std=float(cfg["noise_khz"]), **dm_kwargs)

    tokens = cfg["missions"] or [f"m0:{cfg['duration']}"]
    names = []
    specs = []
    for k, token in enumerate(tokens):
        mid, _, dur = str(token).partition(":")
        if mid in names:
            raise ValueError(f"duplicate mission id '{mid}'")
        names.append(mid)
        specs.append(TrajectorySpec(
            duration_s=int(dur) if dur else int(cfg["duration"]),
            profile=cfg["profile"],
            amplitude=float(cfg["amplitude"]),
            period=float(cfg["period"]),
            base_velocity=parse_vec3(cfg["base_velocity"]),
            depth0=float(cfg["depth0"]),
            depth_amplitude=float(cfg["depth_amplitude"]),
            depth_period=float(cfg["depth_period"]),
            seed=int(cfg["seed"]) + k,
        ))
    missions = [synthesize_mission(spec, geom, dm, mission_id=mid)
                for mid, spec in zip(names, specs)]

    scenario = {
        "doppler": asdict(dm),
        "geometry": {"pitch_deg": float(cfg["pitch_deg"])},
        "missions": [{"id": mid, **asdict(spec)} for mid, spec in zip(names, specs)],
    }
    save_missions(missions, out / "missions.csv")
    with open(out / "scenario.json", "w") as fh:
        json.dump(scenario, fh, indent=2, sort_keys=True)
        fh.write("\n")
    if cfg["train"] or cfg["test"]:
        if not (cfg["train"] and cfg["test"]):
            raise ValueError("--train and --test must be given together")
        manifest = {"train": list(cfg["train"]), "test": list(cfg["test"])}
        split_train_test(missions, manifest)  # validates ids/coverage
        with open(out / "split.json", "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
        print(f"wrote {out / 'split.json'}")
    write_resolved(cfg, out, "simulate")
    rows = sum(len(m) for m in missions)
    print(f"wrote {out / 'missions.csv'} ({len(missions)} missions, {rows} rows)")
    return 0


# ------------------------------------------------------------------ ingest

def ingest_defaults():
    return {"input": None, "format": "canonical", "out": None}


def cmd_ingest(args) -> int:
    cfg = resolve_config(args, ingest_defaults())
    if not cfg["input"]:
        raise ValueError("an input recording is required (--input)")
    out = ensure_out(cfg)
    missions = load_missions(cfg["input"], fmt=cfg["format"])
    save_missions(missions, out / "missions.csv")
    write_resolved(cfg, out, "ingest")
    rows = sum(len(m) for m in missions)
    gaps = sum(sum(m.gap_before) for m in missions)
    print(f"wrote {out / 'missions.csv'} ({len(missions)} missions, {rows} rows, "
          f"{gaps} gaps)")
    return 0


# ------------------------------------------------------------------- train

def train_defaults():
    return {**model_defaults(), "data": None, "split": None,
            "seed": default_seed(), "pitch_deg": 20.0, "out": None}


def cmd_train(args) -> int:
    cfg = resolve_config(args, train_defaults())
    if not cfg["data"]:
        raise ValueError("a dataset is required (--data)")
    out = ensure_out(cfg)
    spec = spec_from_cfg(cfg)
    geom = BeamGeometry.janus(float(cfg["pitch_deg"]))
    train_missions, _ = load_sides(cfg)
    windows = [w for m in train_missions for w in make_windows(m, spec, geom)]
    trained = train(spec, windows, seed=int(cfg["seed"]))
    name = combo_name(spec.missing)
    trained.save(out / f"model_{name}.json")
    with open(out / f"loss_{name}.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "loss"])
        for epoch, loss in enumerate(trained.loss_history):
            writer.writerow([epoch, repr(loss)])
    write_resolved(cfg, out, "train")
    final = trained.loss_history[-1] if trained.loss_history else float("nan")
    print(f"wrote {out / f'model_{name}.json'} "
          f"({len(windows)} windows, final loss {final:.6g})")
    return 0


# ---------------------------------------------------------------- evaluate

def evaluate_defaults():
    return {"data": None, "split": None, "models": None,
            "combinations": ["singles"], "methods": "average,virtual",
            "window": 6, "speed_metric": "norm", "pitch_deg": 20.0,
            "pretty": False, "out": None}


def cmd_evaluate(args) -> int:
    cfg = resolve_config(args, evaluate_defaults())
    if not cfg["data"]:
        raise ValueError("a dataset is required (--data)")
    out = ensure_out(cfg)
    geom = BeamGeometry.janus(float(cfg["pitch_deg"]))
    combos = parse_combinations(cfg["combinations"])
    methods = [m.strip() for m in str(cfg["methods"]).split(",") if m.strip()]
    models = {}
    if "missbeam" in methods:
        if not cfg["models"]:
            raise ValueError("the missbeam method needs a model directory (--models)")
        for combo in combos:
            path = Path(cfg["models"]) / f"model_{combo_name(combo)}.json"
            if not path.exists():
                raise ValueError(f"no model file for combination {combo}: expected {path}")
            models[combo] = TrainedModel.load(path)
    _, test_missions = load_sides(cfg)
    report = run_matrix(geom, test_missions, combos, methods, models=models,
                        window=int(cfg["window"]),
                        metadata={"dataset": str(cfg["data"]),
                                  "split": str(cfg["split"] or ""),
                                  "speed_metric": cfg["speed_metric"]},
                        speed_mode=cfg["speed_metric"])
    report.to_csv(out / "report.csv")
    write_resolved(cfg, out, "evaluate")
    if cfg["pretty"]:
        print(report.pretty())
    print(f"wrote {out / 'report.csv'} ({len(report.cells)} cells)")
    return 0


# ------------------------------------------------------------------- sweep

def sweep_defaults():
    return {**model_defaults(), "missing": "1,2", "mode": "window",
            "data": None, "split": None, "sizes": "3-10", "draws": 15,
            "seed": default_seed(), "pitch_deg": 20.0, "out": None}


def cmd_sweep(args) -> int:
    cfg = resolve_config(args, sweep_defaults())
    if not cfg["data"]:
        raise ValueError("a dataset is required (--data)")
    if not cfg["split"]:
        raise ValueError("sweep needs --split to separate train and test missions")
    out = ensure_out(cfg)
    spec = spec_from_cfg(cfg)
    geom = BeamGeometry.janus(float(cfg["pitch_deg"]))
    train_missions, test_missions = load_sides(cfg)
    if cfg["mode"] == "window":
        points = window_sweep(geom, train_missions, test_missions, spec,
                              sizes=parse_sizes(cfg["sizes"]), seed=int(cfg["seed"]))
        with open(out / "sweep.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["window", "rmse"])
            for window, err in points:
                writer.writerow([window, repr(err)])
        best = best_window(points)
        summary = {"mode": "window", "best_window": best[0], "best_rmse": best[1]}
    elif cfg["mode"] == "hyper":
        rows = hyperparameter_search(geom, train_missions, test_missions, spec,
                                     draws=int(cfg["draws"]), seed=int(cfg["seed"]))
        with open(out / "sweep.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["learning_rate", "hidden_size", "lstm_output", "rmse"])
            for lr, hidden, lstm_out, err in rows:
                writer.writerow([repr(lr), hidden, lstm_out, repr(err)])
        best = min(rows, key=lambda r: r[3])
        summary = {"mode": "hyper", "best_learning_rate": best[0],
                   "best_hidden_size": best[1], "best_lstm_output": best[2],
                   "best_rmse": best[3]}
    else:
        raise ValueError(f"unknown sweep mode '{cfg['mode']}' (window or hyper)")
    with open(out / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    write_resolved(cfg, out, "sweep")
    print(f"wrote {out / 'sweep.csv'} and {out / 'summary.json'}")
    return 0


# ------------------------------------------------------------------ report

def report_defaults():
    return {"report": None, "sweep": None, "pretty": False, "out": None}


def cmd_report(args) -> int:
    cfg = resolve_config(args, report_defaults())
    if not cfg["report"] and not cfg["sweep"]:
        raise ValueError("nothing to render: give --report and/or --sweep")
    out = ensure_out(cfg)
    produced = []
    if cfg["report"]:
        report = EvaluationReport.from_csv(cfg["report"])
        text = report.pretty()
        with open(out / "report.txt", "w") as fh:
            fh.write(text)
        if cfg["pretty"]:
            print(text)
        produced.append(out / "report.txt")
    if cfg["sweep"]:
        with open(cfg["sweep"], newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows or rows[0] != ["window", "rmse"]:
            raise ValueError(f"{cfg['sweep']}: sweep plot needs a window-mode "
                             "sweep file (header window,rmse)")
        points = [(int(r[0]), float(r[1])) for r in rows[1:]]
        plot_window_sweep(points, out / "window_sweep.png")
        produced.append(out / "window_sweep.png")
    write_resolved(cfg, out, "report")
    for path in produced:
        print(f"wrote {path}")
    return 0


# -------------------------------------------------------------------- main

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="missbeam",
        description="Regress missing DVL beams and estimate AUV velocity.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="synthesize missions as canonical CSV")
    p.add_argument("--config")
    p.add_argument("--out")
    p.add_argument("--profile", choices=PROFILES)
    p.add_argument("--duration", type=int, help="samples at 1 Hz")
    p.add_argument("--seed", type=int)
    p.add_argument("--amplitude", type=float)
    p.add_argument("--period", type=float)
    p.add_argument("--base-velocity", help="vx,vy,vz in m/s")
    p.add_argument("--depth0", type=float)
    p.add_argument("--depth-amplitude", type=float)
    p.add_argument("--depth-period", type=float)
    p.add_argument("--bias-khz", type=float, help="Doppler-shift bias [kHz]")
    p.add_argument("--noise-khz", type=float, help="Doppler-shift noise std [kHz]")
    p.add_argument("--beam-noise", type=float,
                   help="beam-velocity noise std [m/s]; overrides --noise-khz")
    p.add_argument("--scale-factor", type=float)
    p.add_argument("--sound-speed", type=float)
    p.add_argument("--frequency-hz", type=float)
    p.add_argument("--pitch-deg", type=float)
    p.add_argument("--missions", nargs="+", metavar="ID[:DURATION]")
    p.add_argument("--train", nargs="+", metavar="ID")
    p.add_argument("--test", nargs="+", metavar="ID")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("ingest", help="convert a recording to canonical CSV")
    p.add_argument("--config")
    p.add_argument("--out")
    p.add_argument("--input")
    p.add_argument("--format")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("train", help="train one missing-beam regressor")
    p.add_argument("--config")
    p.add_argument("--out")
    p.add_argument("--data", help="canonical missions CSV")
    p.add_argument("--split", help="split manifest JSON (trains on its train side)")
    p.add_argument("--seed", type=int)
    p.add_argument("--pitch-deg", type=float)
    add_model_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="score fill methods on the test split")
    p.add_argument("--config")
    p.add_argument("--out")
    p.add_argument("--data")
    p.add_argument("--split")
    p.add_argument("--models", help="directory holding model_<combo>.json files")
    p.add_argument("--combinations", nargs="+",
                   help="e.g. 1 2 1,2 | all | singles")
    p.add_argument("--methods", help=f"comma-joined subset of {METHODS}")
    p.add_argument("--window", type=int)
    p.add_argument("--speed-metric", choices=SPEED_MODES)
    p.add_argument("--pitch-deg", type=float)
    p.add_argument("--pretty", action=argparse.BooleanOptionalAction, default=None)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="window-size or hyperparameter sweep")
    p.add_argument("--config")
    p.add_argument("--out")
    p.add_argument("--data")
    p.add_argument("--split")
    p.add_argument("--mode", choices=("window", "hyper"))
    p.add_argument("--sizes", help="window sizes, e.g. 3-10 or 3,5,7")
    p.add_argument("--draws", type=int, help="hyperparameter samples")
    p.add_argument("--seed", type=int)
    p.add_argument("--pitch-deg", type=float)
    add_model_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("report", help="render tables and plots from run outputs")
    p.add_argument("--config")
    p.add_argument("--out")
    p.add_argument("--report", help="report.csv from evaluate")
    p.add_argument("--sweep", help="sweep.csv from a window sweep")
    p.add_argument("--pretty", action=argparse.BooleanOptionalAction, default=None)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # CLI boundary: report and signal failure
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
