"""Metrics, the evaluation matrix, reporting, and the tuning sweeps."""

import numpy as np
import pytest

from missbeam.dataset import enumerate_combinations, make_windows
from missbeam.evaluate import (
    HYPER_GRID,
    METHODS,
    EvaluationReport,
    ReportCell,
    best_window,
    hyperparameter_search,
    improvement_pct,
    plot_window_sweep,
    rmse,
    run_matrix,
    speed_error,
    window_sweep,
)
from missbeam.geometry import BeamGeometry
from missbeam.models import ModelSpec, train
from missbeam.simulate import DopplerModel, TrajectorySpec, synthesize_mission

GEOM = BeamGeometry.janus()


def synth_mission(duration=40, seed=0, noise=0.0, profile="sinusoidal",
                  mission_id=None, period=60.0):
    spec = TrajectorySpec(duration_s=duration, profile=profile, seed=seed,
                          period=period)
    dm = (DopplerModel.from_velocity_noise(noise) if noise > 0
          else DopplerModel())
    return synthesize_mission(spec, GEOM, dm,
                              mission_id=mission_id or f"m{seed}")


def test_rmse_reference_values():
    assert rmse([1.0, 2.0, 3.0], [1.0, 2.0, 3.0]) == 0.0
    assert rmse([0.0, 0.0], [1.0, -1.0]) == 1.0
    assert abs(rmse([0.0], [np.sqrt(3.0)]) - 1.7320508075688772) < 1e-15
    two_d = rmse(np.zeros((2, 2)), np.full((2, 2), 2.0))
    assert two_d == 2.0


def test_rmse_properties():
    rng = np.random.default_rng(0)
    for _ in range(30):
        a = rng.normal(size=12)
        b = rng.normal(size=12)
        c = rng.normal()
        assert abs(rmse(a, b) - rmse(b, a)) < 1e-15
        assert abs(rmse(a + c, b + c) - rmse(a, b)) < 1e-12
        assert rmse(a, b) >= 0.0


def test_rmse_guards():
    with pytest.raises(ValueError, match="mismatch"):
        rmse([1.0, 2.0], [1.0])
    with pytest.raises(ValueError, match="empty"):
        rmse([], [])


def test_speed_error_reference_values():
    t = np.tile([1.0, 0.0, 0.0], (4, 1))
    assert speed_error(t, t) == 0.0
    offset = t + np.array([0.1, 0.0, 0.0])
    assert abs(speed_error(t, offset) - 0.1) < 1e-15
    # alternating +/-0.25 on two axes: per-sample norm sqrt(2)*0.25
    alt = t.copy()
    alt[:, 1] = [0.25, -0.25, 0.25, -0.25]
    alt[:, 2] = [0.25, 0.25, -0.25, -0.25]
    assert abs(speed_error(t, alt) - 0.35355339059327376) < 1e-15


def test_speed_error_modes_differ():
    t = np.tile([1.0, 0.0, 0.0], (3, 1))
    # rotate the estimate: same speed, wrong direction
    e = np.tile([0.0, 1.0, 0.0], (3, 1))
    assert speed_error(t, e, mode="magnitude") == 0.0
    assert abs(speed_error(t, e, mode="norm") - np.sqrt(2.0)) < 1e-15


def test_speed_error_norm_mode_rotation_invariant():
    rng = np.random.default_rng(1)
    for _ in range(20):
        t = rng.normal(size=(6, 3))
        e = rng.normal(size=(6, 3))
        q, _ = np.linalg.qr(rng.normal(size=(3, 3)))
        assert abs(speed_error(t, e) - speed_error(t @ q.T, e @ q.T)) < 1e-12


def test_speed_error_guards():
    t = np.zeros((2, 3))
    with pytest.raises(ValueError, match="mode"):
        speed_error(t, t, mode="cosine")
    with pytest.raises(ValueError, match="mismatch"):
        speed_error(t, np.zeros((3, 3)))
    with pytest.raises(ValueError, match="empty"):
        speed_error(np.zeros((0, 3)), np.zeros((0, 3)))


def test_improvement_pct_reference_values():
    assert abs(improvement_pct(0.106, 0.053) - 50.0) < 1e-12
    assert improvement_pct(0.2, 0.2) == 0.0
    assert improvement_pct(0.2, 0.0) == 100.0
    assert improvement_pct(0.1, 0.2) == -100.0
    with pytest.raises(ValueError, match="positive"):
        improvement_pct(0.0, 0.1)
    rng = np.random.default_rng(2)
    for _ in range(20):
        base = rng.uniform(0.01, 1.0)
        q = rng.uniform(0.0, 2.0)
        assert abs(improvement_pct(base, base * q) - 100.0 * (1.0 - q)) < 1e-9


def make_report():
    cells = [
        ReportCell(combination=(1,), method="average", beam_rmse=0.08,
                   speed_err=0.05, samples=100),
        ReportCell(combination=(1,), method="three_beams", beam_rmse=None,
                   speed_err=0.06, samples=100),
        ReportCell(combination=(1,), method="missbeam", beam_rmse=0.02,
                   speed_err=0.025, samples=100),
        ReportCell(combination=(1, 2), method="average", beam_rmse=0.09,
                   speed_err=0.07, samples=90),
        ReportCell(combination=(1, 2), method="missbeam", beam_rmse=0.03,
                   speed_err=0.03, samples=90),
    ]
    return EvaluationReport(cells=cells, metadata={"noise": "0.05", "seed": "3"})


def test_report_accessors():
    report = make_report()
    assert report.combinations() == [(1,), (1, 2)]
    assert report.methods() == ["average", "three_beams", "missbeam"]
    assert report.cell((1,), "missbeam").speed_err == 0.025
    assert report.cell([2, 1], "average").beam_rmse == 0.09
    with pytest.raises(KeyError):
        report.cell((3,), "average")
    assert abs(report.improvement((1,), "average") - 50.0) < 1e-12


def test_report_csv_round_trip(tmp_path):
    report = make_report()
    path = tmp_path / "report.csv"
    report.to_csv(path)
    back = EvaluationReport.from_csv(path)
    assert back.metadata == report.metadata
    assert back.cells == report.cells
    text = path.read_text()
    assert text.startswith("# noise=0.05\n# seed=3\n")
    assert "1+2,average," in text


def test_report_pretty_lists_all_entries():
    text = make_report().pretty()
    assert "missing-beam RMSE [m/s]" in text
    assert "speed error [m/s]" in text
    assert "gain% vs average" in text
    assert "1+2" in text
    assert "+50.0" in text
    # three_beams never reconstructs beams, so its RMSE prints as a dash
    rmse_block = text.split("\n\n")[0]
    row = [ln for ln in rmse_block.splitlines() if ln.startswith("1 ")][0]
    assert " -" in row


def test_run_matrix_baseline_cell_inventory():
    missions = [synth_mission(duration=24, seed=0, noise=0.02)]
    combos = enumerate_combinations()
    report = run_matrix(GEOM, missions, combos,
                        ["average", "virtual", "three_beams"], window=4)
    # three_beams only applies to single-beam outages
    assert len(report.cells) == 14 + 14 + 4
    assert report.combinations() == sorted(combos, key=lambda c: (len(c), c))
    for c in report.cells:
        assert c.samples == 20
        assert c.speed_err >= 0.0
        if c.method == "three_beams":
            assert c.beam_rmse is None
            assert len(c.combination) == 1
        else:
            assert c.beam_rmse >= 0.0
    assert report.metadata == {}


def test_run_matrix_virtual_is_exact_on_constant_motion():
    missions = [synth_mission(duration=20, seed=1, profile="constant")]
    report = run_matrix(GEOM, missions, [(2,), (1, 3)], ["virtual"], window=4)
    for cell in report.cells:
        assert cell.beam_rmse < 1e-12
        assert cell.speed_err < 1e-12


def test_run_matrix_method_and_model_guards():
    missions = [synth_mission(duration=20, seed=2)]
    with pytest.raises(ValueError, match="unknown method"):
        run_matrix(GEOM, missions, [(1,)], ["kalman"])
    with pytest.raises(ValueError, match="missing model"):
        run_matrix(GEOM, missions, [(1,)], ["missbeam"])


def test_run_matrix_uses_trained_model():
    spec = ModelSpec(missing=(2,), window=4, hidden_size=6, lstm_output=3,
                     epochs=1, learning_rate=1e-3)
    train_m = synth_mission(duration=30, seed=3, noise=0.02)
    windows = make_windows(train_m, spec, GEOM)
    trained = train(spec, windows, seed=0)
    test_m = synth_mission(duration=24, seed=4, noise=0.02)
    report = run_matrix(GEOM, [test_m], [(2,)], ["missbeam", "average"],
                        models={(2,): trained})
    cell = report.cell((2,), "missbeam")
    assert cell.beam_rmse > 0.0
    assert cell.samples == 20
    again = run_matrix(GEOM, [test_m], [(2,)], ["missbeam", "average"],
                       models={(2,): trained})
    assert again.cells == report.cells


def test_run_matrix_rejects_empty_missions():
    with pytest.raises(ValueError):
        run_matrix(GEOM, [], [(1,)], ["average"])


def test_window_sweep_and_best_window():
    spec = ModelSpec(missing=(1,), hidden_size=4, lstm_output=3, epochs=1,
                     learning_rate=1e-3)
    train_m = [synth_mission(duration=30, seed=5, noise=0.02)]
    test_m = [synth_mission(duration=24, seed=6, noise=0.02)]
    points = window_sweep(GEOM, train_m, test_m, spec, sizes=(3, 4), seed=0)
    assert [p[0] for p in points] == [3, 4]
    assert all(p[1] > 0 for p in points)
    assert best_window(points) == min(points, key=lambda p: p[1])
    assert best_window([(3, 0.5), (4, 0.5)]) == (3, 0.5)
    with pytest.raises(ValueError, match="empty"):
        best_window([])


def test_hyperparameter_search_draws_from_grid():
    spec = ModelSpec(missing=(1,), window=4, hidden_size=4, lstm_output=3,
                     epochs=1, learning_rate=1e-3)
    train_m = [synth_mission(duration=24, seed=7, noise=0.02)]
    test_m = [synth_mission(duration=20, seed=8, noise=0.02)]
    rows = hyperparameter_search(GEOM, train_m, test_m, spec, draws=2, seed=0)
    assert len(rows) == 2
    seen = set()
    for lr, hidden, lstm_out, err in rows:
        assert lr in HYPER_GRID["learning_rate"]
        assert hidden in HYPER_GRID["hidden_size"]
        assert lstm_out in HYPER_GRID["lstm_output"]
        assert err > 0
        seen.add((lr, hidden, lstm_out))
    assert len(seen) == 2  # sampling without replacement
    again = hyperparameter_search(GEOM, train_m, test_m, spec, draws=2, seed=0)
    assert again == rows


def test_hyperparameter_search_draw_guards():
    spec = ModelSpec(missing=(1,))
    with pytest.raises(ValueError, match="draws"):
        hyperparameter_search(GEOM, [], [], spec, draws=0)
    with pytest.raises(ValueError, match="24"):
        hyperparameter_search(GEOM, [], [], spec, draws=25)


def test_plot_window_sweep_writes_png(tmp_path):
    path = tmp_path / "sweep.png"
    plot_window_sweep([(3, 0.1), (4, 0.08), (5, 0.09)], path)
    data = path.read_bytes()
    assert data[:8] == b"\x89PNG\r\n\x1a\n"


def test_methods_constant_inventory():
    assert METHODS == ("average", "virtual", "three_beams", "missbeam")
