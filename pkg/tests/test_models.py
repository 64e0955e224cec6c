"""Model construction, normalization, training loop, and persistence."""

import numpy as np
import pytest

from missbeam.dataset import (
    BeamSample,
    Mission,
    enumerate_combinations,
    make_windows,
)
from missbeam.geometry import BeamGeometry, forward_beams, ls_velocity
from missbeam.models import (
    MODEL_FORMAT,
    ModelSpec,
    Normalization,
    TrainedModel,
    TrainingDivergedError,
    build_model,
    complete_and_estimate,
    denormalize_prediction,
    encode_window,
    regress_missing,
    train,
)
from missbeam.simulate import DopplerModel, TrajectorySpec, synthesize_mission

GEOM = BeamGeometry.janus()


def window_copy(w, **overrides):
    from dataclasses import replace
    return replace(w, **overrides)


def synth_windows(spec, duration=40, seed=0, noise=0.0, profile="sinusoidal",
                  base=(1.0, 0.0, 0.0)):
    traj = TrajectorySpec(duration_s=duration, profile=profile, seed=seed,
                          base_velocity=base)
    dm = (DopplerModel.from_velocity_noise(noise) if noise > 0
          else DopplerModel())
    mission = synthesize_mission(traj, GEOM, dm, mission_id=f"s{seed}")
    return make_windows(mission, spec, GEOM)


def test_model_spec_validation():
    spec = ModelSpec(missing=(3, 1, 3))
    assert spec.missing == (1, 3)
    assert spec.available == (2, 4)
    with pytest.raises(ValueError, match="missing"):
        ModelSpec(missing=())
    with pytest.raises(ValueError, match="missing"):
        ModelSpec(missing=(1, 2, 3, 4))
    with pytest.raises(ValueError, match="missing"):
        ModelSpec(missing=(0,))
    with pytest.raises(ValueError, match="architecture"):
        ModelSpec(missing=(1,), architecture="transformer")
    with pytest.raises(ValueError, match="window"):
        ModelSpec(missing=(1,), window=0)
    with pytest.raises(ValueError, match="sizes"):
        ModelSpec(missing=(1,), hidden_size=0)
    with pytest.raises(ValueError, match="sizes"):
        ModelSpec(missing=(1,), fc_sizes=(64, 0))
    with pytest.raises(ValueError, match="learning rate"):
        ModelSpec(missing=(1,), learning_rate=0.0)
    with pytest.raises(ValueError, match="epochs"):
        ModelSpec(missing=(1,), epochs=-1)
    with pytest.raises(ValueError, match="batch_size"):
        ModelSpec(missing=(1,), batch_size=0)


def test_step_features_counts_extra_channels():
    assert ModelSpec(missing=(1,)).step_features == 4
    assert ModelSpec(missing=(1,), use_depth=True).step_features == 5
    assert ModelSpec(missing=(1,), use_velocity=True).step_features == 7
    assert ModelSpec(missing=(1,), use_depth=True, use_velocity=True).step_features == 8


def test_build_model_shapes():
    spec = ModelSpec(missing=(1, 2), hidden_size=20, lstm_output=7, fc_sizes=(64,))
    model = build_model(spec, seed=0)
    # concat = lstm projection width + two available beams
    assert model.fc[0].W.value.shape == (7 + 2, 64)
    assert model.fc[-1].W.value.shape == (64, 2)
    out = model.forward(np.zeros((spec.window, 4)), np.zeros(2))
    assert out.shape == (2,)

    triple = ModelSpec(missing=(1, 2, 3), hidden_size=8, lstm_output=5)
    m3 = build_model(triple, seed=0)
    assert m3.fc[0].W.value.shape == (5 + 1, 64)
    assert m3.forward(np.zeros((6, 4)), np.zeros(1)).shape == (3,)


def test_all_architectures_all_combinations_forward():
    rng = np.random.default_rng(0)
    for arch in ("lstm_multihead", "cnn_multihead", "lstm_singlehead", "cnn_singlehead"):
        for combo in enumerate_combinations():
            spec = ModelSpec(missing=combo, architecture=arch, window=5,
                             hidden_size=6, lstm_output=3, fc_sizes=(8,))
            model = build_model(spec, seed=1)
            past = rng.normal(size=(5, 4))
            current = rng.normal(size=len(spec.available)) if spec.multihead else None
            out = model.forward(past, current)
            assert out.shape == (len(combo),)
            assert np.all(np.isfinite(out))


def test_multihead_requires_current_input():
    spec = ModelSpec(missing=(1,), hidden_size=4, lstm_output=3)
    model = build_model(spec, seed=0)
    with pytest.raises(ValueError, match="available-beam"):
        model.forward(np.zeros((6, 4)))


def test_zero_epochs_returns_initial_weights():
    spec = ModelSpec(missing=(2,), hidden_size=6, lstm_output=3, epochs=0)
    windows = synth_windows(spec, duration=20)
    trained = train(spec, windows, seed=5)
    init = build_model(spec, seed=5)
    for (name_a, pa), (name_b, pb) in zip(trained.model.parameters(),
                                          init.parameters()):
        assert name_a == name_b
        np.testing.assert_array_equal(pa.value, pb.value)
    assert trained.loss_history == []


def test_training_is_seed_deterministic():
    spec = ModelSpec(missing=(1,), hidden_size=6, lstm_output=3, epochs=2,
                     learning_rate=1e-3)
    windows = synth_windows(spec, duration=20, noise=0.02)
    a = train(spec, windows, seed=3)
    b = train(spec, windows, seed=3)
    assert a.loss_history == b.loss_history
    for (_, pa), (_, pb) in zip(a.model.parameters(), b.model.parameters()):
        np.testing.assert_array_equal(pa.value, pb.value)
    c = train(spec, windows, seed=4)
    assert a.loss_history != c.loss_history


def test_learning_rate_changes_trajectory():
    windows = synth_windows(ModelSpec(missing=(1,)), duration=20, noise=0.02)
    histories = []
    for lr in (5e-5, 1e-4):
        spec = ModelSpec(missing=(1,), hidden_size=6, lstm_output=3, epochs=2,
                         learning_rate=lr)
        trained = train(spec, windows, seed=0)
        assert all(np.isfinite(v) for v in trained.loss_history)
        histories.append(trained.loss_history)
    assert histories[0] != histories[1]


def test_training_fits_constant_velocity_below_noise():
    # memorizing a constant-velocity run must beat the per-beam noise floor
    sigma = 0.05
    spec = ModelSpec(missing=(1,), window=6, hidden_size=32, lstm_output=7,
                     epochs=60, learning_rate=3e-3)
    windows = synth_windows(spec, duration=206, seed=8, noise=sigma,
                            profile="constant")
    assert len(windows) == 200
    trained = train(spec, windows, seed=0)
    preds = np.array([regress_missing(trained, w).values[0] for w in windows])
    truth = np.array([w.target[0] for w in windows])
    rmse = float(np.sqrt(np.mean((preds - truth) ** 2)))
    assert rmse < sigma
    assert trained.loss_history[-1] < trained.loss_history[0]


def test_noise_free_constant_regression_is_exact():
    # zero-initialized biases propagate the all-zero normalized input to a
    # zero prediction, so de-normalization alone recovers the constant beam
    spec = ModelSpec(missing=(3,), hidden_size=6, lstm_output=3, epochs=0)
    windows = synth_windows(spec, duration=16, profile="constant",
                            base=(0.9, -0.2, 0.0))
    trained = train(spec, windows, seed=0)
    expected = forward_beams(GEOM, np.array([0.9, -0.2, 0.0])).values[2]
    for w in windows:
        assert abs(regress_missing(trained, w).values[0] - expected) < 1e-12


def test_trained_model_uses_current_beam_input():
    spec = ModelSpec(missing=(1,), hidden_size=8, lstm_output=4, epochs=4,
                     learning_rate=1e-3)
    windows = synth_windows(spec, duration=40, noise=0.02)
    trained = train(spec, windows, seed=0)
    w = windows[5]
    base = regress_missing(trained, w).values[0]
    bumped = window_copy(w, current=w.current + 0.5)
    assert regress_missing(trained, bumped).values[0] != base


def test_divergence_raises():
    spec = ModelSpec(missing=(1,), hidden_size=4, lstm_output=3, epochs=3,
                     learning_rate=1e150)
    windows = synth_windows(spec, duration=20, noise=0.02)
    with np.errstate(over="ignore", invalid="ignore"):
        with pytest.raises(TrainingDivergedError, match="non-finite loss"):
            train(spec, windows, seed=0)


def test_train_rejects_empty_windows():
    with pytest.raises(ValueError, match="windows"):
        train(ModelSpec(missing=(1,)), [], seed=0)


def test_batch_accumulation_runs_and_is_deterministic():
    spec1 = ModelSpec(missing=(2,), hidden_size=6, lstm_output=3, epochs=2,
                      learning_rate=1e-3, batch_size=4)
    windows = synth_windows(spec1, duration=30, noise=0.02)
    a = train(spec1, windows, seed=0)
    b = train(spec1, windows, seed=0)
    assert a.loss_history == b.loss_history
    single = ModelSpec(missing=(2,), hidden_size=6, lstm_output=3, epochs=2,
                       learning_rate=1e-3, batch_size=1)
    c = train(single, windows, seed=0)
    assert a.loss_history != c.loss_history  # batching changes the updates


def test_normalization_fit_and_inverse():
    spec = ModelSpec(missing=(1,), window=4)
    windows = synth_windows(spec, duration=30, noise=0.05)
    norm = Normalization.fit(windows)
    assert norm.beam_mean.shape == (4,)
    assert np.all(norm.beam_std > 0)
    past, current, target = encode_window(windows[0], spec, norm)
    assert past.shape == (4, 4)
    back = denormalize_prediction(target, spec, norm)
    np.testing.assert_allclose(back, windows[0].target, atol=1e-12)


def test_normalization_constant_channel_floored():
    spec = ModelSpec(missing=(1,), window=3)
    windows = synth_windows(spec, duration=16, profile="constant")
    norm = Normalization.fit(windows)
    np.testing.assert_array_equal(norm.beam_std, np.ones(4))
    past, _, _ = encode_window(windows[0], spec, norm)
    np.testing.assert_allclose(past, np.zeros((3, 4)), atol=1e-12)


def test_normalize_false_uses_identity():
    spec = ModelSpec(missing=(1,), hidden_size=4, lstm_output=3, epochs=0,
                     normalize=False)
    windows = synth_windows(spec, duration=16)
    trained = train(spec, windows, seed=0)
    np.testing.assert_array_equal(trained.normalization.beam_mean, np.zeros(4))
    np.testing.assert_array_equal(trained.normalization.beam_std, np.ones(4))
    past, current, target = encode_window(windows[0], spec, trained.normalization)
    np.testing.assert_array_equal(past, windows[0].past_beams)
    np.testing.assert_array_equal(target, windows[0].target)


def test_encode_window_guards():
    spec = ModelSpec(missing=(1,), window=6)
    other = ModelSpec(missing=(2,), window=6)
    windows = synth_windows(spec, duration=16)
    norm = Normalization.identity()
    with pytest.raises(ValueError, match="conflicts"):
        encode_window(windows[0], other, norm)
    short_spec = ModelSpec(missing=(1,), window=5)
    with pytest.raises(ValueError, match="window length"):
        encode_window(windows[0], short_spec, norm)
    depth_spec = ModelSpec(missing=(1,), window=6, use_depth=True)
    stripped = window_copy(windows[0], past_depth=None)
    with pytest.raises(ValueError, match="depth"):
        encode_window(stripped, depth_spec, norm)
    vel_spec = ModelSpec(missing=(1,), window=6, use_velocity=True)
    with pytest.raises(ValueError, match="velocity"):
        encode_window(windows[0], vel_spec, norm)


def test_save_load_round_trip_bitwise(tmp_path):
    spec = ModelSpec(missing=(1, 4), hidden_size=6, lstm_output=3, epochs=1,
                     learning_rate=1e-3)
    windows = synth_windows(spec, duration=20, noise=0.02)
    trained = train(spec, windows, seed=2)
    path = tmp_path / "model.json"
    trained.save(path)
    back = TrainedModel.load(path)
    assert back.spec == spec
    assert back.seed == 2
    assert back.loss_history == trained.loss_history
    for w in windows[:5]:
        np.testing.assert_array_equal(regress_missing(back, w).values,
                                      regress_missing(trained, w).values)


def test_load_rejects_unknown_format(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"format": "something-else"}')
    with pytest.raises(ValueError, match="format"):
        TrainedModel.load(path)
    assert MODEL_FORMAT == "missbeam-model-v1"


def test_load_state_dict_guards():
    spec = ModelSpec(missing=(1,), hidden_size=4, lstm_output=3)
    model = build_model(spec, seed=0)
    state = model.state_dict()
    first = next(iter(state))
    bad = dict(state)
    bad[first] = np.zeros((1, 1))
    with pytest.raises(ValueError, match="shape"):
        model.load_state_dict(bad)
    del bad[first]
    with pytest.raises(KeyError):
        model.load_state_dict(bad)


def test_regress_missing_returns_labeled_beams():
    spec = ModelSpec(missing=(2, 3), hidden_size=4, lstm_output=3, epochs=0)
    windows = synth_windows(spec, duration=16)
    trained = train(spec, windows, seed=0)
    out = regress_missing(trained, windows[0])
    assert out.present == (2, 3)
    assert out.values.shape == (2,)


def test_complete_and_estimate_recovers_constant_velocity():
    base = np.array([0.8, 0.1, -0.05])
    spec = ModelSpec(missing=(4,), hidden_size=6, lstm_output=3, epochs=0)
    windows = synth_windows(spec, duration=16, profile="constant",
                            base=tuple(base))
    trained = train(spec, windows, seed=0)
    for w in windows:
        v = complete_and_estimate(trained, GEOM, w)
        assert v.shape == (3,)
        np.testing.assert_allclose(v, base, atol=1e-9)


def test_loss_history_length_matches_epochs():
    spec = ModelSpec(missing=(1,), hidden_size=4, lstm_output=3, epochs=3,
                     learning_rate=1e-3)
    windows = synth_windows(spec, duration=16, noise=0.01)
    trained = train(spec, windows, seed=0)
    assert len(trained.loss_history) == 3
    assert all(v >= 0 for v in trained.loss_history)
