"""Missing-DVL-beam regression and AUV velocity estimation.

Core pieces: Janus beam geometry and least-squares velocity solving
(geometry), model-based gap fillers (fillers), a small from-scratch neural
stack (nn), windowed dataset handling (dataset), multi-head regressors
(models), a measurement simulator (simulate), and evaluation matrices
(evaluate). The `missbeam` console script exposes the full pipeline.
"""

from .dataset import (BeamSample, Mission, SampleWindow, enumerate_combinations,
                      load_missions, load_split_manifest, make_windows,
                      register_format, save_missions, split_train_test)
from .evaluate import (EvaluationReport, ReportCell, best_window,
                       hyperparameter_search, improvement_pct, plot_window_sweep,
                       rmse, run_matrix, speed_error, window_sweep)
from .fillers import FillerContext, average_fill, virtual_beam_fill
from .geometry import (BEAMS, BeamGeometry, BeamVector, beam_direction,
                       direction_matrix, forward_beams, ls_velocity)
from .models import (ModelSpec, MissBeamModel, Normalization, TrainedModel,
                     TrainingDivergedError, build_model, complete_and_estimate,
                     regress_missing, train)
from .simulate import (DopplerModel, TrajectorySpec, measure_beams, measure_depth,
                       pressure_to_depth, simulate_trajectory, synthesize_mission,
                       true_velocity_table)

__version__ = "0.1.0"

__all__ = [
    "BEAMS",
    "BeamGeometry",
    "BeamSample",
    "BeamVector",
    "DopplerModel",
    "EvaluationReport",
    "FillerContext",
    "Mission",
    "MissBeamModel",
    "ModelSpec",
    "Normalization",
    "ReportCell",
    "SampleWindow",
    "TrainedModel",
    "TrainingDivergedError",
    "TrajectorySpec",
    "average_fill",
    "beam_direction",
    "best_window",
    "build_model",
    "complete_and_estimate",
    "direction_matrix",
    "enumerate_combinations",
    "forward_beams",
    "hyperparameter_search",
    "improvement_pct",
    "load_missions",
    "load_split_manifest",
    "ls_velocity",
    "make_windows",
    "measure_beams",
    "measure_depth",
    "plot_window_sweep",
    "pressure_to_depth",
    "regress_missing",
    "register_format",
    "rmse",
    "run_matrix",
    "save_missions",
    "simulate_trajectory",
    "speed_error",
    "split_train_test",
    "synthesize_mission",
    "train",
    "true_velocity_table",
    "virtual_beam_fill",
    "window_sweep",
]
