"""Deterministic diffusion sampling with analytic score oracles.

The package samples a Gaussian-mixture image distribution with exact
scores, injects ground-truth score traps, detects them from the temporal
dynamics of the weighted score, and corrects the flagged regions at a
chosen timestep.  Everything is seed-addressable and bit-reproducible.
"""

from .schedule import (ConfigError, NoiseSchedule, StepGrid, alpha_bar_at,
                       grid_step_at_fraction, make_grid, make_schedule, snr,
                       snr_from_alpha_bar, temporal_weight, weight_from_alpha_bar)
from .rng import normal_field, stream, tag_to_int
from .gmm import (GmmModel, GmmOracle, TrappedOracle, TrapSpec, builtin_template,
                  default_model, log_density, marginal_params, responsibilities,
                  sample_data, true_score)
from .sampler import (Trajectory, ddim_step, ddim_step_eps, eps_from_score,
                      predict_x0, renoise, rollout, score_from_eps)
from .detector import (ArtifactMask, DetectorConfig, ScoreBank, acceleration_curve,
                       adaptive_threshold, bank_from_trajectory, detect,
                       detection_metrics, mad, weighted_dynamics)
from .corrector import (CorrectionConfig, RunResult, run_corrected, score_clip,
                        state_replace, ttc_correct)
from .metrics import (RunReport, SampleSet, knn_precision_recall, nll_under_model,
                      region_escaped, sliced_w2)
from .trace_io import (FLAG_SCORES, FLAG_STATES, TraceCorruptError, TraceError,
                       TraceFormatError, TraceRecord, TraceVersionError,
                       read_trace, write_trace)
from .pgm import heatmap_to_pgm, mask_to_pgm, pgm_to_mask, read_pgm, write_pgm

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "NoiseSchedule", "StepGrid", "alpha_bar_at",
    "grid_step_at_fraction", "make_grid", "make_schedule", "snr",
    "snr_from_alpha_bar", "temporal_weight", "weight_from_alpha_bar",
    "normal_field", "stream", "tag_to_int",
    "GmmModel", "GmmOracle", "TrappedOracle", "TrapSpec", "builtin_template",
    "default_model", "log_density", "marginal_params", "responsibilities",
    "sample_data", "true_score",
    "Trajectory", "ddim_step", "ddim_step_eps", "eps_from_score", "predict_x0",
    "renoise", "rollout", "score_from_eps",
    "ArtifactMask", "DetectorConfig", "ScoreBank", "acceleration_curve",
    "adaptive_threshold", "bank_from_trajectory", "detect", "detection_metrics",
    "mad", "weighted_dynamics",
    "CorrectionConfig", "RunResult", "run_corrected", "score_clip",
    "state_replace", "ttc_correct",
    "RunReport", "SampleSet", "knn_precision_recall", "nll_under_model",
    "region_escaped", "sliced_w2",
    "FLAG_SCORES", "FLAG_STATES", "TraceCorruptError", "TraceError",
    "TraceFormatError", "TraceRecord", "TraceVersionError", "read_trace",
    "write_trace",
    "heatmap_to_pgm", "mask_to_pgm", "pgm_to_mask", "read_pgm", "write_pgm",
    "__version__",
]
