"""Targeted correction of detected artifact regions at a chosen timestep.

The primary method re-noises the current clean-image prediction inside
the detected mask and perturbs it with a seeded stochastic factor, so
corrupted regions are re-randomized while healthy pixels pass through
bit-exactly.  Two simpler baselines are provided: splicing in a
re-noised prediction from an earlier recorded step, and clipping the
per-pixel weighted score change against a bound.

All stochastic draws come from purpose-tagged streams keyed by
(seed, sample, timestep), so enabling or disabling a correction method
never shifts any other random draw in the run.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .detector import ArtifactMask, DetectorConfig, ScoreBank, detect
from .rng import normal_field
from .sampler import Trajectory, predict_x0, renoise, rollout
from .schedule import (ConfigError, NoiseSchedule, StepGrid, alpha_bar_at,
                       temporal_weight)

__all__ = [
    "CorrectionConfig",
    "RunResult",
    "ttc_correct",
    "state_replace",
    "score_clip",
    "run_corrected",
]

_METHODS = ("none", "ttc", "state_replace", "score_clip")
_PERTURBATION_MODES = ("literal_multiplicative", "one_plus_multiplicative", "additive")
_CLIP_BOUND_MODES = ("tau", "fixed")


@dataclass(frozen=True)
class CorrectionConfig:
    """Correction method selection and its knobs.

    gamma scales the stochastic perturbation; perturbation_mode picks how
    the factor gamma * xi enters (pure multiplication by it, 1 + it, or
    addition of it).  replace_source_step of None means the correction
    step itself.  xi_stream keys the xi draw only, so runs can vary the
    perturbation while every other draw stays fixed.
    """

    method: str = "ttc"
    gamma: float = 0.1
    perturbation_mode: str = "literal_multiplicative"
    replace_source_step: int | None = None
    clip_bound_mode: str = "tau"
    clip_bound: float = 0.0
    xi_stream: int = 0

    def __post_init__(self):
        if self.method not in _METHODS:
            raise ConfigError(f"unknown method {self.method!r}; choose from {_METHODS}")
        if self.gamma < 0.0:
            raise ConfigError(f"gamma must be >= 0, got {self.gamma}")
        if self.perturbation_mode not in _PERTURBATION_MODES:
            raise ConfigError(
                f"unknown perturbation_mode {self.perturbation_mode!r}; "
                f"choose from {_PERTURBATION_MODES}")
        if self.clip_bound_mode not in _CLIP_BOUND_MODES:
            raise ConfigError(
                f"unknown clip_bound_mode {self.clip_bound_mode!r}; "
                f"choose from {_CLIP_BOUND_MODES}")
        if self.clip_bound_mode == "fixed" and not (self.clip_bound > 0.0):
            raise ConfigError("fixed clip_bound_mode needs clip_bound > 0")


def _as_mask_array(mask) -> np.ndarray:
    m = mask.mask if isinstance(mask, ArtifactMask) else np.asarray(mask, dtype=bool)
    if m.ndim != 2:
        raise ConfigError(f"mask must be a 2-d pixel grid, got shape {m.shape}")
    return m


def ttc_correct(x: np.ndarray, mask, sched: NoiseSchedule, score: np.ndarray,
                t: int, cfg: CorrectionConfig, *, seed: int, sample: int = 0) -> np.ndarray:
    """Masked re-noise-and-perturb of the predicted clean image.

    Inside the mask the output is p(renoise(predict_x0(x, score, t), t, eps))
    with p applying gamma * xi per cfg.perturbation_mode; outside it the
    input passes through bit-exactly.  eps and xi come from independent
    purpose-tagged streams.
    """
    m = _as_mask_array(mask)
    if m.shape != x.shape[-2:]:
        raise ConfigError(f"mask shape {m.shape} does not match image {x.shape[-2:]}")
    out = x.copy()
    if not m.any():
        return out
    eps = normal_field(x.shape, seed, sample=sample, t=t, tag="correct.eps")
    xi = normal_field(x.shape, seed, sample=sample, t=t,
                      tag=f"correct.xi.{cfg.xi_stream}")
    r = renoise(predict_x0(x, score, sched, t), sched, t, eps)
    if cfg.perturbation_mode == "literal_multiplicative":
        corrected = r * (cfg.gamma * xi)
    elif cfg.perturbation_mode == "one_plus_multiplicative":
        corrected = r * (1.0 + cfg.gamma * xi)
    else:
        corrected = r + cfg.gamma * xi
    out[:, m] = corrected[:, m]
    return out


def _renoise_splice(x: np.ndarray, m: np.ndarray, sched: NoiseSchedule,
                    t_correct: int, src_state: np.ndarray, src_score: np.ndarray,
                    src_t: int, *, seed: int, sample: int) -> np.ndarray:
    out = x.copy()
    if not m.any():
        return out
    x0h = predict_x0(src_state, src_score, sched, src_t)
    eps = normal_field(x.shape, seed, sample=sample, t=t_correct, tag="correct.eps")
    r = renoise(x0h, sched, t_correct, eps)
    out[:, m] = r[:, m]
    return out


def state_replace(x: np.ndarray, mask, traj: Trajectory, sched: NoiseSchedule,
                  t_correct: int, cfg: CorrectionConfig, *, seed: int,
                  sample: int = 0) -> np.ndarray:
    """Splice a re-noised earlier clean-image prediction into the mask.

    The prediction is taken at cfg.replace_source_step (defaulting to
    t_correct itself), re-noised to t_correct with a fresh eps, and
    copied into mask pixels only.
    """
    m = _as_mask_array(mask)
    src = t_correct if cfg.replace_source_step is None else cfg.replace_source_step
    if src < t_correct:
        raise ConfigError(
            f"replace_source_step ({src}) must not be later than t_correct ({t_correct})")
    hits = np.nonzero(np.asarray(traj.timesteps) == src)[0]
    if hits.size == 0:
        raise ConfigError(f"trajectory does not contain replace_source_step {src}")
    i = int(hits[0])
    return _renoise_splice(x, m, sched, t_correct, traj.states[i], traj.scores[i],
                           src, seed=seed, sample=sample)


def score_clip(field: np.ndarray, t: int, prev_field: np.ndarray, t_prev: int,
               sched: NoiseSchedule, bound: float) -> np.ndarray:
    """Limit each pixel's weighted score change against the previous step.

    Where |w(t) s - w(t_prev) s_prev| exceeds bound, the change is
    rescaled to magnitude bound with direction preserved; everywhere else
    the field passes through bit-exactly.
    """
    if not (bound > 0.0):
        raise ConfigError(f"clip bound must be positive, got {bound}")
    wt = temporal_weight(sched, t)
    wp = temporal_weight(sched, t_prev)
    delta = wt * field - wp * prev_field
    mag = np.abs(delta)
    over = mag > bound
    safe = np.where(over, mag, 1.0)
    clipped = (wp * prev_field + delta * (bound / safe)) / wt
    return np.where(over, clipped, field)


@dataclass(frozen=True)
class RunResult:
    """Everything a corrected (or plain) run produced.

    x_before/score_before are the state and score at t_correct prior to
    intervention; x_after/score_after follow it (identical for method
    "none" or an empty mask).  trajectory always records the pre-hook
    path, so x_before equals the trajectory's entry at t_correct.
    """

    trajectory: Trajectory
    mask: ArtifactMask
    final: np.ndarray
    method: str
    t_correct: int
    x_before: np.ndarray
    x_after: np.ndarray
    score_before: np.ndarray
    score_after: np.ndarray

    @property
    def corrected(self) -> bool:
        return not np.array_equal(self.x_after, self.x_before) or \
            not np.array_equal(self.score_after, self.score_before)


def run_corrected(oracle, sched: NoiseSchedule, grid: StepGrid, seed: int,
                  det_cfg: DetectorConfig, corr_cfg: CorrectionConfig, *,
                  sample: int = 0, parameterization: str = "score") -> RunResult:
    """Full pipeline: sample, bank scores, detect at t_correct, correct, finish.

    Scores are banked at every grid step t with
    t_correct <= t <= t_detect_start; detection runs once, right after
    banking at t_correct, and the configured method is applied to the
    live state (method "none" records the mask and intervenes nowhere).
    """
    if det_cfg.t_correct not in grid:
        raise ConfigError(
            f"t_correct {det_cfg.t_correct} is not on the step grid")
    in_window = [int(t) for t in grid.timesteps
                 if det_cfg.t_correct <= int(t) <= det_cfg.t_detect_start]
    if len(in_window) < 2:
        raise ConfigError(
            f"detection window [{det_cfg.t_correct}, {det_cfg.t_detect_start}] covers "
            f"{len(in_window)} grid steps; need at least 2")

    bank = ScoreBank()
    record: dict[int, tuple[np.ndarray, np.ndarray]] = {}
    captured: dict[str, object] = {}

    def hook(i, t, t_next, x, s):
        if not (det_cfg.t_correct <= t <= det_cfg.t_detect_start):
            return None
        bank.add(t, alpha_bar_at(sched, t), s)
        record[t] = (x.copy(), s.copy())
        if t != det_cfg.t_correct:
            return None
        mask = detect(bank, det_cfg)
        captured["mask"] = mask
        captured["x_before"] = x.copy()
        captured["score_before"] = s.copy()
        captured["x_after"] = x.copy()
        captured["score_after"] = s.copy()
        if corr_cfg.method == "none":
            return None
        if corr_cfg.method == "score_clip":
            t_prev = bank.timesteps[-2]
            prev_s = record[t_prev][1]
            bound = corr_cfg.clip_bound if corr_cfg.clip_bound_mode == "fixed" \
                else float(mask.taus[-1])
            s_new = score_clip(s, t, prev_s, t_prev, sched, bound)
            captured["score_after"] = s_new.copy()
            return (x, s_new)
        if not mask.mask.any():
            return None
        if corr_cfg.method == "ttc":
            x_new = ttc_correct(x, mask, sched, s, t, corr_cfg, seed=seed, sample=sample)
        else:
            src = corr_cfg.replace_source_step
            if src is None:
                src = t
            if src < t:
                raise ConfigError(
                    f"replace_source_step ({src}) must not be later than t_correct ({t})")
            if src not in record:
                raise ConfigError(
                    f"replace_source_step {src} was not banked; it must be a grid "
                    f"step within the detection window")
            src_state, src_score = record[src]
            x_new = _renoise_splice(x, mask.mask, sched, t, src_state, src_score,
                                    src, seed=seed, sample=sample)
        s_new = oracle(x_new, t)
        captured["x_after"] = x_new.copy()
        captured["score_after"] = s_new.copy()
        return (x_new, s_new)

    traj = rollout(oracle, sched, grid, seed=seed, sample=sample, hook=hook,
                   parameterization=parameterization)
    return RunResult(trajectory=traj, mask=captured["mask"], final=traj.x0,
                     method=corr_cfg.method, t_correct=det_cfg.t_correct,
                     x_before=captured["x_before"], x_after=captured["x_after"],
                     score_before=captured["score_before"],
                     score_after=captured["score_after"])
