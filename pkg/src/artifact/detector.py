"""Temporal score-dynamics artifact detection.

Anomalous regions betray themselves through the dynamics of the weighted
score w(t) * s(x_t, t) across adjacent inference steps: ordinary pixels
drift smoothly while trapped pixels spike and then lock.  A score bank
collects the per-step score fields over a detection window; each
consecutive pair yields a per-pixel dynamics grid that is thresholded
adaptively, and the flagged sets accumulate into the final mask.

Banked scores are stored as float32 regardless of source precision, so a
mask computed live during sampling and one recomputed from a serialized
trace agree bit-for-bit.  All arithmetic on top of the banked values runs
in float64.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .sampler import Trajectory
from .schedule import ConfigError, weight_from_alpha_bar

__all__ = [
    "ScoreBank",
    "DetectorConfig",
    "ArtifactMask",
    "bank_from_trajectory",
    "mad",
    "weighted_dynamics",
    "adaptive_threshold",
    "detect",
    "detection_metrics",
    "acceleration_curve",
]

_BANK_MEAN_MODES = ("mean_abs_weighted", "mean_abs_raw")
_CHANNEL_REDUCES = ("l2_over_channels", "union_over_channels")


@dataclass(frozen=True)
class DetectorConfig:
    """Detection window endpoints and threshold construction knobs.

    t_detect_start and t_correct are absolute timesteps (the CLI exposes
    them as fractions of T_total and resolves against the step grid).
    """

    t_detect_start: int
    t_correct: int
    mad_multiplier: float = 1.0
    mean_bank_mode: str = "mean_abs_weighted"
    channel_reduce: str = "l2_over_channels"
    dilation_radius: int = 1

    def __post_init__(self):
        if self.t_correct < 1:
            raise ConfigError(f"t_correct must be >= 1, got {self.t_correct}")
        if self.t_detect_start <= self.t_correct:
            raise ConfigError(
                f"t_detect_start ({self.t_detect_start}) must exceed "
                f"t_correct ({self.t_correct})")
        if not (self.mad_multiplier > 0.0):
            raise ConfigError(f"mad_multiplier must be positive, got {self.mad_multiplier}")
        if self.mean_bank_mode not in _BANK_MEAN_MODES:
            raise ConfigError(
                f"unknown mean_bank_mode {self.mean_bank_mode!r}; choose from {_BANK_MEAN_MODES}")
        if self.channel_reduce not in _CHANNEL_REDUCES:
            raise ConfigError(
                f"unknown channel_reduce {self.channel_reduce!r}; choose from {_CHANNEL_REDUCES}")
        if self.dilation_radius < 0:
            raise ConfigError(f"dilation_radius must be >= 0, got {self.dilation_radius}")


class ScoreBank:
    """Ordered store of (t, alpha_bar, score) over the detection window.

    Scores are canonicalized to float32 on entry; each entry carries its
    own alpha_bar so a bank rebuilt from a trace needs no schedule.
    """

    def __init__(self):
        self.timesteps: list[int] = []
        self.alpha_bars: list[float] = []
        self.scores: list[np.ndarray] = []

    def __len__(self) -> int:
        return len(self.timesteps)

    def add(self, t: int, alpha_bar: float, score: np.ndarray) -> None:
        if self.timesteps and t >= self.timesteps[-1]:
            raise ConfigError(
                f"bank timesteps must strictly decrease: {self.timesteps[-1]} then {t}")
        if not (0.0 < alpha_bar <= 1.0):
            raise ConfigError(f"alpha_bar out of (0, 1]: {alpha_bar}")
        arr = np.asarray(score)
        if arr.ndim != 3:
            raise ConfigError(f"score field must be (c, h, w), got shape {arr.shape}")
        if self.scores and arr.shape != self.scores[0].shape:
            raise ConfigError(
                f"score shape {arr.shape} does not match bank shape {self.scores[0].shape}")
        self.timesteps.append(int(t))
        self.alpha_bars.append(float(alpha_bar))
        self.scores.append(arr.astype(np.float32, copy=True))

    @property
    def image_shape(self) -> tuple[int, int, int]:
        if not self.scores:
            raise ConfigError("empty score bank has no shape")
        return tuple(self.scores[0].shape)

    @property
    def n_pairs(self) -> int:
        return max(0, len(self.timesteps) - 1)

    def scaled(self, c: float) -> "ScoreBank":
        """New bank with every score field multiplied by c."""
        out = ScoreBank()
        for t, ab, s in zip(self.timesteps, self.alpha_bars, self.scores):
            out.add(t, ab, np.float32(c) * s)
        return out


def bank_from_trajectory(traj: Trajectory, t_high: int, t_low: int) -> ScoreBank:
    """Bank the recorded scores with t_low <= t <= t_high, descending."""
    if t_high < t_low:
        raise ConfigError(f"window is reversed: t_high {t_high} < t_low {t_low}")
    bank = ScoreBank()
    for i in range(traj.n_steps):
        t = int(traj.timesteps[i])
        if t_low <= t <= t_high:
            bank.add(t, float(traj.alpha_bars[i]), traj.scores[i])
    return bank


@dataclass(frozen=True)
class ArtifactMask:
    """Detection verdict: boolean mask plus per-pixel contribution counts.

    provenance[i, j] counts how many consecutive-pair grids flagged pixel
    (i, j); it is positive exactly where mask is true, also after
    dilation.  taus[k] is the threshold used for pair k, whose endpoint
    timesteps are pair_timesteps[k].
    """

    mask: np.ndarray
    provenance: np.ndarray
    taus: np.ndarray
    pair_timesteps: np.ndarray
    bank_mean: float

    @property
    def n_flagged(self) -> int:
        return int(self.mask.sum())


def mad(values: np.ndarray) -> float:
    """Median absolute deviation: median(|v - median(v)|)."""
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size == 0:
        raise ConfigError("MAD of an empty array")
    med = np.median(v)
    return float(np.median(np.abs(v - med)))


def _weighted_fields(bank: ScoreBank) -> np.ndarray:
    """All bank entries as float64 w(t) * s stacked (n, c, h, w)."""
    ws = [weight_from_alpha_bar(ab) * s.astype(np.float64)
          for ab, s in zip(bank.alpha_bars, bank.scores)]
    return np.stack(ws)


def _reduce_channels(grid: np.ndarray, mode: str) -> np.ndarray:
    # Max over channels makes the strict per-channel threshold test
    # equivalent to a union of per-channel masks.
    if mode == "l2_over_channels":
        return np.sqrt(np.sum(grid ** 2, axis=0))
    return np.max(grid, axis=0)


def weighted_dynamics(bank: ScoreBank, k: int, cfg: DetectorConfig) -> np.ndarray:
    """Per-pixel |w(t_b) s_b - w(t_a) s_a| for consecutive pair k, reduced.

    Pair k joins entries k (older, larger t) and k+1; the temporal weight
    is evaluated at each field's own timestep.  Returns an (h, w) grid.
    """
    if len(bank) < 2:
        raise ConfigError(f"dynamics need at least 2 bank entries, have {len(bank)}")
    if not (0 <= k < bank.n_pairs):
        raise ConfigError(f"pair index {k} out of range for {bank.n_pairs} pairs")
    wa = weight_from_alpha_bar(bank.alpha_bars[k])
    wb = weight_from_alpha_bar(bank.alpha_bars[k + 1])
    sa = bank.scores[k].astype(np.float64)
    sb = bank.scores[k + 1].astype(np.float64)
    diff = np.abs(wb * sb - wa * sa)
    return _reduce_channels(diff, cfg.channel_reduce)


def adaptive_threshold(dynamics: np.ndarray, bank: ScoreBank, cfg: DetectorConfig) -> float:
    """tau = max(mad_multiplier * MAD(dynamics), mean of the score bank)."""
    if len(bank) == 0:
        raise ConfigError("adaptive threshold needs a non-empty bank")
    fields = _weighted_fields(bank) if cfg.mean_bank_mode == "mean_abs_weighted" \
        else np.stack([s.astype(np.float64) for s in bank.scores])
    bank_mean = float(np.mean(np.abs(fields)))
    return max(cfg.mad_multiplier * mad(dynamics), bank_mean)


def detect(bank: ScoreBank, cfg: DetectorConfig) -> ArtifactMask:
    """Accumulate per-pair threshold exceedances into an artifact mask.

    For every consecutive pair the pixels with dynamics strictly above
    that pair's tau are flagged; the mask is the union over pairs and
    provenance counts the flagging pairs per pixel.  Dilation, if
    configured, is applied last to both.
    """
    if len(bank) < 2:
        raise ConfigError(f"detection needs at least 2 bank entries, have {len(bank)}")
    _, h, w = bank.image_shape
    mask = np.zeros((h, w), dtype=bool)
    provenance = np.zeros((h, w), dtype=np.int32)
    taus = np.empty(bank.n_pairs)
    pairs = np.empty((bank.n_pairs, 2), dtype=np.int64)
    for k in range(bank.n_pairs):
        dyn = weighted_dynamics(bank, k, cfg)
        tau = adaptive_threshold(dyn, bank, cfg)
        hit = dyn > tau
        mask |= hit
        provenance += hit.astype(np.int32)
        taus[k] = tau
        pairs[k] = (bank.timesteps[k], bank.timesteps[k + 1])
    if cfg.dilation_radius > 0:
        size = 2 * cfg.dilation_radius + 1
        structure = np.ones((size, size), dtype=bool)
        mask = ndimage.binary_dilation(mask, structure=structure)
        provenance = ndimage.grey_dilation(provenance, size=(size, size))
    fields = _weighted_fields(bank) if cfg.mean_bank_mode == "mean_abs_weighted" \
        else np.stack([s.astype(np.float64) for s in bank.scores])
    return ArtifactMask(mask=mask, provenance=provenance, taus=taus,
                        pair_timesteps=pairs, bank_mean=float(np.mean(np.abs(fields))))


def detection_metrics(mask, truth) -> tuple[float, float, float]:
    """Pixel-level (precision, recall, iou) against a ground-truth mask.

    Empty-versus-empty counts as a perfect result on all three.
    """
    m = mask.mask if isinstance(mask, ArtifactMask) else np.asarray(mask, dtype=bool)
    g = truth.mask if isinstance(truth, ArtifactMask) else np.asarray(truth, dtype=bool)
    if m.shape != g.shape:
        raise ConfigError(f"mask shape {m.shape} does not match truth shape {g.shape}")
    tp = int((m & g).sum())
    n_mask = int(m.sum())
    n_truth = int(g.sum())
    n_union = int((m | g).sum())
    precision = 1.0 if n_mask == 0 else tp / n_mask
    recall = 1.0 if n_truth == 0 else tp / n_truth
    iou = 1.0 if n_union == 0 else tp / n_union
    return precision, recall, iou


def acceleration_curve(bank: ScoreBank, region: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Second difference of the region-mean weighted score magnitude.

    Returns (timesteps, values) with one value per interior bank entry;
    the second difference at entry i spans entries i-1, i, i+1.  The
    region mean is taken over |w(t) s| so sign-balanced anomaly patterns
    do not cancel.
    """
    if len(bank) < 3:
        raise ConfigError(f"acceleration curve needs at least 3 bank entries, have {len(bank)}")
    region = np.asarray(region, dtype=bool)
    _, h, w = bank.image_shape
    if region.shape != (h, w):
        raise ConfigError(f"region shape {region.shape} does not match image {(h, w)}")
    if not region.any():
        raise ConfigError("acceleration curve over an empty region")
    levels = np.array([float(np.mean(np.abs(f[:, region])))
                       for f in _weighted_fields(bank)])
    accel = levels[2:] - 2.0 * levels[1:-1] + levels[:-2]
    ts = np.asarray(bank.timesteps[1:-1], dtype=np.int64)
    return ts, accel
