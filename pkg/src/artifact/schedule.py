"""Variance-preserving noise schedules and sampling step grids.

The forward process is parameterized by per-step variances beta_t with
alpha_t = 1 - beta_t and the cumulative product alpha_bar_t.  Everything
downstream (scores, weights, SNR, DDIM updates) is a function of
alpha_bar, so the schedule object precomputes the full table once and is
immutable afterwards.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ConfigError",
    "NoiseSchedule",
    "StepGrid",
    "make_schedule",
    "make_grid",
    "alpha_bar_at",
    "temporal_weight",
    "snr",
    "weight_from_alpha_bar",
    "snr_from_alpha_bar",
    "grid_step_at_fraction",
]


class ConfigError(ValueError):
    """Raised for invalid schedule, grid, or run configuration values."""


@dataclass(frozen=True)
class NoiseSchedule:
    """Precomputed forward-process tables indexed by timestep t in [1, t_total].

    Attributes:
        kind: "linear" or "cosine".
        t_total: number of forward steps T.
        beta: (t_total,) per-step variances, each in (0, 1).
        alpha: (t_total,) 1 - beta.
        alpha_bar: (t_total,) cumulative products, strictly decreasing.
    """

    kind: str
    t_total: int
    beta: np.ndarray = field(repr=False)
    alpha: np.ndarray = field(repr=False)
    alpha_bar: np.ndarray = field(repr=False)


def make_schedule(
    kind: str = "linear",
    t_total: int = 1000,
    beta_min: float = 1e-4,
    beta_max: float = 0.02,
) -> NoiseSchedule:
    """Build a noise schedule.

    "linear" spaces beta evenly over [beta_min, beta_max].  "cosine" follows
    the squared-cosine alpha_bar profile with betas clipped to 0.999.
    """
    if t_total < 1:
        raise ConfigError(f"t_total must be >= 1, got {t_total}")
    if kind == "linear":
        if not (0.0 < beta_min <= beta_max < 1.0):
            raise ConfigError(
                f"need 0 < beta_min <= beta_max < 1, got [{beta_min}, {beta_max}]"
            )
        beta = np.linspace(beta_min, beta_max, t_total, dtype=np.float64)
    elif kind == "cosine":
        s = 0.008
        steps = np.arange(t_total + 1, dtype=np.float64)
        f = np.cos((steps / t_total + s) / (1 + s) * math.pi / 2) ** 2
        abar = f / f[0]
        beta = np.clip(1.0 - abar[1:] / abar[:-1], 1e-8, 0.999)
    else:
        raise ConfigError(f"unknown schedule kind {kind!r}")

    alpha = 1.0 - beta
    alpha_bar = np.cumprod(alpha)
    if not (alpha_bar[-1] > 0.0):
        raise ConfigError("alpha_bar underflowed to zero; t_total too large")
    return NoiseSchedule(kind=kind, t_total=t_total, beta=beta, alpha=alpha,
                         alpha_bar=alpha_bar)


def alpha_bar_at(sched: NoiseSchedule, t: int) -> float:
    """Cumulative alpha_bar at timestep t, with the convention alpha_bar_0 = 1."""
    if t == 0:
        return 1.0
    if not (1 <= t <= sched.t_total):
        raise ConfigError(f"timestep {t} outside [0, {sched.t_total}]")
    return float(sched.alpha_bar[t - 1])


def weight_from_alpha_bar(abar: float) -> float:
    """Temporal weight w = (1 - abar) / sqrt(abar)."""
    return (1.0 - abar) / math.sqrt(abar)


def snr_from_alpha_bar(abar: float) -> float:
    """Signal-to-noise ratio abar / (1 - abar)."""
    if abar >= 1.0:
        return math.inf
    return abar / (1.0 - abar)


def temporal_weight(sched: NoiseSchedule, t: int) -> float:
    """w(t) = (1 - alpha_bar_t) / sqrt(alpha_bar_t); equalizes score dynamics scale."""
    return weight_from_alpha_bar(alpha_bar_at(sched, t))


def snr(sched: NoiseSchedule, t: int) -> float:
    """SNR(t) = alpha_bar_t / (1 - alpha_bar_t); increases as t decreases."""
    return snr_from_alpha_bar(alpha_bar_at(sched, t))


@dataclass(frozen=True)
class StepGrid:
    """Descending subsequence of timesteps visited by the sampler.

    timesteps[0] == t_total and the final entry is the smallest selected
    step; the update from the final entry targets t = 0.
    """

    nfe: int
    timesteps: np.ndarray

    def __contains__(self, t: int) -> bool:
        return bool(np.any(self.timesteps == t))

    def index_of(self, t: int) -> int:
        idx = np.nonzero(self.timesteps == t)[0]
        if idx.size == 0:
            raise ConfigError(f"timestep {t} not on the sampling grid")
        return int(idx[0])


def make_grid(sched: NoiseSchedule, nfe: int = 25) -> StepGrid:
    """Uniform descending grid of nfe timesteps starting at t_total.

    Offsets round down so each selected step rounds toward larger t.
    """
    if not (1 <= nfe <= sched.t_total):
        raise ConfigError(f"nfe must be in [1, {sched.t_total}], got {nfe}")
    offsets = (np.arange(nfe, dtype=np.int64) * sched.t_total) // nfe
    steps = sched.t_total - offsets
    return StepGrid(nfe=nfe, timesteps=steps.astype(np.int64))


def grid_step_at_fraction(grid: StepGrid, frac: float, t_total: int) -> int:
    """Grid timestep nearest to frac * t_total, ties resolved toward larger t."""
    if not (0.0 < frac <= 1.0):
        raise ConfigError(f"fraction must be in (0, 1], got {frac}")
    target = frac * t_total
    ts = grid.timesteps.astype(np.float64)
    dist = np.abs(ts - target)
    best = dist.min()
    candidates = grid.timesteps[dist == best]
    return int(candidates.max())
