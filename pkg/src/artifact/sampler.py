"""Deterministic DDIM generation driven by a score source.

The reverse process is the probability-flow ODE discretized as DDIM: at
each grid step the current score gives a denoised estimate x0_hat, which
is re-embedded at the next (smaller) timestep.  Stepping to t = 0 lands
exactly on x0_hat since alpha_bar_0 = 1.

Scores and noise predictions are interchangeable through
eps = -sqrt(1 - alpha_bar_t) * score; the sampler can run in either
parameterization and the resulting trajectories agree to floating-point
accuracy.
"""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass

import numpy as np

from .rng import normal_field
from .schedule import ConfigError, NoiseSchedule, StepGrid, alpha_bar_at

__all__ = [
    "predict_x0",
    "ddim_step",
    "ddim_step_eps",
    "renoise",
    "eps_from_score",
    "score_from_eps",
    "Trajectory",
    "rollout",
]

# Below this the Tweedie division is numerically meaningless.
_ALPHA_BAR_FLOOR = 1e-12


def _checked_alpha_bar(sched: NoiseSchedule, t: int) -> float:
    abar = alpha_bar_at(sched, t)
    if abar < _ALPHA_BAR_FLOOR:
        raise ConfigError(f"alpha_bar at t={t} is {abar:.3e}, below the 1e-12 guard")
    return abar


def predict_x0(x: np.ndarray, score: np.ndarray, sched: NoiseSchedule, t: int) -> np.ndarray:
    """Tweedie denoised estimate: (x + (1 - abar) * score) / sqrt(abar)."""
    abar = _checked_alpha_bar(sched, t)
    return (x + (1.0 - abar) * score) / np.sqrt(abar)


def ddim_step(x: np.ndarray, score: np.ndarray, sched: NoiseSchedule,
              t_from: int, t_to: int) -> np.ndarray:
    """One deterministic reverse step t_from -> t_to (t_to <= t_from)."""
    if t_to > t_from:
        raise ConfigError(f"reverse step must not increase t: {t_from} -> {t_to}")
    abar_from = _checked_alpha_bar(sched, t_from)
    abar_to = alpha_bar_at(sched, t_to)
    x0 = (x + (1.0 - abar_from) * score) / np.sqrt(abar_from)
    return np.sqrt(abar_to) * x0 - np.sqrt(1.0 - abar_to) * np.sqrt(1.0 - abar_from) * score


def ddim_step_eps(x: np.ndarray, eps: np.ndarray, sched: NoiseSchedule,
                  t_from: int, t_to: int) -> np.ndarray:
    """Same step in the noise parameterization."""
    if t_to > t_from:
        raise ConfigError(f"reverse step must not increase t: {t_from} -> {t_to}")
    abar_from = _checked_alpha_bar(sched, t_from)
    abar_to = alpha_bar_at(sched, t_to)
    x0 = (x - np.sqrt(1.0 - abar_from) * eps) / np.sqrt(abar_from)
    return np.sqrt(abar_to) * x0 + np.sqrt(1.0 - abar_to) * eps


def renoise(x0: np.ndarray, sched: NoiseSchedule, t: int, noise: np.ndarray) -> np.ndarray:
    """Embed a clean estimate at timestep t with the given unit noise."""
    abar = alpha_bar_at(sched, t)
    return np.sqrt(abar) * x0 + np.sqrt(1.0 - abar) * noise


def eps_from_score(score: np.ndarray, sched: NoiseSchedule, t: int) -> np.ndarray:
    abar = alpha_bar_at(sched, t)
    return -np.sqrt(1.0 - abar) * score


def score_from_eps(eps: np.ndarray, sched: NoiseSchedule, t: int) -> np.ndarray:
    abar = alpha_bar_at(sched, t)
    if abar >= 1.0:
        raise ConfigError(f"score is undefined from eps at t={t} (alpha_bar = 1)")
    return -eps / np.sqrt(1.0 - abar)


@dataclass(frozen=True)
class Trajectory:
    """Recorded reverse path: per-step state and score before any hook ran.

    states[i] and scores[i] belong to timesteps[i]; x0 is the final output
    after the last step to t = 0.  Arrays are float64.
    """

    timesteps: np.ndarray
    alpha_bars: np.ndarray
    states: np.ndarray
    scores: np.ndarray
    x0: np.ndarray
    grid: StepGrid | None = None
    seed: int | None = None

    @property
    def n_steps(self) -> int:
        return int(self.timesteps.shape[0])

    @property
    def image_shape(self) -> tuple[int, int, int]:
        return tuple(self.states.shape[1:])


def rollout(oracle, sched: NoiseSchedule, grid: StepGrid, *, seed: int,
            sample: int = 0, hook=None, parameterization: str = "score",
            x_init: np.ndarray | None = None) -> Trajectory:
    """Run the full reverse pass and record the trajectory.

    oracle(x, t) must return the score field for the state x at timestep
    t; an optional oracle.reset() is called once up front so stateful
    score sources start fresh.

    hook may be a callable fired at every step, or a mapping from
    timestep to callable fired only there.  Either form is called after
    the step is recorded, as hook(i, t, t_next, x, score), and may return
    None (no intervention) or a pair (x_new, score_new).  A score_new of
    None means the oracle is asked again at the modified state; passing a
    score skips that re-evaluation.  The recorded trajectory always holds
    the pre-hook state and score, so interventions are visible only
    through the subsequent steps.
    """
    if parameterization not in ("score", "eps"):
        raise ConfigError(f"unknown parameterization {parameterization!r}")
    if hook is None:
        def pick(t):
            return None
    elif isinstance(hook, Mapping):
        def pick(t):
            return hook.get(t)
    else:
        def pick(t):
            return hook
    if hasattr(oracle, "reset"):
        oracle.reset()
    t0 = int(grid.timesteps[0])
    if x_init is None:
        x = normal_field(oracle.image_shape, seed, sample=sample, t=t0, tag="init")
    else:
        x = np.asarray(x_init, dtype=np.float64).copy()

    n = grid.nfe
    ts = np.asarray(grid.timesteps, dtype=np.int64)
    abars = np.array([alpha_bar_at(sched, int(t)) for t in ts])
    states = np.empty((n, *x.shape))
    scores = np.empty_like(states)

    for i, t in enumerate(ts):
        t = int(t)
        t_next = int(ts[i + 1]) if i + 1 < n else 0
        s = oracle(x, t)
        states[i] = x
        scores[i] = s
        fn = pick(t)
        if fn is not None:
            out = fn(i, t, t_next, x, s)
            if out is not None:
                x_new, s_new = out
                if s_new is not None:
                    x = np.asarray(x_new, dtype=np.float64)
                    s = np.asarray(s_new, dtype=np.float64)
                elif not np.array_equal(x_new, x):
                    x = np.asarray(x_new, dtype=np.float64)
                    s = oracle(x, t)
        if parameterization == "eps":
            x = ddim_step_eps(x, eps_from_score(s, sched, t), sched, t, t_next)
        else:
            x = ddim_step(x, s, sched, t, t_next)

    return Trajectory(timesteps=ts, alpha_bars=abars, states=states,
                      scores=scores, x0=x, grid=grid, seed=seed)
