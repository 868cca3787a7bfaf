"""Analytic Gaussian-mixture data model and score oracles.

The data distribution is a K-component isotropic Gaussian mixture over
images.  Under the variance-preserving forward process each time-t
marginal stays a mixture with means sqrt(alpha_bar_t) * mu_k and shared
variance alpha_bar_t * sigma0^2 + (1 - alpha_bar_t), so the exact score
is available in closed form at every timestep.  A trapped oracle wraps
the exact score with localized, seeded anomalies whose ground-truth
region is known, which is what detection and correction are graded
against.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .rng import tag_to_int
from .schedule import ConfigError, NoiseSchedule, alpha_bar_at, temporal_weight

__all__ = [
    "GmmModel",
    "TrapSpec",
    "GmmOracle",
    "TrappedOracle",
    "default_model",
    "builtin_template",
    "marginal_params",
    "log_density",
    "responsibilities",
    "true_score",
    "sample_data",
]

_TEMPLATE_NAMES = ("checkerboard", "gradient", "disk", "stripes")


@dataclass(frozen=True)
class GmmModel:
    """Mixture weights, per-component image templates, and in-component std.

    templates has shape (K, c, h, w); weights has shape (K,) and sums to 1.
    """

    weights: np.ndarray
    templates: np.ndarray
    sigma0: float

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        tpl = np.asarray(self.templates, dtype=np.float64)
        if tpl.ndim != 4:
            raise ConfigError(f"templates must be (K, c, h, w), got shape {tpl.shape}")
        if w.ndim != 1 or w.shape[0] != tpl.shape[0]:
            raise ConfigError("weights and templates disagree on component count")
        if np.any(w <= 0.0):
            raise ConfigError("mixture weights must be positive")
        if abs(float(w.sum()) - 1.0) > 1e-9:
            raise ConfigError(f"mixture weights must sum to 1, got {w.sum()!r}")
        if not (self.sigma0 > 0.0):
            raise ConfigError(f"sigma0 must be positive, got {self.sigma0}")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "templates", tpl)

    @property
    def n_components(self) -> int:
        return int(self.templates.shape[0])

    @property
    def image_shape(self) -> tuple[int, int, int]:
        return tuple(self.templates.shape[1:])


def builtin_template(name: str, h: int = 16, w: int = 16, amplitude: float = 0.9) -> np.ndarray:
    """One of the built-in single-channel patterns, shape (1, h, w)."""
    yy, xx = np.mgrid[0:h, 0:w]
    if name == "checkerboard":
        img = np.where(((yy // 2) + (xx // 2)) % 2 == 0, 1.0, -1.0)
    elif name == "gradient":
        img = np.tile(np.linspace(-1.0, 1.0, w), (h, 1))
    elif name == "disk":
        cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
        r = np.hypot(yy - cy, xx - cx)
        img = np.where(r <= min(h, w) * 0.28, 1.0, -1.0)
    elif name == "stripes":
        img = np.where((xx // 2) % 2 == 0, 1.0, -1.0)
    else:
        raise ConfigError(f"unknown template {name!r}; choose from {_TEMPLATE_NAMES}")
    return (amplitude * img)[None, :, :]


def default_model() -> GmmModel:
    """Four structured 16x16 templates with sigma0 = 0.05."""
    templates = np.stack([builtin_template(n) for n in _TEMPLATE_NAMES])
    weights = np.array([0.3, 0.3, 0.2, 0.2])
    return GmmModel(weights=weights, templates=templates, sigma0=0.05)


def marginal_params(model: GmmModel, sched: NoiseSchedule, t: int):
    """Component means and shared scalar variance of the time-t marginal."""
    abar = alpha_bar_at(sched, t)
    means = np.sqrt(abar) * model.templates
    var = abar * model.sigma0 ** 2 + (1.0 - abar)
    return means, float(var)


def _component_log_probs(model: GmmModel, sched: NoiseSchedule, x: np.ndarray, t: int):
    """Per-component log(w_k * N(x; m_k, v I)) with batch support.

    x may be (c, h, w) or (..., c, h, w); returns (..., K).
    """
    means, var = marginal_params(model, sched, t)
    d = int(np.prod(model.image_shape))
    xf = np.asarray(x, dtype=np.float64).reshape(*x.shape[:-3], 1, d)
    mf = means.reshape(model.n_components, d)
    sq = np.sum((xf - mf) ** 2, axis=-1)
    log_norm = -0.5 * d * np.log(2.0 * np.pi * var)
    return np.log(model.weights) + log_norm - sq / (2.0 * var)


def log_density(model: GmmModel, sched: NoiseSchedule, x: np.ndarray, t: int):
    """log p_t(x); scalar for a single image, (...,) for batches."""
    lp = _component_log_probs(model, sched, x, t)
    m = lp.max(axis=-1, keepdims=True)
    out = m[..., 0] + np.log(np.sum(np.exp(lp - m), axis=-1))
    return float(out) if out.ndim == 0 else out


def responsibilities(model: GmmModel, sched: NoiseSchedule, x: np.ndarray, t: int):
    """Posterior component probabilities at (x, t); shape (..., K)."""
    lp = _component_log_probs(model, sched, x, t)
    m = lp.max(axis=-1, keepdims=True)
    e = np.exp(lp - m)
    return e / e.sum(axis=-1, keepdims=True)


def true_score(model: GmmModel, sched: NoiseSchedule, x: np.ndarray, t: int) -> np.ndarray:
    """Exact gradient of log p_t at x: sum_k r_k (m_k - x) / v."""
    means, var = marginal_params(model, sched, t)
    r = responsibilities(model, sched, x, t)
    mbar = np.tensordot(r, means, axes=([-1], [0]))
    return (mbar - np.asarray(x, dtype=np.float64)) / var


def sample_data(model: GmmModel, n: int, seed: int) -> np.ndarray:
    """n exact draws from the data distribution, shape (n, c, h, w)."""
    if n < 0:
        raise ConfigError(f"sample count must be >= 0, got {n}")
    rng = np.random.default_rng(seed)
    comps = rng.choice(model.n_components, size=n, p=model.weights)
    noise = rng.standard_normal((n, *model.image_shape))
    return model.templates[comps] + model.sigma0 * noise


class GmmOracle:
    """Pure exact-score source: oracle(x, t) -> grad log p_t(x)."""

    def __init__(self, model: GmmModel, sched: NoiseSchedule):
        self.model = model
        self.sched = sched

    @property
    def image_shape(self) -> tuple[int, int, int]:
        return self.model.image_shape

    def reset(self) -> None:
        pass

    def __call__(self, x: np.ndarray, t: int) -> np.ndarray:
        return true_score(self.model, self.sched, x, t)


@dataclass(frozen=True)
class TrapSpec:
    """Localized score anomaly with a known ground-truth region.

    region is (top, left, height, width) in pixel coordinates and must lie
    strictly inside the image.  The anomaly begins at trigger_step (first
    evaluated timestep <= trigger_step, since sampling runs t downward).

    In spike_then_freeze mode the in-region weighted score level ramps up
    and back down following a triangular pulse over spike_steps grid
    steps: the pulse value at window step j is the increment of the
    weighted score level, so the per-pair weighted dynamics trace out the
    triangle with peak spike_gain * a_amb, where a_amb is the ambient
    weighted-score scale sampled just before the trigger.  After the
    window (or immediately, in freeze_only mode) the in-region score is
    frozen at the last emitted field and stops responding to the state.

    A frozen or spiking region releases back to the true score once the
    observed state departs from the trajectory implied by the previously
    emitted score by more than release_rtol (relative RMS).  Untouched
    rollouts reproduce that trajectory exactly, so only an external
    intervention (state replacement, re-noising, score clipping) releases
    the trap.
    """

    region: tuple[int, int, int, int]
    trigger_step: int
    spike_steps: int = 3
    spike_gain: float = 8.0
    mode: str = "spike_then_freeze"
    seed: int = 0
    release_rtol: float = 1e-3

    def __post_init__(self):
        if self.mode not in ("spike_then_freeze", "freeze_only"):
            raise ConfigError(f"unknown trap mode {self.mode!r}")
        if self.spike_steps < 1:
            raise ConfigError("spike_steps must be >= 1")
        if self.trigger_step < 1:
            raise ConfigError("trigger_step must be >= 1")
        if self.spike_gain < 0:
            raise ConfigError("spike_gain must be >= 0")
        top, left, hh, ww = self.region
        if hh < 1 or ww < 1 or top < 0 or left < 0:
            raise ConfigError(f"degenerate trap region {self.region}")

    def slices(self) -> tuple[slice, slice]:
        top, left, hh, ww = self.region
        return slice(top, top + hh), slice(left, left + ww)

    def mask(self, h: int, w: int) -> np.ndarray:
        m = np.zeros((h, w), dtype=bool)
        rs, cs = self.slices()
        m[rs, cs] = True
        return m


def _pulse(j: int, m: int) -> float:
    """Triangular pulse over window steps j = 1..m, peak value 1 mid-window."""
    return 1.0 - abs(2 * j - (m + 1)) / (m + 1)


class _TrapState:
    __slots__ = ("spec", "phase", "u", "a_amb", "accum", "pulse_idx",
                 "last_pulse_t", "snapshot")

    def __init__(self, spec: TrapSpec):
        self.spec = spec
        self.phase = "pending"
        self.u = None
        self.a_amb = None
        self.accum = 0.0
        self.pulse_idx = 0
        self.last_pulse_t = None
        self.snapshot = None


class TrappedOracle:
    """Exact score source overlaid with score traps.

    Outside every trap region, and before each trigger, emissions are
    bit-identical to the true score.  Carries per-trajectory mutable
    state; call reset() (or let the sampler do it) before reuse.
    """

    def __init__(self, model: GmmModel, sched: NoiseSchedule, traps):
        self.model = model
        self.sched = sched
        self.traps = tuple(traps)
        _, h, w = model.image_shape
        for spec in self.traps:
            top, left, hh, ww = spec.region
            if top + hh > h or left + ww > w:
                raise ConfigError(f"trap region {spec.region} exceeds image {h}x{w}")
        ambient = np.ones((h, w), dtype=bool)
        for spec in self.traps:
            ambient &= ~spec.mask(h, w)
        self._ambient = ambient
        self.reset()

    @property
    def image_shape(self) -> tuple[int, int, int]:
        return self.model.image_shape

    def reset(self) -> None:
        self._prev_t = None
        self._prev_x = None
        self._prev_emitted = None
        self._states = [_TrapState(spec) for spec in self.traps]

    def trap_phases(self) -> tuple[str, ...]:
        return tuple(st.phase for st in self._states)

    def _ambient_level(self, score: np.ndarray, t: int) -> float:
        wt = temporal_weight(self.sched, t)
        return float(np.mean(np.abs(wt * score[:, self._ambient])))

    # A frozen trap locks the noise-prediction field, not the raw score:
    # the raw emission is rescaled by 1/sqrt(1 - abar_t) each step, which
    # makes the region's remaining reverse path independent of how finely
    # the grid is discretized.
    def _to_eps(self, score_patch: np.ndarray, t: int) -> np.ndarray:
        abar = alpha_bar_at(self.sched, t)
        return -np.sqrt(1.0 - abar) * score_patch

    def _from_eps(self, eps_patch: np.ndarray, t: int) -> np.ndarray:
        abar = alpha_bar_at(self.sched, t)
        return -eps_patch / np.sqrt(1.0 - abar)

    def _check_release(self, x: np.ndarray, t: int) -> None:
        if self._prev_t is None:
            return
        active = [st for st in self._states if st.phase in ("spiking", "frozen")]
        if not active:
            return
        from .sampler import ddim_step

        predicted = ddim_step(self._prev_x, self._prev_emitted, self.sched,
                              self._prev_t, t)
        for st in active:
            rs, cs = st.spec.slices()
            ref = float(np.sqrt(np.mean(predicted[:, rs, cs] ** 2)))
            dev = float(np.sqrt(np.mean((x[:, rs, cs] - predicted[:, rs, cs]) ** 2)))
            if dev > st.spec.release_rtol * max(1.0, ref):
                st.phase = "released"

    def __call__(self, x: np.ndarray, t: int) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        s_true = true_score(self.model, self.sched, x, t)
        self._check_release(x, t)

        emitted = s_true.copy()
        for st in self._states:
            spec = st.spec
            if st.phase == "pending" and t <= spec.trigger_step:
                if self._prev_t is not None:
                    st.a_amb = self._ambient_level(self._prev_emitted, self._prev_t)
                else:
                    st.a_amb = self._ambient_level(s_true, t)
                ss = np.random.SeedSequence(
                    [spec.seed, *spec.region, tag_to_int("trap.pattern")])
                gen = np.random.Generator(np.random.PCG64(ss))
                c = self.model.image_shape[0]
                _, _, hh, ww = spec.region
                st.u = gen.integers(0, 2, size=(c, hh, ww)).astype(np.float64) * 2.0 - 1.0
                if spec.mode == "freeze_only":
                    rs, cs = spec.slices()
                    st.snapshot = self._to_eps(s_true[:, rs, cs], t)
                    st.phase = "frozen"
                else:
                    st.phase = "spiking"

            if st.phase == "spiking":
                if t != st.last_pulse_t:
                    st.pulse_idx += 1
                    st.accum += _pulse(st.pulse_idx, spec.spike_steps)
                    st.last_pulse_t = t
                rs, cs = spec.slices()
                level = spec.spike_gain * st.a_amb * st.accum
                inj = level / temporal_weight(self.sched, t)
                emitted[:, rs, cs] = s_true[:, rs, cs] + inj * st.u
                if st.pulse_idx >= spec.spike_steps:
                    st.snapshot = self._to_eps(emitted[:, rs, cs], t)
                    st.phase = "frozen"
            elif st.phase == "frozen":
                rs, cs = spec.slices()
                emitted[:, rs, cs] = self._from_eps(st.snapshot, t)

        self._prev_t = t
        self._prev_x = x.copy()
        self._prev_emitted = emitted.copy()
        return emitted
