"""Record a diffusion sampler's per-step tensors into ASCTRACE files.

The exporter is a dumb recorder: it accepts one frame per sampling step,
converts noise predictions to scores, and serializes everything in the
ASCTRACE version-1 byte layout.  It never analyzes what it records; any
detection or correction happens downstream in whatever consumes the file.

Layout written, all integers little-endian:

    magic         8 bytes, b"ASCTRACE"
    version       u32 (= 1)
    c, h, w       u32 each
    n_steps       u32
    flags         u32 bitfield: bit0 states present, bit1 scores present
    schedule_len  u32 (= n_steps), then that many f64 alpha_bar values,
                  aligned one-to-one with the recorded steps
    frames        n_steps times: t as u32, then (if flagged) the state,
                  then the score, each c*h*w f32 row-major

Hosts hand frames over in f64 (or whatever numpy promotes to); narrowing
to the f32 payload happens once, at write time.

Adapter interface
-----------------

``attach(pipeline, config)`` wires a session to a sampler loop with duck
typing.  The pipeline object must expose

* its alpha_bar schedule, as one of: a callable ``alpha_bar(t)``, an
  ``alphas_cumprod`` table indexable by absolute timestep, or the same
  table nested as ``scheduler.alphas_cumprod``;
* a step-callback hook, as one of: ``register_step_callback(fn)``,
  ``add_step_callback(fn)``, or an existing ``step_callback`` attribute
  the session may assign.

The registered callback is ``session.record``; the host invokes it once
per step as ``record(t, state=..., eps=...)`` (or ``score=...`` when the
loop already works in score parameterization).
"""

from __future__ import annotations

import math
import struct
from pathlib import Path

import numpy as np

__all__ = [
    "ExportError",
    "SetupError",
    "FrameError",
    "IncompleteSessionError",
    "ExportSession",
    "attach",
]

_MAGIC = b"ASCTRACE"
_VERSION = 1
_FLAG_STATES = 1
_FLAG_SCORES = 2


class ExportError(Exception):
    """Base for everything this package raises on purpose."""


class SetupError(ExportError):
    """attach() could not wire the pipeline (missing schedule, hook, ...)."""


class FrameError(ExportError):
    """A delivered frame violates the session's declared contract."""


class IncompleteSessionError(ExportError):
    """finalize() called before every declared step was delivered."""


def _as_field(name: str, value, shape: tuple[int, int, int]) -> np.ndarray:
    arr = np.asarray(value, dtype=np.float64)
    if arr.shape != shape:
        raise FrameError(f"{name} has shape {arr.shape}, session records {shape}")
    if not np.all(np.isfinite(arr)):
        raise FrameError(f"{name} contains non-finite values")
    return arr


class ExportSession:
    """One recording of one sampler run.

    Dimensions, the step list, and the alpha_bar table are fixed at
    construction, before any frame arrives.  Frames must arrive with
    strictly decreasing t drawn from the declared steps; gaps are legal
    while recording and fatal at finalize().
    """

    def __init__(self, shape, steps, alpha_bars, path, *,
                 record_states: bool = True):
        shape = tuple(int(s) for s in shape)
        if len(shape) != 3 or any(s <= 0 for s in shape):
            raise ExportError(
                f"shape must be (channels, height, width) with positive "
                f"sizes, got {shape}")
        steps = tuple(int(t) for t in steps)
        if not steps:
            raise ExportError("declared step list is empty")
        if any(t < 0 for t in steps):
            raise ExportError("steps must be nonnegative (stored as u32)")
        if any(a <= b for a, b in zip(steps, steps[1:])):
            raise ExportError(f"declared steps must strictly decrease, got {steps}")
        table = np.asarray(alpha_bars, dtype=np.float64)
        if table.shape != (len(steps),):
            raise ExportError(
                f"alpha_bar table must align with the step list "
                f"(got {table.shape[0] if table.ndim == 1 else table.shape} "
                f"values for {len(steps)} steps)")
        if not np.all(np.isfinite(table)) or np.any(table <= 0) or np.any(table > 1):
            raise ExportError("alpha_bar values must lie in (0, 1]")

        self.shape = shape
        self.steps = steps
        self.alpha_bars = table
        self.path = Path(path)
        self.record_states = bool(record_states)
        self._abar_at = dict(zip(steps, table))
        self._frames: list[tuple[int, np.ndarray | None, np.ndarray]] = []
        self._final_path: Path | None = None

    @property
    def recorded(self) -> tuple[int, ...]:
        """Timesteps delivered so far, in arrival order."""
        return tuple(t for t, _, _ in self._frames)

    def record(self, t, *, state=None, score=None, eps=None) -> None:
        """Accept one frame; exactly one of score/eps carries the model output."""
        if self._final_path is not None:
            raise FrameError("session is finalized; no further frames accepted")
        t = int(t)
        if t not in self._abar_at:
            raise FrameError(f"step {t} is not in the declared step list")
        if self._frames and t >= self._frames[-1][0]:
            raise FrameError(
                f"frame for step {t} arrived after step {self._frames[-1][0]}; "
                f"steps must strictly decrease")
        if (score is None) == (eps is None):
            raise FrameError(f"step {t} needs exactly one of score or eps")
        if self.record_states and state is None:
            raise FrameError(f"session records states but step {t} has none")
        if not self.record_states and state is not None:
            raise FrameError(
                f"session was declared without states but step {t} carries one")

        if eps is not None:
            eps = _as_field("eps", eps, self.shape)
            abar = self._abar_at[t]
            # A noise prediction determines the score only off the data
            # manifold; at alpha_bar == 1 the conversion divides by zero.
            if abar == 1.0:
                raise FrameError(
                    f"alpha_bar at step {t} is 1; a noise prediction does "
                    f"not define a score there")
            score = -eps / math.sqrt(1.0 - abar)
        else:
            score = _as_field("score", score, self.shape)
        if state is not None:
            state = _as_field("state", state, self.shape)
        self._frames.append((t, state, score))

    def finalize(self) -> Path:
        """Write the file and return its path; repeat calls are no-ops."""
        if self._final_path is not None:
            return self._final_path
        got = {t for t, _, _ in self._frames}
        missing = [t for t in self.steps if t not in got]
        if missing:
            raise IncompleteSessionError(
                f"declared {len(self.steps)} steps but received "
                f"{len(self._frames)}; missing frames for t = "
                f"{', '.join(str(t) for t in missing)}")

        c, h, w = self.shape
        flags = _FLAG_SCORES | (_FLAG_STATES if self.record_states else 0)
        parts = [_MAGIC,
                 struct.pack("<IIIIII", _VERSION, c, h, w, len(self.steps), flags),
                 struct.pack("<I", len(self.steps)),
                 self.alpha_bars.astype("<f8").tobytes()]
        for t, state, score in self._frames:
            parts.append(struct.pack("<I", t))
            if state is not None:
                # f64 -> f32 happens only here; numpy's cast rounds to
                # nearest even, so the payload is the closest f32.
                parts.append(state.astype("<f4").tobytes())
            parts.append(score.astype("<f4").tobytes())
        self.path.write_bytes(b"".join(parts))
        self._final_path = self.path
        return self._final_path


def _schedule_lookup(pipeline):
    """Return a callable t -> alpha_bar(t), however the host spells it."""
    probe = getattr(pipeline, "alpha_bar", None)
    if callable(probe):
        return probe
    table = getattr(pipeline, "alphas_cumprod", None)
    if table is None:
        table = getattr(getattr(pipeline, "scheduler", None), "alphas_cumprod", None)
    if table is None:
        raise SetupError(
            "pipeline exposes no alpha_bar schedule; need one of "
            "alpha_bar(t), alphas_cumprod, or scheduler.alphas_cumprod")
    return lambda t: table[t]


def attach(pipeline, config) -> ExportSession:
    """Wire an ExportSession to a sampler loop.

    ``config`` is a mapping with the output path under ``"out"`` plus
    optional ``"shape"``, ``"steps"``, and ``"record_states"``; shape and
    steps fall back to the pipeline's ``sample_shape`` and ``timesteps``
    attributes.  See the module docstring for what the pipeline must
    expose.
    """
    if "out" not in config:
        raise SetupError("config needs an 'out' path for the trace file")
    shape = config.get("shape", getattr(pipeline, "sample_shape", None))
    if shape is None:
        raise SetupError(
            "no target shape: pass config['shape'] or expose "
            "pipeline.sample_shape")
    steps = config.get("steps", getattr(pipeline, "timesteps", None))
    if steps is None:
        raise SetupError(
            "no step list: pass config['steps'] or expose pipeline.timesteps")
    steps = tuple(int(t) for t in steps)

    abar_of = _schedule_lookup(pipeline)
    table = []
    for t in steps:
        try:
            table.append(float(abar_of(t)))
        except (LookupError, TypeError) as exc:
            raise SetupError(f"schedule has no alpha_bar for step {t}") from exc

    session = ExportSession(shape, steps, table, config["out"],
                            record_states=bool(config.get("record_states", True)))

    register = getattr(pipeline, "register_step_callback", None)
    if register is None:
        register = getattr(pipeline, "add_step_callback", None)
    if register is not None:
        register(session.record)
    elif hasattr(pipeline, "step_callback"):
        pipeline.step_callback = session.record
    else:
        raise SetupError(
            "pipeline has no step-callback hook; need register_step_callback, "
            "add_step_callback, or a step_callback attribute")
    return session
