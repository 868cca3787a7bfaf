"""Byte-exact trajectory trace files (ASCTRACE format, version 1).

Layout, all integers little-endian:

    magic         8 bytes, b"ASCTRACE"
    version       u32 (= 1)
    c, h, w       u32 each
    n_steps       u32
    flags         u32 bitfield: bit0 states present, bit1 scores present
    schedule_len  u32, followed by schedule_len f64 alpha_bar values,
                  aligned one-to-one with the recorded steps
    frames        n_steps times: t as u32, then (if flagged) the state,
                  then (if flagged) the score, each c*h*w f32 row-major

Scores are mandatory; states are optional.  Payload floats are f32 so
traces from any producer round-trip bit-exactly; the alpha_bar table
stays f64 because detection weights are derived from it.  Timesteps
strictly decrease across frames.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

__all__ = [
    "FLAG_STATES",
    "FLAG_SCORES",
    "TraceError",
    "TraceFormatError",
    "TraceCorruptError",
    "TraceVersionError",
    "TraceRecord",
    "write_trace",
    "read_trace",
]

MAGIC = b"ASCTRACE"
VERSION = 1
FLAG_STATES = 1
FLAG_SCORES = 2


class TraceError(Exception):
    pass


class TraceFormatError(TraceError):
    pass


class TraceCorruptError(TraceError):
    pass


class TraceVersionError(TraceError):
    pass


@dataclass(frozen=True)
class TraceRecord:
    """Parsed trace: float32 payload exactly as stored, float64 schedule."""

    timesteps: np.ndarray
    alpha_bars: np.ndarray
    scores: np.ndarray
    states: np.ndarray | None

    @property
    def n_steps(self) -> int:
        return int(self.timesteps.shape[0])

    @property
    def image_shape(self) -> tuple[int, int, int]:
        return tuple(self.scores.shape[1:])


def write_trace(traj, path, *, include_states: bool = True) -> None:
    """Serialize a trajectory-like record (timesteps, alpha_bars, states,
    scores) to an ASCTRACE file.  Rewrites are byte-identical."""
    ts = np.asarray(traj.timesteps, dtype=np.int64)
    n = int(ts.shape[0])
    if n == 0:
        raise TraceFormatError(f"refusing to write empty trace to {path}")
    scores = np.asarray(traj.scores, dtype=np.float64)
    states = np.asarray(traj.states, dtype=np.float64) if include_states else None
    abars = np.asarray(traj.alpha_bars, dtype=np.float64)
    if abars.shape[0] != n:
        raise TraceFormatError(
            f"alpha_bar table length {abars.shape[0]} does not match {n} steps")
    c, h, w = scores.shape[1:]
    flags = FLAG_SCORES | (FLAG_STATES if include_states else 0)

    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<IIIIII", VERSION, c, h, w, n, flags))
        f.write(struct.pack("<I", n))
        f.write(abars.astype("<f8").tobytes())
        for i in range(n):
            f.write(struct.pack("<I", int(ts[i])))
            if include_states:
                f.write(states[i].astype("<f4").tobytes())
            f.write(scores[i].astype("<f4").tobytes())


def read_trace(path) -> TraceRecord:
    """Parse and validate an ASCTRACE file."""
    with open(path, "rb") as f:
        data = f.read()

    def need(offset: int, count: int, what: str) -> None:
        if offset + count > len(data):
            raise TraceCorruptError(
                f"{path}: truncated while reading {what} at byte {offset} "
                f"(need {count}, have {len(data) - offset})")

    need(0, 8, "magic")
    if data[:8] != MAGIC:
        raise TraceFormatError(f"{path}: bad magic {data[:8]!r}")
    off = 8
    need(off, 24, "header")
    version, c, h, w, n, flags = struct.unpack_from("<IIIIII", data, off)
    off += 24
    if version != VERSION:
        raise TraceVersionError(f"{path}: unsupported version {version}")
    if min(c, h, w) < 1:
        raise TraceFormatError(f"{path}: non-positive dims ({c}, {h}, {w})")
    if n < 1:
        raise TraceFormatError(f"{path}: empty trace (n_steps = 0)")
    if not flags & FLAG_SCORES:
        raise TraceFormatError(f"{path}: score frames are mandatory (flags = {flags:#x})")
    has_states = bool(flags & FLAG_STATES)

    need(off, 4, "schedule length")
    (sched_len,) = struct.unpack_from("<I", data, off)
    off += 4
    if sched_len != n:
        raise TraceFormatError(
            f"{path}: alpha_bar table length {sched_len} does not match n_steps {n}")
    need(off, 8 * n, "alpha_bar table")
    abars = np.frombuffer(data, dtype="<f8", count=n, offset=off).copy()
    off += 8 * n
    if not np.all(np.isfinite(abars)) or np.any(abars <= 0.0) or np.any(abars > 1.0):
        raise TraceFormatError(f"{path}: alpha_bar values must lie in (0, 1]")

    field = c * h * w
    ts = np.empty(n, dtype=np.int64)
    scores = np.empty((n, c, h, w), dtype=np.float32)
    states = np.empty((n, c, h, w), dtype=np.float32) if has_states else None
    for i in range(n):
        need(off, 4, f"frame {i} timestep")
        (t,) = struct.unpack_from("<I", data, off)
        off += 4
        ts[i] = t
        if has_states:
            need(off, 4 * field, f"frame {i} state")
            states[i] = np.frombuffer(data, dtype="<f4", count=field,
                                      offset=off).reshape(c, h, w)
            off += 4 * field
        need(off, 4 * field, f"frame {i} score")
        scores[i] = np.frombuffer(data, dtype="<f4", count=field,
                                  offset=off).reshape(c, h, w)
        off += 4 * field
    if off != len(data):
        raise TraceCorruptError(
            f"{path}: {len(data) - off} trailing bytes after frame {n - 1}")
    if np.any(np.diff(ts) >= 0):
        raise TraceFormatError(f"{path}: frame timesteps must strictly decrease")
    return TraceRecord(timesteps=ts, alpha_bars=abars, scores=scores, states=states)
