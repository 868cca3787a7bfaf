"""Seed-addressable random streams.

Every stochastic draw in the engine comes from a stream keyed by
(run seed, sample index, timestep, purpose tag).  Keying draws by purpose
means adding or removing one consumer (a detection hook, an extra
correction draw) never perturbs the values any other consumer sees, which
is what makes paired experiments bit-reproducible.
"""

from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["tag_to_int", "stream", "normal_field"]


def tag_to_int(tag: str) -> int:
    """Stable 64-bit integer for a purpose tag (platform independent)."""
    digest = hashlib.blake2s(tag.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def stream(seed: int, *, sample: int = 0, t: int = 0, tag: str = "") -> np.random.Generator:
    """Deterministic generator for one (seed, sample, timestep, purpose) cell."""
    ss = np.random.SeedSequence([int(seed), int(sample), int(t), tag_to_int(tag)])
    return np.random.Generator(np.random.PCG64(ss))


def normal_field(shape, seed: int, *, sample: int = 0, t: int = 0, tag: str = "") -> np.ndarray:
    """Standard-normal array drawn from the addressed stream."""
    return stream(seed, sample=sample, t=t, tag=tag).standard_normal(shape)
