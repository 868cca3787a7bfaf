"""Binary PGM (P5, maxval 255) reading and writing.

Masks serialize as 0/255; real-valued grids are min-max scaled into the
8-bit range, which is plenty for visual inspection and diffable tests.
"""

from __future__ import annotations

import numpy as np

from .schedule import ConfigError

__all__ = ["write_pgm", "read_pgm", "mask_to_pgm", "heatmap_to_pgm", "pgm_to_mask"]


def write_pgm(path, img: np.ndarray) -> None:
    arr = np.asarray(img)
    if arr.ndim != 2:
        raise ConfigError(f"PGM needs a 2-d grid, got shape {arr.shape}")
    if arr.dtype != np.uint8:
        if arr.min() < 0 or arr.max() > 255:
            raise ConfigError("non-uint8 PGM input must already lie in [0, 255]")
        arr = arr.astype(np.uint8)
    h, w = arr.shape
    with open(path, "wb") as f:
        f.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        f.write(arr.tobytes())


def read_pgm(path) -> np.ndarray:
    with open(path, "rb") as f:
        data = f.read()
    # Header: "P5", width, height, maxval as whitespace-separated tokens,
    # with '#' comments allowed; a single whitespace byte ends the header.
    tokens = []
    i = 0
    while len(tokens) < 4:
        if i >= len(data):
            raise ConfigError(f"{path}: truncated PGM header")
        ch = data[i:i + 1]
        if ch == b"#":
            while i < len(data) and data[i:i + 1] != b"\n":
                i += 1
        elif ch.isspace():
            i += 1
        else:
            j = i
            while j < len(data) and not data[j:j + 1].isspace() and data[j:j + 1] != b"#":
                j += 1
            tokens.append(data[i:j])
            i = j
    if tokens[0] != b"P5":
        raise ConfigError(f"{path}: not a binary PGM (got {tokens[0]!r})")
    w, h, maxval = (int(v) for v in tokens[1:])
    if maxval != 255:
        raise ConfigError(f"{path}: only maxval 255 supported, got {maxval}")
    i += 1
    if len(data) - i < w * h:
        raise ConfigError(f"{path}: PGM payload truncated")
    return np.frombuffer(data, dtype=np.uint8, count=w * h, offset=i).reshape(h, w).copy()


def mask_to_pgm(path, mask: np.ndarray) -> None:
    m = np.asarray(mask, dtype=bool)
    write_pgm(path, np.where(m, 255, 0).astype(np.uint8))


def pgm_to_mask(path) -> np.ndarray:
    return read_pgm(path) >= 128


def heatmap_to_pgm(path, grid: np.ndarray) -> None:
    g = np.asarray(grid, dtype=np.float64)
    if g.ndim != 2:
        raise ConfigError(f"heatmap needs a 2-d grid, got shape {g.shape}")
    lo, hi = float(g.min()), float(g.max())
    if hi > lo:
        scaled = (g - lo) / (hi - lo) * 255.0
    else:
        scaled = np.zeros_like(g)
    write_pgm(path, np.round(scaled).astype(np.uint8))
