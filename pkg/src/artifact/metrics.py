"""Distributional and per-image quality measures at desk scale.

Sample quality is graded against exact draws from the data distribution:
sliced Wasserstein-2 over random projections for global fidelity, kNN
manifold precision/recall for fidelity/diversity, and exact mixture
negative log-likelihood for per-image plausibility.  A trap-escape probe
checks whether a known region healed back onto the data manifold.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .gmm import GmmModel
from .schedule import ConfigError

__all__ = [
    "SampleSet",
    "RunReport",
    "sliced_w2",
    "knn_precision_recall",
    "nll_under_model",
    "region_escaped",
]


@dataclass(frozen=True)
class SampleSet:
    """A labeled batch of equally shaped images, (n, c, h, w)."""

    images: np.ndarray
    label: str = ""

    def __post_init__(self):
        arr = np.asarray(self.images, dtype=np.float64)
        if arr.ndim != 4 or arr.shape[0] == 0:
            raise ConfigError(f"sample set must be non-empty (n, c, h, w), got {arr.shape}")
        object.__setattr__(self, "images", arr)

    def __len__(self) -> int:
        return int(self.images.shape[0])

    @property
    def flat(self) -> np.ndarray:
        return self.images.reshape(len(self), -1)


@dataclass
class RunReport:
    """Aggregated outcome of one experiment configuration."""

    detection: dict = field(default_factory=dict)
    quality: dict = field(default_factory=dict)
    timing: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)


def sliced_w2(a: SampleSet, b: SampleSet, n_projections: int = 128, seed: int = 0) -> float:
    """Sliced Wasserstein-2 distance between two equally sized sample sets.

    Each seeded random unit direction yields a 1-d squared W2 via sorted
    matching; the result is the square root of their average.
    """
    if a.images.shape[1:] != b.images.shape[1:]:
        raise ConfigError(
            f"image shapes differ: {a.images.shape[1:]} vs {b.images.shape[1:]}")
    if len(a) != len(b):
        raise ConfigError(
            f"sorted matching needs equal sample counts, got {len(a)} and {len(b)}")
    if n_projections < 1:
        raise ConfigError(f"n_projections must be >= 1, got {n_projections}")
    fa, fb = a.flat, b.flat
    d = fa.shape[1]
    rng = np.random.default_rng(seed)
    dirs = rng.standard_normal((n_projections, d))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    pa = np.sort(fa @ dirs.T, axis=0)
    pb = np.sort(fb @ dirs.T, axis=0)
    return float(np.sqrt(np.mean((pa - pb) ** 2)))


def knn_precision_recall(real: SampleSet, gen: SampleSet, k: int = 3) -> tuple[float, float]:
    """Manifold kNN precision and recall on flattened pixels.

    A point set's manifold is the union of balls around its points with
    per-point radius the distance to the k-th nearest neighbor within the
    set (self excluded).  Precision is the fraction of generated points
    on the real manifold; recall is the fraction of real points on the
    generated manifold.  Identical-point sets degenerate to zero-radius
    balls, so only exact coincidences count.
    """
    if real.images.shape[1:] != gen.images.shape[1:]:
        raise ConfigError(
            f"image shapes differ: {real.images.shape[1:]} vs {gen.images.shape[1:]}")
    if len(real) < k + 1 or len(gen) < k + 1:
        raise ConfigError(f"need at least k+1 = {k + 1} samples in each set")
    fr, fg = real.flat, gen.flat

    def radii(points: np.ndarray) -> np.ndarray:
        dm = cdist(points, points)
        # k-th neighbor excluding self: column k of the row-sorted matrix,
        # where column 0 is the zero self-distance.
        return np.sort(dm, axis=1)[:, k]

    def covered(queries: np.ndarray, points: np.ndarray, r: np.ndarray) -> float:
        dm = cdist(queries, points)
        return float(np.mean(np.any(dm <= r[None, :], axis=1)))

    precision = covered(fg, fr, radii(fr))
    recall = covered(fr, fg, radii(fg))
    return precision, recall


def nll_under_model(model: GmmModel, x: np.ndarray) -> float | np.ndarray:
    """Exact negative log-likelihood under the data distribution.

    Accepts one image or a batch; computed with a stable log-sum-exp over
    mixture components.
    """
    d = int(np.prod(model.image_shape))
    xf = np.asarray(x, dtype=np.float64).reshape(*x.shape[:-3], 1, d)
    mf = model.templates.reshape(model.n_components, d)
    var = model.sigma0 ** 2
    sq = np.sum((xf - mf) ** 2, axis=-1)
    lp = np.log(model.weights) - 0.5 * d * np.log(2.0 * np.pi * var) - sq / (2.0 * var)
    m = lp.max(axis=-1, keepdims=True)
    ll = m[..., 0] + np.log(np.sum(np.exp(lp - m), axis=-1))
    out = -ll
    return float(out) if out.ndim == 0 else out


def region_escaped(x: np.ndarray, region: np.ndarray, model: GmmModel, *,
                   rtol: float = 4.0) -> bool:
    """Did the region land back on the data manifold?

    The best-fitting template is chosen on the pixels outside the region
    (the trustworthy ones); the region has escaped if its RMS residual
    against that template stays within rtol * sigma0.
    """
    region = np.asarray(region, dtype=bool)
    if region.shape != model.image_shape[1:]:
        raise ConfigError(
            f"region shape {region.shape} does not match image {model.image_shape[1:]}")
    outside = ~region
    if not outside.any():
        raise ConfigError("region covers the whole image; nothing to fit against")
    if not region.any():
        raise ConfigError("empty region has no escape status")
    resid = x[None, :, :, :] - model.templates
    fit = np.mean(resid[:, :, outside] ** 2, axis=(1, 2))
    best = int(np.argmin(fit))
    in_rms = float(np.sqrt(np.mean(resid[best][:, region] ** 2)))
    return in_rms <= rtol * model.sigma0
