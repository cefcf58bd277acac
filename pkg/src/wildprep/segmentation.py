"""K-means color segmentation and label-map denoising.

The heterogeneity-elimination stage of the pipeline: cluster the pixels of
an image into ``k`` color groups (Lloyd's algorithm over raw RGB, squared
Euclidean distance), smooth the resulting label map with a mode filter,
then recolor every pixel with its cluster centroid. The output image
carries at most ``k`` distinct colors.

Determinism: given the same image and config (including the seed), every
function here returns bit-identical results on repeated runs. Reductions
use fixed pixel order, ties in assignment break toward the lowest centroid
index, and initialization draws from a ``PCG64`` stream derived from the
seed alone.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SegmentationError
from .imaging import RasterImage, round_half_up_u8

__all__ = [
    "KMeansConfig",
    "KMeansModel",
    "LabelMap",
    "kmeans_fit",
    "assign_labels",
    "inertia",
    "denoise_labels",
    "recolor",
    "segment_image",
]

_INIT_SCHEMES = ("k-means++", "random")


@dataclass(frozen=True)
class KMeansConfig:
    """Clustering parameters. ``tol`` bounds the max centroid displacement
    (in intensity units) below which iteration stops."""

    k: int = 3
    max_iters: int = 100
    tol: float = 1e-3
    seed: int = 0
    init: str = "k-means++"

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")
        if not self.tol > 0:
            raise ValueError(f"tol must be > 0, got {self.tol}")
        if self.init not in _INIT_SCHEMES:
            raise ValueError(f"init must be one of {_INIT_SCHEMES}, got {self.init!r}")


@dataclass(frozen=True, eq=False)
class KMeansModel:
    """Fitted cluster centers: a (k, 3) float64 array of RGB intensities."""

    centroids: np.ndarray

    def __post_init__(self) -> None:
        c = self.centroids
        if c.ndim != 2 or c.shape[1] != 3 or c.shape[0] < 1:
            raise ValueError(f"centroids must have shape (k, 3), got {c.shape}")
        if not np.all(np.isfinite(c)) or c.min() < 0.0 or c.max() > 255.0:
            raise ValueError("centroid components must be finite and within [0, 255]")

    @property
    def k(self) -> int:
        return self.centroids.shape[0]


@dataclass(frozen=True, eq=False)
class LabelMap:
    """Per-pixel cluster indices, row-major, same dimensions as the source."""

    width: int
    height: int
    labels: np.ndarray

    def __post_init__(self) -> None:
        if self.labels.shape != (self.height, self.width):
            raise ValueError(
                f"labels shape {self.labels.shape} does not match "
                f"{self.height}x{self.width}"
            )
        if self.labels.size and self.labels.min() < 0:
            raise ValueError("labels must be nonnegative")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LabelMap):
            return NotImplemented
        return (
            self.width == other.width
            and self.height == other.height
            and bool(np.array_equal(self.labels, other.labels))
        )


def _pixel_matrix(img: RasterImage) -> np.ndarray:
    return img.pixels.reshape(-1, 3).astype(np.float64)


def _nearest_labels(points: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    """Index of the nearest centroid per point; ties go to the lowest index."""
    n, k = points.shape[0], centroids.shape[0]
    d2 = np.empty((n, k), dtype=np.float64)
    for j in range(k):
        diff = points - centroids[j]
        d2[:, j] = np.einsum("ij,ij->i", diff, diff)
    return np.argmin(d2, axis=1).astype(np.int32)


def _init_kmeans_pp(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding: next center drawn with probability ∝ squared
    distance to the nearest already-chosen center."""
    n = points.shape[0]
    centroids = np.empty((k, 3), dtype=np.float64)
    centroids[0] = points[rng.integers(n)]
    if k == 1:
        return centroids
    diff = points - centroids[0]
    d2 = np.einsum("ij,ij->i", diff, diff)
    for i in range(1, k):
        total = d2.sum()
        if total <= 0.0:
            raise SegmentationError(
                f"image has fewer than k={k} distinct colors; cannot seed {k} clusters"
            )
        target = rng.random() * total
        idx = int(np.searchsorted(np.cumsum(d2), target, side="right"))
        idx = min(idx, n - 1)
        centroids[i] = points[idx]
        diff = points - centroids[i]
        d2 = np.minimum(d2, np.einsum("ij,ij->i", diff, diff))
    return centroids


def _init_random(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform draw of k distinct pixel colors."""
    colors = np.unique(points, axis=0)
    if colors.shape[0] < k:
        raise SegmentationError(
            f"image has {colors.shape[0]} distinct colors but k={k}"
        )
    chosen = rng.choice(colors.shape[0], size=k, replace=False)
    return colors[np.sort(chosen)].astype(np.float64)


def kmeans_fit(
    img: RasterImage,
    config: KMeansConfig,
    inertia_history: list[float] | None = None,
) -> tuple[KMeansModel, LabelMap]:
    """Fit k-means to the image's pixels with Lloyd's algorithm.

    Alternates nearest-centroid assignment and centroid-mean update until
    the maximum centroid displacement drops below ``config.tol`` or
    ``config.max_iters`` is reached. Empty clusters are reseeded to the
    pixel farthest from their current centroid. If ``inertia_history`` is
    given, the objective value after each assignment step is appended to it
    (the sequence is non-increasing).
    """
    points = _pixel_matrix(img)
    n = points.shape[0]
    if n < config.k:
        raise SegmentationError(f"image has {n} pixels but k={config.k}")

    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(config.seed)))
    if config.init == "k-means++":
        centroids = _init_kmeans_pp(points, config.k, rng)
    else:
        centroids = _init_random(points, config.k, rng)

    for _ in range(config.max_iters):
        labels = _nearest_labels(points, centroids)
        if inertia_history is not None:
            assigned = centroids[labels]
            inertia_history.append(float(((points - assigned) ** 2).sum()))

        new_centroids = _mean_update(points, labels, centroids, config.k)
        shift = float(np.sqrt(((new_centroids - centroids) ** 2).sum(axis=1)).max())
        centroids = new_centroids
        if shift < config.tol:
            break

    labels = _nearest_labels(points, centroids)
    model = KMeansModel(centroids)
    return model, LabelMap(img.width, img.height, labels.reshape(img.height, img.width))


def _mean_update(
    points: np.ndarray, labels: np.ndarray, centroids: np.ndarray, k: int
) -> np.ndarray:
    """Per-cluster means in fixed pixel order; empty clusters reseed to the
    pixel farthest from their current centroid (distinct pixels per repair)."""
    counts = np.bincount(labels, minlength=k).astype(np.float64)
    sums = np.zeros((k, 3), dtype=np.float64)
    for c in range(3):
        sums[:, c] = np.bincount(labels, weights=points[:, c], minlength=k)

    new_centroids = np.where(counts[:, None] > 0, sums / np.maximum(counts[:, None], 1.0), 0.0)
    empty = np.flatnonzero(counts == 0)
    if empty.size:
        used: set[int] = set()
        for j in empty:
            diff = points - centroids[j]
            d2 = np.einsum("ij,ij->i", diff, diff)
            for idx in used:
                d2[idx] = -1.0
            far = int(np.argmax(d2))
            if d2[far] <= 0.0:
                raise SegmentationError(
                    "cannot repair empty cluster: no distinct pixel available"
                )
            new_centroids[j] = points[far]
            used.add(far)
    return new_centroids


def assign_labels(img: RasterImage, model: KMeansModel) -> LabelMap:
    """Map every pixel to its nearest centroid (ties: lowest index)."""
    labels = _nearest_labels(_pixel_matrix(img), model.centroids)
    return LabelMap(img.width, img.height, labels.reshape(img.height, img.width))


def inertia(img: RasterImage, model: KMeansModel, labels: LabelMap) -> float:
    """Sum of squared distances from each pixel to its assigned centroid."""
    if (labels.height, labels.width) != (img.height, img.width):
        raise ValueError(
            f"label map {labels.width}x{labels.height} does not match image "
            f"{img.width}x{img.height}"
        )
    flat = labels.labels.reshape(-1)
    if flat.size and flat.max() >= model.k:
        raise ValueError(f"label {int(flat.max())} out of range for k={model.k}")
    points = _pixel_matrix(img)
    return float(((points - model.centroids[flat]) ** 2).sum())


def denoise_labels(labels: LabelMap, window: int = 3) -> LabelMap:
    """Mode-filter the label map.

    Each label becomes the most frequent label in its window×window
    neighborhood, truncated at the image borders so every in-bounds
    neighbor is counted exactly once. Ties keep the center pixel's original
    label when it participates in the tie, otherwise the lowest label wins.
    """
    if window % 2 == 0 or window < 3:
        raise ValueError(f"window must be an odd integer >= 3, got {window}")
    lab = labels.labels
    h, w = lab.shape
    k = int(lab.max()) + 1 if lab.size else 1
    r = window // 2

    ys = np.arange(h)
    xs = np.arange(w)
    y0 = np.maximum(ys - r, 0)
    y1 = np.minimum(ys + r, h - 1) + 1
    x0 = np.maximum(xs - r, 0)
    x1 = np.minimum(xs + r, w - 1) + 1

    counts = np.empty((k, h, w), dtype=np.int64)
    for l in range(k):
        integral = np.zeros((h + 1, w + 1), dtype=np.int64)
        np.cumsum(np.cumsum(lab == l, axis=0), axis=1, out=integral[1:, 1:])
        counts[l] = (
            integral[y1][:, x1]
            - integral[y0][:, x1]
            - integral[y1][:, x0]
            + integral[y0][:, x0]
        )

    best = counts.argmax(axis=0)
    top = counts.max(axis=0)
    center = counts[lab, ys[:, None], xs[None, :]]
    out = np.where(center == top, lab, best).astype(lab.dtype)
    return LabelMap(labels.width, labels.height, out)


def recolor(labels: LabelMap, model: KMeansModel) -> RasterImage:
    """Paint each pixel with its centroid color, rounded half-up to 8-bit."""
    lab = labels.labels
    if lab.size and lab.max() >= model.k:
        raise ValueError(f"label {int(lab.max())} out of range for k={model.k}")
    palette = round_half_up_u8(model.centroids)
    return RasterImage(palette[lab])


def segment_image(
    img: RasterImage, config: KMeansConfig, denoise_window: int = 3
) -> RasterImage:
    """Full segmentation stage: fit, denoise the label map, recolor.

    Deterministic given (image, config); the output contains at most
    ``config.k`` distinct colors.
    """
    model, labels = kmeans_fit(img, config)
    return recolor(denoise_labels(labels, denoise_window), model)
