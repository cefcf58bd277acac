"""Image representation, decoding/encoding, and the shared bilinear resize.

Everything downstream (segmentation, augmentation, preprocessing) works on
``RasterImage``: an H×W×3 8-bit RGB raster with value semantics. All
functions here are pure; the same input bytes always produce the same
output bytes.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import ImageLoadError, ImageSaveError

__all__ = ["RasterImage", "load_image", "save_image", "resize"]


@dataclass(frozen=True, eq=False)
class RasterImage:
    """An H×W×3 8-bit RGB raster.

    ``pixels`` is a row-major ``(height, width, 3)`` uint8 array; the dtype
    itself guarantees every intensity lies in [0, 255].
    """

    pixels: np.ndarray

    def __post_init__(self) -> None:
        px = self.pixels
        if not isinstance(px, np.ndarray) or px.dtype != np.uint8:
            raise ValueError("pixels must be a uint8 ndarray")
        if px.ndim != 3 or px.shape[2] != 3:
            raise ValueError(f"pixels must have shape (h, w, 3), got {px.shape}")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError("image dimensions must be at least 1x1")

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, RasterImage):
            return NotImplemented
        return self.pixels.shape == other.pixels.shape and bool(
            np.array_equal(self.pixels, other.pixels)
        )


def load_image(path: str | Path) -> RasterImage:
    """Decode a JPEG or PNG file into a 3-channel raster.

    Grayscale sources are replicated across channels and any alpha channel
    is dropped, so the 3-channel invariant holds for every loadable file.
    """
    p = Path(path)
    if not p.is_file():
        raise ImageLoadError(f"file not found: {p}")
    try:
        with Image.open(p) as im:
            rgb = im.convert("RGB")
            px = np.asarray(rgb, dtype=np.uint8)
    except (UnidentifiedImageError, OSError, SyntaxError, ValueError) as exc:
        raise ImageLoadError(f"undecodable image: {p} ({exc})") from exc
    if px.ndim != 3 or px.shape[0] < 1 or px.shape[1] < 1:
        raise ImageLoadError(f"undecodable image: {p} (zero-dimension raster)")
    return RasterImage(px)


def save_image(img: RasterImage, path: str | Path) -> None:
    """Write ``img`` as a lossless PNG, creating parent directories."""
    p = Path(path)
    try:
        p.parent.mkdir(parents=True, exist_ok=True)
        Image.fromarray(img.pixels, mode="RGB").save(p, format="PNG")
    except OSError as exc:
        raise ImageSaveError(f"cannot write image: {p} ({exc})") from exc


def round_half_up_u8(values: np.ndarray) -> np.ndarray:
    """Round nonnegative float intensities half-up and clip to uint8 range."""
    return np.clip(np.floor(values + 0.5), 0.0, 255.0).astype(np.uint8)


def sample_bilinear(src: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Bilinearly sample a float64 H×W×3 array at fractional coordinates.

    Coordinates are clamped to the frame first, which makes out-of-frame
    samples replicate the nearest edge pixel. ``xs``/``ys`` may be any
    broadcast-compatible shape; the result has that shape plus the channel
    axis.
    """
    h, w = src.shape[:2]
    xs = np.clip(xs, 0.0, float(w - 1))
    ys = np.clip(ys, 0.0, float(h - 1))
    x0 = np.floor(xs).astype(np.intp)
    y0 = np.floor(ys).astype(np.intp)
    fx = (xs - x0)[..., None]
    fy = (ys - y0)[..., None]
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    p00 = src[y0, x0]
    p01 = src[y0, x1]
    p10 = src[y1, x0]
    p11 = src[y1, x1]
    return (1.0 - fy) * ((1.0 - fx) * p00 + fx * p01) + fy * ((1.0 - fx) * p10 + fx * p11)


def resize(img: RasterImage, target_w: int, target_h: int) -> RasterImage:
    """Resample to exactly ``target_w`` × ``target_h``.

    Bilinear interpolation with half-pixel-center sampling: output pixel
    (i, j) samples the source at ((j + 0.5)·w/W − 0.5, (i + 0.5)·h/H − 0.5).
    Resizing to the source dimensions reproduces the pixel data exactly.
    """
    if target_w < 1 or target_h < 1:
        raise ValueError(f"target dimensions must be >= 1, got {target_w}x{target_h}")
    src = img.pixels.astype(np.float64)
    sx = (np.arange(target_w, dtype=np.float64) + 0.5) * (img.width / target_w) - 0.5
    sy = (np.arange(target_h, dtype=np.float64) + 0.5) * (img.height / target_h) - 0.5
    xs, ys = np.meshgrid(sx, sy)
    return RasterImage(round_half_up_u8(sample_bilinear(src, xs, ys)))
