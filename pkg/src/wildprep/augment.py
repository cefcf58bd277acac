"""Geometric augmentation: flips, rotations, zoom, and seeded random chains.

Flips and quarter-turn rotations are exact pixel permutations. Arbitrary
small-angle rotation and zoom resample bilinearly (sharing the imaging
module's sampling kernel), so constant images are fixed points of every
op. Chains serialize to a compact, byte-stable op list (one decimal for
degrees, two for zoom factors); parameters are quantized to that precision
at draw time, which makes re-applying a serialized chain bit-identical to
the original application.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .imaging import RasterImage, resize, round_half_up_u8, sample_bilinear

__all__ = [
    "AugmentOp",
    "AugmentChain",
    "AugmentPolicy",
    "flip_h",
    "flip_v",
    "rotate_right_angle",
    "rotate_angle",
    "zoom",
    "apply_op",
    "apply_chain",
    "sample_chain",
]

MAX_ANGLE_DEG = 15.0
ZOOM_RANGE = (1.0, 1.3)
MAX_CHAIN_LEN = 3

_PLAIN_KINDS = ("flip_h", "flip_v", "rot90", "rot180", "rot270")
_OP_ALPHABET = _PLAIN_KINDS + ("rot", "zoom")


@dataclass(frozen=True)
class AugmentOp:
    """One transform: a plain kind, or ``rot``/``zoom`` with an amount."""

    kind: str
    amount: float | None = None

    def __post_init__(self) -> None:
        if self.kind in _PLAIN_KINDS:
            if self.amount is not None:
                raise ValueError(f"{self.kind} takes no amount")
        elif self.kind == "rot":
            if self.amount is None or abs(self.amount) > MAX_ANGLE_DEG:
                raise ValueError(
                    f"rotation angle must be within ±{MAX_ANGLE_DEG}°, got {self.amount}"
                )
        elif self.kind == "zoom":
            if self.amount is None or not ZOOM_RANGE[0] <= self.amount <= ZOOM_RANGE[1]:
                raise ValueError(
                    f"zoom factor must be within {ZOOM_RANGE}, got {self.amount}"
                )
        else:
            raise ValueError(f"unknown augment op kind: {self.kind!r}")

    def encode(self) -> str:
        if self.kind == "rot":
            return f"rot:{self.amount:.1f}"
        if self.kind == "zoom":
            return f"zoom:{self.amount:.2f}"
        return self.kind

    @staticmethod
    def decode(text: str) -> "AugmentOp":
        if text in _PLAIN_KINDS:
            return AugmentOp(text)
        if text.startswith("rot:"):
            return AugmentOp("rot", float(text[4:]))
        if text.startswith("zoom:"):
            return AugmentOp("zoom", float(text[5:]))
        raise ValueError(f"unknown augment op encoding: {text!r}")


@dataclass(frozen=True)
class AugmentChain:
    """An ordered list of 1–3 ops plus the RNG stream tag that produced it."""

    ops: tuple[AugmentOp, ...]
    seed_tag: str = ""

    def __post_init__(self) -> None:
        if not 1 <= len(self.ops) <= MAX_CHAIN_LEN:
            raise ValueError(f"chain length must be 1..{MAX_CHAIN_LEN}, got {len(self.ops)}")

    def encode(self) -> list[str]:
        return [op.encode() for op in self.ops]

    @staticmethod
    def decode(encoded: list[str], seed_tag: str = "") -> "AugmentChain":
        return AugmentChain(tuple(AugmentOp.decode(s) for s in encoded), seed_tag)


@dataclass(frozen=True)
class AugmentPolicy:
    """Sampling ranges for random chains."""

    max_angle: float = MAX_ANGLE_DEG
    zoom_range: tuple[float, float] = ZOOM_RANGE
    max_chain_len: int = MAX_CHAIN_LEN

    def __post_init__(self) -> None:
        if not 0.0 < self.max_angle <= MAX_ANGLE_DEG:
            raise ValueError(f"max_angle must be in (0, {MAX_ANGLE_DEG}]")
        lo, hi = self.zoom_range
        if not ZOOM_RANGE[0] <= lo <= hi <= ZOOM_RANGE[1]:
            raise ValueError(f"zoom_range must lie within {ZOOM_RANGE}")
        if not 1 <= self.max_chain_len <= MAX_CHAIN_LEN:
            raise ValueError(f"max_chain_len must be 1..{MAX_CHAIN_LEN}")


def flip_h(img: RasterImage) -> RasterImage:
    """Mirror across the vertical axis (left-right)."""
    return RasterImage(np.ascontiguousarray(img.pixels[:, ::-1]))


def flip_v(img: RasterImage) -> RasterImage:
    """Mirror across the horizontal axis (top-bottom)."""
    return RasterImage(np.ascontiguousarray(img.pixels[::-1, :]))


def rotate_right_angle(img: RasterImage, quarter_turns: int) -> RasterImage:
    """Rotate by 90°·quarter_turns counterclockwise, as an exact permutation.

    One and three quarter-turns swap width and height; callers that need a
    fixed working size resize afterwards (``apply_chain`` does).
    """
    if quarter_turns not in (1, 2, 3):
        raise ValueError(f"quarter_turns must be 1, 2, or 3, got {quarter_turns}")
    return RasterImage(np.ascontiguousarray(np.rot90(img.pixels, k=quarter_turns)))


def rotate_angle(img: RasterImage, degrees: float) -> RasterImage:
    """Rotate about the image center by a small angle (|degrees| ≤ 15).

    Inverse-mapping with bilinear sampling; output dimensions equal input
    dimensions and out-of-frame samples replicate the nearest edge pixel.
    Positive angles rotate the content counterclockwise in x-right/y-up
    convention.
    """
    if abs(degrees) > MAX_ANGLE_DEG:
        raise ValueError(f"rotation angle must be within ±{MAX_ANGLE_DEG}°, got {degrees}")
    if degrees == 0.0:
        return RasterImage(img.pixels.copy())
    src = img.pixels.astype(np.float64)
    h, w = img.height, img.width
    cx = (w - 1) / 2.0
    cy = (h - 1) / 2.0
    theta = math.radians(degrees)
    cos_t = math.cos(theta)
    sin_t = math.sin(theta)
    dx = np.arange(w, dtype=np.float64) - cx
    dy = np.arange(h, dtype=np.float64) - cy
    gx, gy = np.meshgrid(dx, dy)
    xs = cx + cos_t * gx + sin_t * gy
    ys = cy - sin_t * gx + cos_t * gy
    return RasterImage(round_half_up_u8(sample_bilinear(src, xs, ys)))


def _center_zoom(img: RasterImage, factor: float) -> RasterImage:
    """Central crop of size round(dim/factor) (≥ 1), resized back."""
    crop_w = max(1, int(math.floor(img.width / factor + 0.5)))
    crop_h = max(1, int(math.floor(img.height / factor + 0.5)))
    x0 = (img.width - crop_w) // 2
    y0 = (img.height - crop_h) // 2
    crop = RasterImage(
        np.ascontiguousarray(img.pixels[y0 : y0 + crop_h, x0 : x0 + crop_w])
    )
    return resize(crop, img.width, img.height)


def zoom(img: RasterImage, factor: float) -> RasterImage:
    """Zoom in by center-cropping to 1/factor of the frame and resizing back."""
    if not ZOOM_RANGE[0] <= factor <= ZOOM_RANGE[1]:
        raise ValueError(f"zoom factor must be within {ZOOM_RANGE}, got {factor}")
    return _center_zoom(img, factor)


def apply_op(img: RasterImage, op: AugmentOp) -> RasterImage:
    if op.kind == "flip_h":
        return flip_h(img)
    if op.kind == "flip_v":
        return flip_v(img)
    if op.kind == "rot90":
        return rotate_right_angle(img, 1)
    if op.kind == "rot180":
        return rotate_right_angle(img, 2)
    if op.kind == "rot270":
        return rotate_right_angle(img, 3)
    if op.kind == "rot":
        return rotate_angle(img, op.amount)
    if op.kind == "zoom":
        return zoom(img, op.amount)
    raise ValueError(f"unknown augment op kind: {op.kind!r}")


def apply_chain(img: RasterImage, chain: AugmentChain) -> RasterImage:
    """Apply ops left to right; output dimensions equal input dimensions.

    An odd number of quarter-turns on a non-square image swaps the frame,
    so the result is resized back to the working size at the end.
    """
    out = img
    for op in chain.ops:
        out = apply_op(out, op)
    if (out.width, out.height) != (img.width, img.height):
        out = resize(out, img.width, img.height)
    return out


def sample_chain(
    rng: np.random.Generator, policy: AugmentPolicy | None = None, seed_tag: str = ""
) -> AugmentChain:
    """Draw a random chain: length uniform in {1..max}, ops uniform over the
    seven-variant alphabet, parameters uniform in range and quantized to
    their serialized precision. Reproducible from the generator state."""
    policy = policy or AugmentPolicy()
    length = int(rng.integers(1, policy.max_chain_len + 1))
    ops = []
    for _ in range(length):
        kind = _OP_ALPHABET[int(rng.integers(len(_OP_ALPHABET)))]
        if kind == "rot":
            degrees = round(float(rng.uniform(-policy.max_angle, policy.max_angle)), 1)
            ops.append(AugmentOp("rot", degrees))
        elif kind == "zoom":
            factor = round(float(rng.uniform(*policy.zoom_range)), 2)
            ops.append(AugmentOp("zoom", factor))
        else:
            ops.append(AugmentOp(kind))
    return AugmentChain(tuple(ops), seed_tag)
