"""Pixel-level primitives for the synthesis pipeline: Gaussian blur, color
augmentation, polygon masks, and masked compositing."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import DegeneratePolygon, DimensionMismatch
from .geometry import EYEBROWS, MOUTH_BOTTOM, LandmarkSet


def sigma_for_size(size: int) -> float:
    """Conventional Gaussian sigma for an odd kernel size."""
    return 0.3 * ((size - 1) / 2.0 - 1.0) + 0.8


@dataclass(frozen=True)
class GaussianKernel:
    """Separable 2-D Gaussian kernel.

    ``weights`` is the size x size outer product of the normalized 1-D
    profile; ``factors`` holds the 1-D profile itself.  ``size=1`` is the
    identity impulse.
    """

    size: int = 5
    sigma: float = None  # type: ignore[assignment]
    factors: np.ndarray = field(init=False, repr=False)
    weights: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.size < 1 or self.size % 2 == 0:
            raise ValueError("kernel size must be a positive odd integer")
        if self.sigma is None:
            object.__setattr__(self, "sigma", sigma_for_size(self.size))
        if self.sigma <= 0:
            raise ValueError("sigma must be > 0")
        c = self.size // 2
        x = np.arange(self.size, dtype=np.float64) - c
        g = np.exp(-(x * x) / (2.0 * self.sigma * self.sigma))
        g /= g.sum()
        w = np.outer(g, g)
        g.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "factors", g)
        object.__setattr__(self, "weights", w)

    @classmethod
    def identity(cls) -> "GaussianKernel":
        return cls(size=1, sigma=0.5)


class ShapeMode(enum.Enum):
    """Mask shape for the retained warped-face area."""

    WHOLE_FACE = "whole_face"
    CONVEX_POLYGON = "convex_polygon"


@dataclass(frozen=True)
class ColorJitterParams:
    """Factors for the color augmentation chain.

    1.0 is the identity for brightness/contrast/sharpness; 0.0 for
    distortion (a sinusoidal horizontal row displacement, in pixels).
    """

    brightness: float = 1.0
    contrast: float = 1.0
    sharpness: float = 1.0
    distortion: float = 0.0

    def __post_init__(self):
        if min(self.brightness, self.contrast, self.sharpness) < 0:
            raise ValueError("brightness/contrast/sharpness must be >= 0")
        if self.distortion < 0:
            raise ValueError("distortion must be >= 0")


# Rec. 601 luma weights, used for the per-image contrast pivot.
_LUMA = np.array([0.299, 0.587, 0.114])

# Small fixed kernel for the sharpness blend.
_SHARPNESS_KERNEL = GaussianKernel(size=3, sigma=0.8)


def gaussian_blur(image: np.ndarray, kernel: GaussianKernel) -> np.ndarray:
    """Separable Gaussian convolution per channel, clamp-to-edge boundary.

    Accepts (H, W) or (H, W, C) arrays; constant images pass through
    bit-exactly.
    """
    img = np.ascontiguousarray(image, dtype=np.float64)
    squeeze = img.ndim == 2
    if squeeze:
        img = img[:, :, None]
    out = _kernels.separable_blur(img, kernel.factors)
    out = np.clip(out, 0.0, 1.0)
    return out[:, :, 0] if squeeze else out


def apply_color_jitter(image: np.ndarray,
                       p: ColorJitterParams) -> np.ndarray:
    """Apply brightness, contrast, sharpness, and distortion, in that order.

    Identity factors short-circuit, so the all-identity parameter set
    returns the input bit-exactly.  The result is clamped to [0, 1].
    """
    img = np.ascontiguousarray(image, dtype=np.float64)
    touched = False
    if p.brightness != 1.0:
        img = img * p.brightness
        touched = True
    if p.contrast != 1.0:
        mean = float((img @ _LUMA).mean())
        img = (img - mean) * p.contrast + mean
        touched = True
    if p.sharpness != 1.0:
        blurred = _kernels.separable_blur(
            np.ascontiguousarray(img), _SHARPNESS_KERNEL.factors)
        img = blurred + p.sharpness * (img - blurred)
        touched = True
    if p.distortion != 0.0:
        img = _sine_row_shift(img, p.distortion)
        touched = True
    return np.clip(img, 0.0, 1.0) if touched else img


def _sine_row_shift(img: np.ndarray, amplitude: float) -> np.ndarray:
    """Shift row r horizontally by amplitude * sin(2 pi r / H), linear
    interpolation with clamp-to-edge."""
    h, w = img.shape[:2]
    rows = np.arange(h, dtype=np.float64)
    shift = amplitude * np.sin(2.0 * math.pi * rows / h)
    sx = np.arange(w, dtype=np.float64)[None, :] - shift[:, None]
    x0 = np.floor(sx).astype(np.int64)
    frac = (sx - x0)[:, :, None]
    x0c = np.clip(x0, 0, w - 1)
    x1c = np.clip(x0 + 1, 0, w - 1)
    ri = np.arange(h)[:, None]
    v0 = img[ri, x0c]
    v1 = img[ri, x1c]
    return v0 + frac * (v1 - v0)


def polygon_mask(width: int, height: int, landmarks: LandmarkSet,
                 shape_mode: ShapeMode) -> np.ndarray:
    """Binary (H, W) mask of the face area to retain.

    WHOLE_FACE covers the whole rectangle; CONVEX_POLYGON fills the convex
    hull of the eyebrow landmarks and the bottom-of-mouth landmarks via
    scanline rasterization with a half-open edge rule (adjacent polygons
    never double-cover a pixel).
    """
    if width < 1 or height < 1:
        raise ValueError("mask dimensions must be >= 1")
    if shape_mode is ShapeMode.WHOLE_FACE:
        return np.ones((height, width), dtype=np.float64)
    pts = landmarks.points[list(EYEBROWS) + list(MOUTH_BOTTOM)]
    hull = convex_hull(pts)
    return _fill_convex(width, height, hull)


def convex_hull(points: np.ndarray) -> np.ndarray:
    """Convex hull (counter-clockwise in image coordinates) via monotone
    chain; raises DegeneratePolygon when fewer than 3 non-collinear points
    remain."""
    pts = sorted({(float(x), float(y)) for x, y in np.asarray(points)})
    if len(pts) < 3:
        raise DegeneratePolygon("need at least 3 distinct points")

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: list = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list = []
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    hull = lower[:-1] + upper[:-1]
    if len(hull) < 3:
        raise DegeneratePolygon("points are collinear")
    return np.array(hull, dtype=np.float64)


def _fill_convex(width: int, height: int, hull: np.ndarray) -> np.ndarray:
    """Scanline fill at integer pixel centers: row y covered on [xa, xb)
    between edge crossings, edges treated half-open in y."""
    mask = np.zeros((height, width), dtype=np.float64)
    n = hull.shape[0]
    for y in range(height):
        xs = []
        for i in range(n):
            px, py = hull[i]
            qx, qy = hull[(i + 1) % n]
            if (py <= y < qy) or (qy <= y < py):
                t = (y - py) / (qy - py)
                xs.append(px + t * (qx - px))
        if len(xs) < 2:
            continue
        xs.sort()
        x0 = max(0, math.ceil(xs[0]))
        x1 = min(width, math.ceil(xs[-1]))
        if x1 > x0:
            mask[y, x0:x1] = 1.0
    return mask


def feather_mask(mask: np.ndarray, feather_px: int) -> np.ndarray:
    """Soften mask edges with a Gaussian of radius feather_px (0 = no-op)."""
    if feather_px < 0:
        raise ValueError("feather_px must be >= 0")
    if feather_px == 0:
        return mask
    kernel = GaussianKernel(size=2 * feather_px + 1)
    return gaussian_blur(mask, kernel)


def composite(original: np.ndarray, warped_face: np.ndarray,
              mask: np.ndarray, feather_px: int) -> np.ndarray:
    """Blend ``warped_face`` over ``original`` through a feathered mask.

    The mask is softened by a Gaussian of radius ``feather_px`` (kernel size
    2*feather_px + 1, conventional sigma); pixels where the feathered mask
    is exactly 0 are bit-identical to ``original``.
    """
    if original.shape != warped_face.shape:
        raise DimensionMismatch("original and warped_face shapes differ")
    if mask.shape != original.shape[:2]:
        raise DimensionMismatch("mask dimensions do not match the images")
    m = feather_mask(mask, feather_px)[:, :, None]
    return m * warped_face + (1.0 - m) * original
