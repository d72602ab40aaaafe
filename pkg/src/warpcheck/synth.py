"""Negative-example generation and RoI sampling.

Converts pristine face images into warping-artifact examples (align, blur,
warp back, composite) and produces the fixed-size network inputs.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import _kernels
from .errors import EmptyBox, InsufficientInput
from .geometry import (DEFAULT_TEMPLATE, NO_JAW, FaceTemplate, LandmarkSet,
                       SimilarityTransform, TEMPLATE_POINTS,
                       estimate_alignment, invert, warp)
from .imaging import (ColorJitterParams, GaussianKernel, ShapeMode,
                      apply_color_jitter, composite, polygon_mask)


class Label(enum.IntEnum):
    REAL = 0
    FAKE = 1


@dataclass(frozen=True)
class SynthConfig:
    """Knobs for the negative-example generator.

    ``scales`` are alignment scales relative to ``target_size`` (the aligned
    face square side at scale 1).  Jitter ranges must contain their identity
    values so augmentation can be a no-op.
    """

    scales: tuple = (0.5, 0.75, 1.0, 1.25)
    target_size: int = 128
    blur_size: int = 5
    blur_sigma: float = 1.1
    whole_face_prob: float = 0.5
    brightness_range: tuple = (0.8, 1.2)
    contrast_range: tuple = (0.8, 1.2)
    sharpness_range: tuple = (0.6, 1.4)
    distortion_range: tuple = (0.0, 2.0)
    feather_px: int = 3
    sample_size: int = 224
    rng_seed: int = 0

    def __post_init__(self):
        if len(self.scales) == 0 or min(self.scales) <= 0:
            raise ValueError("scales must be non-empty and positive")
        if not 0.0 <= self.whole_face_prob <= 1.0:
            raise ValueError("whole_face_prob must be in [0, 1]")
        for name, rng_, ident in (
                ("brightness_range", self.brightness_range, 1.0),
                ("contrast_range", self.contrast_range, 1.0),
                ("sharpness_range", self.sharpness_range, 1.0),
                ("distortion_range", self.distortion_range, 0.0)):
            lo, hi = rng_
            if not (lo <= ident <= hi):
                raise ValueError(f"{name} must contain the identity value {ident}")
        if self.feather_px < 0:
            raise ValueError("feather_px must be >= 0")
        if self.sample_size < 1:
            raise ValueError("sample_size must be >= 1")

    @property
    def blur_kernel(self) -> GaussianKernel:
        return GaussianKernel(size=self.blur_size, sigma=self.blur_sigma)

    @property
    def template(self) -> FaceTemplate:
        if self.target_size == DEFAULT_TEMPLATE.target_size:
            return DEFAULT_TEMPLATE
        return FaceTemplate(points=TEMPLATE_POINTS, target_size=self.target_size)


@dataclass(frozen=True)
class RoiSpec:
    """Integer crop rectangle, inclusive-exclusive."""

    y0: int
    x0: int
    y1: int
    x1: int

    def __post_init__(self):
        if self.x0 < 0 or self.y0 < 0 or self.x0 >= self.x1 or self.y0 >= self.y1:
            raise ValueError(f"invalid crop rectangle {self!r}")

    @property
    def width(self) -> int:
        return self.x1 - self.x0

    @property
    def height(self) -> int:
        return self.y1 - self.y0


@dataclass(frozen=True)
class Sample:
    """One network input: fixed-size pixels plus provenance."""

    pixels: np.ndarray
    label: Label
    source_id: str = ""
    video_id: Optional[str] = None


@dataclass(frozen=True)
class SourceImage:
    """A pristine input image with its landmarks and provenance ids."""

    image: np.ndarray
    landmarks: LandmarkSet
    source_id: str = ""
    video_id: Optional[str] = None


def sample_jitter(cfg: SynthConfig, rng: np.random.Generator) -> ColorJitterParams:
    """Draw jitter factors uniformly from the configured ranges.

    Draw order is fixed (brightness, contrast, sharpness, distortion) so a
    given generator state always yields the same parameters.
    """
    return ColorJitterParams(
        brightness=float(rng.uniform(*cfg.brightness_range)),
        contrast=float(rng.uniform(*cfg.contrast_range)),
        sharpness=float(rng.uniform(*cfg.sharpness_range)),
        distortion=float(rng.uniform(*cfg.distortion_range)),
    )


def coverage_mask(t: SimilarityTransform, side: int,
                  width: int, height: int) -> np.ndarray:
    """Pixels of a width x height image whose mapping under ``t`` lands in
    the aligned square's sampling domain [0, side-1]^2.

    Outside this region a warped-back aligned image carries only
    clamp-to-edge smear, so compositing is restricted to it.
    """
    x = np.arange(width, dtype=np.float64)[None, :]
    y = np.arange(height, dtype=np.float64)[:, None]
    u = t.a * x - t.b * y + t.tx
    v = t.b * x + t.a * y + t.ty
    inside = (u >= 0.0) & (u <= side - 1.0) & (v >= 0.0) & (v <= side - 1.0)
    return inside.astype(np.float64)


def make_negative(image: np.ndarray, landmarks: LandmarkSet,
                  cfg: SynthConfig, rng: np.random.Generator) -> np.ndarray:
    """Simulate the face-warping artifact on a pristine image.

    Aligns the face at a randomly picked scale, blurs the aligned face,
    warps it back to the original geometry, and composites it through a
    feathered shape mask (whole warped face or the eyebrow/mouth convex
    polygon).  Pixels where the feathered mask is zero are bit-identical to
    the input.
    """
    h, w = image.shape[:2]
    scale = float(cfg.scales[int(rng.integers(len(cfg.scales)))])
    mode = (ShapeMode.WHOLE_FACE if rng.uniform() < cfg.whole_face_prob
            else ShapeMode.CONVEX_POLYGON)
    t = estimate_alignment(landmarks, cfg.template, scale)
    side = max(2, int(round(scale * cfg.target_size)))
    aligned = warp(image, t, side, side)
    blurred = _blur_image(aligned, cfg.blur_kernel)
    back = warp(blurred, invert(t), w, h)
    mask = polygon_mask(w, h, landmarks, mode) * coverage_mask(t, side, w, h)
    return composite(image, back, mask, cfg.feather_px)


def _blur_image(image: np.ndarray, kernel: GaussianKernel) -> np.ndarray:
    if kernel.size == 1:
        return image
    out = _kernels.separable_blur(
        np.ascontiguousarray(image, dtype=np.float64), kernel.factors)
    return np.clip(out, 0.0, 1.0)


def sample_roi(landmarks: LandmarkSet, image_w: int, image_h: int,
               rng: np.random.Generator) -> RoiSpec:
    """Draw a region of interest around the face.

    The base box covers all landmarks except the jawline; each side is
    expanded by an independent uniform margin (vertical sides up to h/5,
    horizontal up to w/8, with h, w the box height/width), then clamped to
    the image.
    """
    pts = landmarks.points[list(NO_JAW)]
    x0f, y0f = pts.min(axis=0)
    x1f, y1f = pts.max(axis=0)
    bh = y1f - y0f
    bw = x1f - x0f
    if bh <= 0.0 or bw <= 0.0:
        raise EmptyBox("landmark bounding box has zero area")
    m_y0 = rng.uniform(0.0, bh / 5.0)
    m_x0 = rng.uniform(0.0, bw / 8.0)
    m_y1 = rng.uniform(0.0, bh / 5.0)
    m_x1 = rng.uniform(0.0, bw / 8.0)
    y0 = max(0, int(np.floor(y0f - m_y0)))
    x0 = max(0, int(np.floor(x0f - m_x0)))
    y1 = min(int(image_h), int(np.ceil(y1f + m_y1)))
    x1 = min(int(image_w), int(np.ceil(x1f + m_x1)))
    if y0 >= y1 or x0 >= x1:
        raise EmptyBox("expanded box lies outside the image")
    return RoiSpec(y0=y0, x0=x0, y1=y1, x1=x1)


def crop_resize(image: np.ndarray, roi: RoiSpec, out_size: int = 224) -> np.ndarray:
    """Bilinear-resize the crop to out_size x out_size (corner-aligned, so a
    crop already at the target size passes through bit-exactly)."""
    crop = np.ascontiguousarray(
        image[roi.y0:roi.y1, roi.x0:roi.x1], dtype=np.float64)
    out = _kernels.resize_bilinear(crop, out_size, out_size)
    return np.clip(out, 0.0, 1.0)


def _as_source(item, index: int) -> SourceImage:
    if isinstance(item, SourceImage):
        return item
    image, landmarks = item[0], item[1]
    source_id = item[2] if len(item) > 2 else f"sample{index}"
    video_id = item[3] if len(item) > 3 else None
    return SourceImage(image, landmarks, source_id, video_id)


def _make_sample(src: SourceImage, label: Label, child_seed: int,
                 cfg: SynthConfig) -> Sample:
    child = np.random.default_rng(int(child_seed))
    img = src.image
    if label is Label.FAKE:
        img = make_negative(img, src.landmarks, cfg, child)
    img = apply_color_jitter(img, sample_jitter(cfg, child))
    h, w = img.shape[:2]
    roi = sample_roi(src.landmarks, w, h, child)
    pixels = crop_resize(img, roi, cfg.sample_size)
    return Sample(pixels=pixels, label=label,
                  source_id=src.source_id, video_id=src.video_id)


def build_batch(positives: Sequence, cfg: SynthConfig,
                rng: np.random.Generator, batch_size: Optional[int] = None,
                workers: Optional[int] = None) -> list:
    """Assemble one training batch from pristine inputs.

    Exactly half the batch keeps label REAL (jittered, RoI-cropped
    originals); the other half is converted with :func:`make_negative`
    first.  Which inputs convert, the output order, and every per-sample
    augmentation are all drawn from ``rng``, with each sample consuming an
    independent derived stream, so results do not depend on the worker
    count.
    """
    from ._parallel import pmap
    if batch_size is None:
        batch_size = len(positives)
    if batch_size % 2 != 0:
        raise ValueError("batch size must be even")
    if len(positives) < batch_size:
        raise InsufficientInput(
            f"need {batch_size} images for a batch, got {len(positives)}")
    items = [_as_source(positives[i], i) for i in range(batch_size)]
    perm = rng.permutation(batch_size)
    fake_idx = set(int(i) for i in perm[:batch_size // 2])
    emit_order = rng.permutation(batch_size)
    child_seeds = rng.integers(0, 2 ** 63 - 1, size=batch_size)
    samples = pmap(
        lambda i: _make_sample(
            items[i],
            Label.FAKE if i in fake_idx else Label.REAL,
            child_seeds[i], cfg),
        range(batch_size), workers=workers)
    return [samples[int(k)] for k in emit_order]
