"""Landmark containers, the canonical face template, similarity-transform
estimation, and affine image warping.

Coordinates are (x, y) pixel positions with pixel centers on the integer
lattice; images are (H, W, 3) float64 arrays with values in [0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import DegenerateConfiguration, NonInvertible

# iBUG-68 index groups.
JAW = range(0, 17)
EYEBROWS = range(17, 27)
LEFT_EYE = range(36, 42)
RIGHT_EYE = range(42, 48)
MOUTH_BOTTOM = range(54, 60)  # outer lower lip
NO_JAW = range(17, 68)

# Canonical mean-face layout, one half per row: (index, mirrored index,
# horizontal offset from the midline, vertical position).  Mirrored points
# are emitted at 0.5 -/+ dx so left/right symmetry is exact by construction;
# the assembled table is then mean-centered on (0.5, 0.5).
_TEMPLATE_HALF = (
    (0, 16, 0.435, 0.285), (1, 15, 0.425, 0.400), (2, 14, 0.405, 0.515),
    (3, 13, 0.375, 0.625), (4, 12, 0.325, 0.725), (5, 11, 0.255, 0.810),
    (6, 10, 0.175, 0.875), (7, 9, 0.090, 0.920),
    (17, 26, 0.355, 0.245), (18, 25, 0.285, 0.210), (19, 24, 0.205, 0.195),
    (20, 23, 0.125, 0.210), (21, 22, 0.055, 0.240),
    (31, 35, 0.085, 0.595), (32, 34, 0.045, 0.610),
    (36, 45, 0.295, 0.320), (37, 44, 0.245, 0.300), (38, 43, 0.185, 0.300),
    (39, 42, 0.135, 0.325), (40, 47, 0.190, 0.345), (41, 46, 0.250, 0.345),
    (48, 54, 0.155, 0.760), (49, 53, 0.100, 0.735), (50, 52, 0.045, 0.720),
    (59, 55, 0.100, 0.820), (58, 56, 0.050, 0.840),
    (60, 64, 0.125, 0.765), (61, 63, 0.050, 0.755), (67, 65, 0.050, 0.790),
)
_TEMPLATE_MID = (
    (8, 0.935), (27, 0.315), (28, 0.390), (29, 0.465), (30, 0.540),
    (33, 0.620), (51, 0.730), (57, 0.850), (62, 0.760), (66, 0.795),
)


def _build_template_points() -> np.ndarray:
    pts = np.zeros((68, 2), dtype=np.float64)
    for i, j, dx, y in _TEMPLATE_HALF:
        pts[i] = (0.5 - dx, y)
        pts[j] = (0.5 + dx, y)
    for i, y in _TEMPLATE_MID:
        pts[i] = (0.5, y)
    pts[:, 0] += 0.5 - pts[:, 0].mean()
    pts[:, 1] += 0.5 - pts[:, 1].mean()
    pts.setflags(write=False)
    return pts


TEMPLATE_POINTS = _build_template_points()


@dataclass(frozen=True)
class LandmarkSet:
    """68 facial landmark positions in image coordinates, iBUG-68 order."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64, copy=True)
        if pts.shape != (68, 2):
            raise ValueError(f"expected 68 (x, y) points, got shape {pts.shape}")
        if not np.isfinite(pts).all():
            raise ValueError("landmark coordinates must be finite")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def any_inside(self, width: int, height: int) -> bool:
        """True if at least one landmark lies inside a width x height image."""
        x, y = self.points[:, 0], self.points[:, 1]
        return bool(np.any((x >= 0) & (x <= width - 1) & (y >= 0) & (y <= height - 1)))

    def translated(self, dx: float, dy: float) -> "LandmarkSet":
        return LandmarkSet(self.points + np.array([dx, dy]))


@dataclass(frozen=True)
class FaceTemplate:
    """Canonical 68-point face layout in the unit square.

    ``target_size`` is the side length, in pixels, of the aligned face square
    the template maps onto at scale 1.
    """

    points: np.ndarray
    target_size: int

    def __post_init__(self):
        pts = np.array(self.points, dtype=np.float64, copy=True)
        if pts.shape != (68, 2):
            raise ValueError(f"expected 68 (x, y) points, got shape {pts.shape}")
        if pts.min() < 0.0 or pts.max() > 1.0:
            raise ValueError("template points must lie in the unit square")
        center = pts.mean(axis=0)
        if np.abs(center - 0.5).max() > 1e-6:
            raise ValueError("template must be mean-centered on (0.5, 0.5)")
        le = pts[list(LEFT_EYE)].mean(axis=0)
        re = pts[list(RIGHT_EYE)].mean(axis=0)
        if abs((le[0] - 0.5) + (re[0] - 0.5)) > 1e-6:
            raise ValueError("eye centroids must be symmetric about x = 0.5")
        if self.target_size < 1:
            raise ValueError("target_size must be >= 1")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    def scaled_points(self, scale: float) -> np.ndarray:
        """Template points in pixel coordinates at ``scale * target_size``."""
        return self.points * (scale * self.target_size)


DEFAULT_TEMPLATE = FaceTemplate(points=TEMPLATE_POINTS, target_size=128)


@dataclass(frozen=True)
class SimilarityTransform:
    """Scale + rotation + translation, the 2x3 matrix [[a, -b, tx], [b, a, ty]]."""

    a: float
    b: float
    tx: float
    ty: float

    def __post_init__(self):
        vals = (self.a, self.b, self.tx, self.ty)
        if not all(np.isfinite(v) for v in vals):
            raise ValueError("transform parameters must be finite")
        if self.a * self.a + self.b * self.b == 0.0:
            raise ValueError("similarity transform must have positive scale")

    @classmethod
    def identity(cls) -> "SimilarityTransform":
        return cls(1.0, 0.0, 0.0, 0.0)

    @property
    def scale(self) -> float:
        return float(np.hypot(self.a, self.b))

    @property
    def rotation(self) -> float:
        """Rotation angle in radians, atan2(b, a)."""
        return float(np.arctan2(self.b, self.a))

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.a, -self.b, self.tx],
                         [self.b, self.a, self.ty]], dtype=np.float64)

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Map (N, 2) points through the transform."""
        pts = np.asarray(points, dtype=np.float64)
        x, y = pts[..., 0], pts[..., 1]
        return np.stack([self.a * x - self.b * y + self.tx,
                         self.b * x + self.a * y + self.ty], axis=-1)


def compose(outer: SimilarityTransform,
            inner: SimilarityTransform) -> SimilarityTransform:
    """Transform equivalent to applying ``inner`` first, then ``outer``."""
    a = outer.a * inner.a - outer.b * inner.b
    b = outer.b * inner.a + outer.a * inner.b
    tx = outer.a * inner.tx - outer.b * inner.ty + outer.tx
    ty = outer.b * inner.tx + outer.a * inner.ty + outer.ty
    return SimilarityTransform(a, b, tx, ty)


def invert(t: SimilarityTransform) -> SimilarityTransform:
    """Exact analytic inverse of a similarity transform."""
    s2 = t.a * t.a + t.b * t.b
    if s2 == 0.0 or not np.isfinite(s2):
        raise NonInvertible("transform scale underflowed to zero")
    ia = t.a / s2
    ib = -t.b / s2
    itx = -(ia * t.tx - ib * t.ty)
    ity = -(ib * t.tx + ia * t.ty)
    if not all(np.isfinite(v) for v in (ia, ib, itx, ity)):
        raise NonInvertible("inverse transform is not finite")
    return SimilarityTransform(ia, ib, itx, ity)


def fit_similarity(src: np.ndarray, dst: np.ndarray) -> SimilarityTransform:
    """Least-squares similarity transform mapping ``src`` points onto ``dst``.

    Closed-form solution of the linear least-squares problem in
    (a, b, tx, ty); since that parameterization covers exactly the
    reflection-free similarities, the result is the global optimum over
    scale + rotation + translation.
    """
    src = np.asarray(src, dtype=np.float64)
    dst = np.asarray(dst, dtype=np.float64)
    if src.shape != dst.shape or src.ndim != 2 or src.shape[1] != 2:
        raise ValueError("src and dst must be matching (N, 2) arrays")
    mu_s = src.mean(axis=0)
    mu_d = dst.mean(axis=0)
    xc = src - mu_s
    yc = dst - mu_d
    # Identical pairing/summation order in numerator and denominator keeps
    # the self-alignment case exactly the identity transform.
    denom = float((xc[:, 0] * xc[:, 0] + xc[:, 1] * xc[:, 1]).sum())
    if denom == 0.0:
        raise DegenerateConfiguration("all source points coincide")
    a = float((xc[:, 0] * yc[:, 0] + xc[:, 1] * yc[:, 1]).sum()) / denom
    b = float((xc[:, 0] * yc[:, 1] - xc[:, 1] * yc[:, 0]).sum()) / denom
    if a == 0.0 and b == 0.0:
        raise DegenerateConfiguration(
            "source points have no correlation with the targets")
    tx = mu_d[0] - (a * mu_s[0] - b * mu_s[1])
    ty = mu_d[1] - (b * mu_s[0] + a * mu_s[1])
    return SimilarityTransform(a, b, tx, ty)


def estimate_alignment(landmarks: LandmarkSet, template: FaceTemplate,
                       scale: float) -> SimilarityTransform:
    """Least-squares similarity transform from landmarks onto the template
    points scaled by ``scale * target_size``."""
    if scale <= 0:
        raise ValueError("scale must be > 0")
    return fit_similarity(landmarks.points, template.scaled_points(scale))


def warp(image: np.ndarray, t: SimilarityTransform,
         out_w: int, out_h: int) -> np.ndarray:
    """Warp an image through ``t``: output pixel (u, v) is bilinear-sampled
    from the input at t^-1(u, v), clamping samples to the nearest border
    pixel outside the source.
    """
    if out_w < 1 or out_h < 1:
        raise ValueError("output dimensions must be >= 1")
    img = np.ascontiguousarray(image, dtype=np.float64)
    if img.ndim != 3:
        raise ValueError("expected an (H, W, C) image")
    inv = invert(t)
    out = _kernels.affine_sample(img, inv.a, inv.b, inv.tx, inv.ty,
                                 int(out_h), int(out_w))
    return np.clip(out, 0.0, 1.0)
