import numpy as np
import pytest

from conftest import psnr, smooth_image
from warpcheck.errors import DegenerateConfiguration, NonInvertible
from warpcheck.geometry import (DEFAULT_TEMPLATE, LEFT_EYE, RIGHT_EYE,
                                TEMPLATE_POINTS, FaceTemplate, LandmarkSet,
                                SimilarityTransform, compose,
                                estimate_alignment, fit_similarity, invert,
                                warp)


def lstsq_similarity_oracle(src, dst):
    """Independent least-squares reference: solve the full linear system
    for (a, b, tx, ty) with numpy's SVD-based lstsq."""
    n = src.shape[0]
    design = np.zeros((2 * n, 4))
    rhs = np.zeros(2 * n)
    design[0::2] = np.column_stack([src[:, 0], -src[:, 1],
                                    np.ones(n), np.zeros(n)])
    design[1::2] = np.column_stack([src[:, 1], src[:, 0],
                                    np.zeros(n), np.ones(n)])
    rhs[0::2] = dst[:, 0]
    rhs[1::2] = dst[:, 1]
    params, *_ = np.linalg.lstsq(design, rhs, rcond=None)
    return params  # a, b, tx, ty


def residual(t, src, dst):
    return float(((t.apply(src) - dst) ** 2).sum())


class TestTemplate:
    def test_has_68_points_in_unit_square(self):
        assert TEMPLATE_POINTS.shape == (68, 2)
        assert TEMPLATE_POINTS.min() >= 0.0
        assert TEMPLATE_POINTS.max() <= 1.0

    def test_mean_centered(self):
        assert np.abs(TEMPLATE_POINTS.mean(axis=0) - 0.5).max() < 1e-9

    def test_eye_centroids_symmetric(self):
        le = TEMPLATE_POINTS[list(LEFT_EYE)].mean(axis=0)
        re = TEMPLATE_POINTS[list(RIGHT_EYE)].mean(axis=0)
        assert abs((le[0] - 0.5) + (re[0] - 0.5)) < 1e-6
        assert abs(le[1] - re[1]) < 1e-6

    def test_validation_rejects_offcenter(self):
        with pytest.raises(ValueError):
            FaceTemplate(points=TEMPLATE_POINTS * 0.5, target_size=128)


class TestLandmarkSet:
    def test_requires_68_points(self):
        with pytest.raises(ValueError):
            LandmarkSet(np.zeros((10, 2)))

    def test_rejects_nonfinite(self):
        pts = np.zeros((68, 2))
        pts[3, 1] = np.nan
        with pytest.raises(ValueError):
            LandmarkSet(pts)

    def test_any_inside(self):
        lm = LandmarkSet(np.full((68, 2), 500.0))
        assert not lm.any_inside(100, 100)
        assert lm.any_inside(501, 501)


class TestEstimateAlignment:
    def test_identity_when_landmarks_equal_scaled_template(self):
        lm = LandmarkSet(TEMPLATE_POINTS * DEFAULT_TEMPLATE.target_size)
        t = estimate_alignment(lm, DEFAULT_TEMPLATE, 1.0)
        assert t.a == 1.0
        assert t.b == 0.0
        assert t.tx == 0.0
        assert t.ty == 0.0

    def test_pure_translation_inverts(self):
        base = TEMPLATE_POINTS * DEFAULT_TEMPLATE.target_size
        lm = LandmarkSet(base + np.array([5.0, -3.0]))
        t = estimate_alignment(lm, DEFAULT_TEMPLATE, 1.0)
        assert abs(t.a - 1.0) < 1e-12
        assert abs(t.b) < 1e-12
        assert abs(t.tx - (-5.0)) < 1e-9
        assert abs(t.ty - 3.0) < 1e-9

    def test_three_point_rotation_recovery(self):
        # 3 non-collinear points, rotated +90 deg about their centroid; the
        # recovered mapping back is a -90 deg rotation with unit scale.
        pts = np.array([[0.0, 0.0], [4.0, 1.0], [1.0, 5.0]])
        c = pts.mean(axis=0)
        rotated = np.column_stack([-(pts[:, 1] - c[1]) + c[0],
                                   (pts[:, 0] - c[0]) + c[1]])
        t = fit_similarity(rotated, pts)
        assert abs(t.rotation - (-np.pi / 2)) < 1e-9
        assert abs(t.scale - 1.0) < 1e-9
        oracle = lstsq_similarity_oracle(rotated, pts)
        assert np.allclose([t.a, t.b, t.tx, t.ty], oracle, atol=1e-9)

    def test_matches_lstsq_oracle_on_noisy_sets(self, rng):
        for _ in range(20):
            src = rng.uniform(-40, 60, size=(68, 2))
            dst = rng.uniform(-40, 60, size=(68, 2))
            t = fit_similarity(src, dst)
            oracle = lstsq_similarity_oracle(src, dst)
            assert np.allclose([t.a, t.b, t.tx, t.ty], oracle,
                               rtol=1e-9, atol=1e-9)

    def test_residual_beats_1000_random_candidates(self, rng):
        src = rng.uniform(0, 100, size=(68, 2))
        dst = src * 1.3 + rng.normal(0, 4.0, size=(68, 2))
        t = fit_similarity(src, dst)
        best_fit = residual(t, src, dst)
        for _ in range(1000):
            s = rng.uniform(0.5, 2.0)
            theta = rng.uniform(-np.pi, np.pi)
            cand = SimilarityTransform(
                s * np.cos(theta), s * np.sin(theta),
                rng.uniform(-50, 50), rng.uniform(-50, 50))
            assert best_fit <= residual(cand, src, dst) + 1e-9

    def test_translation_equivariance(self, rng):
        pts = rng.uniform(0, 100, size=(68, 2))
        lm = LandmarkSet(pts)
        lm2 = lm.translated(17.0, -8.0)
        t1 = estimate_alignment(lm, DEFAULT_TEMPLATE, 1.0)
        t2 = estimate_alignment(lm2, DEFAULT_TEMPLATE, 1.0)
        assert abs(t1.a - t2.a) < 1e-9
        assert abs(t1.b - t2.b) < 1e-9
        moved = t2.apply(lm2.points)
        assert np.allclose(moved, t1.apply(lm.points), atol=1e-9)

    def test_scale_parameter_doubles_s(self, rng):
        pts = rng.uniform(0, 100, size=(68, 2))
        lm = LandmarkSet(pts)
        t1 = estimate_alignment(lm, DEFAULT_TEMPLATE, 0.7)
        t2 = estimate_alignment(lm, DEFAULT_TEMPLATE, 1.4)
        assert abs(t2.scale - 2.0 * t1.scale) < 1e-9

    def test_coincident_points_degenerate(self):
        lm = LandmarkSet(np.full((68, 2), 7.0))
        with pytest.raises(DegenerateConfiguration):
            estimate_alignment(lm, DEFAULT_TEMPLATE, 1.0)

    def test_nonpositive_scale_rejected(self):
        lm = LandmarkSet(TEMPLATE_POINTS * 128)
        with pytest.raises(ValueError):
            estimate_alignment(lm, DEFAULT_TEMPLATE, 0.0)


def bilinear_oracle(src, t, out_w, out_h):
    """Direct per-pixel resampling reference for warp()."""
    inv = invert(t)
    h, w = src.shape[:2]
    out = np.zeros((out_h, out_w, src.shape[2]))
    for v in range(out_h):
        for u in range(out_w):
            sx = inv.a * u - inv.b * v + inv.tx
            sy = inv.b * u + inv.a * v + inv.ty
            x0, y0 = int(np.floor(sx)), int(np.floor(sy))
            wx, wy = sx - x0, sy - y0
            x0c, x1c = min(max(x0, 0), w - 1), min(max(x0 + 1, 0), w - 1)
            y0c, y1c = min(max(y0, 0), h - 1), min(max(y0 + 1, 0), h - 1)
            r0 = src[y0c, x0c] + wx * (src[y0c, x1c] - src[y0c, x0c])
            r1 = src[y1c, x0c] + wx * (src[y1c, x1c] - src[y1c, x0c])
            out[v, u] = r0 + wy * (r1 - r0)
    return out


class TestWarp:
    def test_identity_bit_equal(self, rng):
        img = rng.uniform(size=(13, 17, 3))
        out = warp(img, SimilarityTransform.identity(), 17, 13)
        assert np.array_equal(out, img)

    def test_integer_translation_exact(self, rng):
        img = rng.uniform(size=(20, 24, 3))
        t = SimilarityTransform(1.0, 0.0, 3.0, 0.0)
        out = warp(img, t, 24, 20)
        assert np.array_equal(out[:, 3:], img[:, :-3])

    def test_matches_per_pixel_oracle(self, rng):
        img = rng.uniform(size=(12, 14, 3))
        t = SimilarityTransform(1.3 * np.cos(0.4), 1.3 * np.sin(0.4),
                                2.5, -1.5)
        out = warp(img, t, 16, 11)
        ref = bilinear_oracle(img, t, 16, 11)
        assert np.allclose(out, ref, atol=1e-12)

    def test_round_trip_psnr_on_smooth_image(self, rng):
        img = smooth_image(rng, 64, 64)
        t = SimilarityTransform(2.0, 0.0, 0.0, 0.0)
        up = warp(img, t, 128, 128)
        back = warp(up, invert(t), 64, 64)
        interior = slice(4, -4)
        assert psnr(back[interior, interior], img[interior, interior]) >= 35.0

    def test_constant_image_preserved_exactly(self):
        img = np.full((9, 11, 3), 0.37)
        t = SimilarityTransform(0.83, 0.21, 1.7, -0.6)
        out = warp(img, t, 15, 10)
        assert np.array_equal(out, np.full((10, 15, 3), 0.37))

    def test_rejects_bad_dims(self, rng):
        img = rng.uniform(size=(5, 5, 3))
        with pytest.raises(ValueError):
            warp(img, SimilarityTransform.identity(), 0, 5)


class TestInvert:
    def test_identity(self):
        t = invert(SimilarityTransform.identity())
        assert (t.a, t.b, t.tx, t.ty) == (1.0, 0.0, 0.0, 0.0)

    def test_pure_translation(self):
        t = invert(SimilarityTransform(1.0, 0.0, 5.0, -2.0))
        assert (t.a, t.b) == (1.0, -0.0) or (t.a, t.b) == (1.0, 0.0)
        assert t.tx == -5.0
        assert t.ty == 2.0

    def test_compose_with_inverse_is_identity_on_points(self, rng):
        for _ in range(20):
            s = rng.uniform(0.5, 2.0)
            theta = rng.uniform(-np.pi, np.pi)
            t = SimilarityTransform(s * np.cos(theta), s * np.sin(theta),
                                    rng.uniform(-50, 50), rng.uniform(-50, 50))
            both = compose(t, invert(t))
            pts = rng.uniform(-100, 100, size=(100, 2))
            assert np.allclose(both.apply(pts), pts, atol=1e-9)

    def test_double_inverse_round_trip(self, rng):
        t = SimilarityTransform(1.2, -0.4, 8.0, 3.0)
        tt = invert(invert(t))
        assert np.allclose([tt.a, tt.b, tt.tx, tt.ty],
                           [t.a, t.b, t.tx, t.ty], atol=1e-12)

    def test_zero_scale_unconstructible(self):
        with pytest.raises(ValueError):
            SimilarityTransform(0.0, 0.0, 1.0, 1.0)

    def test_overflowing_inverse_rejected(self):
        t = SimilarityTransform(1e-150, 0.0, 1e300, 0.0)
        with pytest.raises(NonInvertible):
            invert(t)
