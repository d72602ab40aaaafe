"""Procedural face-like test textures with synthetic landmarks.

Generates smooth, feature-bearing images whose landmark positions are known
by construction (the canonical template under a random similarity
placement).  Used for desk-scale experiments, demos, and benchmarks; no
face detection or landmark estimation is involved.

Run as a module to materialize a demo corpus:

    python -m warpcheck.facegen --out demo_data --count 24 --videos 4
"""

from __future__ import annotations

import argparse
import math
from pathlib import Path

import numpy as np

from .geometry import (JAW, LEFT_EYE, MOUTH_BOTTOM, RIGHT_EYE,
                       TEMPLATE_POINTS, LandmarkSet)
from .imaging import GaussianKernel, gaussian_blur


def _smooth_noise(rng, h, w, cells, channels=3, amplitude=1.0):
    """Low-frequency noise: a coarse random grid bilinearly upsampled."""
    grid = rng.uniform(-amplitude, amplitude, size=(cells, cells, channels))
    ys = np.linspace(0, cells - 1, h)
    xs = np.linspace(0, cells - 1, w)
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    y1 = np.minimum(y0 + 1, cells - 1)
    x1 = np.minimum(x0 + 1, cells - 1)
    fy = (ys - y0)[:, None, None]
    fx = (xs - x0)[None, :, None]
    a = grid[y0][:, x0] * (1 - fy) * (1 - fx)
    b = grid[y0][:, x1] * (1 - fy) * fx
    c = grid[y1][:, x0] * fy * (1 - fx)
    d = grid[y1][:, x1] * fy * fx
    return a + b + c + d


def _soft_ellipse(xx, yy, cx, cy, rx, ry, softness=1.5):
    """1 inside the ellipse, 0 outside, smooth transition band."""
    d = np.sqrt(((xx - cx) / rx) ** 2 + ((yy - cy) / ry) ** 2)
    edge = softness / max(rx, ry)
    return np.clip((1.0 + edge - d) / (2 * edge), 0.0, 1.0)


def _polyline_stroke(xx, yy, pts, radius):
    """1 within ``radius`` of the polyline, smoothly falling to 0."""
    acc = np.zeros_like(xx)
    for (x0, y0), (x1, y1) in zip(pts[:-1], pts[1:]):
        dx, dy = x1 - x0, y1 - y0
        seg2 = dx * dx + dy * dy
        if seg2 == 0:
            continue
        t = np.clip(((xx - x0) * dx + (yy - y0) * dy) / seg2, 0.0, 1.0)
        dist = np.sqrt((xx - (x0 + t * dx)) ** 2 + (yy - (y0 + t * dy)) ** 2)
        acc = np.maximum(acc, np.clip(radius + 1.0 - dist, 0.0, 1.0))
    return np.clip(acc, 0.0, 1.0)


def place_landmarks(rng, height, width, face_frac=(0.34, 0.42),
                    max_rotation=0.15):
    """Random similarity placement of the canonical template."""
    span = min(height, width)
    size = span * rng.uniform(*face_frac) / 0.74  # template face spans ~0.74
    theta = rng.uniform(-max_rotation, max_rotation)
    cx = width / 2.0 + rng.uniform(-0.06, 0.06) * width
    cy = height / 2.0 + rng.uniform(-0.06, 0.06) * height
    c, s = math.cos(theta), math.sin(theta)
    centered = TEMPLATE_POINTS - 0.5
    x = centered[:, 0] * size
    y = centered[:, 1] * size
    pts = np.stack([c * x - s * y + cx, s * x + c * y + cy], axis=1)
    return LandmarkSet(pts)


def render_face(rng, landmarks: LandmarkSet, height, width,
                texture_amp=0.35, smooth_sigma=0.55):
    """Paint a face-like image for the given landmark placement.

    The skin region carries fine-grained texture (amplitude ``texture_amp``)
    so blur-based artifacts are detectable; ``smooth_sigma`` lightly smooths
    the final frame, trading texture crispness against warping round-trip
    loss.
    """
    pts = landmarks.points
    yy, xx = np.mgrid[0:height, 0:width].astype(np.float64)

    img = 0.45 + 0.25 * _smooth_noise(rng, height, width, cells=5)
    img += (yy / height - 0.5)[:, :, None] * rng.uniform(-0.25, 0.25)

    jaw = pts[list(JAW)]
    face_cx = pts[:, 0].mean()
    face_cy = pts[:, 1].mean()
    face_rx = (jaw[:, 0].max() - jaw[:, 0].min()) / 2.0
    face_ry = (jaw[:, 1].max() - pts[:, 1].min()) / 1.65
    face = _soft_ellipse(xx, yy, face_cx, face_cy, face_rx, face_ry)[:, :, None]

    skin = np.array([rng.uniform(0.55, 0.8), rng.uniform(0.42, 0.62),
                     rng.uniform(0.3, 0.52)])
    skin_img = skin + 0.1 * _smooth_noise(rng, height, width, cells=7)
    skin_img += texture_amp * rng.uniform(-1, 1, size=(height, width, 3))
    img = face * skin_img + (1 - face) * img

    dark = np.array([0.1, 0.08, 0.08])
    for eye in (LEFT_EYE, RIGHT_EYE):
        ex, ey = pts[list(eye)].mean(axis=0)
        er = (pts[list(eye)][:, 0].max() - pts[list(eye)][:, 0].min()) / 2.0
        white = _soft_ellipse(xx, yy, ex, ey, er, er * 0.55)[:, :, None]
        iris = _soft_ellipse(xx, yy, ex, ey, er * 0.45, er * 0.45)[:, :, None]
        img = white * 0.85 + (1 - white) * img
        img = iris * dark + (1 - iris) * img

    brow = _polyline_stroke(xx, yy, pts[17:22], radius=1.2)[:, :, None]
    brow = np.maximum(brow, _polyline_stroke(xx, yy, pts[22:27],
                                             radius=1.2)[:, :, None])
    img = brow * (skin * 0.35) + (1 - brow) * img

    nose = _polyline_stroke(xx, yy, pts[27:31], radius=1.0)[:, :, None]
    img = nose * (skin * 0.8) + (1 - nose) * img

    mouth_pts = pts[48:60]
    mx, my = mouth_pts.mean(axis=0)
    mrx = (mouth_pts[:, 0].max() - mouth_pts[:, 0].min()) / 2.0
    mry = (mouth_pts[:, 1].max() - mouth_pts[:, 1].min()) / 2.0
    mouth = _soft_ellipse(xx, yy, mx, my, mrx, mry)[:, :, None]
    lip = np.array([rng.uniform(0.5, 0.7), 0.25, 0.28])
    img = mouth * lip + (1 - mouth) * img

    img = np.clip(img, 0.0, 1.0)
    if smooth_sigma > 0:
        img = gaussian_blur(img, GaussianKernel(size=3, sigma=smooth_sigma))
    return img


def make_face_image(rng, height=160, width=160, texture_amp=0.35,
                    smooth_sigma=0.55, **place_kwargs):
    """One procedural face image plus its landmarks."""
    landmarks = place_landmarks(rng, height, width, **place_kwargs)
    img = render_face(rng, landmarks, height, width,
                      texture_amp=texture_amp, smooth_sigma=smooth_sigma)
    return img, landmarks


def make_video_frames(rng, n_frames, height=160, width=160):
    """Frames of one synthetic 'video': a fixed subject with small
    per-frame placement jitter."""
    base = place_landmarks(rng, height, width)
    subject_seed = int(rng.integers(0, 2 ** 63 - 1))
    frames = []
    for k in range(n_frames):
        jitter = rng.uniform(-1.5, 1.5, size=2)
        lm = base.translated(float(jitter[0]), float(jitter[1]))
        frame_rng = np.random.default_rng((subject_seed, k))
        img = render_face(frame_rng, lm, height, width)
        frames.append((img, lm))
    return frames


def _main(argv=None) -> int:
    from .datafiles import ManifestEntry, save_image_png, save_landmarks, write_manifest

    ap = argparse.ArgumentParser(
        description="materialize a demo corpus of procedural faces")
    ap.add_argument("--out", required=True, type=Path)
    ap.add_argument("--count", type=int, default=24)
    ap.add_argument("--videos", type=int, default=0,
                    help="also emit this many 6-frame synthetic videos")
    ap.add_argument("--size", type=int, default=160)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    out = args.out
    (out / "images").mkdir(parents=True, exist_ok=True)
    (out / "landmarks").mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(args.seed)
    entries = []
    for i in range(args.count):
        img, lm = make_face_image(rng, args.size, args.size)
        ip = out / "images" / f"still_{i:04d}.png"
        lp = out / "landmarks" / f"still_{i:04d}.txt"
        save_image_png(ip, img)
        save_landmarks(lp, lm)
        entries.append(ManifestEntry(image_path=str(ip.relative_to(out)),
                                     landmarks_path=str(lp.relative_to(out)),
                                     label="real"))
    for v in range(args.videos):
        for k, (img, lm) in enumerate(make_video_frames(rng, 6, args.size,
                                                        args.size)):
            ip = out / "images" / f"vid{v:03d}_f{k:02d}.png"
            lp = out / "landmarks" / f"vid{v:03d}_f{k:02d}.txt"
            save_image_png(ip, img)
            save_landmarks(lp, lm)
            entries.append(ManifestEntry(
                image_path=str(ip.relative_to(out)),
                landmarks_path=str(lp.relative_to(out)),
                label="real", video_id=f"vid{v:03d}", frame_index=k))
    write_manifest(out / "manifest.jsonl", entries)
    print(f"wrote {len(entries)} entries under {out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(_main())
