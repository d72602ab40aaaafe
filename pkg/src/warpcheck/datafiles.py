"""Dataset file formats: JSONL manifests, landmark sidecars, PNG images,
and atomic writes."""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from PIL import Image

from .errors import ManifestError
from .geometry import LandmarkSet

_ENTRY_KEYS = {"image_path", "landmarks_path", "label", "video_id",
               "frame_index"}


@dataclass(frozen=True)
class ManifestEntry:
    """One dataset row; paths are stored as written (resolved against the
    manifest's directory on load)."""

    image_path: str
    landmarks_path: str
    label: Optional[str] = None
    video_id: Optional[str] = None
    frame_index: Optional[int] = None

    def __post_init__(self):
        if self.label not in (None, "real", "fake"):
            raise ManifestError(f"label must be real/fake, got {self.label!r}")

    def to_dict(self) -> dict:
        d = {"image_path": self.image_path,
             "landmarks_path": self.landmarks_path}
        for key in ("label", "video_id", "frame_index"):
            val = getattr(self, key)
            if val is not None:
                d[key] = val
        return d


def read_manifest(path) -> list:
    """Parse a JSONL manifest; rejects rows with unknown keys."""
    entries = []
    path = Path(path)
    with open(path, "r", encoding="utf-8") as f:
        for ln, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ManifestError(f"{path}:{ln}: invalid JSON") from exc
            unknown = set(row) - _ENTRY_KEYS
            if unknown:
                raise ManifestError(
                    f"{path}:{ln}: unknown keys {sorted(unknown)}")
            if "image_path" not in row or "landmarks_path" not in row:
                raise ManifestError(
                    f"{path}:{ln}: image_path and landmarks_path required")
            entries.append(ManifestEntry(**row))
    return entries


def write_manifest(path, entries) -> None:
    lines = [json.dumps(e.to_dict(), sort_keys=True) for e in entries]
    atomic_write_bytes(path, ("\n".join(lines) + "\n").encode()
                       if lines else b"")


def resolve_path(base_dir, p) -> Path:
    p = Path(p)
    return p if p.is_absolute() else Path(base_dir) / p


def load_image(path) -> np.ndarray:
    """PNG/JPEG -> (H, W, 3) float64 in [0, 1]."""
    with Image.open(path) as im:
        arr = np.asarray(im.convert("RGB"), dtype=np.float64)
    return arr / 255.0


def save_image_png(path, image: np.ndarray) -> None:
    """Quantize [0, 1] floats to 8-bit and write a PNG atomically."""
    q = np.clip(np.round(np.asarray(image) * 255.0), 0, 255).astype(np.uint8)
    im = Image.fromarray(q, mode="RGB")
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            im.save(f, format="PNG")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_landmarks(path) -> LandmarkSet:
    """Sidecar format: 68 lines of 'x y' decimal floats, iBUG-68 order."""
    pts = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ValueError(f"{path}: expected 'x y' per line")
            pts.append((float(parts[0]), float(parts[1])))
    if len(pts) != 68:
        raise ValueError(f"{path}: expected 68 landmarks, got {len(pts)}")
    return LandmarkSet(np.array(pts, dtype=np.float64))


def save_landmarks(path, landmarks: LandmarkSet) -> None:
    lines = [f"{x!r} {y!r}" for x, y in landmarks.points]
    atomic_write_bytes(path, ("\n".join(lines) + "\n").encode())


def atomic_write_bytes(path, data: bytes) -> None:
    """Write via a temp file + rename so readers never see partial files."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path, text: str) -> None:
    atomic_write_bytes(path, text.encode())
