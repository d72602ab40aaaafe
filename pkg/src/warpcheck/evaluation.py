"""Frame-level and video-level scoring: exact rank-based AUC, top-third
video aggregation, and report assembly."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import EmptyVideo, SingleClass
from .synth import Label


@dataclass(frozen=True)
class ScoredFrame:
    video_id: str
    frame_index: int
    score: float
    label: Label

    def __post_init__(self):
        if not np.isfinite(self.score) or not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score must be finite in [0, 1], got {self.score}")


@dataclass(frozen=True)
class VideoScore:
    video_id: str
    aggregated_score: float
    n_frames: int
    label: Label


@dataclass
class EvalReport:
    frame_auc: Optional[float]
    video_auc: Optional[float]
    videos: list

    def to_dict(self) -> dict:
        return {
            "frame_auc": self.frame_auc,
            "video_auc": self.video_auc,
            "videos": [
                {"video_id": v.video_id, "n_frames": v.n_frames,
                 "aggregated_score": v.aggregated_score,
                 "label": v.label.name.lower()}
                for v in self.videos
            ],
        }


def auc(scores: Sequence[float], labels: Sequence[int]) -> float:
    """Exact Mann-Whitney AUC: probability a random positive outscores a
    random negative, ties half-credited.  Computed by rank aggregation in
    O(n log n)."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    if s.shape != y.shape or s.ndim != 1:
        raise ValueError("scores and labels must be equal-length vectors")
    n = s.size
    pos = int(np.count_nonzero(y))
    neg = n - pos
    if pos == 0 or neg == 0:
        raise SingleClass("AUC needs both classes present")
    order = np.argsort(s, kind="mergesort")
    sorted_s = s[order]
    boundaries = np.nonzero(np.diff(sorted_s))[0] + 1
    starts = np.concatenate(([0], boundaries))
    ends = np.concatenate((boundaries, [n]))
    avg_rank = (starts + ends + 1) / 2.0  # 1-based mid-rank per tie group
    ranks = np.empty(n, dtype=np.float64)
    ranks[order] = np.repeat(avg_rank, ends - starts)
    u = ranks[y == 1].sum() - pos * (pos + 1) / 2.0
    return float(u / (pos * neg))


def aggregate_video(frame_scores: Sequence[float]) -> float:
    """Mean of the largest ceil(n/3) frame scores."""
    s = np.asarray(frame_scores, dtype=np.float64)
    n = s.size
    if n == 0:
        raise EmptyVideo("video has no frames")
    k = (n + 2) // 3
    top = np.partition(s, n - k)[n - k:]
    return float(top.mean())


def roc_points(scores: Sequence[float], labels: Sequence[int]) -> list:
    """ROC polyline as (fpr, tpr) pairs, one per distinct threshold, from
    (0, 0) to (1, 1)."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    pos = int(np.count_nonzero(y))
    neg = y.size - pos
    if pos == 0 or neg == 0:
        raise SingleClass("ROC needs both classes present")
    order = np.argsort(-s, kind="mergesort")
    ys = y[order]
    ss = s[order]
    tp = np.cumsum(ys == 1)
    fp = np.cumsum(ys == 0)
    last_of_group = np.nonzero(
        np.concatenate((np.diff(ss) != 0, [True])))[0]
    pts = [(0.0, 0.0)]
    pts.extend((float(fp[i]) / neg, float(tp[i]) / pos) for i in last_of_group)
    return pts


def evaluate(frames: Sequence[ScoredFrame]) -> EvalReport:
    """Frame-level AUC over all frames and video-level AUC over top-third
    aggregated scores.

    Frames of one video must share a label.  A level whose labels are
    single-class yields None for that AUC; if both levels are single-class,
    SingleClass is raised.
    """
    if len(frames) == 0:
        raise SingleClass("no frames to evaluate")
    by_video: dict = {}
    for f in frames:
        by_video.setdefault(f.video_id, []).append(f)
    videos = []
    for vid in sorted(by_video):
        group = by_video[vid]
        vlabels = {f.label for f in group}
        if len(vlabels) != 1:
            raise ValueError(f"video {vid!r} mixes real and fake frames")
        score = aggregate_video([f.score for f in group])
        videos.append(VideoScore(video_id=vid, aggregated_score=score,
                                 n_frames=len(group), label=group[0].label))

    frame_auc = video_auc = None
    try:
        frame_auc = auc([f.score for f in frames],
                        [int(f.label) for f in frames])
    except SingleClass:
        pass
    try:
        video_auc = auc([v.aggregated_score for v in videos],
                        [int(v.label) for v in videos])
    except SingleClass:
        pass
    if frame_auc is None and video_auc is None:
        raise SingleClass("labels are single-class at both levels")
    return EvalReport(frame_auc=frame_auc, video_auc=video_auc, videos=videos)
