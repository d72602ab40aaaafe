"""warpcheck: synthesize DeepFake-style face-warping artifacts from pristine
face images, train a compact CNN to detect them, and evaluate detection with
frame-level and video-level AUC."""

__version__ = "0.1.0"

from ._kernels import backend_name
from .errors import WarpcheckError
from .geometry import (DEFAULT_TEMPLATE, FaceTemplate, LandmarkSet,
                       SimilarityTransform, estimate_alignment,
                       fit_similarity, invert, warp)
from .imaging import (ColorJitterParams, GaussianKernel, ShapeMode,
                      apply_color_jitter, composite, gaussian_blur,
                      polygon_mask)
from .synth import (Label, RoiSpec, Sample, SourceImage, SynthConfig,
                    build_batch, crop_resize, make_negative, sample_roi)
from .model import (CnnArchitecture, CompactCnn, SgdState, TrainConfig,
                    backward, forward, learning_rate, load_checkpoint,
                    mine_hard, predict_image, save_checkpoint, sgd_step,
                    train)
from .evaluation import (EvalReport, ScoredFrame, VideoScore, aggregate_video,
                         auc, evaluate, roc_points)

__all__ = [
    "__version__", "backend_name", "WarpcheckError",
    "DEFAULT_TEMPLATE", "FaceTemplate", "LandmarkSet", "SimilarityTransform",
    "estimate_alignment", "fit_similarity", "invert", "warp",
    "ColorJitterParams", "GaussianKernel", "ShapeMode", "apply_color_jitter",
    "composite", "gaussian_blur", "polygon_mask",
    "Label", "RoiSpec", "Sample", "SourceImage", "SynthConfig", "build_batch",
    "crop_resize", "make_negative", "sample_roi",
    "CnnArchitecture", "CompactCnn", "SgdState", "TrainConfig", "backward",
    "forward", "learning_rate", "load_checkpoint", "mine_hard",
    "predict_image", "save_checkpoint", "sgd_step", "train",
    "EvalReport", "ScoredFrame", "VideoScore", "aggregate_video", "auc",
    "evaluate", "roc_points",
]
