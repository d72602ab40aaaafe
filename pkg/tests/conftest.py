import numpy as np
import pytest

from warpcheck.imaging import GaussianKernel, gaussian_blur


def psnr(a: np.ndarray, b: np.ndarray) -> float:
    """Peak signal-to-noise ratio for [0, 1] images (inf for exact match)."""
    err = float(((a - b) ** 2).mean())
    if err == 0.0:
        return float("inf")
    return 10.0 * np.log10(1.0 / err)


def smooth_image(rng, h, w, sigma_size=7):
    """Gaussian-filtered noise: smooth enough for near-lossless warps."""
    img = rng.uniform(size=(h, w, 3))
    return gaussian_blur(img, GaussianKernel(size=sigma_size))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
