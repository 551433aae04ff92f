"""Map-level evaluation (MAE, windowed SSIM) and line-detection scoring."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.ndimage import correlate

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


@dataclass(frozen=True)
class MetricReport:
    """Region-wise T2* comparison plus optional line-detection scores."""

    context: str
    mae_gm: float
    mae_wm: float
    ssim_gm: float
    ssim_wm: float
    detection: tuple[float, float, float] | None = None


class DetectionScores(NamedTuple):
    precision: float
    recall: float
    f1: float
    degenerate: bool = False


def mae(a, b, region) -> float:
    """Mean absolute difference over the region."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    region = np.asarray(region, dtype=bool)
    if not region.any():
        raise ValueError("empty region")
    return float(np.mean(np.abs(a - b)[region]))


def _gaussian_window(size: int, sigma: float) -> np.ndarray:
    half = (size - 1) / 2
    g = np.exp(-((np.arange(size) - half) ** 2) / (2 * sigma**2))
    kernel = np.outer(g, g)
    return kernel / kernel.sum()


def ssim_map(a, b, data_range: float, window: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA,
             k1: float = SSIM_K1, k2: float = SSIM_K2) -> np.ndarray:
    """Local SSIM map with an 11x11 Gaussian window (reflect boundary)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ValueError("map shapes differ")
    if data_range <= 0:
        raise ValueError("data_range must be positive")
    kernel = _gaussian_window(window, sigma)
    mu_a = correlate(a, kernel, mode="reflect")
    mu_b = correlate(b, kernel, mode="reflect")
    var_a = correlate(a * a, kernel, mode="reflect") - mu_a**2
    var_b = correlate(b * b, kernel, mode="reflect") - mu_b**2
    cov = correlate(a * b, kernel, mode="reflect") - mu_a * mu_b
    c1 = (k1 * data_range) ** 2
    c2 = (k2 * data_range) ** 2
    return ((2 * mu_a * mu_b + c1) * (2 * cov + c2)) / ((mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2))


def ssim(a, b, data_range: float, region=None, window: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA,
         k1: float = SSIM_K1, k2: float = SSIM_K2) -> float:
    """Mean local SSIM, optionally restricted to a boolean region."""
    smap = ssim_map(a, b, data_range, window, sigma, k1, k2)
    if region is None:
        return float(smap.mean())
    region = np.asarray(region, dtype=bool)
    if not region.any():
        raise ValueError("empty region")
    return float(smap[region].mean())


def detection_scores(pred, truth, threshold: float = 0.5) -> DetectionScores:
    """Precision/recall/F1 of excluded-line detection.

    A line counts as positive (excluded) when its weight falls below the
    threshold.  Degenerate cases (no predicted or no true positives) report
    the affected score as 0 with ``degenerate=True``.
    """
    pred = np.asarray(getattr(pred, "weights", pred), dtype=float).ravel()
    truth = np.asarray(getattr(truth, "weights", truth), dtype=float).ravel()
    if pred.size != truth.size:
        raise ValueError("mask lengths differ")
    p = pred < threshold
    t = truth < threshold
    tp = int(np.sum(p & t))
    fp = int(np.sum(p & ~t))
    fn = int(np.sum(~p & t))
    degenerate = (tp + fp == 0) or (tp + fn == 0)
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return DetectionScores(precision, recall, f1, degenerate)
