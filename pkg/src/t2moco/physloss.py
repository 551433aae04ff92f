"""Decay-consistency loss and slice-mask regularizer for the detector.

The core signal is the per-voxel Pearson correlation across echoes between
reconstructed magnitudes and their own mono-exponential re-prediction:
motion-corrupted lines disturb the decay, the correlation drops, and the
loss (one minus the correlation, averaged over brain tissue) rises.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_LAMBDA = 0.1


@dataclass(frozen=True)
class LossReport:
    """Detector objective breakdown: ``total = l_phys + lam * l_reg``."""

    l_phys: float
    l_reg: float
    total: float
    lam: float
    per_voxel_rho: np.ndarray | None = None


def pearson_rho(s_rec: np.ndarray, s_fit: np.ndarray) -> np.ndarray:
    """Per-voxel Pearson correlation across the echo axis (axis 0).

    Voxels where either series has zero variance get rho 0, so flattened
    signals cannot score as perfectly decay-consistent.
    """
    a = s_rec - s_rec.mean(axis=0)
    b = s_fit - s_fit.mean(axis=0)
    num = np.sum(a * b, axis=0)
    den = np.sqrt(np.sum(a * a, axis=0) * np.sum(b * b, axis=0))
    with np.errstate(invalid="ignore", divide="ignore"):
        rho = np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)
    # rounding can push |rho| a few ulp past 1; keep the loss in [0, 2]
    return np.clip(rho, -1.0, 1.0)


def physics_loss(s_rec, s_fit, region, return_rho: bool = False):
    """Mean of ``1 - rho`` over the region (brain mask excluding CSF).

    ``s_rec`` and ``s_fit`` are echo magnitudes of shape ``(E, ...)`` with at
    least 3 echoes; ``region`` is a boolean mask over the voxel axes.
    """
    s_rec = np.asarray(s_rec, dtype=float)
    s_fit = np.asarray(s_fit, dtype=float)
    if s_rec.shape != s_fit.shape:
        raise ValueError("series shapes differ")
    if s_rec.shape[0] < 3:
        raise ValueError("need at least 3 echoes")
    region = np.asarray(region, dtype=bool)
    if not region.any():
        raise ValueError("empty region")
    rho = pearson_rho(s_rec, s_fit)
    loss = float(np.mean(1.0 - rho[region]))
    if return_rho:
        return loss, rho
    return loss


def mask_regularizer(masks, slice_indices=None) -> float:
    """Mean absolute difference between exclusion masks two slices apart.

    Pairs follow the interleaved acquisition: slice ``z`` is compared with
    ``z + 2``.  ``masks`` is ``(Z, n_lines)``; when ``slice_indices`` names
    the actual slice positions (a detector batch), only pairs with both
    members present are used.
    """
    masks = np.atleast_2d(np.asarray(masks, dtype=float))
    if slice_indices is None:
        if masks.shape[0] < 3:
            raise ValueError("need at least 3 slices")
        lo = masks[:-2]
        hi = masks[2:]
        return float(np.mean(np.abs(lo - hi)))
    index_of = {int(z): i for i, z in enumerate(slice_indices)}
    diffs = [
        np.abs(masks[i] - masks[index_of[z + 2]]) for z, i in index_of.items() if z + 2 in index_of
    ]
    if not diffs:
        raise ValueError("no (z, z+2) slice pair present")
    return float(np.mean(diffs))


def total_loss(l_phys: float, l_reg: float, lam: float = DEFAULT_LAMBDA, per_voxel_rho=None) -> LossReport:
    """Assemble the combined objective ``l_phys + lam * l_reg``."""
    return LossReport(
        l_phys=float(l_phys),
        l_reg=float(l_reg),
        total=float(l_phys) + lam * float(l_reg),
        lam=float(lam),
        per_voxel_rho=per_voxel_rho,
    )
