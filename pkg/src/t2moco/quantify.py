"""Voxel-wise mono-exponential decay fitting and signal re-prediction.

The estimator is a weighted log-linear least-squares fit (weights ``s_e**2``,
the standard correction for log-transformed noise) with an optional
Levenberg-Marquardt refinement of the nonlinear model.  The log-linear path
is exact on noise-free data and cheap enough to sit inside the detector's
inner loop.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import least_squares

T2STAR_CAP_MS = 500.0


@dataclass(frozen=True)
class QuantMaps:
    """Per-voxel decay parameters with fit diagnostics.

    ``t2star`` is clamped to ``(0, t2star_cap]``; ``valid`` is False wherever
    the fit was skipped (outside the region, non-positive samples) or
    diverged (non-decaying signal, cap hit).  ``method`` records whether the
    nonlinear refinement ran.
    """

    t2star: np.ndarray  # ms
    s0: np.ndarray
    residual: np.ndarray  # per-voxel RMS of the fit residual
    valid: np.ndarray  # bool
    t2star_cap: float = T2STAR_CAP_MS
    method: str = "loglinear"

    def __post_init__(self) -> None:
        if np.any(self.t2star <= 0) or np.any(self.t2star > self.t2star_cap):
            raise ValueError("t2star must lie in (0, t2star_cap]")
        if np.any(self.s0 < 0):
            raise ValueError("s0 must be non-negative")


def fit_t2star(mag, echo_times, region, refine: bool = False, t2star_cap: float = T2STAR_CAP_MS) -> QuantMaps:
    """Fit ``s_e = s0 * exp(-t_e / T2*)`` per voxel from echo magnitudes.

    Parameters
    ----------
    mag
        Echo magnitudes, shape ``(E, ...)``.
    echo_times
        Echo times in ms, length E, at least 2.
    region
        Boolean mask over the trailing axes; voxels outside are skipped.
    refine
        Run a per-voxel Levenberg-Marquardt refinement after the log-linear
        initializer; the refined parameters are kept only when they lower
        the least-squares objective.
    """
    mag = np.asarray(mag, dtype=float)
    te = np.asarray(echo_times, dtype=float)
    if te.size < 2:
        raise ValueError("need at least 2 echoes")
    if mag.shape[0] != te.size:
        raise ValueError("echo dimension does not match echo_times")
    region = np.asarray(region, dtype=bool)
    if region.shape != mag.shape[1:]:
        raise ValueError("region shape does not match voxel grid")
    if not region.any():
        raise ValueError("empty fit region")

    shape = mag.shape[1:]
    flat = mag.reshape(te.size, -1)
    reg = region.reshape(-1)
    fit_ok = reg & np.all(flat > 0, axis=0)

    t2star = np.full(flat.shape[1], t2star_cap)
    s0 = np.zeros(flat.shape[1])
    valid = np.zeros(flat.shape[1], dtype=bool)

    if fit_ok.any():
        s = flat[:, fit_ok]
        slope, intercept = _weighted_loglinear(s, te)
        vox_s0 = np.exp(intercept)
        decaying = slope < 0
        with np.errstate(divide="ignore"):
            vox_t2 = np.where(decaying, -1.0 / np.where(decaying, slope, -1.0), t2star_cap)
        capped = vox_t2 > t2star_cap
        vox_t2 = np.minimum(vox_t2, t2star_cap)
        vox_valid = decaying & ~capped
        if refine and vox_valid.any():
            vox_s0, vox_t2 = _lm_refine(s, te, vox_s0, vox_t2, vox_valid, t2star_cap)
        t2star[fit_ok] = vox_t2
        s0[fit_ok] = vox_s0
        valid[fit_ok] = vox_valid

    pred = s0[None] * np.exp(-te[:, None] / t2star[None])
    residual = np.sqrt(np.mean((pred - flat) ** 2, axis=0))
    residual[~fit_ok] = 0.0
    return QuantMaps(
        t2star=t2star.reshape(shape),
        s0=s0.reshape(shape),
        residual=residual.reshape(shape),
        valid=valid.reshape(shape),
        t2star_cap=t2star_cap,
        method="loglinear+lm" if refine else "loglinear",
    )


def _weighted_loglinear(s: np.ndarray, te: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Closed-form weighted regression of ``log s`` on ``t`` (weights s**2)."""
    w = s**2
    log_s = np.log(s)
    t = te[:, None]
    sw = w.sum(axis=0)
    st = (w * t).sum(axis=0)
    sl = (w * log_s).sum(axis=0)
    stt = (w * t * t).sum(axis=0)
    stl = (w * t * log_s).sum(axis=0)
    denom = sw * stt - st**2
    slope = (sw * stl - st * sl) / denom
    intercept = (sl - slope * st) / sw
    return slope, intercept


def _lm_refine(s, te, s0, t2, which, cap):
    """Per-voxel Levenberg-Marquardt on the nonlinear model, never worsening."""
    s0 = s0.copy()
    t2 = t2.copy()
    for idx in np.flatnonzero(which):
        y = s[:, idx]
        x0 = np.array([s0[idx], t2[idx]])
        res = least_squares(
            _decay_residual, x0, jac=_decay_jacobian, args=(te, y), method="lm", xtol=1e-14, ftol=1e-14
        )
        if res.cost <= 0.5 * np.sum(_decay_residual(x0, te, y) ** 2) and 0 < res.x[1] <= cap and res.x[0] >= 0:
            s0[idx], t2[idx] = res.x
    return s0, t2


def _decay_residual(params, te, y):
    with np.errstate(over="ignore"):
        return params[0] * np.exp(np.clip(-te / params[1], -700.0, 50.0)) - y


def _decay_jacobian(params, te, y):
    e = np.exp(np.clip(-te / params[1], -700.0, 50.0))
    return np.stack([e, params[0] * e * te / params[1] ** 2], axis=1)


def predict_signal(maps: QuantMaps, echo_times) -> np.ndarray:
    """Re-predict echo magnitudes ``s0 * exp(-t_e / T2*)`` from fitted maps."""
    te = np.asarray(echo_times, dtype=float)
    return maps.s0[None] * np.exp(-te.reshape((-1,) + (1,) * maps.s0.ndim) / maps.t2star[None])
