"""Data-consistent unrolled reconstruction and the mask-averaging baseline.

The reconstruction alternates a pluggable classical denoiser with a gradient
descent step on the line-weighted data-consistency term, for a fixed number
of iterations (five by default).  Echoes share one exclusion mask and are
reconstructed jointly; the denoisers act per echo on real and imaginary
channels.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.fft as _fft

from .forward import adjoint, apply_mask, sense_forward, _as_array, _workers


@dataclass(frozen=True)
class DenoiserSpec:
    """Classical denoiser choice: ``identity``, ``tikhonov`` or ``tv_prox``.

    ``lam`` is the smoothing strength; ``inner_iters`` the number of
    projection iterations for the TV proximal operator.
    """

    kind: str = "identity"
    lam: float = 0.0
    inner_iters: int = 10

    def __post_init__(self) -> None:
        if self.kind not in ("identity", "tikhonov", "tv_prox"):
            raise ValueError(f"unknown denoiser kind {self.kind!r}")
        if self.lam < 0:
            raise ValueError("lam must be non-negative")
        if self.inner_iters < 1:
            raise ValueError("inner_iters must be at least 1")


@dataclass(frozen=True)
class ReconConfig:
    """Unrolled reconstruction settings (5 alternations, unit DC step)."""

    n_unrolled: int = 5
    dc_step_size: float = 1.0
    denoiser: DenoiserSpec = field(default_factory=DenoiserSpec)
    init: str = "adjoint"

    def __post_init__(self) -> None:
        if self.n_unrolled < 1:
            raise ValueError("n_unrolled must be at least 1")
        if not 0.0 < self.dc_step_size < 2.0:
            raise ValueError("dc_step_size must lie in (0, 2)")
        if self.init not in ("zero_filled", "adjoint"):
            raise ValueError(f"unknown init {self.init!r}")


def dc_gradient_step(x, y, mask, coils, step: float) -> np.ndarray:
    """One gradient step on the weighted data-consistency term.

    Computes ``x - step * A^H E (A x - y)`` per echo, where ``A`` is the
    motion-free coil-FFT operator and ``E`` the per-line weights.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    x = _as_array(x, "data")
    resid = sense_forward(x, coils) - _as_array(y, "data")
    return x - step * adjoint(resid, coils, mask)


def denoise(x, spec: DenoiserSpec) -> np.ndarray:
    """Apply the configured denoiser per echo and per real/imag channel."""
    x = _as_array(x, "data")
    if spec.kind == "identity":
        return x
    if spec.kind == "tikhonov":
        return _tikhonov(x, spec.lam)
    out = np.empty_like(x)
    for e in range(x.shape[0]):
        out[e] = _tv_prox(x[e].real, spec.lam, spec.inner_iters) + 1j * _tv_prox(
            x[e].imag, spec.lam, spec.inner_iters
        )
    return out


def _tikhonov(x: np.ndarray, lam: float) -> np.ndarray:
    """Implicit smoothing ``(I + lam L)^{-1}`` with the periodic 5-point Laplacian."""
    h, w = x.shape[-2:]
    ky = np.fft.fftfreq(h)[:, None]
    kx = np.fft.fftfreq(w)[None, :]
    eig = 4.0 - 2.0 * np.cos(2 * np.pi * ky) - 2.0 * np.cos(2 * np.pi * kx)
    gain = (1.0 / (1.0 + lam * eig)).astype(x.real.dtype if x.dtype.kind == "c" else x.dtype)
    spectrum = _fft.fft2(x, axes=(-2, -1), workers=_workers(x)) * gain
    return _fft.ifft2(spectrum, axes=(-2, -1), workers=_workers(x))


def _grad(u: np.ndarray) -> np.ndarray:
    g = np.zeros((2,) + u.shape)
    g[0, :-1] = u[1:] - u[:-1]
    g[1, :, :-1] = u[:, 1:] - u[:, :-1]
    return g


def _div(p: np.ndarray) -> np.ndarray:
    out = np.zeros(p.shape[1:])
    out[:-1] += p[0, :-1]
    out[1:] -= p[0, :-1]
    out[:, :-1] += p[1, :, :-1]
    out[:, 1:] -= p[1, :, :-1]
    return out


def total_variation(u: np.ndarray) -> float:
    """Isotropic TV of a real 2D image (forward differences)."""
    g = _grad(np.asarray(u, dtype=float))
    return float(np.sum(np.sqrt(g[0] ** 2 + g[1] ** 2)))


def _tv_prox(u: np.ndarray, lam: float, iters: int, tau: float = 0.249) -> np.ndarray:
    """Chambolle dual projection for ``argmin 0.5||v - u||^2 + lam TV(v)``."""
    if lam == 0.0:
        return u.copy()
    p = np.zeros((2,) + u.shape)
    for _ in range(iters):
        g = _grad(_div(p) - u / lam)
        norm = np.sqrt(g[0] ** 2 + g[1] ** 2)
        p = (p + tau * g) / (1.0 + tau * norm)
    return u - lam * _div(p)


def unrolled_reconstruct(y, mask, coils, cfg: ReconConfig) -> np.ndarray:
    """Alternate denoiser and DC gradient step for ``cfg.n_unrolled`` rounds.

    All echoes are reconstructed jointly through the same line mask; the
    result is the ``(E, H, W)`` complex image stack.
    """
    y = _as_array(y, "data")
    if cfg.init == "adjoint":
        x = adjoint(y, coils, mask)
    else:
        x = np.zeros(y.shape[1:], dtype=complex)
    for _ in range(cfg.n_unrolled):
        x = denoise(x, cfg.denoiser)
        x = dc_gradient_step(x, y, mask, coils, cfg.dc_step_size)
    return x


def center_lines(n_lines: int, center: int) -> slice:
    """Index range of the central ``center`` phase-encode lines."""
    mid = n_lines // 2
    lo = mid - center // 2
    return slice(lo, lo + center)


def random_mask(n_lines: int, rate: float, center: int, seed: int) -> np.ndarray:
    """Uniform random exclusion mask with a protected fully-sampled center.

    Exactly ``round(rate * (n_lines - center))`` lines outside the central
    ``center`` lines are zeroed, chosen uniformly at random.
    """
    if not 0.0 <= rate <= 1.0:
        raise ValueError("rate must lie in [0, 1]")
    if center > n_lines:
        raise ValueError("center larger than the number of lines")
    keep = np.ones(n_lines)
    outside = np.setdiff1d(np.arange(n_lines), np.arange(n_lines)[center_lines(n_lines, center)])
    n_excl = round(rate * outside.size)
    rng = np.random.default_rng(seed)
    keep[rng.choice(outside, size=n_excl, replace=False)] = 0.0
    return keep


def variable_density_mask(n_lines: int, rate: float, seed: int, center_strength: float = 0.9) -> np.ndarray:
    """Variable-density exclusion mask with no protected center.

    ``round(rate * n_lines)`` lines are excluded without replacement, with a
    center-weighted linear keep density: the exclusion weight of a line grows
    linearly with its distance from the k-space center, modulated by
    ``center_strength`` (0 gives a uniform density).
    """
    if not 0.0 <= rate <= 1.0:
        raise ValueError("rate must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    idx = np.arange(n_lines)
    dist = np.abs(idx - n_lines // 2) / (n_lines / 2)
    weight = 1.0 + center_strength * (dist - dist.mean())
    keep = np.ones(n_lines)
    n_excl = round(rate * n_lines)
    excluded = rng.choice(idx, size=n_excl, replace=False, p=weight / weight.sum())
    keep[excluded] = 0.0
    return keep


def orba_reconstruct(y, coils, cfg: ReconConfig, n_masks: int = 15, rate: float = 0.5, seed: int = 0,
                     center_strength: float = 0.9, paired: bool = True):
    """Mask-averaging baseline: mean reconstruction over random exclusion masks.

    Draws ``n_masks`` variable-density masks at the given exclusion rate,
    reconstructs each (k-space pre-masked, same mask in the DC weighting) and
    averages.  With ``paired=True`` masks are drawn as complementary pairs,
    a balanced variant that keeps the per-line average of the masks tightly
    near ``1 - rate`` while preserving the per-mask exclusion count at
    rate 0.5; ``paired=False`` draws every mask independently.

    Returns ``(mean_image, mean_mask)``.
    """
    if n_masks < 1:
        raise ValueError("need at least one mask")
    y = _as_array(y, "data")
    masks = []
    for j in range(n_masks):
        if paired and j % 2 == 1:
            masks.append(1.0 - masks[-1])
        else:
            masks.append(variable_density_mask(y.shape[-2], rate, seed + j, center_strength))
    acc = np.zeros(y.shape[1:], dtype=complex)
    for mask in masks:
        acc += unrolled_reconstruct(apply_mask(y, mask), mask, coils, cfg)
    return acc / n_masks, np.mean(masks, axis=0)
