"""Synthetic multi-slice ground truth: quantitative maps, labels, coils, echoes.

Slices are concentric smooth shapes (head ellipse, cortical gray-matter ring,
white-matter interior, two ventricle-like CSF pockets) so every test is
deterministic and the true per-voxel decay parameters are known exactly.
Echo images follow a mono-exponential magnitude decay with a fixed smooth
phase that is constant across echoes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

LABEL_BACKGROUND = 0
LABEL_GM = 1
LABEL_WM = 2
LABEL_CSF = 3

T2STAR_MS = {LABEL_GM: 60.0, LABEL_WM: 50.0, LABEL_CSF: 200.0}
S0_AU = {LABEL_GM: 85.0, LABEL_WM: 70.0, LABEL_CSF: 100.0}

# Mean squared finite-difference bound for "spatially smooth" coil profiles.
COIL_SMOOTHNESS_BOUND = 1e-3


@dataclass(frozen=True)
class PhantomSpec:
    """Geometry and tissue parameters for :func:`make_phantom`.

    ``height`` is the phase-encode dimension (92 lines by default, matching
    the exclusion-mask length); ``width`` is free.  ``csf_fraction`` scales
    the ventricle size (0 removes CSF entirely).  ``variation`` is the
    relative amplitude of the smooth spatial modulation of T2* and s0.
    """

    height: int = 92
    width: int = 64
    n_slices: int = 6
    csf_fraction: float = 1.0
    variation: float = 0.08

    def __post_init__(self) -> None:
        if self.height < 32 or self.width < 32:
            raise ValueError(f"grid must be at least 32x32, got {self.height}x{self.width}")
        if self.n_slices < 4:
            raise ValueError(f"need at least 4 slices, got {self.n_slices}")
        if not 0.0 <= self.csf_fraction <= 2.0:
            raise ValueError("csf_fraction must be in [0, 2]")
        if not 0.0 <= self.variation <= 0.10:
            raise ValueError("variation must be in [0, 0.10]")


@dataclass(frozen=True)
class PhantomVolume:
    """Ground-truth volume: T2*/s0 maps, tissue labels, and brain mask.

    ``brain_mask`` covers gray and white matter only; CSF is excluded so the
    mask matches the region the physics loss and metrics are evaluated in.
    """

    t2star_map: np.ndarray  # (Z, H, W) ms
    s0_map: np.ndarray  # (Z, H, W) arbitrary units
    tissue_labels: np.ndarray  # (Z, H, W) uint8
    brain_mask: np.ndarray  # (Z, H, W) bool
    phase_map: np.ndarray  # (Z, H, W) radians, echo-independent

    def __post_init__(self) -> None:
        labels = self.tissue_labels
        if self.t2star_map.shape != labels.shape or self.s0_map.shape != labels.shape:
            raise ValueError("map shapes differ")
        inside = self.brain_mask
        if np.any(self.t2star_map[inside] <= 0):
            raise ValueError("T2* must be positive inside the brain mask")
        if np.any((self.t2star_map == 0) & (labels != LABEL_BACKGROUND)):
            raise ValueError("zero T2* is only allowed in background")
        if np.any(self.s0_map < 0):
            raise ValueError("s0 must be non-negative")
        tissue_ok = (labels == LABEL_GM) | (labels == LABEL_WM)
        if np.any(inside & ~tissue_ok):
            raise ValueError("brain mask must contain only GM/WM voxels")

    @property
    def slice_count(self) -> int:
        return self.t2star_map.shape[0]

    @property
    def grid(self) -> tuple[int, int]:
        return self.t2star_map.shape[1], self.t2star_map.shape[2]


@dataclass(frozen=True)
class CoilMaps:
    """Complex coil sensitivities ``(C, H, W)``, root-sum-of-squares one."""

    maps: np.ndarray

    def __post_init__(self) -> None:
        maps = np.asarray(self.maps, dtype=complex)
        object.__setattr__(self, "maps", maps)
        if maps.ndim != 3:
            raise ValueError("coil maps must be (C, H, W)")
        rss = np.sqrt(np.sum(np.abs(maps) ** 2, axis=0))
        if np.max(np.abs(rss - 1.0)) > 1e-6:
            raise ValueError("coil maps must be RSS-normalized to 1")

    @property
    def n_coils(self) -> int:
        return self.maps.shape[0]


@dataclass(frozen=True)
class EchoSeries:
    """Complex image stack over echoes for one slice, ``(E, H, W)``."""

    data: np.ndarray
    echo_times: np.ndarray  # ms

    def __post_init__(self) -> None:
        data = np.asarray(self.data, dtype=complex)
        te = np.asarray(self.echo_times, dtype=float)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "echo_times", te)
        if data.ndim != 3:
            raise ValueError("echo data must be (E, H, W)")
        if te.ndim != 1 or te.size != data.shape[0]:
            raise ValueError("echo_times length must match the echo dimension")
        if te.size < 3:
            raise ValueError("need at least 3 echoes")
        if np.any(np.diff(te) <= 0) or te[0] <= 0:
            raise ValueError("echo times must be positive and strictly increasing")

    @property
    def n_echoes(self) -> int:
        return self.data.shape[0]


def _normalized_grid(h: int, w: int) -> tuple[np.ndarray, np.ndarray]:
    yy = np.linspace(-1.0, 1.0, h)[:, None]
    xx = np.linspace(-1.0, 1.0, w)[None, :]
    return yy, xx


def _smooth_field(rng: np.random.Generator, n_slices: int, h: int, w: int, n_modes: int = 4) -> np.ndarray:
    """Random low-frequency field in [-1, 1], smooth in-plane and through-plane."""
    yy, xx = _normalized_grid(h, w)
    zz = np.arange(n_slices)[:, None, None] / max(n_slices - 1, 1)
    amp = rng.uniform(0.5, 1.0, n_modes)
    amp /= amp.sum()
    fy = rng.uniform(0.4, 1.2, n_modes)
    fx = rng.uniform(0.4, 1.2, n_modes)
    fz = rng.uniform(0.0, 0.8, n_modes)
    phase = rng.uniform(0.0, 2 * np.pi, n_modes)
    field = np.zeros((n_slices, h, w))
    for k in range(n_modes):
        field += amp[k] * np.cos(2 * np.pi * (fy[k] * yy + fx[k] * xx + fz[k] * zz) + phase[k])
    return field


def _slice_labels(spec: PhantomSpec, z: int) -> np.ndarray:
    yy, xx = _normalized_grid(spec.height, spec.width)
    # head outline shrinks smoothly toward the end slices
    scale = 0.75 + 0.25 * np.sin(np.pi * (z + 0.5) / spec.n_slices)
    r = np.sqrt((yy / (0.82 * scale)) ** 2 + (xx / (0.72 * scale)) ** 2)
    labels = np.full((spec.height, spec.width), LABEL_BACKGROUND, dtype=np.uint8)
    labels[r <= 1.0] = LABEL_GM
    labels[r <= 0.78] = LABEL_WM
    if spec.csf_fraction > 0:
        g = spec.csf_fraction
        for side in (-1.0, 1.0):
            vent = ((yy + 0.06) / (0.24 * g * scale)) ** 2 + ((xx - side * 0.16) / (0.09 * g * scale)) ** 2
            labels[(vent <= 1.0) & (r <= 0.78)] = LABEL_CSF
    return labels


def make_phantom(spec: PhantomSpec, seed: int) -> PhantomVolume:
    """Generate the deterministic ground-truth volume for ``(spec, seed)``.

    Tissue values (GM 60 ms / WM 50 ms / CSF 200 ms) are modulated by a
    smooth random field of relative amplitude ``spec.variation``; the phase
    map is a fixed low-order polynomial, constant across echoes.
    """
    rng = np.random.default_rng(seed)
    labels = np.stack([_slice_labels(spec, z) for z in range(spec.n_slices)])
    t2_field = _smooth_field(rng, spec.n_slices, spec.height, spec.width)
    s0_field = _smooth_field(rng, spec.n_slices, spec.height, spec.width)

    t2_base = np.zeros_like(t2_field)
    s0_base = np.zeros_like(s0_field)
    for label, t2 in T2STAR_MS.items():
        t2_base[labels == label] = t2
        s0_base[labels == label] = S0_AU[label]
    tissue = labels != LABEL_BACKGROUND
    t2star = np.where(tissue, t2_base * (1.0 + spec.variation * t2_field), 0.0)
    s0 = np.where(tissue, s0_base * (1.0 + 0.05 * s0_field), 0.0)

    yy, xx = _normalized_grid(spec.height, spec.width)
    zz = np.arange(spec.n_slices)[:, None, None] / spec.n_slices
    phase = 0.3 + 1.1 * yy + 0.7 * xx + 0.4 * yy * xx + 0.2 * zz
    brain = (labels == LABEL_GM) | (labels == LABEL_WM)
    return PhantomVolume(
        t2star_map=t2star,
        s0_map=s0,
        tissue_labels=labels,
        brain_mask=brain,
        phase_map=np.broadcast_to(phase, labels.shape).copy(),
    )


def synthesize_echoes(vol: PhantomVolume, echo_times, slice_index: int) -> EchoSeries:
    """Noise-free complex echo images for one slice.

    Magnitudes follow ``s0 * exp(-t_e / T2*)`` for every tissue voxel;
    background voxels are zero; the per-voxel phase is the volume's fixed
    phase map, independent of echo time.
    """
    te = np.asarray(echo_times, dtype=float)
    if np.any(te <= 0) or np.any(np.diff(te) <= 0):
        raise ValueError("echo times must be positive and strictly increasing")
    t2 = vol.t2star_map[slice_index]
    s0 = vol.s0_map[slice_index]
    tissue = vol.tissue_labels[slice_index] != LABEL_BACKGROUND
    with np.errstate(divide="ignore", invalid="ignore"):
        decay = np.exp(-te[:, None, None] / np.where(tissue, t2, np.inf)[None])
    mag = s0[None] * np.where(tissue[None], decay, 0.0)
    carrier = np.exp(1j * vol.phase_map[slice_index])
    return EchoSeries(data=mag * carrier[None], echo_times=te)


def make_coil_maps(n_coils: int, grid: tuple[int, int], seed: int) -> CoilMaps:
    """Smooth complex sensitivities, RSS-normalized to one everywhere.

    Each coil is a broad Gaussian lobe centered outside the field of view
    with a gentle linear phase ramp.  A single coil normalizes to the
    constant map 1 (the canonical phase choice).
    """
    if n_coils < 1:
        raise ValueError("need at least one coil")
    h, w = grid
    if n_coils == 1:
        return CoilMaps(maps=np.ones((1, h, w), dtype=complex))
    rng = np.random.default_rng(seed)
    yy, xx = _normalized_grid(h, w)
    maps = np.empty((n_coils, h, w), dtype=complex)
    for c in range(n_coils):
        angle = 2 * np.pi * c / n_coils + rng.uniform(-0.15, 0.15)
        cy, cx = 1.25 * np.sin(angle), 1.25 * np.cos(angle)
        dist2 = (yy - cy) ** 2 + (xx - cx) ** 2
        profile = np.exp(-dist2 / (2 * 0.85**2)) + 0.08
        ramp = rng.uniform(-0.8, 0.8, size=2)
        phase = ramp[0] * yy + ramp[1] * xx + rng.uniform(0, 2 * np.pi)
        maps[c] = profile * np.exp(1j * phase)
    rss = np.sqrt(np.sum(np.abs(maps) ** 2, axis=0))
    return CoilMaps(maps=maps / rss)


def smoothness_energy(maps: np.ndarray) -> float:
    """Mean squared forward-difference of complex maps over both in-plane axes."""
    maps = np.asarray(maps)
    dy = np.abs(np.diff(maps, axis=-2)) ** 2
    dx = np.abs(np.diff(maps, axis=-1)) ** 2
    return float(dy.mean() + dx.mean())
