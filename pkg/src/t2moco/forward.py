"""Line-wise Cartesian acquisition model for multicoil, multi-echo 2D k-space.

The forward model applies a piecewise-constant rigid transform per time point,
weights by coil sensitivities, Fourier-transforms, and copies each acquired
phase-encode line from the k-space of the state it was acquired in.  The
reconstruction-side operator deliberately knows nothing about the motion:
it is the motion-free chain (coils -> centered unitary FFT -> line weighting),
and its adjoint.

Conventions
-----------
* Arrays are ``(H, W)`` per 2D image, ``(E, H, W)`` per echo stack and
  ``(C, E, H, W)`` per multicoil k-space.  Rows (axis -2) are phase-encode
  lines ``ky``; columns are readout ``kx``.
* The FFT is centered and unitary (``norm="ortho"`` with fftshift on both
  sides), so DC sits at row ``H // 2`` and the adjoint is the inverse.
* Positive rotation angles turn the image counterclockwise (as displayed
  with row 0 on top, i.e. ``apply_rigid(img, 90deg) == np.rot90(img)``).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft as _fft
from scipy.ndimage import map_coordinates

ROTATION_LIMIT_DEG = 45.0
TRANSLATION_LIMIT = 23.0  # quarter of the default 92-line grid


def _workers(arr: np.ndarray) -> int:
    # threading pays off only for large batches; results are identical either way
    return -1 if arr.size >= (1 << 16) else 1


_CHECKERBOARDS: dict[tuple, np.ndarray] = {}


def _checkerboard(h: int, w: int, dtype) -> np.ndarray:
    """(-1)**(row+col) sign pattern; DC-centering mask for even grids."""
    key = (h, w, np.dtype(dtype).str)
    if key not in _CHECKERBOARDS:
        rows = 1.0 - 2.0 * (np.arange(h) % 2)
        cols = 1.0 - 2.0 * (np.arange(w) % 2)
        _CHECKERBOARDS[key] = (rows[:, None] * cols[None, :]).astype(dtype)
    return _CHECKERBOARDS[key]


def _real_dtype(arr: np.ndarray):
    return arr.real.dtype if arr.dtype.kind == "c" else np.asarray(arr).dtype


def fft2c(img: np.ndarray) -> np.ndarray:
    """Centered unitary 2D FFT over the trailing two axes.

    For even grid sizes the fftshift pair is folded into exact sign flips,
    which is cheaper than rolling the array."""
    h, w = img.shape[-2:]
    if h % 2 == 0 and w % 2 == 0:
        cb = _checkerboard(h, w, _real_dtype(img))
        return cb * _fft.fft2(cb * img, axes=(-2, -1), norm="ortho", workers=_workers(img))
    shifted = np.fft.ifftshift(img, axes=(-2, -1))
    ksp = _fft.fft2(shifted, axes=(-2, -1), norm="ortho", workers=_workers(shifted))
    return np.fft.fftshift(ksp, axes=(-2, -1))


def ifft2c(ksp: np.ndarray) -> np.ndarray:
    """Inverse of :func:`fft2c`."""
    h, w = ksp.shape[-2:]
    if h % 2 == 0 and w % 2 == 0:
        cb = _checkerboard(h, w, _real_dtype(ksp))
        return cb * _fft.ifft2(cb * ksp, axes=(-2, -1), norm="ortho", workers=_workers(ksp))
    shifted = np.fft.ifftshift(ksp, axes=(-2, -1))
    img = _fft.ifft2(shifted, axes=(-2, -1), norm="ortho", workers=_workers(shifted))
    return np.fft.fftshift(img, axes=(-2, -1))


@dataclass(frozen=True)
class RigidState:
    """In-plane rigid pose: rotation about the slice normal plus translation.

    rotation_deg
        Counterclockwise rotation in degrees.
    dx, dy
        Translation in voxels along columns / rows.

    Simulation trajectories enforce the sanity bounds |rotation| <= 45 deg
    and |dx|, |dy| <= 23 voxels (see :func:`make_trajectory`); the transform
    itself accepts any pose.
    """

    rotation_deg: float = 0.0
    dx: float = 0.0
    dy: float = 0.0

    def validate_bounds(self) -> None:
        if abs(self.rotation_deg) > ROTATION_LIMIT_DEG:
            raise ValueError(f"|rotation| must be <= {ROTATION_LIMIT_DEG} deg, got {self.rotation_deg}")
        if abs(self.dx) > TRANSLATION_LIMIT or abs(self.dy) > TRANSLATION_LIMIT:
            raise ValueError(f"|dx|, |dy| must be <= {TRANSLATION_LIMIT} voxels, got ({self.dx}, {self.dy})")

    @property
    def is_identity(self) -> bool:
        return self.rotation_deg == 0.0 and self.dx == 0.0 and self.dy == 0.0


IDENTITY_STATE = RigidState()


@dataclass(frozen=True)
class MotionTrajectory:
    """Piecewise-constant rigid states assigned to acquired phase-encode lines.

    states
        One :class:`RigidState` per time point; index 0 is the reference
        (identity) state by construction in :func:`make_trajectory`.
    line_assignment
        Integer array of length ``n_lines`` mapping each phase-encode line
        to the time point it was acquired in.
    """

    states: tuple[RigidState, ...]
    line_assignment: np.ndarray

    def __post_init__(self) -> None:
        assign = np.asarray(self.line_assignment, dtype=int)
        object.__setattr__(self, "line_assignment", assign)
        if assign.ndim != 1 or assign.size == 0:
            raise ValueError("line_assignment must be a non-empty 1D array")
        if len(self.states) > assign.size:
            raise ValueError("more time points than acquired lines")
        owned = np.bincount(assign, minlength=len(self.states))
        if assign.min() < 0 or assign.max() >= len(self.states):
            raise ValueError("line_assignment refers to missing states")
        if np.any(owned == 0):
            raise ValueError("every time point must own at least one line")

    @property
    def n_lines(self) -> int:
        return self.line_assignment.size

    @property
    def n_states(self) -> int:
        return len(self.states)


@dataclass(frozen=True)
class KSpaceData:
    """Multicoil, multi-echo Cartesian k-space for one slice, ``(C, E, H, W)``."""

    data: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.data)
        if arr.ndim != 4:
            raise ValueError(f"k-space must be (C, E, H, W), got shape {arr.shape}")
        object.__setattr__(self, "data", np.ascontiguousarray(arr, dtype=complex))

    @property
    def n_coils(self) -> int:
        return self.data.shape[0]

    @property
    def n_echoes(self) -> int:
        return self.data.shape[1]

    @property
    def grid(self) -> tuple[int, int]:
        return self.data.shape[2], self.data.shape[3]


@dataclass(frozen=True)
class ExclusionMask:
    """Per-line keep weights in [0, 1]; 1 keeps a phase-encode line, 0 excludes it."""

    weights: np.ndarray

    def __post_init__(self) -> None:
        w = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "weights", w)
        if w.ndim != 1:
            raise ValueError("mask weights must be 1D")
        if np.any(w < 0.0) or np.any(w > 1.0):
            raise ValueError("mask weights must lie in [0, 1]")

    @property
    def n_lines(self) -> int:
        return self.weights.size


def _as_array(x, attr: str) -> np.ndarray:
    """Accept a container with ``attr`` (data/weights) or a plain array."""
    return np.asarray(getattr(x, attr, x))


def make_trajectory(events, n_lines: int, order: str = "linear") -> MotionTrajectory:
    """Build a trajectory from motion events on acquisition-position ranges.

    Parameters
    ----------
    events
        Sequence of ``(line_range, RigidState)`` where ``line_range`` is a
        ``range`` or ``(start, stop)`` half-open pair of acquisition
        positions.  Positions outside every event stay in the reference
        (identity) state.
    n_lines
        Number of acquired phase-encode lines.
    order
        Sampling order mapping acquisition position to line index:
        ``"linear"`` (ascending, default) or ``"centric"`` (center-out).

    With the default linear order, acquisition positions coincide with
    phase-encode line indices.
    """
    positions = _sampling_order(order, n_lines)
    assignment = np.zeros(n_lines, dtype=int)
    states: list[RigidState] = [IDENTITY_STATE]
    claimed = np.zeros(n_lines, dtype=bool)
    for line_range, state in events:
        if isinstance(line_range, range):
            start, stop = line_range.start, line_range.stop
        else:
            start, stop = line_range
        if not (0 <= start < stop <= n_lines):
            raise ValueError(f"event range [{start}, {stop}) outside [0, {n_lines})")
        span = slice(start, stop)
        if claimed[span].any():
            raise ValueError(f"event range [{start}, {stop}) overlaps an earlier event")
        claimed[span] = True
        state = state if isinstance(state, RigidState) else RigidState(*state)
        state.validate_bounds()
        states.append(state)
        assignment[positions[span]] = len(states) - 1
    if claimed.all():
        raise ValueError("events cover every line; no reference (identity) line remains")
    return MotionTrajectory(states=tuple(states), line_assignment=assignment)


def _sampling_order(order: str, n_lines: int) -> np.ndarray:
    if order == "linear":
        return np.arange(n_lines)
    if order == "centric":
        # center-out: H//2, H//2 - 1, H//2 + 1, ...
        center = n_lines // 2
        offsets = np.arange(n_lines)
        signed = np.where(offsets % 2 == 0, -(offsets + 1) // 2, (offsets + 1) // 2)
        lines = center + signed
        if n_lines % 2 == 0:
            lines = np.clip(lines, 0, n_lines - 1)
        assert len(np.unique(lines)) == n_lines
        return lines
    raise ValueError(f"unknown sampling order {order!r}")


def apply_rigid(img: np.ndarray, state: RigidState) -> np.ndarray:
    """Rotate then translate a complex 2D image with bilinear interpolation.

    Rotation is about the grid center ``((H-1)/2, (W-1)/2)``; samples falling
    outside the grid are zero.  The identity state returns the input values
    bit-exactly.
    """
    img = np.asarray(img)
    if state.is_identity:
        return img.copy()
    h, w = img.shape
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    yy, xx = np.meshgrid(np.arange(h, dtype=float), np.arange(w, dtype=float), indexing="ij")
    dy_grid = yy - state.dy - cy
    dx_grid = xx - state.dx - cx
    theta = np.deg2rad(state.rotation_deg)
    cos_t, sin_t = np.cos(theta), np.sin(theta)
    src_y = cos_t * dy_grid + sin_t * dx_grid + cy
    src_x = -sin_t * dy_grid + cos_t * dx_grid + cx
    coords = np.stack([src_y, src_x])
    if np.iscomplexobj(img):
        real = map_coordinates(img.real, coords, order=1, mode="constant", cval=0.0)
        imag = map_coordinates(img.imag, coords, order=1, mode="constant", cval=0.0)
        return real + 1j * imag
    return map_coordinates(img, coords, order=1, mode="constant", cval=0.0)


def sense_forward(x, coils) -> np.ndarray:
    """Motion-free acquisition ``F C x``: coil-weighted centered unitary FFT.

    ``x`` is ``(E, H, W)`` (a single ``(H, W)`` image is promoted), ``coils``
    is ``(C, H, W)``; returns ``(C, E, H, W)`` k-space.
    """
    x = _as_array(x, "data")
    coils = _as_array(coils, "maps")
    if x.ndim == 2:
        x = x[None]
    return fft2c(coils[:, None, :, :] * x[None, :, :, :])


def forward_model(x, coils, traj: MotionTrajectory) -> np.ndarray:
    """Motion-corrupted acquisition: per-state transform, coil FFT, line copy.

    Each phase-encode line of the output is written exactly once, from the
    k-space of the state it is assigned to; the same trajectory applies to
    every echo (all echoes of a line share one excitation).
    Returns ``(C, E, H, W)``.
    """
    x = _as_array(x, "data")
    coils = _as_array(coils, "maps")
    if x.ndim == 2:
        x = x[None]
    n_echoes, h, w = x.shape
    if traj.n_lines != h:
        raise ValueError(f"trajectory has {traj.n_lines} lines but image has {h} rows")
    if coils.shape[-2:] != (h, w):
        raise ValueError("coil maps and image grids differ")
    out = np.zeros((coils.shape[0], n_echoes, h, w), dtype=complex)
    for t, state in enumerate(traj.states):
        lines = np.flatnonzero(traj.line_assignment == t)
        if lines.size == 0:
            continue
        if state.is_identity:
            moved = x
        else:
            moved = np.stack([apply_rigid(x[e], state) for e in range(n_echoes)])
        ksp_t = sense_forward(moved, coils)
        out[:, :, lines, :] = ksp_t[:, :, lines, :]
    return out


def adjoint(y, coils, weights=None) -> np.ndarray:
    """Adjoint of the weighted motion-free operator: ``C^H F^{-1} (W y)``.

    ``weights`` scales each phase-encode line (None means all ones); the
    reconstruction side never sees the motion transforms.  Returns
    ``(E, H, W)``.
    """
    y = _as_array(y, "data")
    coils = _as_array(coils, "maps")
    if y.ndim == 3:
        y = y[None]
    if weights is not None:
        y = apply_mask(y, weights)
    img = ifft2c(y)
    return np.sum(np.conj(coils)[:, None, :, :] * img, axis=0)


def apply_mask(y, mask) -> np.ndarray:
    """Scale each phase-encode line (axis -2) by its mask weight."""
    y = _as_array(y, "data")
    w = _as_array(mask, "weights").astype(float)
    if w.ndim != 1 or w.size != y.shape[-2]:
        raise ValueError(f"mask length {w.size} does not match {y.shape[-2]} phase-encode lines")
    return y * w[:, None]


def ground_truth_mask(traj: MotionTrajectory) -> np.ndarray:
    """Oracle exclusion mask: 0 where a line's state differs from identity."""
    keep = np.ones(traj.n_lines)
    for t, state in enumerate(traj.states):
        if not state.is_identity:
            keep[traj.line_assignment == t] = 0.0
    return keep


def add_kspace_noise(y, sigma: float, seed: int) -> np.ndarray:
    """Add circular complex Gaussian noise of std ``sigma`` (per complex sample)."""
    y = _as_array(y, "data")
    if sigma == 0.0:
        return y.copy()
    rng = np.random.default_rng(seed)
    scale = sigma / np.sqrt(2.0)
    noise = rng.standard_normal(y.shape) + 1j * rng.standard_normal(y.shape)
    return y + scale * noise
