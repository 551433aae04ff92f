"""Self-supervised per-subject optimization of slice-wise exclusion masks.

A small MLP maps the slice index to a 92-line soft exclusion mask.  Its
parameters are optimized through the full masked-reconstruction -> decay-fit
-> correlation-loss pipeline with a derivative-free gradient estimate
(simultaneous-perturbation central differences, or natural-evolution
sampling) fed to an Adam accumulator.  Masks stay soft throughout; they are
binarized only for reporting.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace

import numpy as np

from .forward import fft2c, ifft2c
from .physloss import LossReport, mask_regularizer, pearson_rho, total_loss
from .quantify import fit_t2star, predict_signal
from .recon import ReconConfig, denoise

MASK_LINES = 92
_LAYER_SIZES = ((1, 3), (3, 23), (23, 46), (46, MASK_LINES))
_INPUT_SCALE = 16.0  # slice indices are a few tens at most
_INIT_KEEP = 0.95


@dataclass
class MaskPredictor:
    """Slice-index -> 92-line soft mask MLP (embed 1->3, hidden 23 and 46).

    All weights and biases live in the flat parameter vector ``theta``;
    hidden layers use the configured nonlinearity, the output is a sigmoid,
    so every mask entry lies strictly in (0, 1).
    """

    theta: np.ndarray
    activation: str = "relu"

    def __post_init__(self) -> None:
        if self.theta.shape != (n_parameters(),):
            raise ValueError(f"theta must have {n_parameters()} entries")
        if self.activation not in ("relu", "tanh"):
            raise ValueError(f"unknown activation {self.activation!r}")

    def layers(self):
        offset = 0
        for fan_in, fan_out in _LAYER_SIZES:
            w = self.theta[offset : offset + fan_in * fan_out].reshape(fan_out, fan_in)
            offset += fan_in * fan_out
            b = self.theta[offset : offset + fan_out]
            offset += fan_out
            yield w, b


def n_parameters() -> int:
    return sum(i * o + o for i, o in _LAYER_SIZES)


def predictor_init(seed: int, activation: str = "relu") -> MaskPredictor:
    """Small random weights; output bias set so initial masks sit near 0.95.

    Starting from "keep everything" lets the loss carve out corrupted lines
    instead of having to recover wrongly excluded ones.
    """
    rng = np.random.default_rng(seed)
    chunks = []
    for i, (fan_in, fan_out) in enumerate(_LAYER_SIZES):
        last = i == len(_LAYER_SIZES) - 1
        w_scale = 0.02 if last else 0.3 / np.sqrt(fan_in)
        chunks.append(rng.normal(0.0, w_scale, fan_in * fan_out))
        bias = np.full(fan_out, _logit(_INIT_KEEP)) if last else np.zeros(fan_out)
        chunks.append(bias)
    return MaskPredictor(theta=np.concatenate(chunks), activation=activation)


def _logit(p: float) -> float:
    return float(np.log(p / (1.0 - p)))


def predictor_forward(predictor: MaskPredictor, z) -> np.ndarray:
    """Soft mask(s) for slice index ``z`` (scalar or array of indices)."""
    x = np.atleast_1d(np.asarray(z, dtype=float))[:, None] / _INPUT_SCALE
    act = np.tanh if predictor.activation == "tanh" else lambda v: np.maximum(v, 0.0)
    for i, (w, b) in enumerate(predictor.layers()):
        x = x @ w.T + b
        if i < len(_LAYER_SIZES) - 1:
            x = act(x)
    out = 1.0 / (1.0 + np.exp(-x))
    return out[0] if np.isscalar(z) or np.ndim(z) == 0 else out


def binarize_mask(mask, threshold: float = 0.5) -> np.ndarray:
    """Map weights to {0, 1}; entries exactly at the threshold are kept."""
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must lie in (0, 1)")
    w = np.asarray(getattr(mask, "weights", mask), dtype=float)
    return (w >= threshold).astype(float)


@dataclass(frozen=True)
class Subject:
    """One synthetic subject as seen by the detector.

    ``kspace`` is ``(Z, C, E, H, W)``; ``region`` the per-slice brain mask
    (CSF excluded) the physics loss is averaged in.
    """

    kspace: np.ndarray
    coils: np.ndarray
    echo_times: np.ndarray
    region: np.ndarray

    def __post_init__(self) -> None:
        if self.kspace.ndim != 5:
            raise ValueError("kspace must be (Z, C, E, H, W)")
        if self.region.shape != (self.kspace.shape[0],) + self.kspace.shape[-2:]:
            raise ValueError("region must be (Z, H, W)")

    @property
    def n_slices(self) -> int:
        return self.kspace.shape[0]

    @property
    def n_lines(self) -> int:
        return self.kspace.shape[-2]


@dataclass(frozen=True)
class DetectorConfig:
    """Optimization settings for the mask detector.

    ``optimizer`` selects the gradient estimator: ``fd_adam`` uses central
    finite differences along random simultaneous sign perturbations
    (``fd_samples`` averaged pairs of step ``fd_epsilon``); ``nes`` uses
    antithetic Gaussian sampling (``population`` pairs of scale ``sigma``).
    Both feed an Adam update.  ``monitor`` chooses the early-stopping
    quantity: the combined loss (default) or the literal regularizer.
    """

    lam: float = 0.1
    batch_slices: int = 4
    patience: int = 50
    max_epochs: int = 600
    optimizer: str = "fd_adam"
    fd_epsilon: float = 0.02
    fd_samples: int = 4
    population: int = 8
    sigma: float = 0.05
    lr: float = 0.05
    seed: int = 0
    monitor: str = "total"
    activation: str = "relu"
    min_delta: float = 1e-3  # relative improvement that resets patience

    def __post_init__(self) -> None:
        if self.patience < 1:
            raise ValueError("patience must be at least 1")
        if self.batch_slices < 2:
            raise ValueError("batch_slices must be at least 2")
        if self.optimizer not in ("fd_adam", "nes"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.monitor not in ("total", "reg"):
            raise ValueError(f"unknown monitor {self.monitor!r}")


@dataclass(frozen=True)
class TraceRow:
    epoch: int
    l_phys: float
    l_reg: float
    total: float
    wall_time: float


def evaluate_masks(masks, subject: Subject, rcfg: ReconConfig, lam: float = 0.1,
                   slice_indices=None) -> LossReport:
    """Run mask -> reconstruction -> fit -> decay-consistency per slice.

    ``masks`` is ``(Z, H)`` aligned with ``slice_indices`` (all slices when
    omitted).  The physics term is the mean per-slice loss; the regularizer
    compares masks of slices two apart.  All slices are processed as one
    batch; the result equals the slice-by-slice composition of the public
    operators.
    """
    masks = np.atleast_2d(np.asarray(masks, dtype=float))
    if slice_indices is None:
        slice_indices = np.arange(subject.n_slices)
    slice_indices = np.asarray(slice_indices, dtype=int)
    if masks.shape[0] != slice_indices.size:
        raise ValueError("one mask per requested slice expected")
    phys = float(np.mean(_batched_physics_loss(masks, subject, slice_indices, rcfg)))
    reg = mask_regularizer(masks, slice_indices)
    report = total_loss(phys, reg, lam)
    if not np.isfinite(report.total):
        raise FloatingPointError("non-finite detector loss; check the pipeline configuration")
    return report


def _batched_forward(x: np.ndarray, coils: np.ndarray) -> np.ndarray:
    # (B, E, H, W) -> (B, C, E, H, W)
    return fft2c(coils[None, :, None] * x[:, None])


def _batched_adjoint(k: np.ndarray, coils: np.ndarray) -> np.ndarray:
    # (B, C, E, H, W) -> (B, E, H, W)
    return np.sum(np.conj(coils)[None, :, None] * ifft2c(k), axis=1)


def _batched_physics_loss(masks, subject: Subject, slice_indices, rcfg: ReconConfig) -> np.ndarray:
    """Per-slice decay-consistency losses for a batch of masks.

    The reconstruction runs in the k-space dtype (complex64 input stays in
    single precision, which is plenty for the loss and twice as fast); the
    decay fit itself always runs in double precision.
    """
    coils = subject.coils
    w = masks[:, None, None, :, None].astype(subject.kspace.real.dtype)
    y = subject.kspace[slice_indices] * w
    if rcfg.init == "adjoint":
        x = _batched_adjoint(w * y, coils)
    else:
        x = np.zeros(y.shape[:1] + y.shape[2:], dtype=y.dtype)
    step = np.asarray(rcfg.dc_step_size, dtype=subject.kspace.real.dtype)
    for _ in range(rcfg.n_unrolled):
        x = _batched_denoise(x, rcfg)
        x = x - step * _batched_adjoint(w * (_batched_forward(x, coils) - y), coils)
    mag = np.moveaxis(np.abs(x).astype(float), 0, 1)  # (E, B, H, W)
    region = subject.region[slice_indices]
    maps = fit_t2star(mag, subject.echo_times, region)
    fitted = predict_signal(maps, subject.echo_times)
    rho = pearson_rho(mag, fitted)
    return np.array([np.mean(1.0 - rho[b][region[b]]) for b in range(masks.shape[0])])


def _batched_denoise(x: np.ndarray, rcfg: ReconConfig) -> np.ndarray:
    # identity and tikhonov broadcast over leading axes as-is
    return denoise(x.reshape((-1,) + x.shape[-2:]), rcfg.denoiser).reshape(x.shape)


def optimize_masks(subject: Subject, dcfg: DetectorConfig, rcfg: ReconConfig):
    """Optimize the mask predictor for one subject (early-stopped Adam loop).

    Each epoch samples ``batch_slices`` slices (always containing at least
    one ``(z, z+2)`` pair, so the regularizer is defined), estimates a
    derivative-free gradient of the batch loss and applies an Adam update.
    The full-subject loss is traced every epoch; the returned masks are the
    best-so-far snapshot, not the final iterate.

    Returns ``(masks (Z, H), trace list[TraceRow])``.
    """
    if subject.n_slices < 4:
        raise ValueError("need at least 4 slices")
    if subject.n_lines != MASK_LINES:
        raise ValueError(f"the mask predictor emits {MASK_LINES} lines, got {subject.n_lines}")
    rng = np.random.default_rng(dcfg.seed)
    predictor = predictor_init(dcfg.seed, dcfg.activation)
    theta = predictor.theta.copy()
    all_slices = np.arange(subject.n_slices)

    def batch_loss(vec: np.ndarray, batch: np.ndarray) -> float:
        masks = predictor_forward(replace(predictor, theta=vec), batch)
        return evaluate_masks(masks, subject, rcfg, dcfg.lam, batch).total

    def full_report(vec: np.ndarray) -> LossReport:
        masks = predictor_forward(replace(predictor, theta=vec), all_slices)
        return evaluate_masks(masks, subject, rcfg, dcfg.lam)

    adam_m = np.zeros_like(theta)
    adam_v = np.zeros_like(theta)
    trace: list[TraceRow] = []
    best_total = np.inf
    best_monitored = np.inf
    best_theta = theta.copy()
    stall = 0
    start = time.perf_counter()

    # heavy first-moment smoothing: with sign perturbations the per-epoch
    # gradient magnitude is shared across coordinates, so Adam acts as a
    # sign-consistency vote and beta1 controls the random walk of flat ones
    beta1, beta2 = 0.97, 0.999
    for epoch in range(dcfg.max_epochs):
        batch = _sample_batch(rng, subject.n_slices, dcfg.batch_slices)
        grad = _estimate_gradient(batch_loss, theta, batch, dcfg, rng)
        adam_m = beta1 * adam_m + (1.0 - beta1) * grad
        adam_v = beta2 * adam_v + (1.0 - beta2) * grad**2
        m_hat = adam_m / (1.0 - beta1 ** (epoch + 1))
        v_hat = adam_v / (1.0 - beta2 ** (epoch + 1))
        theta = theta - dcfg.lr * m_hat / (np.sqrt(v_hat) + 1e-8)

        report = full_report(theta)
        trace.append(TraceRow(epoch, report.l_phys, report.l_reg, report.total,
                              time.perf_counter() - start))
        if report.total < best_total:
            best_total = report.total
            best_theta = theta.copy()
        monitored = report.l_reg if dcfg.monitor == "reg" else report.total
        if monitored < best_monitored * (1.0 - dcfg.min_delta):
            best_monitored = monitored
            stall = 0
        else:
            stall += 1
        if stall >= dcfg.patience:
            break

    masks = predictor_forward(replace(predictor, theta=best_theta), all_slices)
    return masks, trace


def _sample_batch(rng: np.random.Generator, n_slices: int, batch: int) -> np.ndarray:
    batch = min(batch, n_slices)
    if batch >= n_slices:
        return np.arange(n_slices)
    anchor = int(rng.integers(0, n_slices - 2))
    chosen = {anchor, anchor + 2}
    remaining = [z for z in range(n_slices) if z not in chosen]
    extra = rng.choice(remaining, size=batch - 2, replace=False)
    return np.sort(np.array(sorted(chosen) + list(extra), dtype=int))


def _estimate_gradient(loss_fn, theta, batch, dcfg: DetectorConfig, rng) -> np.ndarray:
    """Derivative-free gradient estimate on the flat parameter vector.

    ``fd_adam`` draws central-difference pairs along random sign vectors;
    pairs alternate between the output-bias block (per-line weights, where
    the detection signal is concentrated and directional noise must stay
    low) and the full vector, which keeps the slice-conditioning trunk
    learning.  ``nes`` uses antithetic Gaussian perturbations of the full
    vector.
    """
    grad = np.zeros_like(theta)
    n_bias = _LAYER_SIZES[-1][1]
    if dcfg.optimizer == "fd_adam":
        eps = dcfg.fd_epsilon
        for sample in range(dcfg.fd_samples):
            delta = np.zeros_like(theta)
            if sample % 2 == 0:
                delta[-n_bias:] = rng.choice((-1.0, 1.0), size=n_bias)
            else:
                delta = rng.choice((-1.0, 1.0), size=theta.size)
            diff = loss_fn(theta + eps * delta, batch) - loss_fn(theta - eps * delta, batch)
            grad += diff / (2.0 * eps) * delta
        return grad / dcfg.fd_samples
    sigma = dcfg.sigma
    for _ in range(dcfg.population):
        eps_vec = rng.standard_normal(theta.size)
        diff = loss_fn(theta + sigma * eps_vec, batch) - loss_fn(theta - sigma * eps_vec, batch)
        grad += diff / (2.0 * sigma) * eps_vec
    return grad / dcfg.population


def trace_to_rows(trace) -> list[dict]:
    """Trace rows as dictionaries, ready for CSV emission."""
    return [
        {"epoch": r.epoch, "l_phys": r.l_phys, "l_reg": r.l_reg, "total": r.total,
         "wall_time": r.wall_time}
        for r in trace
    ]
