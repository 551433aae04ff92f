"""Figure and image emission: PGM exports plus matplotlib report panels."""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

T2STAR_WINDOW_MS = (0.0, 200.0)


def to_uint8(img: np.ndarray, window: tuple[float, float]) -> np.ndarray:
    """Linear windowing to 8-bit gray."""
    lo, hi = window
    scaled = (np.asarray(img, dtype=float) - lo) / (hi - lo)
    return np.clip(np.round(scaled * 255.0), 0, 255).astype(np.uint8)


def write_pgm(path, img: np.ndarray, window: tuple[float, float]) -> None:
    """Binary (P5) 8-bit PGM with the given linear display window."""
    gray = to_uint8(img, window)
    if gray.ndim != 2:
        raise ValueError("PGM export needs a 2D image")
    header = f"P5\n{gray.shape[1]} {gray.shape[0]}\n255\n".encode("ascii")
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(header)
        fh.write(gray.tobytes(order="C"))
    os.replace(tmp, path)


def mask_strip(masks: np.ndarray, row_height: int = 8, gap: int = 2) -> np.ndarray:
    """Stack per-slice mask rows into a strip image (weights in [0, 1])."""
    masks = np.atleast_2d(masks)
    rows = []
    for z, mask in enumerate(masks):
        rows.append(np.repeat(mask[None, :], row_height, axis=0))
        if z < len(masks) - 1:
            rows.append(np.full((gap, masks.shape[1]), 0.5))
    return np.vstack(rows)


def panel_strip(images, window: tuple[float, float], gap: int = 3) -> np.ndarray:
    """Concatenate same-shape 2D images horizontally with a light divider."""
    parts = []
    for i, img in enumerate(images):
        parts.append(np.asarray(img, dtype=float))
        if i < len(images) - 1:
            parts.append(np.full((img.shape[0], gap), window[1]))
    return np.hstack(parts)


def save_map_panel(path, titled_maps, window=T2STAR_WINDOW_MS, annotations=None) -> None:
    """One row of maps with shared gray window; optional per-map captions."""
    n = len(titled_maps)
    fig, axes = plt.subplots(1, n, figsize=(2.2 * n, 2.8), squeeze=False)
    for i, (title, img) in enumerate(titled_maps):
        ax = axes[0, i]
        ax.imshow(img, cmap="gray", vmin=window[0], vmax=window[1])
        ax.set_title(title, fontsize=9)
        ax.set_axis_off()
        if annotations and annotations[i]:
            ax.text(0.02, 0.02, annotations[i], transform=ax.transAxes, fontsize=7,
                    color="yellow", va="bottom")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_mask_figure(path, titled_masks) -> None:
    """Per-line weights of several masks as step plots, one row per slice set."""
    n = len(titled_masks)
    fig, axes = plt.subplots(n, 1, figsize=(6.5, 1.6 * n), sharex=True, squeeze=False)
    for i, (title, masks) in enumerate(titled_masks):
        ax = axes[i, 0]
        masks = np.atleast_2d(masks)
        for z, mask in enumerate(masks):
            ax.step(np.arange(mask.size), mask, where="mid", lw=1.0, label=f"slice {z}")
        ax.set_ylim(-0.05, 1.05)
        ax.set_ylabel("weight", fontsize=8)
        ax.set_title(title, fontsize=9)
        if masks.shape[0] <= 6:
            ax.legend(fontsize=6, ncol=3, loc="lower right")
    axes[-1, 0].set_xlabel("phase-encode line")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_trace_figure(path, trace_rows) -> None:
    """Loss components of the detector run versus epoch."""
    epochs = [r["epoch"] for r in trace_rows]
    fig, ax = plt.subplots(figsize=(6.0, 3.2))
    ax.plot(epochs, [r["total"] for r in trace_rows], label="total", lw=1.2)
    ax.plot(epochs, [r["l_phys"] for r in trace_rows], label="decay term", lw=1.0)
    ax.plot(epochs, [r["l_reg"] for r in trace_rows], label="slice regularizer", lw=1.0)
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_metric_bars(path, rows) -> None:
    """Grouped bars of metric values by (context, region)."""
    metrics = sorted({r["metric"] for r in rows})
    fig, axes = plt.subplots(1, len(metrics), figsize=(3.4 * len(metrics), 3.0), squeeze=False)
    for i, metric in enumerate(metrics):
        ax = axes[0, i]
        sel = [r for r in rows if r["metric"] == metric]
        labels = [f"{r['context']}\n{r['region']}" for r in sel]
        ax.bar(np.arange(len(sel)), [r["value"] for r in sel], color="steelblue")
        ax.set_xticks(np.arange(len(sel)))
        ax.set_xticklabels(labels, fontsize=6, rotation=45, ha="right")
        ax.set_title(metric, fontsize=9)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
