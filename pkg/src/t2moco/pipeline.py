"""Command implementations: phantom/simulate/reconstruct/fit/detect/orba/
metrics/report, all file-to-file and deterministic for a fixed config.

Every command writes its resolved configuration next to its outputs; array
artifacts use the QMEK container, tables are CSV, and images are 8-bit PGM
plus matplotlib PNG figures on the report path.
"""

from __future__ import annotations

import csv
import os
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import report as rpt
from .config import RunConfig
from .detector import DetectorConfig, Subject, optimize_masks, trace_to_rows
from .forward import add_kspace_noise, apply_mask, forward_model, ground_truth_mask, sense_forward
from .metrics import detection_scores, mae, ssim
from .phantom import (
    LABEL_GM,
    LABEL_WM,
    PhantomSpec,
    make_coil_maps,
    make_phantom,
    synthesize_echoes,
)
from .qmek import read_qmek, write_qmek
from .quantify import fit_t2star
from .recon import DenoiserSpec, ReconConfig, orba_reconstruct, unrolled_reconstruct
from .scenarios import slice_trajectory

FILES = {
    "t2star_truth": "truth_t2star.qmek",
    "s0_truth": "truth_s0.qmek",
    "labels": "labels.qmek",
    "brain_mask": "brain_mask.qmek",
    "coils": "coils.qmek",
    "echo_times": "echo_times.qmek",
    "echoes_clean": "echoes_clean.qmek",
    "kspace_corrupt": "kspace_corrupt.qmek",
    "kspace_clean": "kspace_clean.qmek",
    "mask_oracle": "mask_oracle.qmek",
    "masks_learned": "masks_learned.qmek",
    "mask_orba_mean": "mask_orba_mean.qmek",
    "trace": "detect_trace.csv",
    "metrics": "metrics.csv",
    "report": "report.csv",
}


def artifact(out_dir, name: str) -> Path:
    return Path(out_dir) / FILES[name]


def recon_file(out_dir, tag: str) -> Path:
    return Path(out_dir) / f"recon_{tag}.qmek"


def map_file(out_dir, kind: str, tag: str) -> Path:
    return Path(out_dir) / f"{kind}_{tag}.qmek"


def _write_sidecar(cfg: RunConfig, out_dir, command: str) -> None:
    path = Path(out_dir) / f"{command}.resolved.cfg"
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(cfg.resolved_text())
    os.replace(tmp, path)


def _write_csv(path, fieldnames, rows) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames)
        writer.writeheader()
        writer.writerows(rows)
    os.replace(tmp, path)


def phantom_spec(cfg: RunConfig) -> PhantomSpec:
    return PhantomSpec(
        height=cfg.get("phantom.height"),
        width=cfg.get("phantom.width"),
        n_slices=cfg.get("phantom.slices"),
        csf_fraction=cfg.get("phantom.csf_fraction"),
        variation=cfg.get("phantom.variation"),
    )


def recon_config(cfg: RunConfig) -> ReconConfig:
    denoiser = DenoiserSpec(
        kind=cfg.get("recon.denoiser"),
        lam=cfg.get("recon.lambda_d"),
        inner_iters=cfg.get("recon.tv_iters"),
    )
    return ReconConfig(
        n_unrolled=cfg.get("recon.unrolled"),
        dc_step_size=cfg.get("recon.dc_step"),
        denoiser=denoiser,
        init=cfg.get("recon.init"),
    )


def detector_config(cfg: RunConfig) -> DetectorConfig:
    return DetectorConfig(
        lam=cfg.get("detector.lambda"),
        batch_slices=cfg.get("detector.batch_slices"),
        patience=cfg.get("detector.patience"),
        max_epochs=cfg.get("detector.max_epochs"),
        optimizer=cfg.get("detector.optimizer"),
        fd_epsilon=cfg.get("detector.fd_epsilon"),
        fd_samples=cfg.get("detector.fd_samples"),
        population=cfg.get("detector.population"),
        sigma=cfg.get("detector.sigma"),
        lr=cfg.get("detector.lr"),
        seed=cfg.get("detector.seed"),
        monitor=cfg.get("detector.monitor"),
        min_delta=cfg.get("detector.min_delta"),
        activation=cfg.get("detector.activation"),
    )


def cmd_phantom(cfg: RunConfig, out_dir) -> None:
    """Generate the ground-truth volume, coil maps and clean echo images."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    spec = phantom_spec(cfg)
    vol = make_phantom(spec, cfg.get("phantom.seed"))
    coils = make_coil_maps(cfg.get("coils.count"), vol.grid, cfg.get("coils.seed"))
    te = cfg.echo_times()
    echoes = np.stack([synthesize_echoes(vol, te, z).data for z in range(vol.slice_count)])
    write_qmek(artifact(out_dir, "t2star_truth"), vol.t2star_map)
    write_qmek(artifact(out_dir, "s0_truth"), vol.s0_map)
    write_qmek(artifact(out_dir, "labels"), vol.tissue_labels)
    write_qmek(artifact(out_dir, "brain_mask"), vol.brain_mask)
    write_qmek(artifact(out_dir, "coils"), coils.maps)
    write_qmek(artifact(out_dir, "echo_times"), te)
    write_qmek(artifact(out_dir, "echoes_clean"), echoes)
    _write_sidecar(cfg, out_dir, "phantom")


def cmd_simulate(cfg: RunConfig, out_dir) -> None:
    """Apply the motion forward model per slice; write corrupted and clean
    k-space plus the oracle exclusion mask."""
    out_dir = Path(out_dir)
    echoes = read_qmek(artifact(out_dir, "echoes_clean")).astype(complex)
    coils = read_qmek(artifact(out_dir, "coils")).astype(complex)
    events = cfg.events()
    order = cfg.get("trajectory.order")
    n_slices, _, h, _ = echoes.shape
    corrupt, clean, oracle = [], [], []
    for z in range(n_slices):
        traj = slice_trajectory(events, z, h, order)
        corrupt.append(forward_model(echoes[z], coils, traj))
        clean.append(sense_forward(echoes[z], coils))
        oracle.append(ground_truth_mask(traj))
    corrupt = np.stack(corrupt)
    sigma = cfg.get("noise.sigma")
    if sigma > 0:
        corrupt = add_kspace_noise(corrupt, sigma, cfg.get("noise.seed"))
    write_qmek(artifact(out_dir, "kspace_corrupt"), corrupt)
    write_qmek(artifact(out_dir, "kspace_clean"), np.stack(clean))
    write_qmek(artifact(out_dir, "mask_oracle"), np.stack(oracle))
    _write_sidecar(cfg, out_dir, "simulate")


def _load_masks(cfg: RunConfig, out_dir, mask_source: str, mask_file, n_slices: int, n_lines: int) -> np.ndarray:
    if mask_source == "all-ones":
        return np.ones((n_slices, n_lines))
    if mask_source == "oracle":
        return read_qmek(artifact(out_dir, "mask_oracle")).astype(float)
    if mask_source == "file":
        if mask_file is None:
            raise ValueError("mask_source 'file' needs a mask file path")
        return read_qmek(mask_file).astype(float)
    raise ValueError(f"unknown mask source {mask_source!r}")


def cmd_reconstruct(cfg: RunConfig, out_dir, mask_source: str = "all-ones", mask_file=None,
                    tag: str | None = None, threads: int | None = None) -> Path:
    """Unrolled reconstruction per slice from the corrupted k-space.

    The k-space is pre-masked and the same per-line weights act in the DC
    term.  Returns the path of the written image stack."""
    out_dir = Path(out_dir)
    ksp = read_qmek(artifact(out_dir, "kspace_corrupt")).astype(complex)
    coils = read_qmek(artifact(out_dir, "coils")).astype(complex)
    n_slices, _, _, h, _ = ksp.shape
    masks = _load_masks(cfg, out_dir, mask_source, mask_file, n_slices, h)
    rcfg = recon_config(cfg)
    tag = tag or mask_source.replace("-", "")
    threads = threads or cfg.get("run.threads")

    def recon_slice(z: int) -> np.ndarray:
        return unrolled_reconstruct(apply_mask(ksp[z], masks[z]), masks[z], coils, rcfg)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            recon = np.stack(list(pool.map(recon_slice, range(n_slices))))
    else:
        recon = np.stack([recon_slice(z) for z in range(n_slices)])
    path = recon_file(out_dir, tag)
    write_qmek(path, recon)
    write_qmek(map_file(out_dir, "mask_used", tag), masks)
    _write_sidecar(cfg, out_dir, f"reconstruct_{tag}")
    return path


def cmd_fit(cfg: RunConfig, out_dir, tag: str = "allones") -> None:
    """Fit decay maps from a reconstructed image stack; export PGM renderings."""
    out_dir = Path(out_dir)
    recon = read_qmek(recon_file(out_dir, tag))
    te = read_qmek(artifact(out_dir, "echo_times")).astype(float)
    brain = read_qmek(artifact(out_dir, "brain_mask")).astype(bool)
    refine = cfg.get("fit.refine")
    t2, s0, resid, valid = [], [], [], []
    for z in range(recon.shape[0]):
        mag = np.abs(recon[z]).astype(float)
        maps = fit_t2star(mag, te, brain[z], refine=refine)
        t2.append(maps.t2star)
        s0.append(maps.s0)
        resid.append(maps.residual)
        valid.append(maps.valid)
    t2 = np.stack(t2)
    write_qmek(map_file(out_dir, "t2star", tag), t2)
    write_qmek(map_file(out_dir, "s0", tag), np.stack(s0))
    write_qmek(map_file(out_dir, "residual", tag), np.stack(resid))
    write_qmek(map_file(out_dir, "valid", tag), np.stack(valid))
    window = (0.0, cfg.get("report.t2star_window_ms"))
    for z in range(t2.shape[0]):
        rpt.write_pgm(Path(out_dir) / f"t2star_{tag}_z{z}.pgm", t2[z], window)
    _write_sidecar(cfg, out_dir, f"fit_{tag}")


def load_subject(out_dir) -> Subject:
    out_dir = Path(out_dir)
    return Subject(
        kspace=read_qmek(artifact(out_dir, "kspace_corrupt")).astype(complex),
        coils=read_qmek(artifact(out_dir, "coils")).astype(complex),
        echo_times=read_qmek(artifact(out_dir, "echo_times")).astype(float),
        region=read_qmek(artifact(out_dir, "brain_mask")).astype(bool),
    )


def cmd_detect(cfg: RunConfig, out_dir) -> None:
    """Optimize per-slice exclusion masks, then reconstruct and fit with them.

    The final maps are produced by re-reading the written (float32) masks
    through the regular reconstruct and fit commands, so feeding the mask
    file back through ``cmd_reconstruct`` reproduces them bit-exactly."""
    out_dir = Path(out_dir)
    subject = load_subject(out_dir)
    masks, trace = optimize_masks(subject, detector_config(cfg), recon_config(cfg))
    write_qmek(artifact(out_dir, "masks_learned"), masks)
    rows = trace_to_rows(trace)
    _write_csv(artifact(out_dir, "trace"), ["epoch", "l_phys", "l_reg", "total", "wall_time"], rows)
    rpt.write_pgm(Path(out_dir) / "masks_learned.pgm", rpt.mask_strip(masks), (0.0, 1.0))
    cmd_reconstruct(cfg, out_dir, mask_source="file", mask_file=artifact(out_dir, "masks_learned"),
                    tag="learned")
    cmd_fit(cfg, out_dir, tag="learned")
    _write_sidecar(cfg, out_dir, "detect")


def cmd_orba(cfg: RunConfig, out_dir, threads: int | None = None) -> None:
    """Mask-averaging baseline end to end: averaged recon, mean masks, maps."""
    out_dir = Path(out_dir)
    ksp = read_qmek(artifact(out_dir, "kspace_corrupt")).astype(complex)
    coils = read_qmek(artifact(out_dir, "coils")).astype(complex)
    rcfg = recon_config(cfg)
    n_masks = cfg.get("orba.masks")
    rate = cfg.get("orba.rate")
    strength = cfg.get("orba.center_strength")
    paired = cfg.get("orba.paired")
    seed = cfg.get("orba.seed")
    threads = threads or cfg.get("run.threads")

    def run_slice(z: int):
        return orba_reconstruct(ksp[z], coils, rcfg, n_masks=n_masks, rate=rate,
                                seed=seed + 997 * z, center_strength=strength, paired=paired)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run_slice, range(ksp.shape[0])))
    else:
        results = [run_slice(z) for z in range(ksp.shape[0])]
    recon = np.stack([r[0] for r in results])
    mean_masks = np.stack([r[1] for r in results])
    write_qmek(recon_file(out_dir, "orba"), recon)
    write_qmek(artifact(out_dir, "mask_orba_mean"), mean_masks)
    cmd_fit(cfg, out_dir, tag="orba")
    _write_sidecar(cfg, out_dir, "orba")


def _region_masks(out_dir) -> dict[str, np.ndarray]:
    labels = read_qmek(artifact(out_dir, "labels"))
    return {"gm": labels == LABEL_GM, "wm": labels == LABEL_WM}


def metric_rows(cfg: RunConfig, out_dir, pairs) -> list[dict]:
    """MAE and region-restricted SSIM rows for ``(context, path_a, path_b)``.

    Maps are zero-filled outside the brain mask before SSIM so the clamped
    fit values of skipped voxels cannot leak into boundary windows."""
    regions = _region_masks(out_dir)
    brain = read_qmek(artifact(out_dir, "brain_mask")).astype(bool)
    data_range = cfg.get("metrics.data_range")
    rows = []
    for context, path_a, path_b in pairs:
        a = read_qmek(path_a).astype(float)
        b = read_qmek(path_b).astype(float)
        if a.shape != b.shape:
            raise ValueError(f"{context}: map shapes differ")
        a_masked = np.where(brain, a, 0.0)
        b_masked = np.where(brain, b, 0.0)
        for region_name, region in regions.items():
            rows.append({
                "context": context, "region": region_name, "metric": "mae_ms",
                "value": mae(a, b, region),
            })
            per_slice = [
                ssim(a_masked[z], b_masked[z], data_range, region=region[z])
                for z in range(a.shape[0]) if region[z].any()
            ]
            rows.append({
                "context": context, "region": region_name, "metric": "ssim",
                "value": float(np.mean(per_slice)),
            })
    return rows


def cmd_metrics(cfg: RunConfig, out_dir, pairs) -> list[dict]:
    """Write MAE/SSIM rows for the requested map pairs to ``metrics.csv``."""
    out_dir = Path(out_dir)
    rows = metric_rows(cfg, out_dir, pairs)
    _write_csv(artifact(out_dir, "metrics"), ["context", "region", "metric", "value"], rows)
    _write_sidecar(cfg, out_dir, "metrics")
    return rows


_REPORT_METHODS = (
    ("nomoco", "allones"),
    ("orba", "orba"),
    ("learned", "learned"),
    ("oracle", "oracle"),
)


def cmd_report(cfg: RunConfig, out_dir) -> list[dict]:
    """Summary CSV, per-slice PGM panel strips, and PNG figures.

    Panels cover whichever of no-MoCo / mask-average / learned / oracle maps
    exist next to the ground truth; detection rows compare the learned masks
    with the oracle when both are present."""
    out_dir = Path(out_dir)
    truth = read_qmek(artifact(out_dir, "t2star_truth")).astype(float)
    window = (0.0, cfg.get("report.t2star_window_ms"))
    present = [(name, tag) for name, tag in _REPORT_METHODS
               if map_file(out_dir, "t2star", tag).exists()]
    pairs = [(name, map_file(out_dir, "t2star", tag), artifact(out_dir, "t2star_truth"))
             for name, tag in present]
    rows = metric_rows(cfg, out_dir, pairs) if pairs else []

    maps = {name: read_qmek(map_file(out_dir, "t2star", tag)).astype(float) for name, tag in present}
    for z in range(truth.shape[0]):
        strip = rpt.panel_strip([maps[name][z] for name, _ in present] + [truth[z]], window)
        rpt.write_pgm(out_dir / f"panel_z{z}.pgm", strip, window)
    if present:
        titled = [(name, maps[name][truth.shape[0] // 2]) for name, _ in present]
        titled.append(("truth", truth[truth.shape[0] // 2]))
        rpt.save_map_panel(out_dir / "report_maps.png", titled, window)

    mask_panels = []
    oracle_path = artifact(out_dir, "mask_oracle")
    learned_path = artifact(out_dir, "masks_learned")
    if oracle_path.exists():
        mask_panels.append(("oracle", read_qmek(oracle_path).astype(float)))
    if learned_path.exists():
        learned = read_qmek(learned_path).astype(float)
        mask_panels.append(("learned", learned))
        if oracle_path.exists():
            oracle = read_qmek(oracle_path).astype(float)
            scores = detection_scores(learned.ravel(), oracle.ravel())
            for metric, value in (("precision", scores.precision), ("recall", scores.recall),
                                  ("f1", scores.f1)):
                rows.append({"context": "learned_vs_oracle", "region": "lines",
                             "metric": f"detection_{metric}", "value": value})
    orba_path = artifact(out_dir, "mask_orba_mean")
    if orba_path.exists():
        mask_panels.append(("mask-average mean", read_qmek(orba_path).astype(float)))
    if mask_panels:
        rpt.save_mask_figure(out_dir / "report_masks.png", mask_panels)

    trace_path = artifact(out_dir, "trace")
    if trace_path.exists():
        with open(trace_path, "r", encoding="utf-8") as fh:
            trace_rows = [{k: float(v) for k, v in row.items()} for row in csv.DictReader(fh)]
        rpt.save_trace_figure(out_dir / "report_trace.png", trace_rows)
    if rows:
        rpt.save_metric_bars(out_dir / "report_metrics.png",
                             [r for r in rows if not r["metric"].startswith("detection")])
    _write_csv(artifact(out_dir, "report"), ["context", "region", "metric", "value"], rows)
    _write_sidecar(cfg, out_dir, "report")
    return rows
