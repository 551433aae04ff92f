"""Scratch: detector convergence study (not part of the package)."""
import time

import numpy as np

import t2moco as tm
from t2moco.detector import DetectorConfig, Subject, evaluate_masks, optimize_masks
from t2moco.phantom import PhantomSpec
from t2moco.recon import DenoiserSpec, ReconConfig
from t2moco.scenarios import severe_events, slice_trajectory, timing_events


def build_subject(events, n_slices=4, n_coils=2, n_echoes=8, width=48, seed=0, single=True):
    spec = PhantomSpec(n_slices=n_slices, width=width)
    vol = tm.make_phantom(spec, seed)
    coils = tm.make_coil_maps(n_coils, vol.grid, seed)
    te = 5.0 * np.arange(1, n_echoes + 1)
    ksp, oracle = [], []
    for z in range(n_slices):
        es = tm.synthesize_echoes(vol, te, z)
        traj = slice_trajectory(events, z, spec.height)
        ksp.append(tm.forward_model(es.data, coils.maps, traj))
        oracle.append(tm.ground_truth_mask(traj))
    kspace = np.stack(ksp)
    maps = coils.maps
    if single:
        kspace = kspace.astype(np.complex64)
        maps = maps.astype(np.complex64)
    subject = Subject(kspace=kspace, coils=maps, echo_times=te, region=vol.brain_mask)
    return subject, np.stack(oracle)


def f1_against(masks, oracle, thr=0.5):
    scores = tm.detection_scores(masks.ravel(), oracle.ravel(), thr)
    return scores


if __name__ == "__main__":
    events = timing_events()
    subject, oracle = build_subject(events)
    rcfg = ReconConfig(denoiser=DenoiserSpec("tikhonov", lam=0.05))

    t0 = time.perf_counter()
    rep_ones = evaluate_masks(np.ones((4, 92)), subject, rcfg, 0.1)
    t_eval = time.perf_counter() - t0
    rep_oracle = evaluate_masks(oracle, subject, rcfg, 0.1)
    print(f"one subject evaluation: {t_eval*1000:.1f} ms")
    print(f"loss all-ones {rep_ones.total:.5f} vs oracle {rep_oracle.total:.5f}")

    import sys
    epochs = int(sys.argv[1]) if len(sys.argv) > 1 else 400
    fd_samples = int(sys.argv[2]) if len(sys.argv) > 2 else 2
    lr = float(sys.argv[3]) if len(sys.argv) > 3 else 0.05
    dcfg = DetectorConfig(max_epochs=epochs, seed=0, fd_samples=fd_samples, lr=lr)
    t0 = time.perf_counter()
    masks, trace = optimize_masks(subject, dcfg, rcfg)
    dt = time.perf_counter() - t0
    print(f"optimized in {dt:.1f} s, {len(trace)} epochs")
    print(f"final loss {trace[-1].total:.5f}, best {min(t.total for t in trace):.5f}")
    print("scores:", f1_against(masks, oracle))
    gt_excluded = oracle[0] == 0
    print("mean weight on corrupted lines:", masks[:, gt_excluded].mean())
    print("mean weight on clean lines:", masks[:, ~gt_excluded].mean())
