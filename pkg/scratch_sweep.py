"""Scratch: sweep severity/placement/denoiser for the loss premise."""
import sys

import numpy as np

import t2moco as tm
from t2moco.detector import evaluate_masks
from t2moco.quantify import fit_t2star
from t2moco.recon import DenoiserSpec, ReconConfig
from t2moco.scenarios import EventSpec
from t2moco.forward import RigidState
from scratch_premise import build, t2_mae

CASES = {
    "off5": [EventSpec(12, 24, RigidState(5, 2, 1)), EventSpec(60, 72, RigidState(-4, -2, 1.5))],
    "off10": [EventSpec(12, 24, RigidState(10, 4, 2)), EventSpec(60, 72, RigidState(-8, -4, 3))],
    "off15": [EventSpec(12, 24, RigidState(15, 6, 4)), EventSpec(60, 72, RigidState(-12, -5, 5))],
    "mid10": [EventSpec(24, 36, RigidState(10, 4, 2)), EventSpec(56, 68, RigidState(-8, -4, 3))],
    "near10": [EventSpec(30, 40, RigidState(10, 4, 2)), EventSpec(52, 64, RigidState(-8, -4, 3))],
}

if __name__ == "__main__":
    n_coils = int(sys.argv[1]) if len(sys.argv) > 1 else 4
    dens = {
        "tikh05": DenoiserSpec("tikhonov", lam=0.05),
        "tv10x10": DenoiserSpec("tv_prox", lam=0.10, inner_iters=10),
    }
    # motion-free floor
    subject0, _, vol0, _ = build([], n_coils=n_coils)
    ones = np.ones((4, 92))
    for dname, den in dens.items():
        rcfg = ReconConfig(denoiser=den)
        floor = evaluate_masks(ones, subject0, rcfg, 0.0).l_phys
        mae_clean = t2_mae(subject0, ones, rcfg, vol0)
        print(f"[{dname}] motion-free floor: loss {floor:.2e}, MAE {mae_clean:.4f} ms")
    for case, events in CASES.items():
        subject, oracle, vol, _ = build(events, n_coils=n_coils)
        for dname, den in dens.items():
            rcfg = ReconConfig(denoiser=den)
            l1 = evaluate_masks(ones, subject, rcfg, 0.0).l_phys
            l0 = evaluate_masks(oracle, subject, rcfg, 0.0).l_phys
            m1 = t2_mae(subject, ones, rcfg, vol)
            m0 = t2_mae(subject, oracle, rcfg, vol)
            flag = "OK " if (l1 > l0 and m0 < m1) else "BAD"
            print(f"{flag} {case:6s} {dname:8s} loss ones {l1:.5f} oracle {l0:.5f} | MAE ones {m1:6.3f} oracle {m0:6.3f}")
