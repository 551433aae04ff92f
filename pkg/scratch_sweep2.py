"""Scratch: SSIM/MAE orderings incl. the mask-averaging baseline."""
import sys

import numpy as np

import t2moco as tm
from t2moco.detector import evaluate_masks
from t2moco.quantify import fit_t2star
from t2moco.recon import DenoiserSpec, ReconConfig, orba_reconstruct
from t2moco.scenarios import EventSpec
from t2moco.forward import RigidState
from scratch_premise import build

CASES = {
    "near10": [EventSpec(30, 40, RigidState(10, 4, 2)), EventSpec(52, 64, RigidState(-8, -4, 3))],
    "near15": [EventSpec(30, 40, RigidState(15, 6, 4)), EventSpec(52, 64, RigidState(-12, -5, 5))],
    "minor": [EventSpec(33, 38, RigidState(0.8, 0.6, 0.3))],
}


def t2_maps(subject, masks, rcfg):
    out = []
    for z in range(subject.n_slices):
        masked = tm.apply_mask(subject.kspace[z].astype(complex), masks[z])
        rec = tm.unrolled_reconstruct(masked, masks[z], subject.coils.astype(complex), rcfg)
        out.append(fit_t2star(np.abs(rec), subject.echo_times, subject.region[z]).t2star)
    return np.stack(out)


def orba_maps(subject, rcfg, paired, strength, seed=0):
    out, mean_masks = [], []
    for z in range(subject.n_slices):
        rec, mm = orba_reconstruct(subject.kspace[z].astype(complex), subject.coils.astype(complex),
                                   rcfg, seed=seed + 997 * z, paired=paired, center_strength=strength)
        out.append(fit_t2star(np.abs(rec), subject.echo_times, subject.region[z]).t2star)
        mean_masks.append(mm)
    return np.stack(out), np.stack(mean_masks)


def scores(t2, vol, subject):
    m = np.mean([tm.mae(t2[z], vol.t2star_map[z], subject.region[z]) for z in range(len(t2))])
    s = np.mean([tm.ssim(t2[z], vol.t2star_map[z], 200.0, region=subject.region[z]) for z in range(len(t2))])
    return m, s


if __name__ == "__main__":
    rcfg = ReconConfig(denoiser=DenoiserSpec("tikhonov", lam=0.05))
    ones = np.ones((4, 92))
    for case, events in CASES.items():
        subject, oracle, vol, _ = build(events, n_coils=4)
        m1, s1 = scores(t2_maps(subject, ones, rcfg), vol, subject)
        m0, s0 = scores(t2_maps(subject, oracle, rcfg), vol, subject)
        mo_p, so_p = scores(orba_maps(subject, rcfg, True, 0.25)[0], vol, subject)
        mo_i, so_i = scores(orba_maps(subject, rcfg, False, 0.25)[0], vol, subject)
        l1 = evaluate_masks(ones, subject, rcfg, 0.0).l_phys
        l0 = evaluate_masks(oracle, subject, rcfg, 0.0).l_phys
        print(f"{case}: loss ones {l1:.2e} oracle {l0:.2e}")
        print(f"   MAE  ones {m1:7.3f} oracle {m0:7.3f} orba(pair) {mo_p:7.3f} orba(ind) {mo_i:7.3f}")
        print(f"   SSIM ones {s1:7.4f} oracle {s0:7.4f} orba(pair) {so_p:7.4f} orba(ind) {so_i:7.4f}")
