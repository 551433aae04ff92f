"""Canonical motion scenarios for simulations, tests and the acceptance suite.

Events are half-open acquisition-position windows with a rigid state and a
slice scope.  Severe scenarios corrupt at least 20% of the lines with
rotations of 3 degrees or more (or translations of 2+ voxels); minor ones a
few lines with sub-degree, sub-voxel motion.  Windows are drawn from the
central two-thirds of the acquisition, where line energy makes the detection
problem well posed at desk scale.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .forward import MotionTrajectory, RigidState, make_trajectory


@dataclass(frozen=True)
class EventSpec:
    """A motion event: line window, rigid state, and the slices it affects."""

    start: int
    stop: int
    state: RigidState
    slices: str | tuple[int, ...] = "all"

    def applies_to(self, z: int) -> bool:
        if self.slices == "all":
            return True
        if self.slices == "even":
            return z % 2 == 0
        if self.slices == "odd":
            return z % 2 == 1
        return z in self.slices


def timing_events(n_lines: int = 92) -> list[EventSpec]:
    """Two fixed event windows; the second grazes the k-space center.

    Both windows flank the ten central lines, where line energy makes the
    corruption matter and its exclusion recoverable; the second window
    additionally covers three central lines with a strong phase-encode
    translation, so keeping those lines disturbs the decay more than the
    contrast lost by excluding them (a full-center event would make
    exclusion unrecoverable for a classical reconstruction)."""
    center = n_lines // 2
    return [
        EventSpec(center - 17, center - 5, RigidState(rotation_deg=8.0, dx=3.0, dy=7.0)),
        EventSpec(center + 2, center + 12, RigidState(rotation_deg=-6.0, dx=0.0, dy=-9.0)),
    ]


def severe_events(seed: int, n_lines: int = 92) -> list[EventSpec]:
    """Two randomized windows covering at least 20% of the lines.

    Windows sit in the bands flanking the fully-sampled center, where line
    energy makes both the corruption and its exclusion consequential; every
    event carries a phase-encode translation of at least four voxels, the
    component an in-plane simulation makes clearly visible to the decay."""
    rng = np.random.default_rng(1000 + seed)
    center = n_lines // 2
    total = max(10, int(np.ceil(0.24 * n_lines)))
    len_a = total // 2
    len_b = total - len_a
    start_a = int(rng.integers(center - 16, center - 4 - len_a + 1))
    start_b = int(rng.integers(center + 4, center + 16 - len_b + 1))
    events = []
    for start, length in ((start_a, len_a), (start_b, len_b)):
        rot = float(rng.uniform(5.0, 10.0) * rng.choice((-1, 1)))
        dx = float(rng.uniform(2.0, 4.0) * rng.choice((-1, 1)))
        dy = float(rng.uniform(4.0, 9.0) * rng.choice((-1, 1)))
        events.append(EventSpec(start, start + length, RigidState(rot, dx, dy)))
    return events


def minor_events(seed: int, n_lines: int = 92) -> list[EventSpec]:
    """One short window of small-amplitude motion (about 5% of the lines)."""
    rng = np.random.default_rng(2000 + seed)
    length = max(3, round(0.05 * n_lines))
    side = rng.choice((-1, 1))
    center = n_lines // 2
    if side < 0:
        start = int(rng.integers(round(n_lines * 0.2), center - 6 - length))
    else:
        start = int(rng.integers(center + 6, round(n_lines * 0.8) - length))
    state = RigidState(
        rotation_deg=float(rng.uniform(0.5, 1.0) * rng.choice((-1, 1))),
        dx=float(rng.uniform(0.3, 0.8)),
        dy=float(rng.uniform(0.0, 0.5)),
    )
    return [EventSpec(start, start + length, state)]


def slice_trajectory(events: list[EventSpec], z: int, n_lines: int, order: str = "linear") -> MotionTrajectory:
    """Trajectory for one slice, keeping only the events that affect it."""
    applicable = [((e.start, e.stop), e.state) for e in events if e.applies_to(z)]
    return make_trajectory(applicable, n_lines, order)
