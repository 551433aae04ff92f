"""Run configuration: flat ``section.key = value`` text files with defaults.

Unknown keys are an error (they are almost always typos), every value has a
typed default, and each command writes its fully resolved configuration next
to its outputs so a run can be reproduced exactly.  Per-section seeds fall
back to the global ``run.seed`` unless set explicitly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .forward import RigidState
from .scenarios import EventSpec

# key -> (default, parser). Parsers take the raw string.
_BOOL = {"true": True, "false": False, "1": True, "0": False, "yes": True, "no": False}


def _parse_bool(raw: str) -> bool:
    try:
        return _BOOL[raw.strip().lower()]
    except KeyError:
        raise ValueError(f"expected a boolean, got {raw!r}") from None


def _parse_str(raw: str) -> str:
    return raw.strip()


DEFAULTS: dict[str, tuple] = {
    "run.seed": (0, int),
    "run.threads": (1, int),
    "phantom.height": (92, int),
    "phantom.width": (64, int),
    "phantom.slices": (6, int),
    "phantom.csf_fraction": (1.0, float),
    "phantom.variation": (0.08, float),
    "phantom.seed": (None, int),
    "echoes.count": (12, int),
    "echoes.te1_ms": (5.0, float),
    "echoes.spacing_ms": (5.0, float),
    "coils.count": (4, int),
    "coils.seed": (None, int),
    "trajectory.events": ("", _parse_str),
    "trajectory.order": ("linear", _parse_str),
    "noise.sigma": (0.0, float),
    "noise.seed": (None, int),
    "recon.unrolled": (5, int),
    "recon.dc_step": (1.0, float),
    "recon.denoiser": ("tikhonov", _parse_str),
    "recon.lambda_d": (0.05, float),
    "recon.tv_iters": (10, int),
    "recon.init": ("adjoint", _parse_str),
    "fit.refine": (False, _parse_bool),
    "masks.center_lines": (10, int),
    "detector.lambda": (0.1, float),
    "detector.batch_slices": (4, int),
    "detector.patience": (50, int),
    "detector.max_epochs": (600, int),
    "detector.optimizer": ("fd_adam", _parse_str),
    "detector.fd_epsilon": (0.02, float),
    "detector.fd_samples": (4, int),
    "detector.population": (8, int),
    "detector.sigma": (0.05, float),
    "detector.lr": (0.05, float),
    "detector.monitor": ("total", _parse_str),
    "detector.min_delta": (1e-3, float),
    "detector.activation": ("relu", _parse_str),
    "detector.seed": (None, int),
    "orba.masks": (15, int),
    "orba.rate": (0.5, float),
    "orba.center_strength": (0.9, float),
    "orba.paired": (True, _parse_bool),
    "orba.seed": (None, int),
    "metrics.data_range": (200.0, float),
    "report.t2star_window_ms": (200.0, float),
}

_SEED_KEYS = [k for k in DEFAULTS if k.endswith(".seed") and k != "run.seed"]


class ConfigError(Exception):
    """Unknown key, malformed line, or unparsable value."""


@dataclass(frozen=True)
class RunConfig:
    values: dict

    def get(self, key: str):
        if key not in DEFAULTS:
            raise ConfigError(f"unknown config key {key!r}")
        value = self.values[key]
        if value is None and key in _SEED_KEYS:
            return self.values["run.seed"]
        return value

    def echo_times(self) -> np.ndarray:
        te1 = self.get("echoes.te1_ms")
        dte = self.get("echoes.spacing_ms")
        return te1 + dte * np.arange(self.get("echoes.count"))

    def events(self) -> list[EventSpec]:
        return parse_events(self.get("trajectory.events"))

    def with_overrides(self, **overrides) -> "RunConfig":
        values = dict(self.values)
        for key, value in overrides.items():
            if value is None:
                continue
            if key not in DEFAULTS:
                raise ConfigError(f"unknown config key {key!r}")
            values[key] = value
        return RunConfig(values)

    def resolved_text(self) -> str:
        lines = ["# resolved configuration (all values explicit)"]
        for key in sorted(DEFAULTS):
            value = self.get(key)
            if isinstance(value, bool):
                value = "true" if value else "false"
            lines.append(f"{key} = {value}")
        return "\n".join(lines) + "\n"


def default_config() -> RunConfig:
    return RunConfig({key: default for key, (default, _) in DEFAULTS.items()})


def parse_config(text: str) -> RunConfig:
    """Parse ``section.key = value`` lines; unknown keys raise."""
    values = {key: default for key, (default, _) in DEFAULTS.items()}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'section.key = value', got {raw!r}")
        key, _, raw_value = line.partition("=")
        key = key.strip()
        if key not in DEFAULTS:
            raise ConfigError(f"line {lineno}: unknown config key {key!r}")
        _, parser = DEFAULTS[key]
        try:
            values[key] = parser(raw_value.strip())
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from None
    return RunConfig(values)


def load_config(path) -> RunConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def parse_events(spec: str) -> list[EventSpec]:
    """Parse the event DSL: ``start:stop rot=deg dx=vox dy=vox @scope; ...``.

    The scope is ``@all`` (default), ``@even``, ``@odd`` or an explicit
    ``@z1,z2,...`` slice list.  Example::

        20:32 rot=5 dx=2; 44:54 rot=-4 dy=2.5 @even
    """
    events: list[EventSpec] = []
    for chunk in spec.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        tokens = chunk.split()
        if ":" not in tokens[0]:
            raise ConfigError(f"event {chunk!r}: first token must be start:stop")
        try:
            start, stop = (int(v) for v in tokens[0].split(":"))
        except ValueError:
            raise ConfigError(f"event {chunk!r}: bad line range {tokens[0]!r}") from None
        rot = dx = dy = 0.0
        scope: str | tuple[int, ...] = "all"
        for token in tokens[1:]:
            if token.startswith("@"):
                name = token[1:]
                if name in ("all", "even", "odd"):
                    scope = name
                else:
                    try:
                        scope = tuple(int(z) for z in name.split(","))
                    except ValueError:
                        raise ConfigError(f"event {chunk!r}: bad slice scope {token!r}") from None
                continue
            if "=" not in token:
                raise ConfigError(f"event {chunk!r}: expected key=value, got {token!r}")
            key, _, val = token.partition("=")
            try:
                num = float(val)
            except ValueError:
                raise ConfigError(f"event {chunk!r}: bad number {val!r}") from None
            if key == "rot":
                rot = num
            elif key == "dx":
                dx = num
            elif key == "dy":
                dy = num
            else:
                raise ConfigError(f"event {chunk!r}: unknown field {key!r}")
        events.append(EventSpec(start, stop, RigidState(rot, dx, dy), scope))
    return events


def format_events(events: list[EventSpec]) -> str:
    """Inverse of :func:`parse_events` (used to embed scenarios in configs)."""
    parts = []
    for e in events:
        fields = [f"{e.start}:{e.stop}"]
        if e.state.rotation_deg:
            fields.append(f"rot={e.state.rotation_deg}")
        if e.state.dx:
            fields.append(f"dx={e.state.dx}")
        if e.state.dy:
            fields.append(f"dy={e.state.dy}")
        if e.slices != "all":
            scope = e.slices if isinstance(e.slices, str) else ",".join(str(z) for z in e.slices)
            fields.append(f"@{scope}")
        parts.append(" ".join(fields))
    return "; ".join(parts)
