"""Run configuration: presets, the flat key=value config file, and flag merging.

The two presets share one architecture and differ only in scale:

* ``desk`` — 64x64 inputs, stage channels 16/32/64/128, one or two blocks per
  stage; everything completes in seconds on one core.
* ``full`` — 320x320 inputs, stage channels 96/192/384/768, blocks 2/2/9/2.

The seed fully determines every learnable parameter.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path

from .backbone import BackboneConfig


@dataclass(frozen=True)
class PresetSpec:
    name: str
    input_size: int
    stage_channels: tuple[int, ...]
    blocks_per_stage: tuple[int, ...]
    state_dim: int = 16

    def backbone_config(self, in_channels: int) -> BackboneConfig:
        return BackboneConfig(
            in_channels=in_channels,
            stage_channels=self.stage_channels,
            blocks_per_stage=self.blocks_per_stage,
            state_dim=self.state_dim,
        )


PRESETS = {
    "desk": PresetSpec(
        name="desk",
        input_size=64,
        stage_channels=(16, 32, 64, 128),
        blocks_per_stage=(1, 1, 2, 1),
    ),
    "full": PresetSpec(
        name="full",
        input_size=320,
        stage_channels=(96, 192, 384, 768),
        blocks_per_stage=(2, 2, 9, 2),
    ),
}


@dataclass
class RunConfig:
    preset: str = "desk"
    seed: int = 0
    rgb: str | None = None
    depth: str | None = None
    gt: str | None = None
    pred: str | None = None
    out: str = "out"
    synth: str | None = None
    gate_activation: str = "silu"
    thresholds: int = 256

    def preset_spec(self) -> PresetSpec:
        if self.preset not in PRESETS:
            raise ValueError(f"unknown preset {self.preset!r}; choose from {sorted(PRESETS)}")
        return PRESETS[self.preset]


_INT_KEYS = {"seed", "thresholds"}


def parse_config_file(path) -> dict[str, str]:
    """Flat ``key = value`` lines; blank lines and '#' comments are skipped."""
    values: dict[str, str] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key = value, got {raw!r}")
        key, _, value = line.partition("=")
        values[key.strip().replace("-", "_")] = value.strip()
    return values


def build_run_config(file_values: dict[str, str], flag_values: dict) -> RunConfig:
    """Merge config-file values with CLI flags; flags win when present."""
    cfg = RunConfig()
    known = {f.name for f in fields(RunConfig)}
    for key, value in file_values.items():
        if key not in known:
            raise ValueError(f"unknown config key {key!r}")
        setattr(cfg, key, int(value) if key in _INT_KEYS else value)
    for key, value in flag_values.items():
        if value is not None:
            setattr(cfg, key, value)
    return cfg


def parse_synth_size(text: str) -> tuple[int, int]:
    """Parse 'HxW' into integer extents."""
    parts = text.lower().split("x")
    if len(parts) != 2:
        raise ValueError(f"synth size must look like 64x64, got {text!r}")
    return int(parts[0]), int(parts[1])
