"""Plain key=value run configuration with strict key validation."""

from __future__ import annotations

from dataclasses import dataclass, field, fields


@dataclass
class RunConfig:
    input: str = ""
    output: str = ""
    dims: tuple[int, int, int] = (0, 0, 0)
    precision: str = "f32"
    eps: float = 0.04
    xi: float = 0.012
    base: str = "csi"
    scale: int = 7                  # CSI target scale factor
    mode: str = "log"               # log | linear
    growth_delay: int = 3           # iterations before regions grow
    fp_to_fn_switch: int = 6        # persistent false positive handled as negative
    correction_ceiling: int = 10 ** 6
    seed: int = 0
    kind: str = "gaussians"         # synthetic generator
    count: int = 2                  # synthetic bump count
    vary: str = ""                  # sweep parameter: xi | eps | scale
    values: tuple = ()              # sweep values
    report_dir: str = ""

    def validate(self):
        if self.xi <= 0:
            raise ValueError("xi must be positive")
        if self.eps < 0:
            raise ValueError("eps must be nonnegative")
        if any(d < 0 for d in self.dims):
            raise ValueError("dims must be positive")
        if self.mode not in ("log", "linear"):
            raise ValueError(f"unknown mode {self.mode!r}")
        return self


_FIELD_TYPES = {f.name: f for f in fields(RunConfig)}


def parse_config(text: str) -> RunConfig:
    """Parse key=value lines (# comments allowed); unknown keys are errors."""
    cfg = RunConfig()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key=value, got {raw!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in _FIELD_TYPES:
            raise ValueError(f"line {lineno}: unknown config key {key!r}")
        setattr(cfg, key, _convert(key, val))
    return cfg.validate()


def _convert(key: str, val: str):
    current = getattr(RunConfig(), key)
    if key == "dims":
        parts = [int(p) for p in val.split(",")]
        if len(parts) != 3:
            raise ValueError("dims needs three comma-separated integers")
        return tuple(parts)
    if key == "values":
        return tuple(float(p) for p in val.split(","))
    if isinstance(current, bool):
        return val.lower() in ("1", "true", "yes")
    if isinstance(current, int):
        return int(val)
    if isinstance(current, float):
        return float(val)
    return val
