"""Flat key-value configuration for all fitting weights and tolerances.

Every weight named by the fitting objectives is a key here. The file format
is one `key = value` pair per line, `#` comments allowed; unknown keys are
rejected so typos fail loudly.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path


@dataclass
class FitConfig:
    # Energy term weights.
    weight_reproj: float = 1.0
    weight_prior_pose: float = 0.1
    weight_prior_hinge: float = 1.0
    weight_prior_shape: float = 1.0
    weight_glob: float = 100.0
    weight_structure: float = 50.0
    # Robustifier scales. structure_scale 0 means auto: 10x the grid's
    # median nonzero density times the surface sample count.
    gm_width_px: float = 100.0
    structure_scale: float = 0.0
    # Joint-limit hinge range for knees and elbows (flexion, radians).
    hinge_min_rad: float = 0.0
    hinge_max_rad: float = 2.6
    # Capsule surface sampling for the structure term.
    samples_per_bone: int = 4
    # Levenberg-Marquardt termination.
    max_iterations: int = 200
    energy_tol: float = 1e-8
    gradient_tol: float = 1e-10
    damping_init: float = 1e-3
    # Association: matches costlier than this are rejected (3x the median
    # matched cost on the synthetic calibration suite, seeds 0-19, 2 px).
    unmatched_cost_threshold: float = 60000.0
    # Entries whose two-view triangulation cost exceeds this gate (pixels)
    # are marked forbidden without running the full fit.
    prefilter_gate_px: float = 80.0

    def copy(self) -> "FitConfig":
        return FitConfig(**{f.name: getattr(self, f.name) for f in fields(self)})

    def dump(self) -> str:
        lines = []
        for f in fields(self):
            lines.append(f"{f.name} = {getattr(self, f.name)!r}")
        return "\n".join(lines) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.dump())


def load_config(path) -> FitConfig:
    """Parse a flat config file; unset keys keep their defaults."""
    cfg = FitConfig()
    valid = {f.name: f.type for f in fields(FitConfig)}
    text = Path(path).read_text()
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{ln}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in valid:
            raise ValueError(f"{path}:{ln}: unknown config key {key!r}")
        current = getattr(cfg, key)
        if isinstance(current, int) and not isinstance(current, bool):
            setattr(cfg, key, int(float(value)))
        else:
            setattr(cfg, key, float(value))
    return cfg
