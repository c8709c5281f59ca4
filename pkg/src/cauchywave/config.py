"""JSON experiment configuration.

A configuration is one JSON document::

    {
      "dimension": 2,
      "profile":  {"kind": "flat", "level": 1.0},
      "target":   {"x": [0.0], "y": 0.0, "t": 0.0},
      "aperture": {"margin": 0.5, "nodes_x": 64, "nodes_t": 64},
      "field":    {"kind": "plane_wave", "angle_deg": 20.0,
                   "pulse": {"width": 0.5, "amplitude": 1.0, "delay": 0.0}},
      "noise":    {"level": 0.0, "seed": 0},
      "kernel":   {"s_nodes": 32},
      "sweep":    {"h_max": 0.4, "ratio": 0.7, "count": 8},
      "workers":  1,
      "output_dir": "out"
    }

See README.md for every field.  :func:`load_config` validates the whole
document and reports all problems together.
"""

import copy
import json
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import CauchyWaveError, ValidationError
from .forward import (
    PulseSpec,
    WaveFieldModel,
    affine_field,
    cylindrical_source_2d,
    plane_wave,
    point_source_3d,
    standing_wave,
    superpose,
)
from .geometry import (
    ApertureChart,
    DomainProfile,
    ReconstructionTarget,
    ScattererBall,
    build_aperture,
    cone_cap_radius,
    validate_growth,
)
from .kernel import KernelParams

__all__ = ["ExperimentConfig", "load_config", "parse_config", "benchmark_config"]

DEFAULTS = {
    "dimension": 2,
    "profile": {"kind": "flat", "level": 1.0},
    "target": {"x": None, "y": 0.0, "t": 0.0},
    "aperture": {"margin": 0.5, "nodes_x": 64, "nodes_theta": 48, "nodes_t": 64},
    "field": {"kind": "plane_wave", "angle_deg": 0.0, "pulse": {"width": 0.5, "amplitude": 1.0, "delay": 0.0}},
    "noise": {"level": 0.0, "seed": 0},
    "kernel": {"s_nodes": 32, "xi_nodes": 64, "xi_cutoff_tol": 1e-18, "sigma_min": None},
    "sweep": {"h_max": 0.4, "ratio": 0.7, "count": 8},
    "workers": 1,
    "output_dir": "out",
}


def _merge(base, override):
    out = copy.deepcopy(base)
    for key, val in override.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict) and key != "field":
            out[key] = _merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def benchmark_config(**overrides) -> dict:
    """Raw dictionary of the flat 2-D plane-wave benchmark."""
    return _merge(DEFAULTS, overrides)


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    raw: dict
    dim_n: int
    profile: DomainProfile
    target: ReconstructionTarget
    margin: float
    node_counts: tuple
    model: WaveFieldModel
    noise_level: float
    seed: int
    kernel_settings: dict
    h_max: float
    ratio: float
    count: int
    workers: int
    output_dir: str

    def build_chart(self) -> ApertureChart:
        return build_aperture(self.profile, self.target, self.margin, self.node_counts)

    def with_seed(self, seed):
        raw = copy.deepcopy(self.raw)
        raw["noise"]["seed"] = int(seed)
        return parse_config(raw)

    def to_json(self):
        return json.dumps(self.raw, indent=2, sort_keys=True)


def _pulse(spec, problems, where):
    spec = spec or {}
    try:
        return PulseSpec(
            width=float(spec.get("width", 0.5)),
            amplitude=float(spec.get("amplitude", 1.0)),
            delay=float(spec.get("delay", 0.0)),
        )
    except (CauchyWaveError, TypeError, ValueError) as exc:
        problems.append(f"{where}.pulse: {exc}")


def _scatterer(spec, problems, where):
    if not spec:
        return None
    try:
        return ScattererBall(tuple(spec["center"]), float(spec["radius"]))
    except (CauchyWaveError, KeyError, TypeError, ValueError) as exc:
        problems.append(f"{where}.scatterer: {exc!r}")


def _field(spec, dim_n, problems, where="field"):
    kind = spec.get("kind")
    try:
        if kind == "plane_wave":
            pulse = _pulse(spec.get("pulse"), problems, where)
            if "direction" in spec:
                d = [float(v) for v in spec["direction"]]
            else:
                a = math.radians(float(spec.get("angle_deg", 0.0)))
                d = [math.sin(a), math.cos(a)] if dim_n == 2 else [math.sin(a), 0.0, math.cos(a)]
            if len(d) != dim_n:
                problems.append(f"{where}.direction must have {dim_n} components")
                return None
            return plane_wave(d, pulse) if pulse else None
        if kind in ("point_source_3d", "cylindrical_source_2d"):
            pulse = _pulse(spec.get("pulse"), problems, where)
            ball = _scatterer(spec.get("scatterer"), problems, where)
            need = 3 if kind == "point_source_3d" else 2
            if dim_n != need:
                problems.append(f"{where}: {kind} requires dimension {need}")
                return None
            factory = point_source_3d if need == 3 else cylindrical_source_2d
            return factory(spec["source"], pulse, ball) if pulse else None
        if kind == "standing_wave":
            k = spec.get("k", [0.0] * (dim_n - 1))
            if len(k) != dim_n - 1:
                problems.append(f"{where}.k must have {dim_n - 1} components")
                return None
            return standing_wave(k, spec.get("k_y", 0.0), spec.get("phase", 0.0), spec.get("amplitude", 1.0))
        if kind == "affine":
            return affine_field(dim_n, spec.get("c0", 0.0), spec.get("c_t", 0.0), spec.get("c_p"))
        if kind == "superposition":
            parts = [_field(c, dim_n, problems, f"{where}.components[{i}]") for i, c in enumerate(spec.get("components", []))]
            if not parts or any(p is None for p in parts):
                problems.append(f"{where}: superposition needs valid components") if not parts else None
                return None
            return superpose(*parts)
        problems.append(f"{where}.kind: unknown field kind {kind!r}")
    except (CauchyWaveError, KeyError, TypeError, ValueError) as exc:
        problems.append(f"{where}: {exc!r}" if isinstance(exc, KeyError) else f"{where}: {exc}")
    return None


def _profile(spec, dim_n, problems):
    kind = spec.get("kind", "flat")
    d = dim_n - 1
    level = float(spec.get("level", 0.0))
    slope = tuple(float(v) for v in spec.get("slope", [0.0] * d))
    bumps = []
    if kind == "gaussian_bump":
        center = spec.get("center", [0.0] * d)
        bumps.append((float(spec.get("amplitude", 0.0)), float(spec.get("width", 1.0)), tuple(center)))
    for b in spec.get("bumps", []):
        bumps.append((float(b["amplitude"]), float(b["width"]), tuple(b.get("center", [0.0] * d))))
    growth = spec.get("growth", {})
    bump_total = sum(abs(a) for a, _, _ in bumps)
    c1 = float(growth.get("c1", abs(level) + bump_total))
    c2 = float(growth.get("c2", min(float(np.linalg.norm(slope)), 0.999999) if slope else 0.0))
    try:
        return DomainProfile(kind, dim_n, level=level, slope=slope, bumps=tuple(bumps), growth_c1=c1, growth_c2=c2)
    except CauchyWaveError as exc:
        problems.append(f"profile: {exc}")


def parse_config(raw: dict) -> ExperimentConfig:
    """Validate a raw configuration dictionary; collect every problem."""
    raw = _merge(DEFAULTS, raw)
    problems = []
    dim_n = raw["dimension"]
    if dim_n not in (2, 3):
        raise ValidationError([f"dimension must be 2 or 3, got {dim_n!r}"])
    d = dim_n - 1

    profile = _profile(raw["profile"], dim_n, problems)

    t = raw["target"]
    x_star = t.get("x") if t.get("x") is not None else [0.0] * d
    raw["target"]["x"] = list(x_star)
    target = None
    if len(x_star) != d:
        problems.append(f"target.x must have {d} components, got {len(x_star)}")
    else:
        target = ReconstructionTarget(tuple(x_star), float(t.get("y", 0.0)), float(t.get("t", 0.0)))

    ap = raw["aperture"]
    margin = float(ap.get("margin", 0.5))
    if margin < 0:
        problems.append(f"aperture.margin must be >= 0, got {margin}")
    if dim_n == 2:
        node_counts = (int(ap["nodes_x"]), int(ap["nodes_t"]))
    else:
        node_counts = (int(ap["nodes_x"]), int(ap["nodes_theta"]), int(ap["nodes_t"]))
    if min(node_counts) < 1:
        problems.append(f"aperture node counts must be positive, got {node_counts}")

    model = _field(raw["field"], dim_n, problems)

    noise = raw["noise"]
    level = float(noise.get("level", 0.0))
    seed = int(noise.get("seed", 0))
    if level < 0:
        problems.append(f"noise.level must be >= 0, got {level}")

    kernel_settings = {k: v for k, v in raw["kernel"].items() if v is not None}
    try:
        KernelParams(h=float(raw["sweep"]["h_max"]) if raw["sweep"]["h_max"] > 0 else 1.0, dim_n=dim_n, **kernel_settings)
    except (CauchyWaveError, TypeError) as exc:
        problems.append(f"kernel: {exc}")

    sw = raw["sweep"]
    h_max, ratio, count = float(sw["h_max"]), float(sw["ratio"]), sw["count"]
    if not h_max > 0:
        problems.append(f"sweep.h_max must be positive, got {h_max}")
    if not 0 < ratio < 1:
        problems.append(f"sweep.ratio must lie in (0, 1), got {ratio}")
    if not (isinstance(count, int) and count >= 3):
        problems.append(f"sweep.count must be an integer >= 3, got {count!r}")

    workers = raw.get("workers", 1)
    if not (isinstance(workers, int) and workers >= 1):
        problems.append(f"workers must be a positive integer, got {workers!r}")

    # cross-module checks need the pieces above
    if profile is not None and target is not None:
        try:
            target.check_inside(profile)
            box = 2.0 * (cone_cap_radius(profile, target) + margin) + float(np.linalg.norm(target.x))
            validate_growth(profile, box, 201 if dim_n == 2 else 41)
        except CauchyWaveError as exc:
            problems.append(f"geometry: {exc}")
        if model is not None:
            if model.dim_n != dim_n:
                problems.append(f"field dimension {model.dim_n} does not match dimension {dim_n}")
            else:
                try:
                    model.check_setup(profile, target)
                except CauchyWaveError as exc:
                    problems.append(f"field: {exc}")

    if problems:
        raise ValidationError(problems)
    return ExperimentConfig(
        raw=raw,
        dim_n=dim_n,
        profile=profile,
        target=target,
        margin=margin,
        node_counts=node_counts,
        model=model,
        noise_level=level,
        seed=seed,
        kernel_settings=kernel_settings,
        h_max=h_max,
        ratio=ratio,
        count=count,
        workers=workers,
        output_dir=str(raw.get("output_dir", "out")),
    )


def load_config(path) -> ExperimentConfig:
    """Read and validate a JSON configuration file."""
    with open(path) as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValidationError([f"{path}: invalid JSON: {exc}"]) from exc
    return parse_config(raw)
