import functools
import math

from cauchywave.forward import PulseSpec, add_noise, plane_wave, sample_cauchy_data
from cauchywave.geometry import ReconstructionTarget, build_aperture, flat_profile, gaussian_bump_profile

BENCH_TARGET = ReconstructionTarget((0.0,), 0.0, 0.0)
BENCH_PULSE = PulseSpec(width=0.5)


@functools.lru_cache(maxsize=None)
def bench_chart(profile="flat", margin=0.5, nodes=(64, 64)):
    prof = flat_profile(1.0) if profile == "flat" else gaussian_bump_profile(1.0, 0.3, 1.0)
    return build_aperture(prof, BENCH_TARGET, margin, nodes)


@functools.lru_cache(maxsize=None)
def bench_data(angle_deg=0.0, profile="flat", margin=0.5, nodes=(64, 64), noise=0.0, seed=0):
    """Plane-wave Cauchy data on the 2-D benchmark geometry (cached per argument set)."""
    a = math.radians(angle_deg)
    model = plane_wave([math.sin(a), math.cos(a)], BENCH_PULSE)
    data = sample_cauchy_data(model, bench_chart(profile, margin, nodes))
    return add_noise(data, noise, seed)
