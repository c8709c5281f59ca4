"""Exact wave fields and their Cauchy data on the aperture chart.

Every model solves ``u_tt - Laplace u = 0`` on its validity region and
returns the value, the spatial gradient and the time derivative, so the
normal derivative on the boundary is computed analytically.
"""

import csv
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Tuple

import numpy as np
from scipy.integrate import quad_vec

from .errors import ConfigurationError, DataError, DomainError, NumericalError
from .geometry import ApertureChart, DomainProfile, ReconstructionTarget, ScattererBall, time_window

__all__ = [
    "PulseSpec",
    "WaveFieldModel",
    "PlaneWave",
    "PointSource3D",
    "CylindricalSource2D",
    "StandingWave",
    "AffineField",
    "Superposition",
    "CauchyDataSet",
    "plane_wave",
    "point_source_3d",
    "cylindrical_source_2d",
    "standing_wave",
    "affine_field",
    "superpose",
    "sample_cauchy_data",
    "add_noise",
    "write_dataset_csv",
    "read_dataset_csv",
]


@dataclass(frozen=True)
class PulseSpec:
    """Gaussian pulse ``A * exp(-(s - delay)^2 / width^2)``."""

    width: float = 0.5
    amplitude: float = 1.0
    delay: float = 0.0

    def __post_init__(self):
        if not self.width > 0:
            raise ConfigurationError(f"pulse width must be positive, got {self.width!r}")

    def value(self, s):
        z = (np.asarray(s, dtype=float) - self.delay) / self.width
        return self.amplitude * np.exp(-z * z)

    def derivative(self, s):
        z = (np.asarray(s, dtype=float) - self.delay) / self.width
        return self.amplitude * (-2.0 * z / self.width) * np.exp(-z * z)

    def support_start(self, cutoff=5.0):
        """Argument below which the pulse is under ``exp(-cutoff^2)``."""
        return self.delay - cutoff * self.width


class WaveFieldModel:
    """Base class: an exact solution of the homogeneous wave equation.

    Subclasses implement :meth:`evaluate` returning ``(u, grad_p u, u_t)``
    for points ``p`` of shape ``(..., n)`` and times broadcastable to
    ``p[..., 0]``.
    """

    kind = "abstract"
    dim_n: Optional[int] = None

    def evaluate(self, p, t):
        raise NotImplementedError

    def u(self, p, t):
        return self.evaluate(p, t)[0]

    def check_valid(self, p):
        """Raise :class:`DomainError` if any point lies outside the validity region."""

    def check_setup(self, profile: DomainProfile, target: ReconstructionTarget):
        """Check the model's placement against the domain and the cone."""

    def describe(self) -> dict:
        raise NotImplementedError


def _split(p):
    return np.asarray(p, dtype=float)


class _SourceMixin:
    """Shared validity checks for fields radiated from a point ``q``."""

    def _radius(self, p):
        diff = _split(p) - np.asarray(self.source)
        return diff, np.sqrt(np.sum(diff * diff, axis=-1))

    def check_valid(self, p):
        _, r = self._radius(p)
        if np.any(r < self.r_min):
            i = int(np.argmin(r))
            raise DomainError(f"source field evaluated at distance {r.ravel()[i]:.3g} < r_min={self.r_min:g}")
        if self.scatterer is not None:
            inside = self.scatterer.contains(p)
            if np.any(inside):
                i = int(np.argmax(inside.ravel()))
                pt = np.asarray(p).reshape(-1, self.dim_n)[i]
                raise DomainError(f"evaluation point {pt.tolist()} lies inside the scatterer ball")

    def check_setup(self, profile, target):
        q = np.asarray(self.source)
        if self.scatterer is None:
            if not q[-1] > float(profile(q[:-1])):
                raise DomainError(
                    f"source {q.tolist()} lies in the closed domain; declare a scatterer ball containing it"
                )
            return
        ball = self.scatterer
        if not ball.contains(q[None, :])[0]:
            raise DomainError(f"source {q.tolist()} is not inside the declared scatterer ball")
        gap = ball.distance_to_cone(target)
        if not gap > 0:
            raise DomainError(f"scatterer ball intersects the cone K (distance {gap:.3g})")

    def describe(self):
        out = {"kind": self.kind, "source": list(self.source), "pulse": _pulse_dict(self.pulse)}
        if self.scatterer is not None:
            out["scatterer"] = {"center": list(self.scatterer.center), "radius": self.scatterer.radius}
        return out


@dataclass(frozen=True)
class PlaneWave(WaveFieldModel):
    direction: Tuple[float, ...]
    pulse: PulseSpec = PulseSpec()
    kind = "plane_wave"

    @property
    def dim_n(self):
        return len(self.direction)

    def evaluate(self, p, t):
        p = _split(p)
        d = np.asarray(self.direction)
        arg = np.asarray(t, dtype=float) - p @ d
        fp = self.pulse.derivative(arg)
        return self.pulse.value(arg), -fp[..., None] * d, fp

    def describe(self):
        return {"kind": self.kind, "direction": list(self.direction), "pulse": _pulse_dict(self.pulse)}


@dataclass(frozen=True)
class PointSource3D(_SourceMixin, WaveFieldModel):
    """Retarded spherical wave ``A f(t - |p - q|) / (4 pi |p - q|)``."""

    source: Tuple[float, float, float]
    pulse: PulseSpec = PulseSpec()
    scatterer: Optional[ScattererBall] = None
    r_min: float = 1e-6
    kind = "point_source_3d"
    dim_n = 3

    def evaluate(self, p, t):
        self.check_valid(p)
        diff, r = self._radius(p)
        arg = np.asarray(t, dtype=float) - r
        f = self.pulse.value(arg)
        fp = self.pulse.derivative(arg)
        four_pi_r = 4.0 * math.pi * r
        u = f / four_pi_r
        du_dr = -fp / four_pi_r - f / (four_pi_r * r)
        grad = (du_dr / r)[..., None] * diff
        return u, grad, fp / four_pi_r


@dataclass(frozen=True)
class CylindricalSource2D(_SourceMixin, WaveFieldModel):
    """Line source in 2-D: ``A/(2 pi) int_r^inf f(t - s) / sqrt(s^2 - r^2) ds``.

    With ``s = r cosh(theta)`` the integrand becomes the smooth
    ``f(t - r cosh(theta))`` on ``[0, theta_max]``, where ``theta_max`` ends
    the pulse support; the integral is computed adaptively for all points at
    once.
    """

    source: Tuple[float, float]
    pulse: PulseSpec = PulseSpec()
    scatterer: Optional[ScattererBall] = None
    r_min: float = 1e-6
    epsabs: float = 1e-14
    epsrel: float = 1e-12
    support_cutoff: float = 8.0
    kind = "cylindrical_source_2d"
    dim_n = 2

    def evaluate(self, p, t):
        self.check_valid(p)
        diff, r = self._radius(p)
        t = np.broadcast_to(np.asarray(t, dtype=float), r.shape)
        shape = r.shape
        r, t = r.ravel(), t.ravel()
        reach = (t - self.pulse.delay + self.support_cutoff * self.pulse.width) / r
        live = reach > 1.0
        u = np.zeros(r.size)
        dr = np.zeros(r.size)
        dt = np.zeros(r.size)
        if np.any(live):
            rl, tl = r[live], t[live]
            theta_max = np.arccosh(reach[live])
            f, fp = self.pulse.value, self.pulse.derivative

            def integrand(v):
                th = theta_max * v
                ch = np.cosh(th)
                arg = tl - rl * ch
                g = fp(arg)
                return np.concatenate([theta_max * f(arg), -theta_max * ch * g, theta_max * g])

            res, err, info = quad_vec(
                integrand, 0.0, 1.0, epsabs=self.epsabs, epsrel=self.epsrel, norm="max",
                limit=2000, full_output=True,
            )
            if not info.success:
                raise NumericalError(
                    f"cylindrical source quadrature did not converge: {info.message}; "
                    f"estimated error {err:.3g}, {info.neval} evaluations, {info.intervals.shape[0]} intervals"
                )
            k = rl.size
            scale = 1.0 / (2.0 * math.pi)
            u[live] = scale * res[:k]
            dr[live] = scale * res[k:2 * k]
            dt[live] = scale * res[2 * k:]
        u, dr, dt = u.reshape(shape), dr.reshape(shape), dt.reshape(shape)
        rr = r.reshape(shape)
        grad = (dr / rr)[..., None] * diff
        return u, grad, dt


@dataclass(frozen=True)
class StandingWave(WaveFieldModel):
    """``A cos(k.x + k_y y + phase) cos(omega t)`` with ``omega = |(k, k_y)|``."""

    k: Tuple[float, ...]
    k_y: float
    phase: float = 0.0
    amplitude: float = 1.0
    kind = "standing_wave"

    @property
    def dim_n(self):
        return len(self.k) + 1

    @property
    def omega(self):
        return math.sqrt(sum(v * v for v in self.k) + self.k_y**2)

    def evaluate(self, p, t):
        p = _split(p)
        kv = np.array(list(self.k) + [self.k_y])
        arg = p @ kv + self.phase
        t = np.asarray(t, dtype=float)
        ct, st = np.cos(self.omega * t), np.sin(self.omega * t)
        u = self.amplitude * np.cos(arg) * ct
        grad = (-self.amplitude * np.sin(arg) * ct)[..., None] * kv
        return u, grad, -self.amplitude * self.omega * np.cos(arg) * st

    def describe(self):
        return {"kind": self.kind, "k": list(self.k), "k_y": self.k_y, "phase": self.phase, "amplitude": self.amplitude}


@dataclass(frozen=True)
class AffineField(WaveFieldModel):
    """``u = c0 + c_t t + c_p . p``; every affine function solves the wave equation."""

    dim: int
    c0: float = 0.0
    c_t: float = 0.0
    c_p: Tuple[float, ...] = ()
    kind = "affine"

    @property
    def dim_n(self):
        return self.dim

    def evaluate(self, p, t):
        p = _split(p)
        cp = np.asarray(self.c_p) if self.c_p else np.zeros(self.dim)
        t = np.broadcast_to(np.asarray(t, dtype=float), p.shape[:-1])
        u = self.c0 + self.c_t * t + p @ cp
        return u, np.broadcast_to(cp, p.shape).copy(), np.full(p.shape[:-1], float(self.c_t))

    def describe(self):
        return {"kind": self.kind, "dim": self.dim, "c0": self.c0, "c_t": self.c_t, "c_p": list(self.c_p)}


@dataclass(frozen=True)
class Superposition(WaveFieldModel):
    components: Tuple[WaveFieldModel, ...]
    kind = "superposition"

    @property
    def dim_n(self):
        return self.components[0].dim_n

    def check_valid(self, p):
        for c in self.components:
            c.check_valid(p)

    def check_setup(self, profile, target):
        for c in self.components:
            c.check_setup(profile, target)

    def evaluate(self, p, t):
        parts = [c.evaluate(p, t) for c in self.components]
        return tuple(sum(vals) for vals in zip(*parts))

    def describe(self):
        return {"kind": self.kind, "components": [c.describe() for c in self.components]}


def _pulse_dict(pulse):
    return {"width": pulse.width, "amplitude": pulse.amplitude, "delay": pulse.delay}


# ----------------------------------------------------------------------
# factories
# ----------------------------------------------------------------------
def plane_wave(direction, pulse: PulseSpec = PulseSpec()) -> PlaneWave:
    d = tuple(float(v) for v in direction)
    norm = math.sqrt(sum(v * v for v in d))
    if len(d) not in (2, 3) or abs(norm - 1.0) > 1e-12:
        raise ConfigurationError(f"plane-wave direction must be a unit vector in R^2 or R^3, got {d} (|d|={norm!r})")
    return PlaneWave(d, pulse)


def point_source_3d(source, pulse: PulseSpec = PulseSpec(), scatterer: ScattererBall = None) -> PointSource3D:
    q = tuple(float(v) for v in source)
    if len(q) != 3:
        raise ConfigurationError("point_source_3d needs a source point in R^3")
    return PointSource3D(q, pulse, scatterer)


def cylindrical_source_2d(source, pulse: PulseSpec = PulseSpec(), scatterer: ScattererBall = None) -> CylindricalSource2D:
    q = tuple(float(v) for v in source)
    if len(q) != 2:
        raise ConfigurationError("cylindrical_source_2d needs a source point in R^2")
    return CylindricalSource2D(q, pulse, scatterer)


def standing_wave(k, k_y, phase=0.0, amplitude=1.0) -> StandingWave:
    return StandingWave(tuple(float(v) for v in np.atleast_1d(k)), float(k_y), float(phase), float(amplitude))


def affine_field(dim_n, c0=0.0, c_t=0.0, c_p=None) -> AffineField:
    c_p = () if c_p is None else tuple(float(v) for v in c_p)
    if c_p and len(c_p) != dim_n:
        raise ConfigurationError(f"c_p must have {dim_n} components")
    return AffineField(int(dim_n), float(c0), float(c_t), c_p)


def superpose(*models: WaveFieldModel) -> Superposition:
    if not models:
        raise ConfigurationError("superpose needs at least one model")
    dims = {m.dim_n for m in models}
    if len(dims) != 1:
        raise ConfigurationError(f"cannot superpose fields of different dimensions {sorted(dims)}")
    return Superposition(tuple(models))


# ----------------------------------------------------------------------
# Cauchy data
# ----------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class CauchyDataSet:
    """Field value and unit-normal derivative at the chart's space-time nodes.

    ``u`` and ``dnu`` have shape ``(n_x, n_t)``.  ``trace_minus`` and
    ``trace_plus`` are ``u(x*, Y(x*), T-+(x*))``.
    """

    chart: ApertureChart
    u: np.ndarray
    dnu: np.ndarray
    trace_minus: Optional[float]
    trace_plus: Optional[float]
    ground_truth: Optional[float] = None
    noise_level: float = 0.0
    noise_seed: Optional[int] = None
    model: Optional[dict] = field(default=None, repr=False)

    @property
    def target(self):
        return self.chart.target

    @property
    def times(self):
        return self.chart.times()

    @property
    def n_samples(self):
        return self.u.size + 2

    @property
    def scale(self):
        """``max |u|`` over all samples; reference for relative errors."""
        vals = [np.max(np.abs(self.u))]
        vals += [abs(v) for v in (self.trace_minus, self.trace_plus) if v is not None]
        return float(max(vals))

    def scaled(self, factor):
        return replace(
            self,
            u=factor * self.u,
            dnu=factor * self.dnu,
            trace_minus=None if self.trace_minus is None else factor * self.trace_minus,
            trace_plus=None if self.trace_plus is None else factor * self.trace_plus,
            ground_truth=None if self.ground_truth is None else factor * self.ground_truth,
        )

    def combined(self, other, alpha=1.0, beta=1.0):
        """Linear combination ``alpha * self + beta * other`` on the same chart."""
        if other.chart is not self.chart:
            raise DataError("datasets live on different charts")

        def mix(a, b):
            if a is None or b is None:
                return None
            return alpha * a + beta * b

        return replace(
            self,
            u=alpha * self.u + beta * other.u,
            dnu=alpha * self.dnu + beta * other.dnu,
            trace_minus=mix(self.trace_minus, other.trace_minus),
            trace_plus=mix(self.trace_plus, other.trace_plus),
            ground_truth=mix(self.ground_truth, other.ground_truth),
            model=None,
        )


def sample_cauchy_data(model: WaveFieldModel, chart: ApertureChart, target: ReconstructionTarget = None) -> CauchyDataSet:
    """Sample ``u`` and ``du/dnu`` at every (node, time) pair of the chart.

    Also records the two trace values at ``(x*, Y(x*), T-+(x*))`` and the
    ground truth ``u(x*, y*, t*)``.
    """
    target = chart.target if target is None else target
    if target != chart.target:
        raise DataError("target does not match the chart's target")
    if model.dim_n != chart.dim_n:
        raise DomainError(f"model dimension {model.dim_n} does not match chart dimension {chart.dim_n}")
    model.check_setup(chart.profile, target)

    pts = chart.boundary_points()
    times = chart.times()
    grid = np.broadcast_to(pts[:, None, :], times.shape + (pts.shape[1],))
    try:
        model.check_valid(grid)
    except DomainError as exc:
        raise DomainError(f"chart node outside the model's validity region: {exc}") from exc
    u, grad, _ = model.evaluate(grid, times)
    nu = chart.unit_normal
    dnu = np.einsum("ijk,ik->ij", grad, nu)

    y_top = float(chart.profile(target.x))
    apex = np.array(list(target.x_star) + [y_top])
    t_minus, t_plus = time_window(chart.profile, target, target.x)
    tr, _, _ = model.evaluate(np.stack([apex, apex]), np.array([float(t_minus), float(t_plus)]))
    star = np.array(list(target.x_star) + [target.y_star])
    truth = float(model.evaluate(star[None, :], np.array([target.t_star]))[0][0])
    return CauchyDataSet(
        chart=chart,
        u=np.ascontiguousarray(u, dtype=float),
        dnu=np.ascontiguousarray(dnu, dtype=float),
        trace_minus=float(tr[0]),
        trace_plus=float(tr[1]),
        ground_truth=truth,
        model=model.describe(),
    )


def add_noise(data: CauchyDataSet, level: float, seed: int) -> CauchyDataSet:
    """Add zero-mean Gaussian noise of relative level ``level``.

    Standard deviations are ``level * max|u|`` for the values (including the
    two traces) and ``level * max|du/dnu|`` for the normal derivatives.
    """
    if level < 0:
        raise ValueError(f"noise level must be >= 0, got {level!r}")
    if level == 0:
        return replace(data, noise_level=0.0, noise_seed=seed)
    rng = np.random.default_rng(seed)
    su = level * float(np.max(np.abs(data.u)))
    sd = level * float(np.max(np.abs(data.dnu)))
    u = data.u + rng.normal(0.0, su, size=data.u.shape)
    dnu = data.dnu + rng.normal(0.0, sd, size=data.dnu.shape)
    tm, tp = rng.normal(0.0, su, size=2)
    return replace(
        data,
        u=u,
        dnu=dnu,
        trace_minus=data.trace_minus + float(tm),
        trace_plus=data.trace_plus + float(tp),
        noise_level=float(level),
        noise_seed=int(seed),
    )


# ----------------------------------------------------------------------
# persistence
# ----------------------------------------------------------------------
def _fmt(v):
    return "nan" if v is None else format(float(v), ".17g")


def dataset_header(dim_n):
    xs = ["x"] if dim_n == 2 else [f"x{i + 1}" for i in range(dim_n - 1)]
    return ["ix", "it"] + xs + ["y", "t", "u", "dnu"]


def write_dataset_csv(data: CauchyDataSet, path):
    """Write node samples plus two trace rows (``ix = -1``, ``it = 0`` for T-, ``1`` for T+)."""
    chart = data.chart
    times = chart.times()
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(dataset_header(chart.dim_n))
        for i in range(chart.n_x):
            xs = [_fmt(v) for v in chart.x[i]]
            yv = _fmt(chart.Y[i])
            for j in range(chart.n_t):
                out.writerow([i, j] + xs + [yv, _fmt(times[i, j]), _fmt(data.u[i, j]), _fmt(data.dnu[i, j])])
        target = chart.target
        y_top = float(chart.profile(target.x))
        xs = [_fmt(v) for v in target.x_star]
        for j, (tv, uv) in enumerate(((chart.target.t_star - (y_top - target.y_star), data.trace_minus),
                                      (chart.target.t_star + (y_top - target.y_star), data.trace_plus))):
            out.writerow([-1, j] + xs + [_fmt(y_top), _fmt(tv), _fmt(uv), "nan"])


def read_dataset_csv(path, chart: ApertureChart, meta: dict = None) -> CauchyDataSet:
    """Read a dataset written by :func:`write_dataset_csv` onto ``chart``.

    Node coordinates in the file must match the chart to 1e-12.
    """
    u = np.full((chart.n_x, chart.n_t), np.nan)
    dnu = np.full((chart.n_x, chart.n_t), np.nan)
    traces = [None, None]
    times = chart.times()
    d = chart.dim_n - 1
    try:
        with open(path, newline="") as fh:
            rows = csv.reader(fh)
            header = next(rows)
            if header != dataset_header(chart.dim_n):
                raise DataError(f"unexpected dataset header {header}")
            for row in rows:
                i, j = int(row[0]), int(row[1])
                vals = [float(v) for v in row[2:]]
                if i == -1:
                    traces[j] = vals[d + 2]
                    continue
                x, y, t = vals[:d], vals[d], vals[d + 1]
                if (i >= chart.n_x or j >= chart.n_t
                        or not np.allclose(x, chart.x[i], rtol=0, atol=1e-12)
                        or abs(y - chart.Y[i]) > 1e-12 or abs(t - times[i, j]) > 1e-12):
                    raise DataError(f"dataset row ({i}, {j}) does not match the chart nodes")
                u[i, j], dnu[i, j] = vals[d + 2], vals[d + 3]
    except (ValueError, IndexError, StopIteration) as exc:
        if isinstance(exc, DataError):
            raise
        raise DataError(f"malformed dataset file {path}: {exc}") from exc
    if np.isnan(u).any() or np.isnan(dnu).any():
        raise DataError(f"dataset {path} does not cover every chart node")
    meta = meta or {}
    return CauchyDataSet(
        chart=chart,
        u=u,
        dnu=dnu,
        trace_minus=traces[0],
        trace_plus=traces[1],
        ground_truth=meta.get("ground_truth"),
        noise_level=meta.get("noise", {}).get("level", 0.0),
        noise_seed=meta.get("noise", {}).get("seed"),
        model=meta.get("field"),
    )
