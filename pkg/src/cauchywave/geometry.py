"""Subgraph domains, the backward cone and the boundary aperture chart.

The domain is ``Omega = {(x, y) : y < Y(x)}`` for a smooth profile ``Y`` with
``|Y(x)| <= C1 + C2 |x|``, ``C2 < 1``.  For a target ``(x*, y*, t*)`` inside
``Omega`` the data are needed on the cap of the cone
``K = {y - y* >= |x - x*|}`` cut by the boundary, during the time window
``T-(x) <= t <= T+(x)`` with ``T+-(x) = t* +- (Y(x) - y*)``.
"""

import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

from .errors import ConfigurationError, GeometryError, ValidationError
from .quadrature import gauss_legendre

__all__ = [
    "DomainProfile",
    "ReconstructionTarget",
    "ScattererBall",
    "ApertureChart",
    "GrowthReport",
    "flat_profile",
    "tilted_profile",
    "gaussian_bump_profile",
    "custom_series_profile",
    "profile_eval",
    "validate_growth",
    "cone_cap_radius",
    "build_aperture",
    "time_window",
    "default_margin",
]

PROFILE_KINDS = ("flat", "tilted", "gaussian_bump", "custom_series")


@dataclass(frozen=True)
class DomainProfile:
    """Boundary graph ``y = Y(x)`` over ``R^(n-1)``.

    ``flat``:          ``Y = c``
    ``tilted``:        ``Y = c + a.x``
    ``gaussian_bump``: ``Y = c + A exp(-|x - x0|^2 / width^2)``
    ``custom_series``: ``Y = c + a.x + sum_k A_k exp(-|x - x0_k|^2 / width_k^2)``
    """

    kind: str
    dim_n: int
    level: float = 0.0
    slope: Tuple[float, ...] = ()
    bumps: Tuple[Tuple[float, float, Tuple[float, ...]], ...] = ()
    growth_c1: float = 0.0
    growth_c2: float = 0.0

    def __post_init__(self):
        if self.kind not in PROFILE_KINDS:
            raise ConfigurationError(f"unknown profile kind {self.kind!r}; expected one of {PROFILE_KINDS}")
        if self.dim_n not in (2, 3):
            raise ConfigurationError(f"dim_n must be 2 or 3, got {self.dim_n!r}")
        d = self.dim_n - 1
        slope = tuple(float(v) for v in self.slope) or (0.0,) * d
        if len(slope) != d:
            raise ConfigurationError(f"slope must have {d} components, got {len(slope)}")
        bumps = []
        for amp, width, center in self.bumps:
            center = tuple(float(v) for v in np.atleast_1d(center))
            if len(center) != d:
                raise ConfigurationError(f"bump center must have {d} components")
            if not width > 0:
                raise ConfigurationError(f"bump width must be positive, got {width!r}")
            bumps.append((float(amp), float(width), center))
        object.__setattr__(self, "slope", slope)
        object.__setattr__(self, "bumps", tuple(bumps))
        if self.growth_c1 < 0 or not (0 <= self.growth_c2 < 1):
            raise ConfigurationError(
                f"growth constants need C1 >= 0 and 0 <= C2 < 1, got ({self.growth_c1}, {self.growth_c2})"
            )

    def evaluate(self, x):
        """Return ``Y(x)`` and ``grad Y(x)`` for points of shape ``(..., n-1)``."""
        x = np.asarray(x, dtype=float)
        if self.dim_n == 2 and x.ndim == 0:
            x = x[None]
        a = np.asarray(self.slope)
        val = self.level + x @ a
        grad = np.broadcast_to(a, x.shape).copy()
        for amp, width, center in self.bumps:
            dx = x - np.asarray(center)
            g = amp * np.exp(-np.sum(dx * dx, axis=-1) / width**2)
            val = val + g
            grad += (-2.0 / width**2) * g[..., None] * dx
        return val, grad

    def __call__(self, x):
        return self.evaluate(x)[0]


def flat_profile(level, dim_n=2):
    return DomainProfile("flat", dim_n, level=level, growth_c1=abs(level), growth_c2=0.0)


def tilted_profile(level, slope, dim_n=None, growth_c1=None, growth_c2=None):
    slope = tuple(np.atleast_1d(np.asarray(slope, dtype=float)))
    dim_n = dim_n or len(slope) + 1
    norm = float(np.linalg.norm(slope))
    return DomainProfile(
        "tilted",
        dim_n,
        level=level,
        slope=slope,
        growth_c1=abs(level) if growth_c1 is None else growth_c1,
        growth_c2=min(norm, 0.999999) if growth_c2 is None else growth_c2,
    )


def gaussian_bump_profile(level, amplitude, width, center=None, dim_n=2):
    center = (0.0,) * (dim_n - 1) if center is None else tuple(np.atleast_1d(center))
    return DomainProfile(
        "gaussian_bump",
        dim_n,
        level=level,
        bumps=((amplitude, width, center),),
        growth_c1=abs(level) + abs(amplitude),
        growth_c2=0.0,
    )


def custom_series_profile(level, slope, bumps, dim_n, growth_c1, growth_c2):
    return DomainProfile(
        "custom_series",
        dim_n,
        level=level,
        slope=tuple(slope),
        bumps=tuple(bumps),
        growth_c1=growth_c1,
        growth_c2=growth_c2,
    )


def profile_eval(profile: DomainProfile, x):
    """Analytic ``(Y, grad Y)``."""
    return profile.evaluate(x)


@dataclass(frozen=True)
class GrowthReport:
    worst_margin: float
    worst_x: np.ndarray
    samples: int


def validate_growth(profile: DomainProfile, box_halfwidth: float, samples: int) -> GrowthReport:
    """Check ``|Y(x)| <= C1 + C2 |x|`` on a uniform grid over the box.

    ``samples`` is the number of grid points per axis.  Raises
    :class:`ValidationError` naming the worst point when the bound fails.
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    axis = np.linspace(-box_halfwidth, box_halfwidth, samples) if samples > 1 else np.zeros(1)
    d = profile.dim_n - 1
    grids = np.meshgrid(*([axis] * d), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=-1)
    y = profile(pts)
    bound = profile.growth_c1 + profile.growth_c2 * np.linalg.norm(pts, axis=-1)
    margin = bound - np.abs(y)
    k = int(np.argmin(margin))
    report = GrowthReport(float(margin[k]), pts[k].copy(), len(pts))
    if margin[k] < -1e-12 * max(1.0, abs(y[k])):
        raise ValidationError(
            f"growth bound |Y(x)| <= {profile.growth_c1:g} + {profile.growth_c2:g}|x| violated "
            f"at x={pts[k].tolist()} (|Y|={abs(y[k]):.6g}, bound={bound[k]:.6g})"
        )
    return report


@dataclass(frozen=True)
class ReconstructionTarget:
    """Space-time point ``(x*, y*, t*)`` at which the field is recovered."""

    x_star: Tuple[float, ...]
    y_star: float
    t_star: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "x_star", tuple(float(v) for v in np.atleast_1d(self.x_star)))
        object.__setattr__(self, "y_star", float(self.y_star))
        object.__setattr__(self, "t_star", float(self.t_star))

    @property
    def x(self):
        return np.asarray(self.x_star)

    def check_inside(self, profile: DomainProfile):
        if len(self.x_star) != profile.dim_n - 1:
            raise GeometryError(
                f"target has {len(self.x_star)} x-components, profile needs {profile.dim_n - 1}"
            )
        y_bound = float(profile(self.x))
        if not self.y_star < y_bound:
            raise GeometryError(
                f"target y*={self.y_star:g} is not below the boundary Y(x*)={y_bound:g}"
            )


@dataclass(frozen=True)
class ScattererBall:
    """Closed ball ``omega`` in which the homogeneous wave equation may fail."""

    center: Tuple[float, ...]
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(v) for v in self.center))
        if not self.radius > 0:
            raise ConfigurationError("scatterer radius must be positive")

    def distance_to_cone(self, target: ReconstructionTarget) -> float:
        """Distance from the ball to the cone ``y - y* >= |x - x*|``."""
        c = np.asarray(self.center)
        rx = float(np.linalg.norm(c[:-1] - target.x))
        ry = c[-1] - target.y_star
        if ry >= rx:
            dist = 0.0
        elif ry + rx >= 0:
            dist = (rx - ry) / math.sqrt(2.0)
        else:
            dist = math.hypot(rx, ry)
        return dist - self.radius

    def contains(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=float)
        return np.linalg.norm(p - np.asarray(self.center), axis=-1) <= self.radius


def time_window(profile: DomainProfile, target: ReconstructionTarget, x):
    """Return ``(T-(x), T+(x)) = t* -+ (Y(x) - y*)``."""
    height = np.asarray(profile(x)) - target.y_star
    if np.any(height <= 0):
        raise GeometryError(f"Y(x) <= y* = {target.y_star:g}; time window is empty")
    return target.t_star - height, target.t_star + height


def _directions(dim_n, count=64):
    if dim_n == 2:
        return np.array([[1.0], [-1.0]])
    theta = 2.0 * math.pi * np.arange(count) / count
    return np.stack([np.cos(theta), np.sin(theta)], axis=-1)


def cone_cap_radius(profile: DomainProfile, target: ReconstructionTarget, tol=1e-13) -> float:
    """Radius of the smallest ball around ``x*`` containing the projected cone cap.

    Along each direction ``e`` the crossing of ``Y(x* + r e) - y* = r`` is
    bracketed on ``[0, R]`` with ``R = (C1 + |y*| + C2 |x*|) / (1 - C2) + 1`` and
    refined by bisection; the cap is assumed star-shaped about ``x*``.
    """
    target.check_inside(profile)
    c1, c2 = profile.growth_c1, profile.growth_c2
    r_hi = (c1 + abs(target.y_star) + c2 * float(np.linalg.norm(target.x))) / (1.0 - c2) + 1.0

    def gap(r, e):
        return float(profile(target.x + r * e)) - target.y_star - r

    radius = 0.0
    for e in _directions(profile.dim_n):
        if gap(r_hi, e) >= 0:
            raise GeometryError(
                f"cone cap not bracketed within |x - x*| <= {r_hi:g} along direction {e.tolist()}"
            )
        lo, hi = 0.0, r_hi
        while hi - lo > tol * max(1.0, hi):
            mid = 0.5 * (lo + hi)
            if gap(mid, e) >= 0:
                lo = mid
            else:
                hi = mid
        radius = max(radius, hi)
    return radius


def default_margin(h_max, eps=1e-6):
    """Chart margin ``3 sqrt(h ln(1/eps))`` beyond the cone cap."""
    return 3.0 * math.sqrt(h_max * math.log(1.0 / eps))


@dataclass(frozen=True, eq=False)
class ApertureChart:
    """Quadrature chart of the boundary patch carrying the Cauchy data.

    Per x-node ``i`` the chart stores the boundary point ``(x_i, Y_i)``, the
    unnormalized normal ``(-grad Y, 1)``, the surface element
    ``sqrt(1 + |grad Y|^2)``, the x-weight and the time window.  Times are
    sampled per node as ``t = t* + tau_j (Y_i - y*)`` with Gauss-Legendre
    ``tau_j`` on ``[-1, 1]``.
    """

    profile: DomainProfile
    target: ReconstructionTarget
    radius: float
    margin: float
    cap_radius: float
    node_counts: Tuple[int, ...]
    x: np.ndarray
    x_weights: np.ndarray
    Y: np.ndarray
    grad_Y: np.ndarray
    tau: np.ndarray
    tau_weights: np.ndarray
    polar: Optional[Tuple[np.ndarray, np.ndarray]] = field(default=None, repr=False)

    @property
    def dim_n(self):
        return self.profile.dim_n

    @property
    def n_x(self):
        return self.x.shape[0]

    @property
    def n_t(self):
        return self.tau.shape[0]

    @property
    def normal_unnormalized(self):
        return np.concatenate([-self.grad_Y, np.ones((self.n_x, 1))], axis=1)

    @property
    def surface_element(self):
        return np.sqrt(1.0 + np.sum(self.grad_Y**2, axis=1))

    @property
    def unit_normal(self):
        return self.normal_unnormalized / self.surface_element[:, None]

    @property
    def height(self):
        """``Y(x_i) - y*``, which is also ``dt/dtau``."""
        return self.Y - self.target.y_star

    @property
    def T_minus(self):
        return self.target.t_star - self.height

    @property
    def T_plus(self):
        return self.target.t_star + self.height

    def times(self):
        """Sample times, shape ``(n_x, n_t)``."""
        return self.target.t_star + self.tau[None, :] * self.height[:, None]

    def surface_area(self):
        return float(np.sum(self.x_weights * self.surface_element))

    def boundary_points(self):
        return np.concatenate([self.x, self.Y[:, None]], axis=1)


def _disk_rule(center, radius, n_r, n_theta):
    r, wr = gauss_legendre(n_r, 0.0, radius)
    theta = 2.0 * math.pi * (np.arange(n_theta) + 0.5) / n_theta
    R, TH = np.meshgrid(r, theta, indexing="ij")
    pts = np.stack([center[0] + R * np.cos(TH), center[1] + R * np.sin(TH)], axis=-1).reshape(-1, 2)
    wts = (wr[:, None] * r[:, None] * (2.0 * math.pi / n_theta) * np.ones_like(TH)).ravel()
    return pts, wts, (R.ravel(), TH.ravel())


def build_aperture(profile: DomainProfile, target: ReconstructionTarget, margin: float, node_counts) -> ApertureChart:
    """Build the aperture chart of radius ``cone_cap_radius + margin``.

    ``node_counts`` is ``(nodes_x, nodes_t)`` for ``n = 2`` and
    ``(nodes_r, nodes_theta, nodes_t)`` for ``n = 3``.
    """
    if margin < 0:
        raise ConfigurationError(f"margin must be >= 0, got {margin!r}")
    node_counts = tuple(int(v) for v in node_counts)
    expected = 2 if profile.dim_n == 2 else 3
    if len(node_counts) != expected or min(node_counts) < 1:
        raise ConfigurationError(
            f"node_counts for n={profile.dim_n} must be {expected} positive integers, got {node_counts}"
        )
    cap = cone_cap_radius(profile, target)
    radius = cap + margin
    polar = None
    if profile.dim_n == 2:
        xs, wx = gauss_legendre(node_counts[0], target.x[0] - radius, target.x[0] + radius)
        xs = xs[:, None]
    else:
        xs, wx, polar = _disk_rule(target.x, radius, node_counts[0], node_counts[1])
    Y, grad = profile.evaluate(xs)
    bad = np.nonzero(Y <= target.y_star)[0]
    if bad.size:
        i = int(bad[0])
        raise GeometryError(
            f"aperture invalid: Y(x)={Y[i]:.6g} <= y*={target.y_star:g} at node x={xs[i].tolist()}"
        )
    tau, wt = gauss_legendre(node_counts[-1], -1.0, 1.0)
    return ApertureChart(
        profile=profile,
        target=target,
        radius=radius,
        margin=float(margin),
        cap_radius=cap,
        node_counts=node_counts,
        x=xs,
        x_weights=wx,
        Y=Y,
        grad_Y=grad,
        tau=tau,
        tau_weights=wt,
        polar=polar,
    )
