"""Reduced-size invariant suites run by ``cauchywave selftest``.

Each check returns a :class:`CheckResult`; :func:`run_selftest` collects
them into a :class:`SelftestReport`.  ``kernel_overrides`` is forwarded to
every kernel built by the kernel suite, which is how a misconfiguration
(for example a huge ``sigma_min``) is injected deliberately.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .errors import CauchyWaveError
from .forward import PulseSpec, plane_wave, point_source_3d, sample_cauchy_data, standing_wave
from .geometry import (
    ReconstructionTarget,
    build_aperture,
    flat_profile,
    gaussian_bump_profile,
    time_window,
)
from .kernel import KernelParams, make_kernel

logger = logging.getLogger(__name__)

__all__ = ["CheckResult", "SelftestReport", "run_selftest", "fd_order_ratio"]


@dataclass
class CheckResult:
    module: str
    invariant: str
    passed: bool
    observed: str
    expected: str

    def line(self):
        tag = "PASS" if self.passed else "FAIL"
        return f"[{tag}] {self.module}: {self.invariant} (observed {self.observed}; expected {self.expected})"


@dataclass
class SelftestReport:
    results: List[CheckResult] = field(default_factory=list)

    @property
    def passed(self):
        return all(r.passed for r in self.results)

    @property
    def failures(self):
        return [r for r in self.results if not r.passed]

    def lines(self):
        return [r.line() for r in self.results]


# ----------------------------------------------------------------------
# finite-difference helpers
# ----------------------------------------------------------------------
def _laplacian_fd(f, p, delta, t=None):
    """Second-order FD Laplacian of ``f(p)`` (or ``f(p, t)``) in all of ``p``'s axes."""
    p = np.asarray(p, dtype=float)
    centre = f(p) if t is None else f(p, t)
    acc = -2.0 * p.shape[-1] * centre
    for k in range(p.shape[-1]):
        e = np.zeros(p.shape[-1])
        e[k] = delta
        acc = acc + (f(p + e) + f(p - e) if t is None else f(p + e, t) + f(p - e, t))
    return acc / delta**2


def _wave_residual_fd(f, p, t, delta):
    """FD value of ``u_tt - Laplacian u`` at ``(p, t)``."""
    u_tt = (f(p, t + delta) - 2.0 * f(p, t) + f(p, t - delta)) / delta**2
    return u_tt - _laplacian_fd(f, p, delta, t)


def fd_order_ratio(residual, deltas=(1e-2, 5e-3)):
    """Ratio ``|r(delta_1)| / |r(delta_2)|``; about 4 for second-order decay."""
    r1, r2 = (np.abs(residual(d)) for d in deltas)
    return r1 / r2


def _ratio_check(module, invariant, ratios, tol):
    ratios = np.atleast_1d(ratios)
    ok = bool(np.all(np.abs(ratios - 4.0) <= 4.0 * tol))
    return CheckResult(
        module, invariant, ok,
        f"ratios in [{ratios.min():.3f}, {ratios.max():.3f}]",
        f"4 +- {100 * tol:.0f}%",
    )


# ----------------------------------------------------------------------
# kernel suite
# ----------------------------------------------------------------------
def _phi2_oracle(x, y, h, n_xi=20001):
    """Trapezoid of the even cosine-transform representation of phi (n = 2)."""
    top = 2.0 * abs(y) / h + 2.0 / math.sqrt(h) * math.sqrt(math.log(1e40))
    xi = np.linspace(0.0, top, n_xi)
    f = np.exp(-0.25 * h * xi**2) * np.cos(x * xi) * np.cosh(y * xi)
    return float(np.trapezoid(f, xi)) / math.pi


def kernel_checks(overrides=None) -> List[CheckResult]:
    over = dict(overrides or {})
    out = []

    def kern(h, n):
        return make_kernel(KernelParams(h=h, dim_n=n, **over))

    # closed form against an independent spectral oracle
    k1 = kern(1.0, 2)
    pts = [(0.0, 0.0), (1.0, 1.0), (0.7, -0.4), (-1.3, 0.9)]
    errs = [abs(float(k1.phi(x, y)) - _phi2_oracle(x, y, 1.0)) / max(abs(_phi2_oracle(x, y, 1.0)), 1e-300)
            for x, y in pts]
    out.append(CheckResult("kernel", "phi n=2 closed form vs spectral oracle", max(errs) <= 1e-8,
                           f"max rel {max(errs):.2e}", "<= 1e-8"))

    # trace exactness
    for n, tol in ((2, 1e-12), (3, 1e-8)):
        k = kern(0.5, n)
        xs = np.linspace(-2.0, 2.0, 41)
        x = xs[:, None] if n == 2 else np.stack([xs, 0.5 * xs[::-1]], axis=1)
        err = float(np.max(np.abs(k.phi(x, 0.0) - k.trace(x))))
        out.append(CheckResult("kernel", f"trace exactness n={n}", err <= tol, f"{err:.2e}", f"<= {tol:g}"))

    # harmonicity: FD Laplacian decays at second order
    for n in (2, 3):
        k = kern(1.0, n)
        pts = np.array([[0.3, 0.4], [-0.8, 0.6], [1.1, -0.5]]) if n == 2 else \
            np.array([[0.3, -0.2, 0.4], [-0.8, 0.5, 0.6], [0.6, 0.9, -0.5]])

        def phi_full(p, k=k):
            return k.phi(p[..., :-1], p[..., -1])

        ratios = [fd_order_ratio(lambda d, p=p: _laplacian_fd(phi_full, p, d)) for p in pts]
        out.append(_ratio_check("kernel", f"harmonicity n={n}", ratios, 0.2))

    # wave identity for w (n = 2)
    k = kern(1.0, 2)

    def w_full(p, t):
        return k.w_eval(p[..., :-1], p[..., -1], t)

    pts = [(np.array([0.2, 1.0]), 0.3), (np.array([-0.5, 1.2]), -0.6), (np.array([0.9, 0.8]), 0.1)]
    ratios = [fd_order_ratio(lambda d, p=p, t=t: _wave_residual_fd(w_full, p, t, d)) for p, t in pts]
    out.append(_ratio_check("kernel", "wave identity n=2", ratios, 0.3))

    # characteristic identities: derivatives near t = y against FD of w itself,
    # their cancellation, and the exact trace identity on t = +-y
    for n in (2, 3):
        k = kern(0.5, n)
        x = np.array([0.4]) if n == 2 else np.array([0.4, -0.2])
        y = 0.8
        worst_fd, sums = 0.0, []
        for eps in (1e-2, 1e-3):
            t = y * (1.0 - eps)
            v = k.evaluate(x, y, t)
            step = 1e-6
            fd_y = (k.w_eval(x, y + step, t) - k.w_eval(x, y - step, t)) / (2 * step)
            fd_t = (k.w_eval(x, y, t + step) - k.w_eval(x, y, t - step)) / (2 * step)
            worst_fd = max(worst_fd, abs(v.d_y - fd_y) / abs(fd_y), abs(v.d_t - fd_t) / abs(fd_t))
            sums.append(abs(v.d_y + v.d_t))
        ok = worst_fd <= 1e-5 and sums[1] < sums[0]
        out.append(CheckResult("kernel", f"characteristic identity n={n}", bool(ok),
                               f"derivative vs FD rel {worst_fd:.2e}, |d_y+d_t| {sums[0]:.2e} -> {sums[1]:.2e}",
                               "FD rel <= 1e-5 and |d_y+d_t| decreasing in eps"))
        trace_err = max(abs(float(k.w_eval(x, y, s * y)) - 0.5 * float(k.phi(x, 0.0))) for s in (1.0, -1.0))
        out.append(CheckResult("kernel", f"trace identity w(x,y,+-y)=phi(x,0)/2 n={n}", trace_err <= 1e-10,
                               f"{trace_err:.2e}", "<= 1e-10"))

    # localization outside the cone
    seq = [kern(h, 2) for h in (0.4, 0.2, 0.1, 0.05)]
    mono = True
    for x, y, t in ((1.5, 1.0, 0.0), (1.5, 1.0, 0.5)):
        vals = [k.evaluate(x, y, t) for k in seq]
        for comp in (lambda v: abs(float(v.w)), lambda v: abs(float(v.grad_x[..., 0])), lambda v: abs(float(v.d_y))):
            c = [comp(v) for v in vals]
            mono &= all(c[i + 1] < c[i] for i in range(len(c) - 1))
    out.append(CheckResult("kernel", "localization for |x| > y", mono, "strictly decreasing" if mono else "not monotone",
                           "strictly decreasing in h"))
    return out


# ----------------------------------------------------------------------
# geometry suite
# ----------------------------------------------------------------------
def geometry_checks() -> List[CheckResult]:
    out = []
    target = ReconstructionTarget((0.0,), 0.0, 0.0)
    win = time_window(flat_profile(1.0), target, np.array([[0.3]]))
    ok = np.allclose([win[0][0], win[1][0]], [-1.0, 1.0], rtol=0, atol=0)
    out.append(CheckResult("geometry", "flat time window", bool(ok), f"({win[0][0]}, {win[1][0]})", "(-1, 1)"))

    chart = build_aperture(flat_profile(1.0), target, 0.5, (16, 8))
    area = chart.surface_area()
    out.append(CheckResult("geometry", "measure identity n=2", abs(area - 2 * chart.radius) <= 1e-10,
                           f"{area:.15g}", f"{2 * chart.radius:.15g}"))
    chart3 = build_aperture(flat_profile(1.0, 3), ReconstructionTarget((0.0, 0.0), 0.0), 0.5, (8, 16, 4))
    area3 = chart3.surface_area()
    exact = math.pi * chart3.radius**2
    out.append(CheckResult("geometry", "measure identity n=3", abs(area3 - exact) <= 1e-10 * exact,
                           f"{area3:.15g}", f"{exact:.15g}"))

    bump = build_aperture(gaussian_bump_profile(1.0, 0.3, 1.0), target, 0.5, (16, 8))
    tangent = np.concatenate([np.ones((bump.n_x, 1)), bump.grad_Y], axis=1)
    dots = float(np.max(np.abs(np.sum(bump.normal_unnormalized * tangent, axis=1))))
    out.append(CheckResult("geometry", "normal consistency", dots <= 1e-12, f"{dots:.2e}", "<= 1e-12"))

    order = bool(np.all(bump.T_minus < bump.T_plus))
    out.append(CheckResult("geometry", "window ordering", order, str(order), "T- < T+"))

    rng = np.random.default_rng(7)
    xs = rng.uniform(-3.0, 3.0, size=(1000, 1))
    Y = bump.profile(xs)
    inside = (Y - target.y_star) >= np.abs(xs[:, 0])
    covered = bool(np.all(np.abs(xs[inside, 0]) < bump.radius))
    out.append(CheckResult("geometry", "chart covers the cone cap", covered, f"{int(inside.sum())} cone points",
                           "all strictly inside"))
    return out


# ----------------------------------------------------------------------
# forward suite
# ----------------------------------------------------------------------
def forward_checks() -> List[CheckResult]:
    out = []
    rng = np.random.default_rng(11)
    pw = plane_wave([math.sin(0.3), math.cos(0.3)], PulseSpec(0.5))
    sw = standing_wave([0.7], 1.1, 0.2)
    ps = point_source_3d([0.0, 0.0, 3.0], PulseSpec(0.5))
    for name, model, dim in (("plane_wave", pw, 2), ("standing_wave", sw, 2), ("point_source_3d", ps, 3)):
        ratios = []
        for _ in range(5):
            p = rng.uniform(-1.0, 1.0, size=dim)
            t = float(rng.uniform(-0.5, 0.5)) + (2.5 if dim == 3 else 0.0)
            res = (lambda d, p=p, t=t: _wave_residual_fd(model.u, p[None, :], np.array([t]), d)[0])
            # a vanishing exact residual leaves only the O(delta^2) error
            ratios.append(fd_order_ratio(res))
        out.append(_ratio_check("forward", f"{name} wave residual", ratios, 0.3))

    # normal derivative against a directional finite difference
    chart = build_aperture(gaussian_bump_profile(1.0, 0.3, 1.0), ReconstructionTarget((0.0,), 0.0), 0.5, (8, 4))
    data = sample_cauchy_data(pw, chart)
    pts = chart.boundary_points()
    nu = chart.unit_normal
    times = chart.times()
    step = 1e-5
    fd = (pw.u(pts[:, None, :] + step * nu[:, None, :], times)
          - pw.u(pts[:, None, :] - step * nu[:, None, :], times)) / (2 * step)
    scale = float(np.max(np.abs(fd)))
    err = float(np.max(np.abs(fd - data.dnu))) / scale
    out.append(CheckResult("forward", "normal derivative vs FD", err <= 1e-5, f"rel {err:.2e}", "<= 1e-5"))
    out.append(CheckResult("forward", "sample count", data.n_samples == 8 * 4 + 2, str(data.n_samples), "34"))
    return out


def run_selftest(kernel_overrides: Optional[dict] = None) -> SelftestReport:
    """Run every invariant suite and collect the results."""
    report = SelftestReport()
    for name, suite in (("kernel", lambda: kernel_checks(kernel_overrides)),
                        ("geometry", geometry_checks),
                        ("forward", forward_checks)):
        try:
            report.results.extend(suite())
        except (CauchyWaveError, ArithmeticError, ValueError) as exc:
            report.results.append(CheckResult(name, "suite completed", False, repr(exc), "no exception"))
    for r in report.results:
        logger.debug(r.line())
    return report
