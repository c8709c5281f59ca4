"""Boundary-integral reconstruction of ``u(x*, y*, t*)`` from Cauchy data.

For a regularization width ``h`` the estimate is::

    R(h) = 1/2 [u(x*, Y(x*), T-(x*)) + u(x*, Y(x*), T+(x*))]
           + int_S dsigma int_{T-}^{T+} (u d_nu w* - d_nu u w*) dt

with ``w*(x, y, t) = w(x - x*, y - y*, t - t*)``; the exact value is the
limit ``h -> 0``.  Because the kernel grows like ``exp((Y - y*)^2 / h)``
inside the cone, the limit is approximated on a geometric schedule of
``h`` and the estimate taken where successive values stabilize.
"""

import csv
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .errors import ConfigurationError, DataError, KernelRangeError
from .forward import CauchyDataSet
from .kernel import KernelEvaluator, KernelParams, make_kernel

logger = logging.getLogger(__name__)

__all__ = [
    "ShiftedKernel",
    "SweepResult",
    "boundary_term",
    "integral_term",
    "reconstruct_at",
    "h_sweep",
    "geometric_schedule",
    "select_limit",
    "write_sweep_csv",
]

# x-nodes per work unit; fixed so results never depend on the worker count
CHUNK_NODES = 8


class ShiftedKernel:
    """The kernel ``w`` re-centred at the reconstruction target."""

    def __init__(self, kernel: KernelEvaluator, target):
        self.kernel = kernel
        self.target = target

    def evaluate(self, x, y, t, envelope=None):
        dx = np.asarray(x, dtype=float) - self.target.x
        return self.kernel.evaluate(dx, np.asarray(y) - self.target.y_star, np.asarray(t) - self.target.t_star, envelope)

    def w(self, x, y, t):
        return self.evaluate(x, y, t).w


def boundary_term(data: CauchyDataSet) -> float:
    """Mean of the two traces ``u(x*, Y(x*), T-+(x*))``."""
    vals = (data.trace_minus, data.trace_plus)
    if any(v is None or not math.isfinite(v) for v in vals):
        raise DataError("dataset lacks the trace values u(x*, Y(x*), T-(x*)) and u(x*, Y(x*), T+(x*))")
    return 0.5 * (vals[0] + vals[1])


def _kernel_for(h, kernel_settings, dim_n):
    settings = dict(kernel_settings or {})
    settings.pop("h", None)
    settings.pop("dim_n", None)
    return make_kernel(KernelParams(h=h, dim_n=dim_n, **settings))


def integral_term(data: CauchyDataSet, kernel: KernelEvaluator, chart=None, target=None, workers: int = 1) -> float:
    """Tensor-quadrature value of the regularized boundary integral.

    The sum runs over x-nodes ``i`` and time nodes ``j``::

        sum_ij W_i om_j H_i [u_ij (n_i . grad w*) - dnu_ij s_i w*]

    with ``H_i = Y_i - y*`` the Jacobian of ``t = t* + tau H_i``,
    ``n_i = (-grad Y, 1)`` and ``s_i = |n_i|``.  Per-node terms are computed
    in fixed chunks (optionally on ``workers`` threads) and summed with
    ``math.fsum``, so the result is independent of the worker count.
    """
    chart = data.chart if chart is None else chart
    target = chart.target if target is None else target
    if chart is not data.chart:
        raise DataError("dataset was sampled on a different chart")
    if kernel.dim_n != chart.dim_n:
        raise ConfigurationError(f"kernel dimension {kernel.dim_n} does not match chart dimension {chart.dim_n}")
    if data.u.shape != (chart.n_x, chart.n_t) or data.dnu.shape != data.u.shape:
        raise DataError(f"data arrays have shape {data.u.shape}, chart expects {(chart.n_x, chart.n_t)}")

    dx = chart.x - target.x
    height = chart.Y - target.y_star
    if np.any(height <= 0):
        raise DataError("chart nodes must satisfy Y(x) > y*")
    normal = chart.normal_unnormalized
    surf = chart.surface_element
    tau = chart.tau
    envelope = (float(np.max(height)), float(np.max(np.linalg.norm(dx, axis=1))))
    base = chart.x_weights[:, None] * chart.tau_weights[None, :] * height[:, None]

    def chunk(lo):
        hi = min(lo + CHUNK_NODES, chart.n_x)
        hgt = height[lo:hi, None]
        xx = np.broadcast_to(dx[lo:hi, None, :], (hi - lo, chart.n_t, dx.shape[1]))
        try:
            vals = kernel.evaluate(xx, np.broadcast_to(hgt, (hi - lo, chart.n_t)), tau[None, :] * hgt, envelope)
        except KernelRangeError as exc:
            i, j = (lo + int(exc.where[0]), int(exc.where[1])) if exc.where else (lo, 0)
            raise KernelRangeError(
                f"{exc} (x-node {i}, time node {j}, x={chart.x[i].tolist()})",
                magnitude=exc.magnitude,
                where=(i, j),
            ) from exc
        dnu_w = np.einsum("ijk,ik->ij", vals.grad_x, normal[lo:hi, :-1]) + vals.d_y * normal[lo:hi, -1:]
        return base[lo:hi] * (data.u[lo:hi] * dnu_w - data.dnu[lo:hi] * surf[lo:hi, None] * vals.w)

    starts = range(0, chart.n_x, CHUNK_NODES)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(chunk, starts))
    else:
        parts = [chunk(lo) for lo in starts]
    return math.fsum(np.concatenate(parts, axis=0).ravel())


def reconstruct_at(data: CauchyDataSet, h: float, kernel_settings: Optional[dict] = None, chart=None, target=None,
                   workers: int = 1) -> float:
    """Estimate ``R(h) = B + I(h)`` at a single regularization width."""
    b = boundary_term(data)
    kernel = _kernel_for(h, kernel_settings, data.chart.dim_n)
    return b + integral_term(data, kernel, chart, target, workers)


def geometric_schedule(h_max, ratio, count):
    """``h_k = h_max * ratio**k`` for ``k = 0 .. count-1``."""
    if not h_max > 0:
        raise ConfigurationError(f"h_max must be positive, got {h_max!r}")
    if not 0 < ratio < 1:
        raise ConfigurationError(f"ratio must lie in (0, 1), got {ratio!r}")
    if int(count) != count or count < 3:
        raise ConfigurationError(f"count must be an integer >= 3, got {count!r}")
    return [h_max * ratio**k for k in range(int(count))]


@dataclass
class SweepResult:
    """Estimates ``R(h)`` on a decreasing geometric schedule.

    ``h``, ``I``, ``R`` and the error arrays cover only the widths that were
    evaluated; ``schedule`` is the full requested list.
    """

    schedule: List[float]
    h: List[float]
    B: float
    I: List[float]
    R: List[float]
    ground_truth: Optional[float] = None
    scale: Optional[float] = None
    abs_err: Optional[List[float]] = None
    rel_err: Optional[List[float]] = None
    estimate: Optional[float] = None
    h_star: Optional[float] = None
    diagnostics: dict = field(default_factory=dict)

    @property
    def selected_abs_err(self):
        if self.ground_truth is None or self.estimate is None:
            return None
        return abs(self.estimate - self.ground_truth)

    @property
    def selected_rel_err(self):
        err = self.selected_abs_err
        return None if err is None else err / self.scale


def h_sweep(data: CauchyDataSet, h_max: float = 0.4, ratio: float = 0.7, count: int = 8,
            kernel_settings: Optional[dict] = None, ground_truth: Optional[float] = None,
            workers: int = 1) -> SweepResult:
    """Evaluate ``R(h)`` on the schedule and select the limit estimate.

    If the kernel overflows at some ``h`` the schedule is truncated at the
    last successful width and the truncation is recorded in
    ``diagnostics``.  ``ground_truth`` defaults to the dataset's own.
    """
    schedule = geometric_schedule(h_max, ratio, count)
    b = boundary_term(data)
    hs, integrals = [], []
    diagnostics = {"truncated": False}
    for h in schedule:
        kernel = _kernel_for(h, kernel_settings, data.chart.dim_n)
        try:
            value = integral_term(data, kernel, workers=workers)
        except KernelRangeError as exc:
            diagnostics["truncated"] = True
            diagnostics["truncated_at_h"] = h
            diagnostics["truncation_reason"] = str(exc)
            logger.warning("sweep truncated at h=%g: %s", h, exc)
            break
        hs.append(h)
        integrals.append(value)
    result = SweepResult(
        schedule=schedule,
        h=hs,
        B=b,
        I=integrals,
        R=[b + v for v in integrals],
        ground_truth=data.ground_truth if ground_truth is None else ground_truth,
        scale=data.scale,
        diagnostics=diagnostics,
    )
    if result.ground_truth is not None:
        result.abs_err = [abs(r - result.ground_truth) for r in result.R]
        result.rel_err = [e / result.scale for e in result.abs_err]
    if len(result.R) >= 3:
        estimate, h_star, diag = select_limit(result)
        result.estimate, result.h_star = estimate, h_star
        diagnostics.update(diag)
    else:
        diagnostics["selection"] = f"only {len(result.R)} widths evaluated; no limit selected"
    return result


def select_limit(sweep, h=None):
    """Plateau rule: pick the consecutive pair with the smallest change.

    Returns ``(estimate, h_star, diagnostics)`` where the estimate is the
    later (smaller-``h``) member of the pair.  ``sweep`` is a
    :class:`SweepResult` or a plain sequence of estimates (``h`` then defaults
    to the indices).  Strictly increasing differences set ``no_plateau``.
    """
    if isinstance(sweep, SweepResult):
        values, h = sweep.R, sweep.h
    else:
        values = list(sweep)
        h = list(range(len(values))) if h is None else list(h)
    if len(values) < 3:
        raise ValueError(f"need at least 3 sweep entries, got {len(values)}")
    diffs = [abs(values[k + 1] - values[k]) for k in range(len(values) - 1)]
    k = min(range(len(diffs)), key=diffs.__getitem__)
    no_plateau = all(diffs[i + 1] > diffs[i] for i in range(len(diffs) - 1))
    diag = {"differences": diffs, "pair": [k, k + 1], "no_plateau": no_plateau}
    if no_plateau:
        diag["warning"] = "no plateau: successive differences increase monotonically"
    return values[k + 1], h[k + 1], diag


def write_sweep_csv(result: SweepResult, path):
    """Write ``h,B,I,R,abs_err,rel_err`` rows with 17 significant digits."""

    def fmt(v):
        return "nan" if v is None else format(float(v), ".17g")

    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["h", "B", "I", "R", "abs_err", "rel_err"])
        for k, h in enumerate(result.h):
            ae = result.abs_err[k] if result.abs_err else None
            re = result.rel_err[k] if result.rel_err else None
            out.writerow([fmt(h), fmt(result.B), fmt(result.I[k]), fmt(result.R[k]), fmt(ae), fmt(re)])
