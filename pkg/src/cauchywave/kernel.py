"""Harmonic kernel with Gaussian trace and its transmutation to a wave kernel.

The harmonic kernel ``phi`` solves Laplace's equation in R^n, is even in
``y`` and has the normalized Gaussian ``exp(-|x|^2/h) / (pi h)^m`` as its
trace on ``y = 0`` (``m = (n-1)/2``).  Its Fourier representation is::

    phi(x, y) = (2 pi)^(1-n) * int exp(-h |xi|^2 / 4) cosh(y |xi|) exp(i x.xi) dxi

For ``n = 2`` this integral has the closed form::

    phi(x, y) = (pi h)^(-1/2) exp((y^2 - x^2)/h) cos(2 x y / h)

and for ``n = 3`` it reduces to the radial integral::

    phi(r, y) = 1/(2 pi) int_0^inf exp(-h rho^2/4) cosh(y rho) J0(rho r) rho drho

which is evaluated by composite Gauss-Legendre quadrature after splitting
``cosh`` into two shifted Gaussians, so the large factor ``exp(y^2/h)`` is
applied once outside the sum.

The wave kernel is the average of ``phi`` along a quarter circle::

    w(x, y, t) = 1/pi int_0^{pi/2} phi(x, sqrt(y^2 - t^2) sin s) ds

defined on ``y >= |t|``.  It solves the wave equation and equals
``phi(x, 0)/2`` on the characteristics ``t = +-y``.
"""

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
from scipy.special import j0, j1

from .errors import ConfigurationError, DomainError, KernelRangeError
from .quadrature import composite_gauss_legendre, gauss_legendre

__all__ = [
    "KernelParams",
    "KernelEvaluator",
    "WaveKernelValues",
    "make_kernel",
    "EXP_LIMIT",
]

# Largest exponent accepted before exp() is considered out of range.
EXP_LIMIT = 700.0

_RHO_PANEL_NODES = 16


@dataclass(frozen=True)
class KernelParams:
    """Configuration of a kernel evaluator.

    Attributes
    ----------
    h : float
        Regularization width (squared-length units), ``h > 0``.
    dim_n : int
        Ambient dimension, 2 or 3.
    s_nodes : int
        Gauss-Legendre nodes for the quarter-circle average defining ``w``.
    xi_nodes : int
        Minimum number of spectral nodes (``n = 3`` only).
    xi_cutoff_tol : float
        Relative size of the discarded spectral tail (``n = 3`` only).
    sigma_min : float, optional
        Below this value of ``sqrt(y^2 - t^2)`` the ``y``/``t`` derivatives of
        ``w`` use their Taylor limit.  Defaults to ``1e-4 * sqrt(h)``.
    """

    h: float
    dim_n: int = 2
    s_nodes: int = 32
    xi_nodes: int = 64
    xi_cutoff_tol: float = 1e-18
    sigma_min: Optional[float] = None

    def __post_init__(self):
        problems = []
        if not (isinstance(self.h, (int, float)) and math.isfinite(self.h) and self.h > 0):
            problems.append(f"h must be a positive finite number, got {self.h!r}")
        if self.dim_n not in (2, 3):
            problems.append(f"dim_n must be 2 or 3, got {self.dim_n!r}")
        if int(self.s_nodes) != self.s_nodes or self.s_nodes < 8:
            problems.append(f"s_nodes must be an integer >= 8, got {self.s_nodes!r}")
        if int(self.xi_nodes) != self.xi_nodes or self.xi_nodes < 32:
            problems.append(f"xi_nodes must be an integer >= 32, got {self.xi_nodes!r}")
        if not (0.0 < self.xi_cutoff_tol < 1.0):
            problems.append(f"xi_cutoff_tol must lie in (0, 1), got {self.xi_cutoff_tol!r}")
        if self.sigma_min is not None and not self.sigma_min > 0:
            problems.append(f"sigma_min must be positive, got {self.sigma_min!r}")
        if problems:
            raise ConfigurationError("; ".join(problems))
        if self.sigma_min is None:
            object.__setattr__(self, "sigma_min", 1e-4 * math.sqrt(self.h))

    @property
    def m(self) -> float:
        return (self.dim_n - 1) / 2


class WaveKernelValues(NamedTuple):
    w: np.ndarray
    grad_x: np.ndarray
    d_y: np.ndarray
    d_t: np.ndarray


class KernelEvaluator:
    """Immutable evaluator of ``phi``, ``w`` and their first derivatives.

    Spatial points ``x`` are arrays whose trailing axis has length ``n - 1``;
    for ``n = 2`` a bare scalar is also accepted.  ``y`` and ``t`` broadcast
    against ``x[..., 0]``.  All methods are pure.
    """

    def __init__(self, params: KernelParams):
        self.params = params
        self.h = float(params.h)
        self.dim_n = int(params.dim_n)
        self.m = params.m
        s, ws = gauss_legendre(int(params.s_nodes), 0.0, 0.5 * math.pi)
        self._s_nodes = s
        self._s_weights = ws
        self._sin_s = np.sin(s)
        self._cos2_s = np.cos(s) ** 2
        self._norm = (math.pi * self.h) ** (-self.m)
        for arr in (self._s_nodes, self._s_weights, self._sin_s, self._cos2_s):
            arr.setflags(write=False)

    def __repr__(self):
        return f"KernelEvaluator({self.params!r})"

    @property
    def s_rule(self):
        """Nodes and weights of the quarter-circle rule on ``[0, pi/2]``."""
        return self._s_nodes, self._s_weights

    # ------------------------------------------------------------------
    # argument handling
    # ------------------------------------------------------------------
    def _points(self, x):
        x = np.asarray(x, dtype=float)
        d = self.dim_n - 1
        if d == 1 and x.ndim == 0:
            x = x[None]
        if x.ndim == 0 or x.shape[-1] != d:
            raise ValueError(f"x must have a trailing axis of length {d}, got shape {x.shape}")
        return x

    def _radius(self, x):
        if self.dim_n == 2:
            return np.abs(x[..., 0])
        return np.sqrt(np.sum(x * x, axis=-1))

    def _sigma(self, y, t):
        bad = y < np.abs(t) - 4 * np.finfo(float).eps * np.maximum(np.abs(y), np.abs(t))
        if np.any(bad):
            idx = np.unravel_index(np.argmax(bad), bad.shape) if bad.ndim else ()
            raise DomainError(
                f"w is defined only for y >= |t|; got y={y[idx]!r}, t={t[idx]!r}"
            )
        return np.sqrt(np.maximum(y * y - t * t, 0.0))

    def _check_exponent(self, expo, what):
        if expo.size == 0:
            return
        worst = float(np.max(expo))
        if not worst <= EXP_LIMIT:
            where = np.unravel_index(int(np.argmax(expo)), expo.shape) if expo.ndim else ()
            raise KernelRangeError(
                f"{what}: exponent {worst:.4g} exceeds the floating-point budget "
                f"{EXP_LIMIT:g} at h={self.h:g}; increase h",
                magnitude=worst,
                where=where,
            )

    # ------------------------------------------------------------------
    # spectral grid (n = 3)
    # ------------------------------------------------------------------
    def rho_rule(self, y_max, r_max):
        """Composite spectral rule covering ``|y| <= y_max`` and ``|x| <= r_max``."""
        h = self.h
        tail = 2.0 / math.sqrt(h) * math.sqrt(math.log(1.0 / self.params.xi_cutoff_tol))
        upper = 2.0 * abs(y_max) / h + tail
        width = math.sqrt(2.0 / h)
        if r_max > 0:
            width = min(width, 2.0 * math.pi / r_max)
        n_panels = max(
            math.ceil(upper / width),
            math.ceil(self.params.xi_nodes / _RHO_PANEL_NODES),
        )
        return composite_gauss_legendre(n_panels, _RHO_PANEL_NODES, 0.0, upper)

    # ------------------------------------------------------------------
    # phi
    # ------------------------------------------------------------------
    def _phi2(self, x1, y, want_grad):
        h = self.h
        expo = (y * y - x1 * x1) / h
        self._check_exponent(expo, "phi")
        amp = self._norm * np.exp(expo)
        arg = 2.0 * x1 * y / h
        c, s = np.cos(arg), np.sin(arg)
        val = amp * c
        if not want_grad:
            return val, None, None
        dx = amp * (-2.0 * x1 / h * c - 2.0 * y / h * s)
        dy = amp * (2.0 * y / h * c - 2.0 * x1 / h * s)
        return val, dx, dy

    def _phi3(self, r, y, want_grad):
        h = self.h
        ay = np.abs(y)
        expo = ay * ay / h
        self._check_exponent(expo, "phi")
        rho, v = self.rho_rule(float(np.max(ay, initial=0.0)), float(np.max(r, initial=0.0)))
        val = np.zeros(np.shape(r))
        dr = np.zeros(np.shape(r)) if want_grad else None
        dy = np.zeros(np.shape(r)) if want_grad else None
        for rj, vj in zip(rho, v):
            g = np.exp(-0.25 * h * (rj - 2.0 * ay / h) ** 2)
            e = np.exp(-2.0 * ay * rj)
            plus = g * (1.0 + e)
            jr = j0(rj * r)
            val += (vj * rj) * jr * plus
            if want_grad:
                dr -= (vj * rj * rj) * j1(rj * r) * plus
                dy += (vj * rj * rj) * jr * (g * -np.expm1(-2.0 * ay * rj))
        scale = np.exp(expo) / (4.0 * math.pi)
        val = scale * val
        if want_grad:
            dr = scale * dr
            dy = np.sign(y) * scale * dy
        return val, dr, dy

    def phi(self, x, y):
        """Harmonic kernel with Gaussian trace at ``(x, y)``."""
        x = self._points(x)
        y = np.broadcast_to(np.asarray(y, dtype=float), x.shape[:-1])
        if self.dim_n == 2:
            return self._phi2(x[..., 0], y, False)[0]
        return self._phi3(self._radius(x), y, False)[0]

    def phi_grad(self, x, y):
        """Return ``(grad_x phi, d_y phi)`` by exact differentiation."""
        x = self._points(x)
        y = np.broadcast_to(np.asarray(y, dtype=float), x.shape[:-1])
        if self.dim_n == 2:
            _, dx, dy = self._phi2(x[..., 0], y, True)
            return dx[..., None], dy
        r = self._radius(x)
        _, dr, dy = self._phi3(r, y, True)
        return _radial_to_grad(x, r, dr), dy

    def phi_yy_at_zero(self, x):
        """Closed-form ``d^2 phi / dy^2`` on ``y = 0`` (minus the x-Laplacian of the trace)."""
        x = self._points(x)
        h = self.h
        r2 = np.sum(x * x, axis=-1)
        return self._norm * np.exp(-r2 / h) * (2.0 * (self.dim_n - 1) / h - 4.0 * r2 / h**2)

    def trace(self, x):
        """The Gaussian ``exp(-|x|^2/h) / (pi h)^m``."""
        x = self._points(x)
        return self._norm * np.exp(-np.sum(x * x, axis=-1) / self.h)

    # ------------------------------------------------------------------
    # w
    # ------------------------------------------------------------------
    def evaluate(self, x, y, t, envelope=None):
        """Evaluate ``w`` with its spatial gradient and time derivative.

        Parameters
        ----------
        x, y, t : array_like
            Evaluation points with ``y >= |t|``.
        envelope : tuple of float, optional
            ``(sigma_max, r_max)`` bounds used to build the spectral rule for
            ``n = 3``.  Batched callers pass the bounds of the whole batch so
            that every chunk shares one rule and results do not depend on how
            the batch is split.

        Returns
        -------
        WaveKernelValues
            ``w``, ``grad_x`` (trailing axis ``n - 1``), ``d_y`` and ``d_t``.
        """
        x = self._points(x)
        shape = x.shape[:-1]
        y = np.broadcast_to(np.asarray(y, dtype=float), shape)
        t = np.broadcast_to(np.asarray(t, dtype=float), shape)
        sigma = self._sigma(y, t)
        if self.dim_n == 2:
            w, grad, ratio = self._w2(x[..., 0], sigma)
            grad = grad[..., None]
        else:
            r = self._radius(x)
            w, dr, ratio = self._w3(r, sigma, envelope)
            grad = _radial_to_grad(x, r, dr)

        # sigma == 0: the average degenerates to phi(x, 0) / 2.
        on_char = sigma == 0.0
        if np.any(on_char):
            w = np.where(on_char, 0.5 * self.trace(x), w)

        # Taylor branch: d_y phi(x, tau) ~ tau * phi_yy(x, 0) near tau = 0.
        small = sigma < self.params.sigma_min
        if np.any(small):
            ratio = np.where(small, 0.25 * self.phi_yy_at_zero(x), ratio)
        return WaveKernelValues(w, grad, y * ratio, -t * ratio)

    def _w2(self, x1, sigma):
        h = self.h
        self._check_exponent((sigma * sigma - x1 * x1) / h, "w")
        w = np.zeros(sigma.shape)
        gx = np.zeros(sigma.shape)
        inner = np.zeros(sigma.shape)
        for sk, wk in zip(self._sin_s, self._s_weights):
            val, dx, dy = self._phi2(x1, sigma * sk, True)
            w += wk * val
            gx += wk * dx
            inner += (wk * sk) * dy
        safe = np.where(sigma > 0, sigma, 1.0)
        return w / math.pi, gx / math.pi, inner / (math.pi * safe)

    def _w3(self, r, sigma, envelope):
        h = self.h
        expo = sigma * sigma / h
        self._check_exponent(expo, "w")
        if envelope is None:
            envelope = (float(np.max(sigma, initial=0.0)), float(np.max(r, initial=0.0)))
        rho, v = self.rho_rule(*envelope)

        # Spectral profiles depend on sigma only; build them once per distinct sigma.
        sig_u, inv = np.unique(sigma.ravel(), return_inverse=True)
        inv = inv.reshape(sigma.shape)
        s2 = sig_u[:, None] ** 2
        prof_c = np.zeros((sig_u.size, rho.size))
        prof_s = np.zeros((sig_u.size, rho.size))
        for sk, ck, wk in zip(self._sin_s, self._cos2_s, self._s_weights):
            a = sig_u[:, None] * sk
            g = np.exp(-s2 * ck / h - 0.25 * h * (rho[None, :] - 2.0 * a / h) ** 2)
            e = np.expm1(-2.0 * a * rho[None, :])
            prof_c += wk * (g * (2.0 + e))
            prof_s += (wk * sk) * (g * -e)

        w = np.zeros(sigma.shape)
        dr = np.zeros(sigma.shape)
        inner = np.zeros(sigma.shape)
        for jj, (rj, vj) in enumerate(zip(rho, v)):
            jr = j0(rj * r)
            c = prof_c[inv, jj]
            w += (vj * rj) * jr * c
            dr -= (vj * rj * rj) * j1(rj * r) * c
            inner += (vj * rj * rj) * jr * prof_s[inv, jj]
        scale = np.exp(expo) / (4.0 * math.pi**2)
        safe = np.where(sigma > 0, sigma, 1.0)
        return scale * w, scale * dr, scale * inner / safe

    def w_eval(self, x, y, t):
        """Wave kernel ``w(x, y, t)`` for ``y >= |t|``."""
        return self.evaluate(x, y, t).w

    def w_spatial_grad(self, x, y, t):
        """Return ``(grad_x w, d_y w)``."""
        vals = self.evaluate(x, y, t)
        return vals.grad_x, vals.d_y

    def w_time_deriv(self, x, y, t):
        """Return ``d_t w``."""
        return self.evaluate(x, y, t).d_t


def _radial_to_grad(x, r, dr):
    safe = np.where(r > 0, r, 1.0)
    unit = np.where((r > 0)[..., None], x / safe[..., None], 0.0)
    return unit * dr[..., None]


def make_kernel(params: KernelParams = None, **kwargs) -> KernelEvaluator:
    """Build a :class:`KernelEvaluator`.

    Accepts either a ready :class:`KernelParams` or its fields as keywords::

        make_kernel(h=0.1, dim_n=3)
    """
    if params is None:
        params = KernelParams(**kwargs)
    elif kwargs:
        raise TypeError("pass either params or keyword fields, not both")
    return KernelEvaluator(params)
