"""Gauss-Legendre rules used by the kernel, the chart and the field models."""

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=64)
def _reference_rule(n):
    nodes, weights = np.polynomial.legendre.leggauss(n)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def gauss_legendre(n, a=-1.0, b=1.0):
    """Return ``n``-point Gauss-Legendre nodes and weights on ``[a, b]``."""
    if n < 1:
        raise ValueError(f"need at least one node, got {n}")
    x, w = _reference_rule(int(n))
    half = 0.5 * (b - a)
    return 0.5 * (a + b) + half * x, half * w


def composite_gauss_legendre(n_panels, nodes_per_panel, a, b):
    """Composite rule with ``n_panels`` equal panels on ``[a, b]``."""
    x, w = _reference_rule(int(nodes_per_panel))
    edges = np.linspace(a, b, int(n_panels) + 1)
    left, right = edges[:-1, None], edges[1:, None]
    half = 0.5 * (right - left)
    nodes = (0.5 * (left + right) + half * x[None, :]).ravel()
    weights = (half * w[None, :]).ravel()
    return nodes, weights
