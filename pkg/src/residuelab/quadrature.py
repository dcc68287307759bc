"""Quadrature rules shared by the symbol and operator layers.

Three building blocks:

* tensor Gauss-Legendre over an axis-aligned box (the x-integrals),
* sphere rules (two-point sum on S^0, periodic trapezoid on S^1,
  Gauss x trapezoid product rule on S^2),
* panelised Gauss-Legendre in u = log r for radial integrals, so that
  radii up to exp(~1100) (n ~ 10^476) stay inside float64.

All rules return plain ``(nodes, weights)`` arrays and are deterministic:
node construction is pure and results are summed with ``np.dot`` in a
fixed order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np


class QuadratureError(RuntimeError):
    """Raised when a quadrature produces non-finite values or cannot be built."""


@dataclass(frozen=True)
class QuadSpec:
    """Resolution knobs for symbol-level integrals.

    ``x_nodes`` is per axis; ``None`` picks 64 for d=1 and 32 for d>=2.
    ``radial_panel_nodes`` Gauss-Legendre nodes per radial panel;
    panels are laid out uniformly in log(u) with ``panels_per_loglog_unit``
    panels per unit, plus explicit panels at symbol breakpoints.
    """

    x_nodes: int | None = None
    sphere_nodes: int = 128
    radial_panel_nodes: int = 16
    panels_per_loglog_unit: int = 4
    l2_radial_cap: float = 1.0e8

    def x_nodes_for(self, d: int) -> int:
        if self.x_nodes is not None:
            return self.x_nodes
        return 64 if d == 1 else 32


DEFAULT_QUAD = QuadSpec()


@lru_cache(maxsize=64)
def _leggauss(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    return x, w


def gauss_legendre(a: float, b: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [a, b]."""
    x, w = _leggauss(n)
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    return mid + half * x, half * w


def box_rule(lo, hi, nodes_per_axis: int) -> tuple[np.ndarray, np.ndarray]:
    """Tensor Gauss-Legendre rule over the box [lo, hi] in R^d.

    Returns points of shape (M, d) and weights of shape (M,).
    """
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    if lo.shape != hi.shape or np.any(hi <= lo):
        raise ValueError(f"empty or malformed box: lo={lo}, hi={hi}")
    axes = [gauss_legendre(a, b, nodes_per_axis) for a, b in zip(lo, hi)]
    grids = np.meshgrid(*[ax[0] for ax in axes], indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=-1)
    wgrids = np.meshgrid(*[ax[1] for ax in axes], indexing="ij")
    w = np.ones(pts.shape[0])
    for wg in wgrids:
        w = w * wg.ravel()
    return pts, w


def sphere_volume(d: int) -> float:
    """Measure of S^{d-1}; S^0 = {-1, +1} carries counting measure 2."""
    if d < 1:
        raise ValueError("dimension must be >= 1")
    if d == 1:
        return 2.0
    return 2.0 * math.pi ** (d / 2.0) / math.gamma(d / 2.0)


def sphere_rule(d: int, n_nodes: int = 128) -> tuple[np.ndarray, np.ndarray]:
    """Quadrature on the unit sphere S^{d-1}, d in {1, 2, 3}.

    d=1: two-point counting sum. d=2: periodic trapezoid (spectrally exact
    for smooth integrands). d=3: Gauss-Legendre in cos(theta) times uniform
    longitude grid.
    """
    if d == 1:
        return np.array([[-1.0], [1.0]]), np.array([1.0, 1.0])
    if d == 2:
        theta = 2.0 * math.pi * np.arange(n_nodes) / n_nodes
        dirs = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
        return dirs, np.full(n_nodes, 2.0 * math.pi / n_nodes)
    if d == 3:
        n_mu = max(4, n_nodes // 8)
        n_phi = max(8, n_nodes // 4)
        mu, wmu = gauss_legendre(-1.0, 1.0, n_mu)
        phi = 2.0 * math.pi * np.arange(n_phi) / n_phi
        wphi = 2.0 * math.pi / n_phi
        MU, PHI = np.meshgrid(mu, phi, indexing="ij")
        sin_t = np.sqrt(1.0 - MU**2)
        dirs = np.stack([sin_t * np.cos(PHI), sin_t * np.sin(PHI), MU], axis=-1)
        w = np.broadcast_to(wmu[:, None] * wphi, MU.shape)
        return dirs.reshape(-1, 3), w.ravel().copy()
    raise ValueError(f"sphere rule not implemented for d={d}")


def log_radial_rule(
    u_lo: float,
    u_hi: float,
    breakpoints=(),
    spec: QuadSpec = DEFAULT_QUAD,
) -> tuple[np.ndarray, np.ndarray]:
    """Panelised Gauss-Legendre rule for integrals over u = log r in [u_lo, u_hi].

    Breakpoints (in u) split panels exactly, so piecewise-smooth integrands
    (ramp joins) see only smooth pieces.  Beyond u ~ 2 the panel edges are
    uniform in log u, matching integrands that vary on log-log scale
    (the sin log log r family oscillates with unit period in log u).
    """
    if u_hi <= u_lo:
        return np.empty(0), np.empty(0)
    edges = {u_lo, u_hi}
    for b in breakpoints:
        if u_lo < b < u_hi:
            edges.add(float(b))

    # fill with uniform panels up to u=2, then log-u uniform panels
    fill_to = min(u_hi, 2.0)
    step = 0.5
    k = u_lo + step
    while k < fill_to:
        edges.add(k)
        k += step
    if u_hi > 2.0:
        v = math.log(2.0)
        v_hi = math.log(u_hi)
        dv = 1.0 / spec.panels_per_loglog_unit
        while v < v_hi:
            if math.exp(v) > max(u_lo, 0.0):
                edges.add(math.exp(v))
            v += dv

    sorted_edges = sorted(edges)
    nodes, weights = [], []
    for a, b in zip(sorted_edges[:-1], sorted_edges[1:]):
        x, w = gauss_legendre(a, b, spec.radial_panel_nodes)
        nodes.append(x)
        weights.append(w)
    return np.concatenate(nodes), np.concatenate(weights)


def integrate_nodes(values: np.ndarray, weights: np.ndarray) -> complex:
    """Weighted sum with a non-finiteness guard (never clips silently)."""
    values = np.asarray(values)
    if not np.all(np.isfinite(values.view(float) if np.iscomplexobj(values) else values)):
        raise QuadratureError("integrand produced non-finite values")
    return complex(np.dot(weights, values))
