"""Differentiation and integration engine.

Block partials of integrands (analytic > dual-number > finite difference),
total time derivatives by 5-point stencils that never cross a regime bound or
trajectory breakpoint, composite Gauss-Legendre quadrature, and the s = 0
parameter derivative used by the invariance checks.

Stencil steps: callers pass the step through :class:`StencilConfig`.  The
default for order-1 derivatives is span * 1e-4; order-2 stencils use 10x that
(the roundoff floor eps*|f|/h^2 would otherwise dominate at the tolerances the
residual sweeps are held to).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .dual import Dual, derivative_of
from .errors import BlockOutOfRange, StencilCrossesBreakpoint

__all__ = ["StencilConfig", "default_step", "total_derivative", "total_derivative_many",
           "partial", "integrate", "derivative_in_parameter", "ParamDerivative", "fd_weights"]

_WIDTH = 5


def fd_weights(offsets, order: int) -> np.ndarray:
    """Finite-difference weights at x = 0 for nodes ``offsets`` (Fornberg)."""
    x = np.asarray(offsets, dtype=float)
    npts = len(x)
    c = np.zeros((npts, order + 1))
    c[0, 0] = 1.0
    c1 = 1.0
    c4 = x[0]
    for i in range(1, npts):
        mn = min(i, order)
        c2 = 1.0
        c5 = c4
        c4 = x[i]
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, order]


# weights for the 5-point stencil shifted by s nodes, s = -2 (fully left) .. 2
_WEIGHTS = {
    (order, s): fd_weights(np.arange(_WIDTH) - 2 + s, order)
    for order in range(0, 5)
    for s in range(-2, 3)
}


@dataclass(frozen=True)
class StencilConfig:
    """Step size plus the regime bounds samples must not cross."""

    h: float
    lo: float = -math.inf
    hi: float = math.inf

    def __post_init__(self):
        if self.h <= 0:
            raise ValueError("stencil step must be positive")


def default_step(span: float, order: int = 1) -> float:
    """Default stencil step for a problem of time span ``span``."""
    return span * 1e-4 * (10.0 ** max(0, order - 1))


def _place(ts, los, his, h):
    """Per-point effective step and integer node shift keeping 5 nodes in bounds."""
    ts = np.asarray(ts, dtype=float)
    width = np.asarray(his, dtype=float) - np.asarray(los, dtype=float)
    if np.any(width <= 0):
        raise StencilCrossesBreakpoint("empty interval between breakpoints")
    h_eff = np.minimum(h, width / _WIDTH)
    tiny = 1e-13 * np.maximum(1.0, np.abs(ts))
    if np.any(h_eff <= tiny):
        raise StencilCrossesBreakpoint("no stencil fits between the surrounding breakpoints")
    a = (ts - los) / h_eff
    b = (his - ts) / h_eff
    s_min = np.ceil(2.0 - a - 1e-12)
    s_max = np.floor(b - 2.0 + 1e-12)
    if np.any(s_min > s_max):
        raise StencilCrossesBreakpoint("stencil placement failed near a breakpoint")
    shift = np.clip(0.0, s_min, s_max).astype(int)
    return h_eff, shift


def total_derivative_many(fn, ts, order: int, los, his, h: float) -> np.ndarray:
    """order-th time derivative of ``fn`` at each of ``ts`` (vectorized).

    ``fn`` must accept a flat time array and return shape (npts, ...).  Bounds
    ``los``/``his`` give, per point, the interval the stencil may occupy.
    """
    ts = np.atleast_1d(np.asarray(ts, dtype=float))
    los = np.broadcast_to(np.asarray(los, dtype=float), ts.shape)
    his = np.broadcast_to(np.asarray(his, dtype=float), ts.shape)
    if order == 0:
        return np.asarray(fn(ts))
    if order >= _WIDTH:
        raise StencilCrossesBreakpoint(f"5-point stencil cannot produce order {order}")
    h_eff, shift = _place(ts, los, his, h)
    offsets = np.arange(_WIDTH) - 2
    nodes = ts[:, None] + (offsets[None, :] + shift[:, None]) * h_eff[:, None]
    vals = np.asarray(fn(nodes.ravel()))
    vals = vals.reshape(nodes.shape + vals.shape[1:])
    # subtract the on-point value (node index 2 - shift): derivative weights
    # annihilate constants, and doing it explicitly makes that exact
    center = vals[np.arange(len(ts)), 2 - shift]
    vals = vals - center[:, None]
    weights = np.stack([_WEIGHTS[(order, int(s))] for s in shift])  # (npts, 5)
    scale = h_eff ** (-order)
    extra = (1,) * (vals.ndim - 2)
    return np.sum(vals * (weights * scale[:, None]).reshape(weights.shape + extra), axis=1)


def total_derivative(fn: Callable, t: float, order: int, cfg: StencilConfig) -> np.ndarray:
    """Scalar-point total derivative; one-sided stencils are selected
    automatically near the configured bounds."""

    def fn_vec(times):
        return np.stack([np.atleast_1d(np.asarray(fn(u), dtype=float)) for u in times])

    return total_derivative_many(fn_vec, [t], order, [cfg.lo], [cfg.hi], cfg.h)[0]


def partial(f, block: int, args) -> np.ndarray:
    """Gradient of integrand ``f`` with respect to one argument block.

    Analytic partials win when the integrand carries them; otherwise a
    dual-number forward pass; finite differences as the universal fallback.
    Returns shape (block_len,) for scalar argument slots, (block_len, npts)
    when slots hold arrays.
    """
    layout = args.layout
    if block < 1 or block > layout.nblocks:
        raise BlockOutOfRange(f"block {block} outside 1..{layout.nblocks}")
    if getattr(f, "partial_fn", None) is not None:
        return np.asarray(f.partial_fn(block, args.values))
    sl = layout.block_slice(block)
    if sl.start == sl.stop:
        return np.zeros(0)
    values = args.values
    try:
        return np.stack([_dual_slot(f, values, i) for i in range(sl.start, sl.stop)])
    except TypeError:
        return np.stack([_fd_slot(f, values, i) for i in range(sl.start, sl.stop)])


def _dual_slot(f, values, i):
    v = values[i]
    seeded = list(values)
    seed = np.ones_like(np.asarray(v, dtype=float)) if np.ndim(v) else 1.0
    seeded[i] = Dual(v, seed)
    out = f(seeded)
    return np.asarray(derivative_of(out, like=v), dtype=float)


def _fd_slot(f, values, i):
    v = np.asarray(values[i], dtype=float)
    h = np.maximum(1e-6, 1e-6 * np.abs(v))
    up, dn = list(values), list(values)
    up[i] = v + h
    dn[i] = v - h
    return (np.asarray(f(up), dtype=float) - np.asarray(f(dn), dtype=float)) / (2.0 * h)


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)


def integrate(fn: Callable, a: float, b: float, breaks=()) -> float:
    """Composite 8-node Gauss-Legendre over panels split at ``breaks``.

    Panels never straddle a break and are at most (b - a)/64 wide; exact to
    roundoff for piecewise polynomials of degree <= 15.
    """
    if b <= a:
        return 0.0
    pts = [a] + sorted(x for x in set(float(x) for x in breaks) if a < x < b) + [b]
    target = (b - a) / 64.0
    nodes, weights = [], []
    for lo, hi in zip(pts[:-1], pts[1:]):
        k = max(1, math.ceil((hi - lo) / target - 1e-12))
        edges = np.linspace(lo, hi, k + 1)
        mids = 0.5 * (edges[:-1] + edges[1:])
        half = 0.5 * (edges[1] - edges[0])
        nodes.append((mids[:, None] + half * _GL_NODES[None, :]).ravel())
        weights.append(np.tile(half * _GL_WEIGHTS, k))
    ts = np.concatenate(nodes)
    ws = np.concatenate(weights)
    try:
        vals = np.asarray(fn(ts), dtype=float)
        if vals.shape != ts.shape:
            raise TypeError
    except (TypeError, ValueError):
        vals = np.array([float(fn(t)) for t in ts])
    return float(ws @ vals)


class ParamDerivative(NamedTuple):
    value: float
    error: float


def derivative_in_parameter(fn: Callable[[float], float]) -> ParamDerivative:
    """d/ds at s = 0 by central differences with Richardson extrapolation
    over h in {1e-3, 5e-4}; carries an error estimate."""
    h = 1e-3
    d1 = (fn(h) - fn(-h)) / (2.0 * h)
    d2 = (fn(h / 2) - fn(-h / 2)) / h
    value = (4.0 * d2 - d1) / 3.0
    return ParamDerivative(value, abs(value - d2))
