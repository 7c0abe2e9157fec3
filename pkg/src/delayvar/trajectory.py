"""Piecewise-polynomial candidate paths on [t1 - tau, t2].

Paths are stored segment-by-segment in the monomial basis shifted to each
segment midpoint (better conditioned than global monomials).  Evaluation at a
knot uses the right-hand segment, except at the final endpoint where the last
segment is used.  Trajectories are immutable after construction and evaluation
is pure, so they are safe to share between threads.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as P

from .errors import EmptyGrid, OrderTooHigh, OutOfDomain

__all__ = ["PolySegment", "Trajectory", "Grid", "example1_trajectory", "segments_from_callable"]


class PolySegment:
    """One polynomial piece on [a, b], coefficients in powers of (t - (a+b)/2).

    ``coeffs`` has shape (n, degree+1), one coefficient row per state component.
    """

    __slots__ = ("a", "b", "coeffs", "mid", "_dcache")

    def __init__(self, a: float, b: float, coeffs):
        if not a < b:
            raise ValueError(f"segment needs a < b, got [{a}, {b}]")
        self.a = float(a)
        self.b = float(b)
        self.coeffs = np.atleast_2d(np.asarray(coeffs, dtype=float))
        self.mid = 0.5 * (self.a + self.b)
        self._dcache: dict[int, np.ndarray] = {0: self.coeffs}

    @property
    def n(self) -> int:
        return self.coeffs.shape[0]

    @property
    def degree(self) -> int:
        return self.coeffs.shape[1] - 1

    @classmethod
    def from_monomial(cls, a: float, b: float, coeffs) -> "PolySegment":
        """Build from coefficients in plain powers of t (per component)."""
        coeffs = np.atleast_2d(np.asarray(coeffs, dtype=float))
        mid = 0.5 * (a + b)
        deg = coeffs.shape[1] - 1
        shifted = np.empty_like(coeffs)
        for k in range(deg + 1):
            shifted[:, k] = P.polyval(mid, P.polyder(coeffs.T, k)) / math.factorial(k)
        return cls(a, b, shifted)

    def _dcoeffs(self, order: int) -> np.ndarray:
        cached = self._dcache.get(order)
        if cached is None:
            cached = P.polyder(self.coeffs.T, order).T
            if cached.size == 0:
                cached = np.zeros((self.n, 1))
            self._dcache[order] = cached
        return cached

    def eval(self, t, order: int = 0) -> np.ndarray:
        """order-th derivative at t (scalar or array); shape t.shape + (n,)."""
        t = np.asarray(t, dtype=float)
        if order > self.degree:
            return np.zeros(t.shape + (self.n,))
        c = self._dcoeffs(order)
        out = P.polyval(t - self.mid, c.T)  # shape (n,) + t.shape
        return np.moveaxis(out, 0, -1)


class Trajectory:
    """Contiguous polynomial segments with controlled inter-segment smoothness.

    Derivatives of order 0..m-1 must match across every interior knot except
    at declared nonsmooth knots, where only continuity of the value itself is
    required.
    """

    def __init__(self, n: int, m: int, segments, nonsmooth_knots=(), validate: bool = True):
        self.n = int(n)
        self.m = int(m)
        self.segments = tuple(segments)
        self.nonsmooth_knots = tuple(sorted(float(k) for k in nonsmooth_knots))
        if not self.segments:
            raise ValueError("trajectory needs at least one segment")
        self._starts = np.array([s.a for s in self.segments])
        self._bounds = np.append(self._starts, self.segments[-1].b)
        self._mids = np.array([s.mid for s in self.segments])
        self._stacked_cache: dict[int, np.ndarray] = {}
        if validate:
            self.validate()

    def _stacked(self, order: int) -> np.ndarray:
        """All segments' order-th derivative coefficients, zero-padded to a
        common shape (nseg, n, K) for vectorized evaluation."""
        cached = self._stacked_cache.get(order)
        if cached is None:
            per_seg = [s._dcoeffs(order) for s in self.segments]
            width = max(c.shape[1] for c in per_seg)
            cached = np.zeros((len(per_seg), self.n, width))
            for i, c in enumerate(per_seg):
                cached[i, :, : c.shape[1]] = c
            self._stacked_cache[order] = cached
        return cached

    # -- invariants ---------------------------------------------------------

    def validate(self) -> None:
        span = self.domain[1] - self.domain[0]
        for seg in self.segments:
            if seg.n != self.n:
                raise ValueError(f"segment has {seg.n} components, trajectory has {self.n}")
        for left, right in zip(self.segments, self.segments[1:]):
            if abs(left.b - right.a) >= 1e-12 * max(1.0, span):
                raise ValueError(f"gap/overlap at {left.b} vs {right.a}")
            self._check_knot(left, right)

    def _check_knot(self, left: PolySegment, right: PolySegment) -> None:
        knot = right.a
        nonsmooth = any(abs(knot - k) < 1e-9 for k in self.nonsmooth_knots)
        orders = (0,) if nonsmooth else range(self.m)
        for order in orders:
            lv = left.eval(left.b, order)
            rv = right.eval(right.a, order)
            tol = 1e-9 * max(1.0, float(np.max(np.abs(lv))), float(np.max(np.abs(rv))))
            if np.max(np.abs(lv - rv)) > tol:
                kind = "value" if order == 0 else f"order-{order} derivative"
                raise ValueError(f"{kind} mismatch at knot {knot}: {lv} vs {rv}")

    # -- evaluation ---------------------------------------------------------

    @property
    def domain(self) -> tuple[float, float]:
        return self.segments[0].a, self.segments[-1].b

    @property
    def max_degree(self) -> int:
        return max(s.degree for s in self.segments)

    def breakpoints(self) -> list[float]:
        """Sorted distinct segment boundaries, endpoints included."""
        pts = [s.a for s in self.segments] + [self.segments[-1].b]
        out = [pts[0]]
        for p in pts[1:]:
            if p != out[-1]:
                out.append(p)
        return out

    def _segment_index(self, t: np.ndarray) -> np.ndarray:
        idx = np.searchsorted(self._bounds, t, side="right") - 1
        return np.clip(idx, 0, len(self.segments) - 1)

    def eval(self, t, order: int = 0) -> np.ndarray:
        """order-th derivative of the active segment at t (right-limit at knots)."""
        if order < 0 or order > self.max_degree:
            raise OrderTooHigh(f"order {order} exceeds max segment degree {self.max_degree}")
        scalar = np.isscalar(t) or np.ndim(t) == 0
        t = np.atleast_1d(np.asarray(t, dtype=float))
        lo, hi = self.domain
        slack = 1e-10 * max(1.0, hi - lo)
        if np.any(t < lo - slack) or np.any(t > hi + slack):
            bad = t[(t < lo - slack) | (t > hi + slack)][0]
            raise OutOfDomain(f"t = {bad} outside [{lo}, {hi}]")
        t = np.clip(t, lo, hi)
        idx = self._segment_index(t)
        coeffs = self._stacked(order)  # (nseg, n, K)
        powers = np.vander(t - self._mids[idx], coeffs.shape[2], increasing=True)
        out = np.einsum("pnk,pk->pn", coeffs[idx], powers)
        return out[0] if scalar else out

    def shifted_eval(self, t, order: int, shift: float) -> np.ndarray:
        """Delayed/advanced evaluation: identical to eval at t + shift."""
        return self.eval(np.asarray(t, dtype=float) + shift, order)

    # -- serialization ------------------------------------------------------

    def to_json(self) -> str:
        record = {
            "n": self.n,
            "m": self.m,
            "segments": [
                {"a": s.a, "b": s.b, "coeffs": s.coeffs.tolist()} for s in self.segments
            ],
            "nonsmooth_knots": list(self.nonsmooth_knots),
        }
        return json.dumps(record, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "Trajectory":
        record = json.loads(text)
        segments = [PolySegment(s["a"], s["b"], s["coeffs"]) for s in record["segments"]]
        return cls(record["n"], record["m"], segments, record.get("nonsmooth_knots", ()))


def segments_from_callable(fn, a: float, b: float, panels: int = 4, degree: int = 4):
    """Sample a callable at Chebyshev points and interpolate per panel.

    Used to stitch closed-form history functions into polynomial segments.
    Returns a list of :class:`PolySegment`.
    """
    edges = np.linspace(a, b, panels + 1)
    k = np.arange(degree + 1)
    nodes01 = np.cos(np.pi * (2 * k + 1) / (2 * (degree + 1)))  # Chebyshev, in (-1, 1)
    segments = []
    for lo, hi in zip(edges[:-1], edges[1:]):
        mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
        ts = mid + half * nodes01
        ys = np.array([np.atleast_1d(np.asarray(fn(t), dtype=float)) for t in ts])
        coeffs = P.polyfit(ts - mid, ys, degree)  # (degree+1, n)
        segments.append(PolySegment(lo, hi, coeffs.T))
    return segments


def example1_trajectory() -> Trajectory:
    """The nonsmooth piecewise quartic: -t^4, t^4, -t^4 + 2 on [-1,0], (0,1], (1,2].

    The first derivative jumps at t = 1 (declared nonsmooth); t = 0 is a
    smooth knot.
    """
    segs = [
        PolySegment.from_monomial(-1.0, 0.0, [[0.0, 0.0, 0.0, 0.0, -1.0]]),
        PolySegment.from_monomial(0.0, 1.0, [[0.0, 0.0, 0.0, 0.0, 1.0]]),
        PolySegment.from_monomial(1.0, 2.0, [[2.0, 0.0, 0.0, 0.0, -1.0]]),
    ]
    return Trajectory(n=1, m=2, segments=segs, nonsmooth_knots=(1.0,))


@dataclass(frozen=True)
class Grid:
    """Strictly increasing sample times, kept clear of breakpoints."""

    times: np.ndarray
    eps_knot: float = 1e-2

    def __post_init__(self):
        object.__setattr__(self, "times", np.asarray(self.times, dtype=float))
        if self.times.size == 0:
            raise EmptyGrid("grid has no sample points")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("grid times must be strictly increasing")

    def __len__(self) -> int:
        return len(self.times)

    @classmethod
    def build(cls, a: float, b: float, count: int, exclude=(), eps_knot: float = 1e-2) -> "Grid":
        """count uniform candidates on [a, b], dropping any within eps of an
        excluded point (trajectory breakpoints, t2 - tau, ...)."""
        if count <= 0:
            raise EmptyGrid(f"requested grid of {count} points")
        times = np.linspace(a, b, count)
        for x in exclude:
            times = times[np.abs(times - x) >= eps_knot]
        if times.size == 0:
            raise EmptyGrid("all grid candidates fell within excluded neighborhoods")
        return cls(times, eps_knot)
