"""Transformation-group machinery and Noether conserved quantities.

The generator lift rho^0 = xi(t, q), rho^i = d/dt rho^(i-1) - q^(i) etadot
feeds both the necessary condition of invariance and the conserved quantity;
the definition-level invariance check differentiates the transformed action in
the group parameter numerically, so no symbolic variation calculus is needed.
Group generators are extended by zero on [t1 - tau, t1).

Generators are pointwise callables (t, q) with q of shape (n,); sweeps
evaluate them over flattened stencil-node arrays internally.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import calculus
from .dubois_reymond import psi_values
from .errors import EmptyGrid, IOutOfRange, TransformEscapesDomain
from .euler_lagrange import (
    Regime,
    regime_interval,
    smooth_breaks,
    stacked_partial_map,
    stencil_bounds,
)
from .problem import (
    AugmentedSetup,
    IsoperimetricProblem,
    TransformationGroup,
    args_at,
    augmented_integrand,
)
from .trajectory import Grid, Trajectory

__all__ = ["rho", "rho_sequence", "invariance_defect", "necessary_condition_defect", "noether_quantity",
           "ConstancyReport", "constancy_report"]


def _eta_many(group: TransformationGroup, traj: Trajectory, ts: np.ndarray) -> np.ndarray:
    qs = np.atleast_2d(traj.eval(ts, 0))
    return np.array([float(group.eta(float(t), q)) for t, q in zip(ts, qs)])


def _xi_many(group: TransformationGroup, traj: Trajectory, ts: np.ndarray) -> np.ndarray:
    qs = np.atleast_2d(traj.eval(ts, 0))
    return np.stack([np.atleast_1d(np.asarray(group.xi(float(t), q), dtype=float))
                     for t, q in zip(ts, qs)])


def _piece_bounds(traj: Trajectory, ts: np.ndarray, lo=None, hi=None):
    """Per-point smooth piece of the trajectory, optionally clipped."""
    breaks = np.asarray(traj.breakpoints())
    dlo, dhi = traj.domain
    return stencil_bounds(ts, breaks, dlo if lo is None else lo, dhi if hi is None else hi)


def _eta_dot_many(group, traj, ts, los, his, h) -> np.ndarray:
    return calculus.total_derivative_many(
        lambda u: _eta_many(group, traj, u)[:, None], ts, 1, los, his, h)[:, 0]


def _rho_many(group, traj, i: int, ts: np.ndarray, los, his, h) -> np.ndarray:
    """rho^i over a time array; shape (npts, n)."""
    if i == 0:
        return _xi_many(group, traj, ts)

    def prev(us):
        plos, phis = _piece_bounds(traj, us)
        return _rho_many(group, traj, i - 1, us, plos, phis, h)

    d_prev = calculus.total_derivative_many(prev, ts, 1, los, his, h)
    qi = np.atleast_2d(traj.eval(ts, i))
    return d_prev - qi * _eta_dot_many(group, traj, ts, los, his, h)[:, None]


def rho(group: TransformationGroup, traj: Trajectory, i: int, t: float) -> np.ndarray:
    """Generator lift rho^i(t) along the trajectory; shape (n,)."""
    if not 0 <= i <= traj.m:
        raise IOutOfRange(f"i = {i} outside 0..{traj.m}")
    ts = np.array([float(t)])
    los, his = _piece_bounds(traj, ts)
    span = traj.domain[1] - traj.domain[0]
    return _rho_many(group, traj, i, ts, los, his, calculus.default_step(span, 1))[0]


def rho_sequence(group: TransformationGroup, traj: Trajectory):
    """The lifts rho^0 .. rho^m as callables time -> R^n bound to (group,
    trajectory)."""
    return [lambda t, i=i: rho(group, traj, i, t) for i in range(traj.m + 1)]


def _gauge_many(group: TransformationGroup, traj: Trajectory,
                problem: IsoperimetricProblem, ts: np.ndarray) -> np.ndarray:
    if group.gauge is None:
        return np.zeros(len(ts))
    out = np.asarray(group.gauge(args_at(traj, ts, problem.tau, problem.m).values),
                     dtype=float)
    # constant gauge expressions evaluate to a scalar even for array slots
    return np.broadcast_to(out, ts.shape) if out.ndim == 0 else out


def _gauge_dot_many(group, traj, problem, ts, los, his) -> np.ndarray:
    if group.gauge is None:
        return np.zeros(len(ts))
    return calculus.total_derivative_many(
        lambda u: _gauge_many(group, traj, problem, u)[:, None],
        ts, 1, los, his, calculus.default_step(problem.span, 1))[:, 0]


def noether_quantity(setup: AugmentedSetup, group: TransformationGroup, traj: Trajectory,
                     t: float, regime: Regime) -> float:
    """sum_j psi_j . rho^(j-1) + (F - sum_j psi_j . q^(j)) eta - gauge."""
    problem = setup.problem
    F = augmented_integrand(setup)
    ts = np.array([float(t)])
    psis = [p[0] for p in psi_values(setup, traj, ts, regime)]
    bracket = float(F(args_at(traj, t, problem.tau, problem.m).values))
    lead = 0.0
    for j, psi_j in enumerate(psis, start=1):
        bracket -= float(psi_j @ np.atleast_1d(traj.eval(t, j)))
        lead += float(psi_j @ rho(group, traj, j - 1, t))
    eta = float(_eta_many(group, traj, ts)[0])
    return lead + bracket * eta - float(_gauge_many(group, traj, problem, ts)[0])


# ---------------------------------------------------------------------------
# invariance


def _transformed_blocks(group, traj, problem, j: int, ts: np.ndarray, s: float,
                        h: float) -> np.ndarray:
    """j-th derivative of the transformed path at parameters ts for group
    parameter s; generators vanish (and stencils stop) left of t1."""
    active = ts >= problem.t1
    out = np.atleast_2d(traj.eval(ts, j)).copy()
    if not np.any(active):
        return out
    ta = ts[active]
    if j == 0:
        out[active] += s * _xi_many(group, traj, ta)
        return out
    los, his = _piece_bounds(traj, ta, lo=problem.t1)  # zero-extension wall at t1

    def prev(us):
        return _transformed_blocks(group, traj, problem, j - 1, us, s, h)

    d_prev = calculus.total_derivative_many(prev, ta, 1, los, his, h)
    denom = 1.0 + s * _eta_dot_many(group, traj, ta, los, his, h)
    out[active] = d_prev / denom[:, None]
    return out


def invariance_defect(setup: AugmentedSetup, group: TransformationGroup, traj: Trajectory,
                      interval: tuple[float, float] | None = None) -> float:
    """d/ds at s = 0 of the transformed action minus the gauge allowance.

    Near zero means the functional is invariant under the group on that
    interval (up to the gauge term).
    """
    problem = setup.problem
    a, b = interval if interval is not None else (problem.t1, problem.t2)
    slack = 1e-9 * max(1.0, problem.span)
    if a < problem.t1 - slack or b > problem.t2 + slack:
        raise TransformEscapesDomain(f"interval [{a}, {b}] leaves [{problem.t1}, {problem.t2}]")
    F = augmented_integrand(setup)
    m, tau = problem.m, problem.tau
    h = calculus.default_step(problem.span, 1)
    base = np.asarray(traj.breakpoints())
    breaks = np.unique(np.concatenate([
        base, base + tau, base - tau,
        [problem.t2 - tau, problem.t1 + tau],
    ]))

    def transformed_action(s: float) -> float:
        def integrand(ts):
            ts = np.atleast_1d(np.asarray(ts, dtype=float))
            eta = _eta_many(group, traj, ts)
            values: list = [ts + s * eta]
            for shift in (0.0, -tau):
                for j in range(m + 1):
                    block = _transformed_blocks(group, traj, problem, j, ts + shift, s, h)
                    values.extend(block[:, i] for i in range(problem.n))
            los, his = stencil_bounds(ts, breaks, problem.t1, problem.t2)
            jac = 1.0 + s * _eta_dot_many(group, traj, ts, los, his, h)
            return np.asarray(F(values), dtype=float) * jac

        return calculus.integrate(integrand, a, b, breaks)

    action_rate = calculus.derivative_in_parameter(transformed_action).value

    def gauge_rate(ts):
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        los, his = stencil_bounds(ts, breaks, *traj.domain)
        return _gauge_dot_many(group, traj, problem, ts, los, his)

    return action_rate - calculus.integrate(gauge_rate, a, b, breaks)


def necessary_condition_defect(setup: AugmentedSetup, group: TransformationGroup,
                               traj: Trajectory) -> tuple[float, float]:
    """The two regime integrals of the invariance lemma; both vanish when the
    functional is invariant up to the gauge term."""
    problem = setup.problem
    F = augmented_integrand(setup)
    m, tau = problem.m, problem.tau
    h = calculus.default_step(problem.span, 1)
    breaks = smooth_breaks(problem, traj)

    def make_integrand(regime: Regime):
        lo_r, hi_r = regime_interval(problem, regime)
        maps = [stacked_partial_map(F, traj, tau, m, i, regime) for i in range(m + 1)]

        def integrand(ts):
            ts = np.atleast_1d(np.asarray(ts, dtype=float))
            los, his = stencil_bounds(ts, breaks, lo_r, hi_r)
            args = args_at(traj, ts, tau, m)
            d1 = calculus.partial(F, 1, args)[0]
            value = np.asarray(F(args.values), dtype=float)
            total = (-_gauge_dot_many(group, traj, problem, ts, los, his)
                     + d1 * _eta_many(group, traj, ts)
                     + value * _eta_dot_many(group, traj, ts, los, his, h))
            for i, lam_map in enumerate(maps):
                total += np.sum(lam_map(ts) * _rho_many(group, traj, i, ts, los, his, h),
                                axis=1)
            return total

        return integrand

    out = []
    for regime in (Regime.FIRST, Regime.SECOND):
        lo_r, hi_r = regime_interval(problem, regime)
        out.append(calculus.integrate(make_integrand(regime), lo_r, hi_r, breaks))
    return out[0], out[1]


# ---------------------------------------------------------------------------
# constancy reporting


@dataclass
class ConstancyReport:
    """Per-regime mean and worst deviation of a would-be constant of motion."""

    means: dict[Regime, float]
    deviations: dict[Regime, float]
    values: dict[Regime, np.ndarray]
    grids: dict[Regime, Grid]
    hypothesis_violated: bool = False

    @property
    def max_deviation(self) -> float:
        return max(self.deviations.values())


def constancy_report(quantity, grids: dict[Regime, Grid],
                     hypothesis_violated: bool = False) -> ConstancyReport:
    """Sample a time -> real quantity per regime and report mean / max |C - mean|."""
    if not grids:
        raise EmptyGrid("constancy report needs at least one regime grid")
    means, devs, values = {}, {}, {}
    for regime, grid in grids.items():
        samples = np.array([float(quantity(t)) for t in grid.times])
        if samples.size == 0:
            raise EmptyGrid(f"no samples in regime {regime}")
        mean = float(np.mean(samples))
        means[regime] = mean
        devs[regime] = float(np.max(np.abs(samples - mean)))
        values[regime] = samples
    return ConstancyReport(means, devs, values, dict(grids), hypothesis_violated)
