"""Global collocation solvers for the delayed Euler-Lagrange boundary-value
problem (trajectory and multipliers jointly) and the delayed Pontryagin
system, by damped Newton iteration on a square nonlinear system.

Delayed problems couple retarded (t - tau) and advanced (t + tau) values, so
the full-horizon system is assembled at once rather than marching; the mesh
is uniform per regime with a forced node at t2 - tau.  Jacobians are forward
finite differences, re-factorized every iteration.  NonConvergence is a
returned state (report.converged = False); a numerically singular Jacobian
raises.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as P

from . import calculus
from .dubois_reymond import cdur_residual, dr_residual
from .errors import SingularJacobian
from .euler_lagrange import Classification, Regime, ResidualReport, classify, el_residual, \
    residual_grids
from .optimal_control import PontryaginTriple, pmp_residuals
from .problem import (
    AugmentedSetup,
    ControlProblem,
    IsoperimetricProblem,
    constraint_defect,
)
from .trajectory import Grid, PolySegment, Trajectory, segments_from_callable

__all__ = ["CollocationScheme", "SolveReport", "solve_el", "solve_pmp", "verify"]


@dataclass(frozen=True)
class CollocationScheme:
    """Collocation mesh and Newton parameters.

    ``nodes`` is the collocation-node count per regime; the basis degree
    defaults to 2m + 2 for variational problems and 3 for control problems.
    """

    nodes: int = 64
    degree: int | None = None
    initial_step: float = 1.0
    min_step: float = 1e-6
    max_iterations: int = 50
    tolerance: float = 1e-9

    def __post_init__(self):
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")


@dataclass
class SolveReport:
    converged: bool
    iterations: int
    residual_norm: float
    lam: np.ndarray
    condition: float

    def to_dict(self) -> dict:
        return {
            "converged": self.converged,
            "iterations": self.iterations,
            "residual_norm": self.residual_norm,
            "lambda": [float(v) for v in np.atleast_1d(self.lam)],
            # no Jacobian is ever factorized when the start already converges
            "condition": None if math.isnan(self.condition) else self.condition,
        }


def _regime_mesh(t1: float, split: float, t2: float, segments_per_regime: int) -> np.ndarray:
    left = np.linspace(t1, split, segments_per_regime + 1)
    right = np.linspace(split, t2, segments_per_regime + 1)
    return np.concatenate([left, right[1:]])


def _gauss_points(a: float, b: float, count: int) -> np.ndarray:
    nodes, _ = np.polynomial.legendre.leggauss(count)
    return 0.5 * (a + b) + 0.5 * (b - a) * nodes


def _fit_segment_coeffs(fn_eval, a: float, b: float, degree: int, n: int) -> np.ndarray:
    """Interpolate a guess onto one segment's shifted-monomial basis."""
    k = np.arange(degree + 1)
    mid = 0.5 * (a + b)
    ts = mid + 0.5 * (b - a) * np.cos(np.pi * (2 * k + 1) / (2 * (degree + 1)))
    ys = np.array([np.atleast_1d(fn_eval(t)) for t in ts])  # (deg+1, n)
    return P.polyfit(ts - mid, ys, degree).T  # (n, deg+1)


class _LinearRows:
    """Matrix form of the exactly linear equations (continuity, history,
    terminal data): residual = A x - c.  Projecting every Newton iterate onto
    A x = c is what guarantees the boundary rows hold to 1e-10 regardless of
    the convergence flag."""

    def __init__(self, lin_residual, nx: int):
        r0 = lin_residual(np.zeros(nx))
        self.empty = r0.size == 0
        if self.empty:
            return
        cols = np.empty((len(r0), nx))
        unit = np.zeros(nx)
        for i in range(nx):
            unit[i] = 1.0
            cols[:, i] = lin_residual(unit) - r0
            unit[i] = 0.0
        self.matrix = cols
        self.rhs = -r0
        self.pinv = np.linalg.pinv(cols)

    def project(self, x: np.ndarray) -> np.ndarray:
        if self.empty:
            return x
        defect = self.matrix @ x - self.rhs
        if float(np.max(np.abs(defect))) <= 1e-13:
            return x
        return x - self.pinv @ defect


class _Newton:
    """Damped Newton with forward-difference Jacobian on a square system;
    iterates are projected onto the linear rows before every residual check."""

    def __init__(self, residual, scheme: CollocationScheme, project=None):
        self.residual = residual
        self.scheme = scheme
        self.project = project if project is not None else (lambda x: x)
        self.condition = math.nan

    def jacobian(self, x: np.ndarray, r0: np.ndarray) -> np.ndarray:
        jac = np.empty((len(r0), len(x)))
        for i in range(len(x)):
            h = 1e-7 * (1.0 + abs(x[i]))
            xp = x.copy()
            xp[i] += h
            jac[:, i] = (self.residual(xp) - r0) / h
        return jac

    def run(self, x0: np.ndarray) -> tuple[np.ndarray, bool, int, float]:
        scheme = self.scheme
        x = self.project(x0.copy())
        r = self.residual(x)
        norm = float(np.max(np.abs(r)))
        if norm <= scheme.tolerance:
            return x, True, 0, norm
        for iteration in range(1, scheme.max_iterations + 1):
            jac = self.jacobian(x, r)
            self.condition = float(np.linalg.cond(jac))
            if not np.isfinite(self.condition) or self.condition > 1e12:
                raise SingularJacobian(
                    f"collocation Jacobian condition estimate {self.condition:.3e}",
                    self.condition)
            step = np.linalg.solve(jac, -r)
            alpha = scheme.initial_step
            while alpha >= scheme.min_step:
                x_try = self.project(x + alpha * step)
                r_try = self.residual(x_try)
                norm_try = float(np.max(np.abs(r_try)))
                if norm_try <= (1.0 - 1e-4 * alpha) * norm or norm_try <= scheme.tolerance:
                    break
                alpha *= 0.5
            else:
                return x, False, iteration, norm
            x, r, norm = x_try, r_try, norm_try
            if norm <= scheme.tolerance:
                return x, True, iteration, norm
        return x, False, scheme.max_iterations, norm


# ---------------------------------------------------------------------------
# delayed Euler-Lagrange BVP


def solve_el(problem: IsoperimetricProblem, initial=None,
             scheme: CollocationScheme | None = None):
    """Solve the delayed Euler-Lagrange BVP jointly for (trajectory, lambda).

    Unknowns are per-segment polynomial coefficients on a uniform two-regime
    mesh plus the multipliers; equations are the regime-aware differential
    residuals at interior Gauss points, C^(2m-1) continuity at mesh knots,
    history matching at t1, the terminal data, and the isoperimetric defects.
    Returns (trajectory, lambda, report); terminal/history rows are enforced
    to linear precision regardless of convergence.
    """
    scheme = scheme or CollocationScheme()
    m, n, k = problem.m, problem.n, problem.k
    degree = scheme.degree if scheme.degree is not None else 2 * m + 2
    colloc = degree + 1 - 2 * m
    if colloc < 1:
        raise ValueError(f"degree {degree} too low for m = {m}")
    segments_per_regime = max(1, math.ceil(scheme.nodes / colloc))
    edges = _regime_mesh(problem.t1, problem.t2 - problem.tau, problem.t2,
                         segments_per_regime)
    nseg = len(edges) - 1
    ncoef = nseg * n * (degree + 1)

    hist_segments = problem.stitched_history(panels=max(2, segments_per_regime))
    hist_end = hist_segments[-1]
    colloc_ts = np.concatenate([
        _gauss_points(a, b, colloc) for a, b in zip(edges[:-1], edges[1:])
    ])

    def build(x: np.ndarray) -> tuple[Trajectory, np.ndarray]:
        coeffs = x[:ncoef].reshape(nseg, n, degree + 1)
        segs = list(hist_segments) + [
            PolySegment(edges[s], edges[s + 1], coeffs[s]) for s in range(nseg)
        ]
        return Trajectory(n, m, segs, validate=False), x[ncoef:]

    def lin_residual(x: np.ndarray) -> np.ndarray:
        traj, _ = build(x)
        segs = traj.segments[len(hist_segments):]
        rows = []
        for s in range(nseg - 1):
            for order in range(2 * m):
                rows.append(segs[s].eval(edges[s + 1], order)
                            - segs[s + 1].eval(edges[s + 1], order))
        for order in range(m):
            rows.append(segs[0].eval(problem.t1, order)
                        - hist_end.eval(problem.t1, order))
        if problem.boundary is not None:
            for order in range(m):
                rows.append(segs[-1].eval(problem.t2, order) - problem.boundary[order])
        return np.concatenate(rows) if rows else np.zeros(0)

    def residual(x: np.ndarray) -> np.ndarray:
        traj, lam = build(x)
        setup = AugmentedSetup(problem, lam)
        parts = [el_residual(setup, traj, colloc_ts).ravel(), lin_residual(x)]
        if k:
            parts.append(constraint_defect(problem, traj))
        return np.concatenate(parts)

    # initial iterate: supplied guess projected segment-wise, else the line
    # from the history endpoint to the terminal value
    if initial is not None:
        guess_traj, lam0 = initial
        x0 = np.concatenate([
            np.concatenate([
                _fit_segment_coeffs(lambda t: guess_traj.eval(t, 0), a, b, degree, n).ravel()
                for a, b in zip(edges[:-1], edges[1:])
            ]),
            np.atleast_1d(np.asarray(lam0, dtype=float)),
        ])
    else:
        q_left = np.atleast_1d(hist_end.eval(problem.t1, 0))
        q_right = (problem.boundary[0] if problem.boundary is not None else q_left)
        slope = (q_right - q_left) / problem.span

        def line(t):
            return q_left + slope * (t - problem.t1)

        x0 = np.concatenate([
            np.concatenate([
                _fit_segment_coeffs(line, a, b, degree, n).ravel()
                for a, b in zip(edges[:-1], edges[1:])
            ]),
            np.zeros(k),
        ])

    rows = _LinearRows(lin_residual, len(x0))
    newton = _Newton(residual, scheme, project=rows.project)
    x, converged, iterations, norm = newton.run(x0)
    if not converged and k:
        for lam_start in _lambda_starts(k):
            x_retry = x0.copy()
            x_retry[ncoef:] = lam_start
            x2, conv2, it2, norm2 = newton.run(x_retry)
            if conv2:
                x, converged, iterations, norm = x2, conv2, it2, norm2
                break

    traj, lam = build(x)
    report = SolveReport(converged, iterations, norm, lam, newton.condition)
    return traj, lam, report


def _lambda_starts(k: int):
    grids = np.meshgrid(*([np.array([-10.0, -1.0, 0.0, 1.0, 10.0])] * k), indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


# ---------------------------------------------------------------------------
# delayed Pontryagin system


def solve_pmp(cp: ControlProblem, scheme: CollocationScheme | None = None):
    """Solve the delayed Hamiltonian system q-p-u (+ multipliers) by
    collocation.  Terminal policy: fixed q(t2) when the problem supplies one,
    otherwise p(t2) = 0.  Returns (PontryaginTriple, lambda, report).
    """
    scheme = scheme or CollocationScheme()
    n, mc, k = cp.n, cp.mc, cp.k
    degree = scheme.degree if scheme.degree is not None else 3
    colloc = degree  # first-order system: d Gauss points per degree-d segment
    segments_per_regime = max(1, math.ceil(scheme.nodes / colloc))
    edges = _regime_mesh(cp.t1, cp.t2 - cp.tau, cp.t2, segments_per_regime)
    nseg = len(edges) - 1

    nq = nseg * n * (degree + 1)
    npc = nseg * n * (degree + 1)
    nu = nseg * mc * degree
    ncoef = nq + npc + nu

    if cp.history is not None:
        q_hist = segments_from_callable(cp.history, cp.t1 - cp.tau, cp.t1,
                                        panels=max(2, segments_per_regime), degree=3)
    else:
        q_hist = [PolySegment(cp.t1 - cp.tau, cp.t1, np.zeros((n, 1)))]
    u_hist_fn = cp.control_history if cp.control_history is not None else (
        lambda t: np.zeros(mc))
    u_hist = segments_from_callable(u_hist_fn, cp.t1 - cp.tau, cp.t1,
                                    panels=2, degree=2)

    colloc_ts = np.concatenate([
        _gauss_points(a, b, colloc) for a, b in zip(edges[:-1], edges[1:])
    ])

    def build(x: np.ndarray):
        qc = x[:nq].reshape(nseg, n, degree + 1)
        pc = x[nq:nq + npc].reshape(nseg, n, degree + 1)
        uc = x[nq + npc:ncoef].reshape(nseg, mc, degree)
        q_segs = list(q_hist) + [PolySegment(edges[s], edges[s + 1], qc[s])
                                 for s in range(nseg)]
        p_segs = [PolySegment(edges[s], edges[s + 1], pc[s]) for s in range(nseg)]
        u_segs = list(u_hist) + [PolySegment(edges[s], edges[s + 1], uc[s])
                                 for s in range(nseg)]
        triple = PontryaginTriple(
            q=Trajectory(n, 1, q_segs, validate=False),
            u=Trajectory(mc, 1, u_segs, validate=False),
            p=Trajectory(n, 1, p_segs, validate=False),
        )
        return triple, x[ncoef:]

    def lin_residual(x: np.ndarray) -> np.ndarray:
        triple, _ = build(x)
        q_segs = triple.q.segments[len(q_hist):]
        p_segs = triple.p.segments
        rows = []
        for s in range(nseg - 1):
            knot = edges[s + 1]
            rows.append(q_segs[s].eval(knot, 0) - q_segs[s + 1].eval(knot, 0))
            rows.append(p_segs[s].eval(knot, 0) - p_segs[s + 1].eval(knot, 0))
        rows.append(q_segs[0].eval(cp.t1, 0) - q_hist[-1].eval(cp.t1, 0))
        if cp.terminal_state is not None:
            rows.append(q_segs[-1].eval(cp.t2, 0) - cp.terminal_state)
        else:
            rows.append(p_segs[-1].eval(cp.t2, 0))
        return np.concatenate(rows)

    def residual(x: np.ndarray) -> np.ndarray:
        triple, lam = build(x)
        res = pmp_residuals(cp, triple, lam, colloc_ts)
        parts = [res.state.ravel(), res.costate.ravel(), res.stationarity.ravel(),
                 lin_residual(x)]
        if k:
            parts.append(_control_constraint_defect(cp, triple))
        return np.concatenate(parts)

    x0 = np.zeros(ncoef + k)
    rows = _LinearRows(lin_residual, len(x0))
    newton = _Newton(residual, scheme, project=rows.project)
    x, converged, iterations, norm = newton.run(x0)
    if not converged and k:
        for lam_start in _lambda_starts(k):
            x_retry = x0.copy()
            x_retry[ncoef:] = lam_start
            x2, conv2, it2, norm2 = newton.run(x_retry)
            if conv2:
                x, converged, iterations, norm = x2, conv2, it2, norm2
                break

    triple, lam = build(x)
    report = SolveReport(converged, iterations, norm, lam, newton.condition)
    return triple, lam, report


def _control_constraint_defect(cp: ControlProblem, triple: PontryaginTriple) -> np.ndarray:
    breaks = set(triple.q.breakpoints()) | set(triple.u.breakpoints())
    breaks |= {b + cp.tau for b in breaks} | {cp.t2 - cp.tau}

    def sub_values(ts):
        values = [ts]
        for traj in (triple.q, triple.u):
            block = traj.eval(ts, 0)
            values.extend(block[..., i] for i in range(block.shape[-1]))
        for traj in (triple.q, triple.u):
            block = traj.eval(ts - cp.tau, 0)
            values.extend(block[..., i] for i in range(block.shape[-1]))
        return values

    out = np.empty(cp.k)
    for j, gj in enumerate(cp.g):
        out[j] = calculus.integrate(lambda ts: np.asarray(gj(sub_values(ts)), dtype=float),
                                    cp.t1, cp.t2, sorted(breaks)) - cp.l[j]
    return out


# ---------------------------------------------------------------------------
# aggregate verification


def verify(problem: IsoperimetricProblem, traj: Trajectory, lam,
           tol: float = 1e-6, grid_count: int = 200) -> ResidualReport:
    """Sup-norms of every necessary-condition residual over regime-respecting
    grids, with the hypothesis and abnormality flags.

    The hypothesis flag never gates anything: quantities are evaluated and
    reported even when the advanced-term hypothesis fails.
    """
    setup = AugmentedSetup(problem, lam)
    grids = residual_grids(problem, traj, count=grid_count)
    first, second = grids[Regime.FIRST], grids[Regime.SECOND]
    el_first = el_residual(setup, traj, first.times)
    el_second = el_residual(setup, traj, second.times)
    dr_first = np.atleast_1d(dr_residual(setup, traj, first.times, Regime.FIRST))
    dr_second = np.atleast_1d(dr_residual(setup, traj, second.times, Regime.SECOND))

    base = np.asarray(traj.breakpoints())
    cdur_exclude = np.unique(np.concatenate([base, base - problem.tau]))
    cdur_grid = Grid.build(problem.t1 - problem.tau, problem.t2 - problem.tau,
                           grid_count, exclude=cdur_exclude,
                           eps_knot=first.eps_knot)
    cdur = np.atleast_1d(cdur_residual(setup, traj, cdur_grid.times))

    defect = constraint_defect(problem, traj) if problem.k else np.zeros(0)
    abnormal = None
    if problem.k:
        abnormal = classify(problem, traj) is Classification.ABNORMAL
    return ResidualReport(
        times_first=first.times, times_second=second.times,
        el_first=el_first, el_second=el_second,
        dr_first=dr_first, dr_second=dr_second,
        cdur_times=cdur_grid.times, cdur=cdur,
        constraint_defect=defect,
        hypothesis_violated=bool(np.max(np.abs(cdur)) > tol),
        abnormal=abnormal,
    )
