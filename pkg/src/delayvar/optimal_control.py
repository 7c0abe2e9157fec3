"""Delayed optimal-control layer: Hamiltonian, Pontryagin residuals, the
Hamiltonian-form conserved quantity, the second-order corollary quantity, and
the order-reduction map from m = 2 variational problems to control form.

Hamiltonian argument order is (t; q; u; q_tau; u_tau; p; lambda); the p-block
partial recovers the velocity map, so all Pontryagin conditions are plain
block partials of one integrand.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import calculus
from .dubois_reymond import psi_values
from .errors import OutOfDomain, WrongOrder
from .euler_lagrange import Regime
from .problem import (
    ArgLayout,
    ArgVector,
    AugmentedSetup,
    ControlProblem,
    Integrand,
    IsoperimetricProblem,
    TransformationGroup,
    args_at,
    augmented_integrand,
)
from .trajectory import Trajectory

__all__ = ["PontryaginTriple", "PmpResiduals", "hamiltonian_integrand", "control_args_at",
           "hamiltonian", "pmp_residuals", "pmp_residual_csv",
           "hamiltonian_noether_quantity", "second_order_noether_quantity",
           "reduce_to_control"]


@dataclass(frozen=True)
class PontryaginTriple:
    """State / control / costate candidate for a delayed control problem.

    q and u live on [t1 - tau, t2]; the costate p on [t1, t2] only.
    """

    q: Trajectory
    u: Trajectory
    p: Trajectory


def hamiltonian_integrand(cp: ControlProblem) -> Integrand:
    """H = L - lam.g + p.phi over the 7-block control layout."""
    n, mc, k = cp.n, cp.mc, cp.k
    nsub = 1 + 2 * (n + mc)

    def fn(values):
        sub = values[:nsub]
        out = cp.L(sub)
        for j in range(k):
            lam_j = values[nsub + n + j]
            out = out - lam_j * cp.g[j](sub)
        for i in range(n):
            out = out + values[nsub + i] * cp.phi[i](sub)
        return out

    return Integrand(fn, name="hamiltonian")


def control_args_at(cp: ControlProblem, triple: PontryaginTriple, lam, t) -> ArgVector:
    """(t, q(t), u(t), q(t-tau), u(t-tau), p(t), lam) with array support."""
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    t = np.asarray(t, dtype=float)
    layout = ArgLayout.control(cp.n, cp.mc, len(lam))
    values: list = [t if t.ndim else float(t)]

    def extend(block):
        if t.ndim:
            values.extend(block[..., i] for i in range(block.shape[-1]))
        else:
            values.extend(float(x) for x in np.atleast_1d(block))

    extend(triple.q.eval(t, 0))
    extend(triple.u.eval(t, 0))
    extend(triple.q.eval(t - cp.tau, 0))
    extend(triple.u.eval(t - cp.tau, 0))
    extend(triple.p.eval(t, 0))
    if t.ndim:
        values.extend(np.full(t.shape, lj) for lj in lam)
    else:
        values.extend(float(lj) for lj in lam)
    return ArgVector(values, layout)


def hamiltonian(cp: ControlProblem, args: ArgVector) -> float | np.ndarray:
    value = hamiltonian_integrand(cp)(args.values)
    return value if np.ndim(value) else float(value)


@dataclass(frozen=True)
class PmpResiduals:
    """Residuals of the delayed Hamiltonian system and stationarity conditions."""

    state: np.ndarray
    costate: np.ndarray
    stationarity: np.ndarray

    @property
    def sup(self) -> float:
        return max(float(np.max(np.abs(r))) for r in
                   (self.state, self.costate, self.stationarity))


def pmp_residuals(cp: ControlProblem, triple: PontryaginTriple, lam, t) -> PmpResiduals:
    """state: qdot - d_p H; costate: pdot + d_q H (+ advanced d_{q_tau} H on
    the first regime); stationarity: d_u H (+ advanced d_{u_tau} H)."""
    scalar = np.ndim(t) == 0
    ts = np.atleast_1d(np.asarray(t, dtype=float))
    slack = 1e-10 * max(1.0, cp.span)
    if np.any(ts < cp.t1 - slack) or np.any(ts > cp.t2 + slack):
        raise OutOfDomain(f"PMP residuals are evaluated on [{cp.t1}, {cp.t2}]")
    H = hamiltonian_integrand(cp)
    args = control_args_at(cp, triple, lam, ts)
    state = triple.q.eval(ts, 1) - calculus.partial(H, 6, args).T
    costate = triple.p.eval(ts, 1) + calculus.partial(H, 2, args).T
    stationarity = calculus.partial(H, 3, args).T
    first = ts < cp.t2 - cp.tau
    if np.any(first):
        adv = control_args_at(cp, triple, lam, ts[first] + cp.tau)
        costate[first] += calculus.partial(H, 4, adv).T
        stationarity[first] += calculus.partial(H, 5, adv).T
    if scalar:
        return PmpResiduals(state[0], costate[0], stationarity[0])
    return PmpResiduals(state, costate, stationarity)


def pmp_residual_csv(cp: ControlProblem, triple: PontryaginTriple, lam, times) -> str:
    """CSV rows t, state residual, costate residual, stationarity residual, H."""
    import csv
    import io

    times = np.atleast_1d(np.asarray(times, dtype=float))
    res = pmp_residuals(cp, triple, lam, times)
    H = hamiltonian_integrand(cp)
    energies = np.broadcast_to(
        np.asarray(H(control_args_at(cp, triple, lam, times).values), dtype=float),
        times.shape)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["t"]
                    + [f"state_{i}" for i in range(cp.n)]
                    + [f"costate_{i}" for i in range(cp.n)]
                    + [f"stationarity_{i}" for i in range(cp.mc)]
                    + ["H"])
    for j, t in enumerate(times):
        writer.writerow([f"{t:.17g}"]
                        + [f"{v:.17g}" for v in res.state[j]]
                        + [f"{v:.17g}" for v in res.costate[j]]
                        + [f"{v:.17g}" for v in res.stationarity[j]]
                        + [f"{energies[j]:.17g}"])
    return buf.getvalue()


def hamiltonian_noether_quantity(cp: ControlProblem, group: TransformationGroup,
                                 triple: PontryaginTriple, lam, t: float) -> float:
    """-p . xi(t, q, u) + H . eta(t, q, u); one expression on both regimes."""
    q = np.atleast_1d(triple.q.eval(t, 0))
    u = np.atleast_1d(triple.u.eval(t, 0))
    p = np.atleast_1d(triple.p.eval(t, 0))
    args = control_args_at(cp, triple, lam, t)
    value = float(hamiltonian_integrand(cp)(args.values))
    xi = np.atleast_1d(np.asarray(group.xi(t, q, u), dtype=float))
    return float(-p @ xi + value * float(group.eta(t, q, u)))


def second_order_noether_quantity(setup: AugmentedSetup, traj: Trajectory, t: float,
                                  regime: Regime, eta: float,
                                  xi0=None, xi1=None) -> float:
    """Second-order conserved quantity F eta + psi_1 . (xi0 - qdot eta)
    + psi_2 . (xi1 - qddot eta); the time generator is the constant eta."""
    problem = setup.problem
    if problem.m != 2:
        raise WrongOrder(f"second-order quantity needs m = 2, problem has m = {problem.m}")
    F = augmented_integrand(setup)
    psi1, psi2 = (p[0] for p in psi_values(setup, traj, [t], regime))
    q = np.atleast_1d(traj.eval(t, 0))
    qd = np.atleast_1d(traj.eval(t, 1))
    qdd = np.atleast_1d(traj.eval(t, 2))
    xi0v = np.zeros(problem.n) if xi0 is None else np.atleast_1d(np.asarray(xi0(t, q), dtype=float))
    xi1v = np.zeros(problem.n) if xi1 is None else np.atleast_1d(np.asarray(xi1(t, q), dtype=float))
    value = float(F(args_at(traj, t, problem.tau, problem.m).values))
    return float(value * eta + psi1 @ (xi0v - qd * eta) + psi2 @ (xi1v - qdd * eta))


# ---------------------------------------------------------------------------
# order reduction


def _map_control_partial(partial_fn, n: int):
    """Adapt a variational (m = 2) analytic partial to the control layout."""
    if partial_fn is None:
        return None
    # control block -> variational blocks sharing the same flat slots
    chain = {1: (1,), 2: (2, 3), 3: (4,), 4: (5, 6), 5: (7,)}

    def mapped(block, values):
        return np.concatenate([np.atleast_1d(partial_fn(b, values)) for b in chain[block]])

    return mapped


def reduce_to_control(problem: IsoperimetricProblem) -> ControlProblem:
    """Rewrite an m = 2 problem as a delayed control problem with state
    (q, qdot), control u = qddot, and chain dynamics phi = (q1, u).

    The flat argument order of the two layouts coincides, so integrands carry
    over unchanged; only block indexing is re-interpreted.
    """
    if problem.m != 2:
        raise WrongOrder(f"order reduction needs m = 2, problem has m = {problem.m}")
    n = problem.n
    n_state, mc = 2 * n, n

    def phi_component(i: int) -> Integrand:
        slot = 1 + n + i if i < n else 1 + 2 * n + (i - n)

        def fn(values):
            return values[slot]

        def partial_fn(block, values):
            layout = ArgLayout((1, n_state, mc, n_state, mc))
            sl = layout.block_slice(block)
            grad = np.zeros(sl.stop - sl.start)
            if sl.start <= slot < sl.stop:
                grad[slot - sl.start] = 1.0
            return grad

        return Integrand(fn, partial_fn, name=f"chain_phi_{i}")

    history = control_history = None
    if problem.history is not None:
        hist_traj = Trajectory(n, 1, problem.stitched_history(), validate=False)

        def history(t):
            return np.concatenate([np.atleast_1d(hist_traj.eval(t, 0)),
                                   np.atleast_1d(hist_traj.eval(t, 1))])

        def control_history(t):
            return np.atleast_1d(hist_traj.eval(t, 2))

    terminal = None if problem.boundary is None else problem.boundary.reshape(-1)
    return ControlProblem(
        n=n_state, mc=mc, tau=problem.tau, t1=problem.t1, t2=problem.t2,
        L=Integrand(problem.L.fn, _map_control_partial(problem.L.partial_fn, n),
                    name=problem.L.name),
        phi=tuple(phi_component(i) for i in range(n_state)),
        g=tuple(Integrand(gj.fn, _map_control_partial(gj.partial_fn, n), name=gj.name)
                for gj in problem.g),
        l=problem.l, history=history, control_history=control_history,
        terminal_state=terminal,
    )
