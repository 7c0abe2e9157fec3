"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Expected values marked as derived are frozen from independent oracles: the
functional values come from sympy closed-form piecewise integration, the
audit values from closed-form differentiation of the piecewise quartic, the
control solution from a hand method-of-steps integration.
"""

from __future__ import annotations

import time

import numpy as np
import pytest

from delayvar import calculus
from delayvar.dubois_reymond import cdur_residual, dr_quantity, dr_residual, psi
from delayvar.euler_lagrange import (
    Classification,
    Regime,
    classify,
    el_residual,
    regime_of,
    residual_grids,
    smooth_breaks,
    stencil_bounds,
)
from delayvar.noether import (
    constancy_report,
    invariance_defect,
    necessary_condition_defect,
    noether_quantity,
    rho,
)
from delayvar.optimal_control import (
    control_args_at,
    hamiltonian_integrand,
    pmp_residuals,
    second_order_noether_quantity,
)
from delayvar.problem import (
    AugmentedSetup,
    ControlProblem,
    Integrand,
    IsoperimetricProblem,
    TransformationGroup,
    args_at,
    augmented_integrand,
    constraint_values,
    functional_value,
    integrand_from_expr,
)
from delayvar.solver import CollocationScheme, solve_el, solve_pmp, verify
from delayvar.trajectory import Grid, PolySegment, Trajectory


def _report(num: int, ok: bool, detail: str) -> None:
    print(f"criterion {num}: {'PASS' if ok else 'FAIL'} - {detail}")
    assert ok, f"criterion {num}: {detail}"


@pytest.fixture(scope="module")
def closed_form_functionals():
    """Independent sympy oracle for J and I of the piecewise quartic."""
    import sympy as sp

    t = sp.Symbol("t")
    pieces = (-t ** 4, t ** 4, -t ** 4 + 2)

    def dn(expr, order):
        return sp.diff(expr, t, order)

    J = (sp.integrate((dn(pieces[1], 2) + dn(pieces[0], 2).subs(t, t - 1)) ** 2, (t, 0, 1))
         + sp.integrate((dn(pieces[2], 2) + dn(pieces[1], 2).subs(t, t - 1)) ** 2, (t, 1, 2)))
    I = (sp.integrate((dn(pieces[1], 1) + dn(pieces[0], 1).subs(t, t - 1)) ** 2, (t, 0, 1))
         + sp.integrate((dn(pieces[2], 1) + dn(pieces[1], 1).subs(t, t - 1)) ** 2, (t, 1, 2)))
    return float(J), float(I)


def test_criterion_1_example1_el_extremality(ex1_problem, ex1_setup, ex1_traj):
    start = time.perf_counter()
    grids = residual_grids(ex1_problem, ex1_traj, count=200, eps_knot=1e-2)
    sups = {regime: float(np.max(np.abs(el_residual(ex1_setup, ex1_traj, grid.times))))
            for regime, grid in grids.items()}
    elapsed = time.perf_counter() - start
    ok = all(s <= 1e-7 for s in sups.values()) and elapsed < 1.0
    _report(1, ok, f"el sup first={sups[Regime.FIRST]:.3e} "
                   f"second={sups[Regime.SECOND]:.3e} (<=1e-7), {elapsed:.3f}s (<1s)")


def test_criterion_2_example1_functionals(ex1_problem, ex1_traj, closed_form_functionals):
    J_oracle, I_oracle = closed_form_functionals
    q2 = float(ex1_traj.eval(2.0, 0)[0])
    qd2 = float(ex1_traj.eval(2.0, 1)[0])
    J = functional_value(ex1_problem, ex1_traj)
    I = float(constraint_values(ex1_problem, ex1_traj)[0])
    ok = (q2 == -14.0 and qd2 == -32.0
          and abs(J - J_oracle) <= 1e-6 and abs(I - I_oracle) <= 1e-6)
    _report(2, ok, f"q(2)={q2} (=-14), qdot(2)={qd2} (=-32), "
                   f"J={J:.12g} (oracle {J_oracle}), I={I:.12g} (oracle {I_oracle})")


def test_criterion_3_example1_classification(ex1_problem, ex1_traj):
    # the g-residual on (1, 2) is 24(2t - 1) in closed form, so its sup is
    # far above any tolerance: a normal extremizer
    verdict = classify(ex1_problem, ex1_traj)
    grid = Grid.build(1.05, 1.95, 50, eps_knot=1e-3)
    from delayvar.euler_lagrange import _el_core

    g_res = _el_core(ex1_problem.g[0], ex1_problem, ex1_traj, grid.times, Regime.SECOND)
    sup = float(np.max(np.abs(g_res)))
    ok = verdict is Classification.NORMAL and sup >= 24.0
    _report(3, ok, f"classification={verdict.value}, g-residual sup on (1,2)={sup:.6g} (>=24)")


def test_criterion_4_dr_audit(ex1_problem, ex1_setup, ex1_traj):
    """The DuBois-Reymond constancy claim for this trajectory is not
    reproducible; the audit values that replace it are closed-form."""
    v125 = dr_quantity(ex1_setup, ex1_traj, 1.25, Regime.SECOND)
    v150 = dr_quantity(ex1_setup, ex1_traj, 1.5, Regime.SECOND)
    c05 = cdur_residual(ex1_setup, ex1_traj, 0.5)
    from delayvar import registry

    checks = registry.get("example1").checks()
    hypothesis = [c for c in checks if "hypothesis" in c.name]
    constancy = [c for c in checks if "deviation" in c.name]
    reporting_ok = (hypothesis and not hypothesis[0].gated and hypothesis[0].value == 1.0
                    and constancy and not constancy[0].gated
                    and all(c.passed for c in checks if c.gated))
    ok = (abs(v125 - 24.0) <= 1e-6 and abs(v150 + 72.0) <= 1e-6
          and abs(c05 + 576.0) <= 1e-4 and bool(reporting_ok))
    _report(4, ok, f"dr(1.25)={v125:.9g} (24), dr(1.5)={v150:.9g} (-72), "
                   f"cdur(0.5)={c05:.7g} (-576), hypothesis flagged + constancy ungated")


def test_criterion_5_classical_solve(classical_problem):
    start = time.perf_counter()
    traj, lam, report = solve_el(classical_problem, scheme=CollocationScheme(nodes=64))
    ts = np.linspace(0.0, 1.0, 401)
    sup_err = float(np.max(np.abs(traj.eval(ts, 0)[:, 0] - ts * (1 - ts))))
    rep = verify(classical_problem, traj, lam)
    dr_sup = max(rep.sup["dr_first"], rep.sup["dr_second"])
    group = TransformationGroup(eta=lambda t, q: 1.0, xi=lambda t, q: np.zeros(1))
    setup = AugmentedSetup(classical_problem, lam)
    con = constancy_report(
        lambda t: noether_quantity(setup, group, traj, t, regime_of(classical_problem, t)),
        residual_grids(classical_problem, traj, count=60))
    elapsed = time.perf_counter() - start
    ok = (report.converged and abs(lam[0] - 4.0) <= 1e-5 and sup_err <= 1e-5
          and dr_sup <= 1e-6 and con.max_deviation <= 1e-6 and elapsed < 10.0)
    _report(5, ok, f"lambda={lam[0]:.9g} (4±1e-5), sup err={sup_err:.2e} (<=1e-5), "
                   f"dr sup={dr_sup:.2e} (<=1e-6), noether dev={con.max_deviation:.2e} "
                   f"(<=1e-6), {elapsed:.2f}s (<10s)")


def test_criterion_6_delayed_lq_pmp():
    start = time.perf_counter()
    cp = ControlProblem(
        n=1, mc=1, tau=0.5, t1=0.0, t2=1.0,
        L=Integrand(lambda v: v[2] * v[2], name="u^2"),
        phi=(Integrand(lambda v: v[3] + v[2], name="q_tau + u"),),
        history=lambda t: np.zeros(1))
    triple, lam, report = solve_pmp(cp, scheme=CollocationScheme(nodes=64))
    grid = Grid.build(0.0, 1.0, 200, exclude=np.asarray(triple.q.breakpoints()),
                      eps_knot=1e-3)
    res = pmp_residuals(cp, triple, lam, grid.times)
    # method-of-steps oracle: pdot = 0 on [0.5, 1] with p(1) = 0, then
    # pdot(t) = -p(t + tau) on [0, 0.5]: p = u = q = 0 identically
    oracle_err = max(float(np.max(np.abs(tr.eval(grid.times, 0))))
                     for tr in (triple.q, triple.p, triple.u))
    H = hamiltonian_integrand(cp)
    energies = np.asarray(H(control_args_at(cp, triple, lam, grid.times).values),
                          dtype=float)
    energies = np.broadcast_to(energies, grid.times.shape)
    dev = float(np.max(np.abs(energies - np.mean(energies))))
    elapsed = time.perf_counter() - start
    ok = (report.converged and res.sup <= 1e-6 and oracle_err <= 1e-6
          and dev <= 1e-5 and elapsed < 10.0)
    _report(6, ok, f"pmp residual sup={res.sup:.2e} (<=1e-6), oracle err="
                   f"{oracle_err:.2e}, H deviation={dev:.2e} (<=1e-5), "
                   f"{elapsed:.2f}s (<10s)")


# ---------------------------------------------------------------------------
# criterion 7: reduction identities


def _random_m1_setup(rng):
    coeffs = rng.uniform(-1, 1, size=(1, 6))
    traj = Trajectory(1, 1, [PolySegment(-0.5, 1.0, coeffs)])
    a, b, c, d, e = (float(x) for x in rng.uniform(-1, 1, size=5))
    text = (f"{a!r} * qd^2 + {b!r} * q * q_tau + {c!r} * sin(q) * qd_tau"
            f" + {d!r} * t * q + {e!r} * qd * qd_tau")
    problem = IsoperimetricProblem(m=1, n=1, tau=0.5, t1=0.0, t2=1.0,
                                   L=integrand_from_expr(text, 1, 1))
    return AugmentedSetup(problem, []), traj, problem


def _direct_m1_el(setup, traj, problem, t):
    F = augmented_integrand(setup)
    regime = regime_of(problem, t)
    lo, hi = (0.0, 0.5) if regime is Regime.FIRST else (0.5, 1.0)
    breaks = smooth_breaks(problem, traj)
    los, his = stencil_bounds([t], breaks, lo, hi)

    def momentum(us):
        out = calculus.partial(F, 3, args_at(traj, us, 0.5, 1)).T
        if regime is Regime.FIRST:
            out = out + calculus.partial(F, 5, args_at(traj, us + 0.5, 0.5, 1)).T
        return out

    dm = calculus.total_derivative_many(momentum, [t], 1, los, his,
                                        calculus.default_step(1.0, 1))[0]
    force = calculus.partial(F, 2, args_at(traj, t, 0.5, 1))
    if regime is Regime.FIRST:
        force = force + calculus.partial(F, 4, args_at(traj, t + 0.5, 0.5, 1))
    return dm - force


def _direct_m1_psi(setup, traj, t, regime):
    F = augmented_integrand(setup)
    out = calculus.partial(F, 3, args_at(traj, t, 0.5, 1))
    if regime is Regime.FIRST:
        out = out + calculus.partial(F, 5, args_at(traj, t + 0.5, 0.5, 1))
    return out


def _direct_m1_dr(setup, traj, problem, t, regime):
    F = augmented_integrand(setup)
    lo, hi = (0.0, 0.5) if regime is Regime.FIRST else (0.5, 1.0)
    breaks = smooth_breaks(problem, traj)
    los, his = stencil_bounds([t], breaks, lo, hi)

    def bracket(us):
        value = np.asarray(F(args_at(traj, us, 0.5, 1).values), dtype=float)
        qd = traj.eval(us, 1)[:, 0]
        mom = calculus.partial(F, 3, args_at(traj, us, 0.5, 1))[0]
        if regime is Regime.FIRST:
            mom = mom + calculus.partial(F, 5, args_at(traj, us + 0.5, 0.5, 1))[0]
        return (value - qd * mom)[:, None]

    d = calculus.total_derivative_many(bracket, [t], 1, los, his,
                                       calculus.default_step(1.0, 1))[0, 0]
    return d - calculus.partial(F, 1, args_at(traj, t, 0.5, 1))[0]


def _direct_m1_noether(setup, traj, t, regime, eta_c, beta):
    F = augmented_integrand(setup)
    mom = _direct_m1_psi(setup, traj, t, regime)
    value = float(F(args_at(traj, t, 0.5, 1).values))
    q = traj.eval(t, 0)
    qd = traj.eval(t, 1)
    return float(mom @ (beta * q)) + (value - float(qd @ mom)) * eta_c


def test_criterion_7a_m1_reduction_identities():
    rng = np.random.default_rng(2718)
    worst = 0.0
    for _ in range(100):
        setup, traj, problem = _random_m1_setup(rng)
        t_first = float(rng.uniform(0.06, 0.44))
        t_second = float(rng.uniform(0.56, 0.94))
        for t, regime in ((t_first, Regime.FIRST), (t_second, Regime.SECOND)):
            scale = 1.0
            general_el = el_residual(setup, traj, t)
            direct_el = _direct_m1_el(setup, traj, problem, t)
            worst = max(worst, float(np.max(np.abs(general_el + direct_el))))
            general_psi = psi(setup, traj, 1, t, regime)
            worst = max(worst, float(np.max(np.abs(
                general_psi - _direct_m1_psi(setup, traj, t, regime)))))
            general_dr = dr_residual(setup, traj, t, regime)
            worst = max(worst, abs(general_dr - _direct_m1_dr(setup, traj, problem,
                                                              t, regime)))
            eta_c, beta = (float(x) for x in rng.uniform(-1, 1, size=2))
            group = TransformationGroup(eta=lambda tt, qq, e=eta_c: e,
                                        xi=lambda tt, qq, b=beta: b * qq)
            general_c = noether_quantity(setup, group, traj, t, regime)
            worst = max(worst, abs(general_c - _direct_m1_noether(
                setup, traj, t, regime, eta_c, beta)))
    ok = worst <= 1e-10
    _report(7, ok, f"(a) m=1 EL/psi/DR/Noether vs direct first-order forms: "
                   f"worst |diff|={worst:.2e} (<=1e-10) over 100 random cases")


def test_criterion_7b_second_order_corollary():
    rng = np.random.default_rng(3141)
    worst = 0.0
    for _ in range(100):
        coeffs = rng.uniform(-1, 1, size=(1, 6))
        traj = Trajectory(1, 2, [PolySegment(-0.5, 1.0, coeffs)])
        a, b, c = (float(x) for x in rng.uniform(-1, 1, size=3))
        text = (f"{a!r} * (qdd + qdd_tau)^2 + {b!r} * qd * q_tau + {c!r} * q^2")
        problem = IsoperimetricProblem(m=2, n=1, tau=0.5, t1=0.0, t2=1.0,
                                       L=integrand_from_expr(text, 2, 1))
        setup = AugmentedSetup(problem, [])
        eta_c, beta = (float(x) for x in rng.uniform(-1, 1, size=2))
        group = TransformationGroup(eta=lambda tt, qq, e=eta_c: e,
                                    xi=lambda tt, qq, b=beta: b * qq)
        for t, regime in ((float(rng.uniform(0.08, 0.42)), Regime.FIRST),
                          (float(rng.uniform(0.58, 0.92)), Regime.SECOND)):
            general = noether_quantity(setup, group, traj, t, regime)
            corollary = second_order_noether_quantity(
                setup, traj, t, regime, eta=eta_c,
                xi0=lambda u, q, b=beta: b * q,
                xi1=lambda u, q, g=group, tr=traj: rho(g, tr, 1, u))
            worst = max(worst, abs(corollary - general) / max(1.0, abs(general)))
    ok = worst <= 1e-8
    _report(7, ok, f"(b) m=2 corollary vs general higher-order quantity: "
                   f"worst rel diff={worst:.2e} (<=1e-8) over 100 random cases")


def test_criterion_8_invariance_detector(ex1_problem, ex1_setup, ex1_traj):
    shift = TransformationGroup(eta=lambda t, q: 1.0, xi=lambda t, q: np.zeros(1))
    d_auto = invariance_defect(ex1_setup, shift, ex1_traj)
    nc = necessary_condition_defect(ex1_setup, shift, ex1_traj)
    scaled = IsoperimetricProblem(
        m=2, n=1, tau=1.0, t1=0.0, t2=2.0,
        L=integrand_from_expr("t * (qdd + qdd_tau)^2", 2, 1),
        g=ex1_problem.g, l=ex1_problem.l,
        history=ex1_problem.history, boundary=ex1_problem.boundary)
    d_scaled = invariance_defect(AugmentedSetup(scaled, [0.0]), shift, ex1_traj)
    ok = (abs(d_auto) <= 1e-6 and max(abs(nc[0]), abs(nc[1])) <= 1e-5
          and abs(d_scaled) >= 0.1)
    _report(8, ok, f"autonomous defect={d_auto:.2e} (<=1e-6), necessary-condition "
                   f"defects=({nc[0]:.2e}, {nc[1]:.2e}) (<=1e-5), "
                   f"t-scaled defect={d_scaled:.6g} (>=0.1)")


def test_criterion_9_expression_layer():
    from hypothesis import given, settings
    from delayvar.expr import Binding, bind_eval, parse, to_str
    from test_expr import _asts

    counter = {"n": 0}

    @settings(max_examples=1000, deadline=None)
    @given(_asts(3))
    def round_trip(ast):
        counter["n"] += 1
        assert parse(to_str(ast)) == ast

    round_trip()
    args = [0.0, 0.0, 0.0, -27.0, 0.0, 0.0, 3.0]
    value = bind_eval(parse("(qdd + qdd_tau)^2"), Binding(2, 1), args)
    ok = counter["n"] >= 1000 and abs(value - 576.0) <= 1e-12
    _report(9, ok, f"round-trip on {counter['n']} random expressions, "
                   f"(qdd+qdd_tau)^2 at (-27, 3) = {value} (576±1e-12)")
