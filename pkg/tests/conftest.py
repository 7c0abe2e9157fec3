"""Shared fixtures: the two benchmark problems used across the suite."""

from __future__ import annotations

import numpy as np
import pytest

from delayvar.problem import AugmentedSetup, IsoperimetricProblem, integrand_from_expr
from delayvar.trajectory import PolySegment, Trajectory, example1_trajectory

# closed-form functional values of the nonsmooth piecewise-quartic example:
# J = 144 int_0^2 (2t-1)^2 dt = 672, I = 16 int_0^2 (3t^2-3t+1)^2 dt = 1248/5
EX1_J = 672.0
EX1_I = 1248.0 / 5.0


@pytest.fixture(scope="session")
def ex1_problem() -> IsoperimetricProblem:
    return IsoperimetricProblem(
        m=2, n=1, tau=1.0, t1=0.0, t2=2.0,
        L=integrand_from_expr("(qdd + qdd_tau)^2", 2, 1),
        g=(integrand_from_expr("(qd + qd_tau)^2", 2, 1),),
        l=[EX1_I],
        history=lambda t: np.array([-(t ** 4)]),
        boundary=[[-14.0], [-32.0]],
    )


@pytest.fixture(scope="session")
def ex1_traj() -> Trajectory:
    return example1_trajectory()


@pytest.fixture(scope="session")
def ex1_setup(ex1_problem) -> AugmentedSetup:
    return AugmentedSetup(ex1_problem, [0.0])


@pytest.fixture(scope="session")
def classical_problem() -> IsoperimetricProblem:
    """No delayed dependence: the classical isoperimetric benchmark with
    solution q = t(1 - t) and multiplier 4, embedded with an inert delay."""
    return IsoperimetricProblem(
        m=1, n=1, tau=0.5, t1=0.0, t2=1.0,
        L=integrand_from_expr("qd^2", 1, 1),
        g=(integrand_from_expr("q", 1, 1),),
        l=[1.0 / 6.0],
        history=lambda t: np.array([t * (1.0 - t)]),
        boundary=[[0.0]],
    )


@pytest.fixture(scope="session")
def classical_traj() -> Trajectory:
    return Trajectory(1, 1, [PolySegment.from_monomial(-0.5, 1.0, [[0.0, 1.0, -1.0]])])


@pytest.fixture(scope="session")
def classical_setup(classical_problem) -> AugmentedSetup:
    return AugmentedSetup(classical_problem, [4.0])
