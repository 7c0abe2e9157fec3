"""Piecewise-polynomial trajectories: evaluation, invariants, serialization."""

from __future__ import annotations

import numpy as np
import pytest

from delayvar.errors import EmptyGrid, OrderTooHigh, OutOfDomain
from delayvar.trajectory import (
    Grid,
    PolySegment,
    Trajectory,
    example1_trajectory,
    segments_from_callable,
)


class TestEval:
    def test_piecewise_quartic_values(self, ex1_traj):
        assert ex1_traj.eval(1.5, 0)[0] == pytest.approx(-3.0625, abs=1e-12)
        assert ex1_traj.eval(2.0, 1)[0] == pytest.approx(-32.0, abs=1e-12)
        assert ex1_traj.eval(-0.5, 0)[0] == pytest.approx(-0.0625, abs=1e-12)
        assert ex1_traj.eval(2.0, 0)[0] == pytest.approx(-14.0, abs=1e-12)

    def test_right_limit_at_knot(self, ex1_traj):
        # right segment rules at interior knots; last segment at t2
        assert ex1_traj.eval(1.0, 0)[0] == pytest.approx(1.0, abs=1e-12)
        assert ex1_traj.eval(1.0, 1)[0] == pytest.approx(-4.0, abs=1e-12)

    def test_third_derivative(self, ex1_traj):
        assert ex1_traj.eval(0.5, 3)[0] == pytest.approx(12.0, abs=1e-12)

    def test_out_of_domain(self, ex1_traj):
        with pytest.raises(OutOfDomain):
            ex1_traj.eval(2.5, 0)
        with pytest.raises(OutOfDomain):
            ex1_traj.eval(-1.5, 0)

    def test_order_too_high(self, ex1_traj):
        with pytest.raises(OrderTooHigh):
            ex1_traj.eval(0.5, 5)

    def test_vectorized(self, ex1_traj):
        ts = np.array([-0.5, 0.5, 1.5])
        out = ex1_traj.eval(ts, 0)
        assert out.shape == (3, 1)
        assert np.allclose(out[:, 0], [-0.0625, 0.0625, -3.0625])


class TestShiftedEval:
    def test_delay_shift(self, ex1_traj):
        assert ex1_traj.shifted_eval(1.5, 2, -1.0)[0] == pytest.approx(3.0, abs=1e-12)

    def test_advance_shift(self, ex1_traj):
        assert ex1_traj.shifted_eval(0.5, 2, 1.0)[0] == pytest.approx(-27.0, abs=1e-12)

    def test_zero_shift_is_eval(self, ex1_traj):
        for t in (-0.3, 0.7, 1.9):
            assert ex1_traj.shifted_eval(t, 1, 0.0) == pytest.approx(ex1_traj.eval(t, 1))

    def test_escaping_shift(self, ex1_traj):
        with pytest.raises(OutOfDomain):
            ex1_traj.shifted_eval(1.5, 0, 1.0)


class TestInvariants:
    def test_breakpoints(self, ex1_traj):
        assert ex1_traj.breakpoints() == [-1.0, 0.0, 1.0, 2.0]

    def test_single_segment_breakpoints(self):
        traj = Trajectory(1, 1, [PolySegment(0.0, 1.0, [[1.0, 2.0]])])
        assert traj.breakpoints() == [0.0, 1.0]

    def test_identical_adjacent_segments_keep_boundary(self):
        segs = [PolySegment(0.0, 0.5, [[1.0]]), PolySegment(0.5, 1.0, [[1.0]])]
        assert Trajectory(1, 1, segs).breakpoints() == [0.0, 0.5, 1.0]

    def test_segment_needs_a_lt_b(self):
        with pytest.raises(ValueError):
            PolySegment(1.0, 1.0, [[1.0]])

    def test_gap_rejected(self):
        segs = [PolySegment(0.0, 0.5, [[0.0]]), PolySegment(0.6, 1.0, [[0.0]])]
        with pytest.raises(ValueError, match="gap"):
            Trajectory(1, 1, segs)

    def test_derivative_jump_rejected_when_smooth(self):
        # q = t then q = 2t - 0.5: continuous value, kinked slope
        segs = [PolySegment.from_monomial(0.0, 0.5, [[0.0, 1.0]]),
                PolySegment.from_monomial(0.5, 1.0, [[-0.5, 2.0]])]
        Trajectory(1, 1, segs)  # m = 1: only values must match
        with pytest.raises(ValueError, match="derivative"):
            Trajectory(1, 2, segs)

    def test_declared_nonsmooth_knot_allows_jump(self):
        segs = [PolySegment.from_monomial(0.0, 0.5, [[0.0, 1.0]]),
                PolySegment.from_monomial(0.5, 1.0, [[-0.5, 2.0]])]
        traj = Trajectory(1, 2, segs, nonsmooth_knots=(0.5,))
        assert traj.eval(0.5, 0)[0] == pytest.approx(0.5)

    def test_value_jump_rejected_even_at_nonsmooth_knot(self):
        segs = [PolySegment(0.0, 0.5, [[0.0]]), PolySegment(0.5, 1.0, [[1.0]])]
        with pytest.raises(ValueError, match="value"):
            Trajectory(1, 1, segs, nonsmooth_knots=(0.5,))

    def test_example1_is_valid(self):
        example1_trajectory().validate()


def test_eval_matches_analytic_differentiation():
    """Segment evaluation vs direct coefficient differentiation, to 1e-12."""
    rng = np.random.default_rng(7)
    for _ in range(25):
        coeffs = rng.uniform(-1, 1, size=(2, 6))
        seg = PolySegment(-0.3, 1.1, coeffs)
        traj = Trajectory(2, 1, [seg])
        ts = rng.uniform(-0.3, 1.1, size=8)
        for order in range(6):
            c = coeffs
            for _ in range(order):
                c = c[:, 1:] * np.arange(1, c.shape[1])
            expected = np.stack([np.polyval(ci[::-1], ts - seg.mid) for ci in c], axis=-1)
            got = traj.eval(ts, order)
            scale = np.maximum(1.0, np.abs(expected))
            assert np.all(np.abs(got - expected) <= 1e-12 * scale)


def test_shifted_eval_identity_property(ex1_traj):
    rng = np.random.default_rng(11)
    for _ in range(50):
        s = rng.uniform(-1.0, 1.0)
        t = rng.uniform(max(-1.0, -1.0 - s), min(2.0, 2.0 - s))
        assert ex1_traj.shifted_eval(t, 1, s) == pytest.approx(ex1_traj.eval(t + s, 1))


class TestJson:
    def test_round_trip(self, ex1_traj):
        clone = Trajectory.from_json(ex1_traj.to_json())
        assert clone.n == 1 and clone.m == 2
        assert clone.nonsmooth_knots == (1.0,)
        ts = np.linspace(-1, 2, 31)
        for order in range(3):
            assert np.allclose(clone.eval(ts, order), ex1_traj.eval(ts, order), atol=1e-13)


class TestHistoryStitching:
    def test_polynomial_history_is_exact(self):
        segs = segments_from_callable(lambda t: np.array([t * (1 - t)]), -0.5, 0.0,
                                      panels=3, degree=3)
        traj = Trajectory(1, 1, segs, validate=False)
        ts = np.linspace(-0.5, 0.0, 17)
        assert np.allclose(traj.eval(ts, 0)[:, 0], ts * (1 - ts), atol=1e-12)
        assert np.allclose(traj.eval(ts, 1)[:, 0], 1 - 2 * ts, atol=1e-10)

    def test_transcendental_history_is_accurate(self):
        segs = segments_from_callable(lambda t: np.array([np.sin(t)]), -1.0, 0.0,
                                      panels=4, degree=6)
        traj = Trajectory(1, 1, segs, validate=False)
        ts = np.linspace(-1.0, 0.0, 23)
        assert np.max(np.abs(traj.eval(ts, 0)[:, 0] - np.sin(ts))) < 1e-8


class TestGrid:
    def test_build_excludes_neighborhoods(self):
        grid = Grid.build(0.0, 2.0, 200, exclude=[0.0, 1.0, 2.0], eps_knot=1e-2)
        assert np.all(np.abs(grid.times - 1.0) >= 1e-2)
        assert np.all(grid.times >= 1e-2) and np.all(grid.times <= 2.0 - 1e-2)
        assert np.all(np.diff(grid.times) > 0)

    def test_zero_count_raises(self):
        with pytest.raises(EmptyGrid):
            Grid.build(0.0, 1.0, 0)

    def test_everything_excluded_raises(self):
        with pytest.raises(EmptyGrid):
            Grid.build(0.0, 1.0, 5, exclude=[0.5], eps_knot=2.0)
