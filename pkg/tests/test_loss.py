"""Loss layer: derivatives, inverses, pooled groups, equilibrium parameter."""

import math
import random

import pytest
from hypothesis import given, settings, strategies as st

from treeiso.errors import ContractViolationError, MalformedInstanceError
from treeiso.loss import (
    LinearShift,
    LossGroup,
    QuarticQuadratic,
    WeightedQuadratic,
    equilibrium_t,
    loss_from_json,
    loss_to_json,
    solve_increasing,
)


def three_group():
    return LossGroup([
        WeightedQuadratic(1.0, 4.0),
        WeightedQuadratic(1.0, 2.0),
        WeightedQuadratic(1.0, 2.0),
    ])


def four_group():
    return LossGroup([
        WeightedQuadratic(1.0, 4.0),
        WeightedQuadratic(1.0, 2.0),
        WeightedQuadratic(1.0, 2.0),
        WeightedQuadratic(1.0, 8.0),
    ])


class TestDerivatives:
    def test_quadratic(self):
        assert WeightedQuadratic(1.0, 4.0).derivative(3.0) == -1.0
        assert WeightedQuadratic(2.0, 1.0).derivative(3.0) == 4.0

    def test_quartic(self):
        loss = QuarticQuadratic(1.0, 0.25, 0.0)
        assert loss.derivative(4.0) == 72.0
        assert loss.derivative(0.0) == 0.0
        assert loss.second_derivative(1.0) == 5.0

    def test_linear_shift(self):
        assert LinearShift(WeightedQuadratic(1.0, 2.0), 3.0).derivative(2.0) == 3.0

    def test_shift_merging(self):
        loss = WeightedQuadratic(1.0, 2.0).shifted(2.0).shifted(1.0)
        assert isinstance(loss, LinearShift)
        assert loss.slope == 3.0
        assert loss.derivative(2.0) == 3.0

    def test_zero_shift_is_identity(self):
        base = QuarticQuadratic(1.0, 0.5, -2.0)
        assert base.shifted(0.0) is base

    def test_values(self):
        assert WeightedQuadratic(2.0, 1.0).value(3.0) == 4.0
        assert QuarticQuadratic(1.0, 0.25, 0.0).value(1.0) == 1.25
        assert LinearShift(WeightedQuadratic(2.0, 1.0), 1.5).value(3.0) == 8.5


class TestInverseDerivative:
    def test_quadratic_minimizer(self):
        assert WeightedQuadratic(1.0, 4.0).inverse_derivative(0.0) == 4.0

    def test_quartic_at_zero(self):
        assert QuarticQuadratic(1.0, 0.25, 0.0).inverse_derivative(0.0) == 0.0

    def test_quartic_unit_point(self):
        # 2*1 + 1^3 = 3, so the inverse at 3 is 1.
        x = QuarticQuadratic(1.0, 0.25, 0.0).inverse_derivative(3.0)
        assert abs(x - 1.0) <= 1e-12 * 4

    def test_pure_quadratic_quartic_uses_closed_form(self):
        loss = QuarticQuadratic(2.0, 0.0, -4.0)
        assert loss.linear_form() == (4.0, 4.0)
        assert loss.inverse_derivative(0.0) == 1.0

    def test_round_trip_seeded(self):
        rng = random.Random(99)
        for _ in range(1000):
            kind = rng.randrange(3)
            if kind == 0:
                loss = WeightedQuadratic(rng.uniform(0.1, 5.0), rng.uniform(-50, 50))
            elif kind == 1:
                loss = QuarticQuadratic(rng.uniform(0.1, 3.0), rng.uniform(0.0, 2.0),
                                        rng.uniform(-10, 10))
            else:
                loss = LinearShift(
                    QuarticQuadratic(rng.uniform(0.1, 3.0), rng.uniform(0.0, 2.0),
                                     rng.uniform(-10, 10)),
                    rng.uniform(-20, 20),
                )
            x = rng.uniform(-100.0, 100.0)
            back = loss.inverse_derivative(loss.derivative(x))
            assert abs(back - x) <= 1e-9 * (1.0 + abs(x))

    @given(
        a=st.floats(0.1, 3.0), b=st.floats(0.0, 2.0), c=st.floats(-10, 10),
        x=st.floats(-1e3, 1e3),
    )
    @settings(max_examples=200, derandomize=True)
    def test_round_trip_property(self, a, b, c, x):
        loss = QuarticQuadratic(a, b, c)
        back = loss.inverse_derivative(loss.derivative(x))
        assert abs(back - x) <= 1e-9 * (1.0 + abs(x))

    def test_monotone_derivative_grid(self):
        rng = random.Random(7)
        losses = [
            WeightedQuadratic(0.5, -3.0),
            QuarticQuadratic(1.0, 0.25, 0.0),
            QuarticQuadratic(0.2, 1.5, 4.0),
            LinearShift(WeightedQuadratic(2.0, 1.0), -5.0),
        ]
        grid = sorted(rng.uniform(-50, 50) for _ in range(200))
        for loss in losses:
            values = [loss.derivative(u) for u in grid]
            assert all(p < q for p, q in zip(values, values[1:]))


class TestSolveIncreasing:
    def test_cubic_root(self):
        root = solve_increasing(lambda v: v ** 3, lambda v: 3 * v * v, 8.0, 0.0)
        assert abs(root - 2.0) <= 1e-10

    def test_matches_closed_form_on_lines(self):
        root = solve_increasing(lambda v: 2 * v - 6, lambda v: 2.0, 0.0, 100.0)
        assert abs(root - 3.0) <= 1e-12


class TestLossGroup:
    def test_three_group_closed_form(self):
        group = three_group()
        # x = (s + 8) / 3: the component formula x = (12 + t)/3 at s = t + 4.
        assert group.inverse_derivative(0.0 + 4.0) == 4.0
        assert group.inverse_derivative(-3.0 + 4.0) == 3.0

    def test_four_group_closed_form(self):
        group = four_group()
        # x = (s + 16) / 4; the pooled value is 4 exactly at zero slope.
        assert group.inverse_derivative(0.0) == 4.0
        assert group.inverse_derivative(4.0) == 5.0

    def test_singleton_matches_member(self):
        loss = QuarticQuadratic(1.0, 0.25, 0.0)
        group = LossGroup([loss])
        for s in (-3.0, 0.0, 7.5):
            assert group.inverse_derivative(s) == pytest.approx(
                loss.inverse_derivative(s), abs=1e-12)

    def test_empty_group_rejected(self):
        with pytest.raises(ContractViolationError):
            LossGroup([])

    def test_derivative_is_member_sum(self):
        group = LossGroup([WeightedQuadratic(2.0, 1.0),
                           QuarticQuadratic(1.0, 0.5, -1.0)])
        x = 1.7
        want = 2.0 * (x - 1.0) + (2.0 * x + 2.0 * x ** 3 - 1.0)
        assert group.derivative(x) == pytest.approx(want, rel=1e-15)

    def test_closed_form_matches_newton(self):
        # Same group solved through both code paths must agree to 1e-12.
        members = [WeightedQuadratic(1.5, 2.0), WeightedQuadratic(0.5, -4.0),
                   WeightedQuadratic(2.0, 7.0).shifted(1.25)]
        group = LossGroup(members)
        assert group.linear_form() is not None
        for s in (-11.0, 0.0, 3.0, 42.0):
            closed = group.inverse_derivative(s)
            newton = solve_increasing(
                group.derivative, group.second_derivative, s, 0.0)
            assert abs(closed - newton) <= 1e-12 * (1.0 + abs(closed))

    def test_mixed_group_newton(self):
        group = LossGroup([WeightedQuadratic(1.0, 4.0),
                           QuarticQuadratic(1.0, 0.25, 0.0)])
        assert group.linear_form() is None
        v = group.inverse_derivative(2.0)
        assert abs(group.derivative(v) - 2.0) <= 1e-12 * 3


class TestEquilibrium:
    def test_two_node_meeting(self):
        t_hat = equilibrium_t(LossGroup([WeightedQuadratic(1.0, 4.0)]), 0.0,
                              WeightedQuadratic(1.0, 2.0))
        assert t_hat == pytest.approx(-1.0, abs=1e-12)

    def test_three_node_meeting(self):
        t_hat = equilibrium_t(three_group(), 0.0, WeightedQuadratic(1.0, 8.0))
        assert t_hat == pytest.approx(4.0, abs=1e-12)

    def test_quartic_attachment_lies_below_clip(self):
        group = three_group()
        attach = QuarticQuadratic(1.0, 0.25, 0.0)
        t_hat = equilibrium_t(group, 4.0, attach)
        assert t_hat < -3.0
        # At the clip point the component still sits above the new node.
        gap = group.inverse_derivative(-3.0 + 4.0) - attach.inverse_derivative(3.0)
        assert gap == pytest.approx(2.0, abs=1e-10)

    def test_meeting_point_consistency(self):
        group = three_group()
        attach = QuarticQuadratic(1.0, 0.25, 0.0)
        t_hat = equilibrium_t(group, 4.0, attach)
        left = group.inverse_derivative(t_hat + 4.0)
        right = attach.inverse_derivative(-t_hat)
        assert abs(left - right) <= 1e-10 * (1.0 + abs(t_hat))

    def test_gap_is_increasing_in_t(self):
        group = LossGroup([WeightedQuadratic(2.0, 1.0),
                           QuarticQuadratic(1.0, 0.5, 0.0)])
        attach = QuarticQuadratic(0.5, 0.25, 1.0)
        beta = -2.5
        gaps = [group.inverse_derivative(t + beta) - attach.inverse_derivative(-t)
                for t in [-8 + k * 0.5 for k in range(33)]]
        assert all(p < q for p, q in zip(gaps, gaps[1:]))


class TestJson:
    def test_quadratic_round_trip(self):
        loss = loss_from_json({"type": "quadratic", "y": 4.0, "w": 1.0})
        assert isinstance(loss, WeightedQuadratic)
        assert (loss.w, loss.y) == (1.0, 4.0)
        assert loss_to_json(loss) == {"type": "quadratic", "y": 4.0, "w": 1.0}

    def test_quartic_round_trip(self):
        loss = loss_from_json({"type": "quartic", "a": 1.0, "b": 0.25, "c": 0.0})
        assert isinstance(loss, QuarticQuadratic)
        assert (loss.a, loss.b, loss.c) == (1.0, 0.25, 0.0)
        assert loss_to_json(loss) == {"type": "quartic", "a": 1.0, "b": 0.25, "c": 0.0}

    def test_unknown_type(self):
        with pytest.raises(MalformedInstanceError):
            loss_from_json({"type": "huber", "delta": 1.0})

    def test_missing_field(self):
        with pytest.raises(MalformedInstanceError):
            loss_from_json({"type": "quadratic", "y": 4.0})

    def test_bad_parameters(self):
        with pytest.raises(MalformedInstanceError):
            loss_from_json({"type": "quadratic", "y": 0.0, "w": 0.0})
        with pytest.raises(MalformedInstanceError):
            loss_from_json({"type": "quartic", "a": -1.0, "b": 0.0, "c": 0.0})
        with pytest.raises(MalformedInstanceError):
            loss_from_json({"type": "quartic", "a": 1.0, "b": -0.1, "c": 0.0})

    def test_shift_has_no_encoding(self):
        with pytest.raises(ContractViolationError):
            loss_to_json(WeightedQuadratic(1.0, 0.0).shifted(1.0))
