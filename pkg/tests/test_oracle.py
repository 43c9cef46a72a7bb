"""Brute-force reference: sign-pattern enumeration and the isotonic baseline."""

import itertools
import random

import pytest

from conftest import DEMO_X, DEMO_Z, make_demo_problem
from treeiso.cli import build_problem, random_problem
from treeiso.errors import CertificateError, ContractViolationError
from treeiso.loss import WeightedQuadratic
from treeiso.oracle import (
    MAX_ORACLE_EDGES,
    enumerate_optimum,
    feasible_signs,
    pava,
    solve_reduced,
)
from treeiso.solver import EQ, GT, LT, Problem, objective_value, solve
from treeiso.tree import DirectedTree, INF, normalize

GOLDEN_PATTERN = {(1, 2): EQ, (1, 3): EQ, (3, 4): LT, (3, 5): GT}


class TestFeasibleSigns:
    def test_both_finite(self):
        assert feasible_signs(1.0, 2.0) == (EQ, GT, LT)

    def test_infinite_lambda_blocks_gt(self):
        assert feasible_signs(INF, 2.0) == (EQ, LT)

    def test_infinite_mu_blocks_lt(self):
        assert feasible_signs(1.0, INF) == (EQ, GT)

    def test_both_infinite(self):
        assert feasible_signs(INF, INF) == (EQ,)

    def test_zero_weights_allow_all(self):
        assert feasible_signs(0.0, 0.0) == (EQ, GT, LT)


class TestSolveReduced:
    def test_golden_pattern_certifies(self):
        result = solve_reduced(make_demo_problem(), GOLDEN_PATTERN)
        assert result is not None
        x, z = result
        for node, want in DEMO_X.items():
            assert x[node] == pytest.approx(want, abs=1e-10)
        for edge, want in DEMO_Z.items():
            assert z[edge] == pytest.approx(want, abs=1e-10)

    def test_all_equal_pattern_fails_kkt(self):
        pattern = {e: EQ for e in GOLDEN_PATTERN}
        assert solve_reduced(make_demo_problem(), pattern) is None

    def test_wrong_direction_pattern_screened(self):
        # Claiming x_3 > x_4 puts the minimizers in the wrong order.
        pattern = dict(GOLDEN_PATTERN)
        pattern[(3, 4)] = GT
        assert solve_reduced(make_demo_problem(), pattern) is None

    def test_memo_is_reused_across_patterns(self):
        problem = make_demo_problem()
        memo = {}
        solve_reduced(problem, {e: EQ for e in GOLDEN_PATTERN}, memo=memo)
        filled = len(memo)
        assert filled > 0
        solve_reduced(problem, GOLDEN_PATTERN, memo=memo)
        assert len(memo) >= filled


class TestEnumerateOptimum:
    def test_demo_golden(self):
        x, z, pattern = enumerate_optimum(make_demo_problem())
        assert pattern == GOLDEN_PATTERN
        for node, want in DEMO_X.items():
            assert x[node] == pytest.approx(want, abs=1e-10)
        for edge, want in DEMO_Z.items():
            assert z[edge] == pytest.approx(want, abs=1e-10)

    def test_single_node(self):
        problem = Problem(normalize(DirectedTree(1, [])), [WeightedQuadratic(1.0, 7.0)])
        x, z, pattern = enumerate_optimum(problem)
        assert x == {1: 7.0}
        assert z == {} and pattern == {}

    def test_edge_cap_enforced(self):
        n = MAX_ORACLE_EDGES + 2
        problem = Problem(
            normalize(DirectedTree(n, [(i, i + 1, 1.0, 1.0) for i in range(1, n)])),
            [WeightedQuadratic(1.0, float(i)) for i in range(n)],
        )
        with pytest.raises(ContractViolationError):
            enumerate_optimum(problem)

    def test_objective_no_better_on_grid(self):
        problem = make_demo_problem()
        x, _, _ = enumerate_optimum(problem)
        best = objective_value(problem, x)
        grid = [1.0, 2.0, 3.0, 4.0, 5.0]
        for combo in itertools.product(grid, repeat=4):
            cand = {1: combo[0], 2: combo[0], 3: combo[1], 4: combo[2], 5: combo[3]}
            if cand[3] < cand[1]:
                continue  # (1, 3) carries an infinite decrease penalty
            assert objective_value(problem, cand) >= best - 1e-9


class TestSolverAgainstOracle:
    @pytest.mark.parametrize("seed", range(30))
    def test_random_instances_agree(self, seed):
        n = random.Random(900 + seed).randint(2, 7)
        tree, losses = random_problem("random", n, seed, "mixed")
        problem = build_problem(tree, losses)
        x_fast, z_fast, _ = solve(problem)
        x_ref, z_ref, _ = enumerate_optimum(problem)
        for node in x_ref:
            assert x_fast[node] == pytest.approx(x_ref[node], abs=1e-6)
        for edge in z_ref:
            assert z_fast[edge] == pytest.approx(z_ref[edge], abs=1e-6)


class TestPava:
    def test_two_point_pool(self):
        assert pava([2.0, 1.0]) == [1.5, 1.5]

    def test_sorted_input_identity(self):
        values = [1.0, 2.0, 3.5, 7.0]
        assert pava(values) == values

    def test_weighted_pool(self):
        # Pooled mean (3*4 + 1*0) / 4 = 3.
        assert pava([4.0, 0.0], weights=[3.0, 1.0]) == [3.0, 3.0]

    def test_cascading_merge(self):
        out = pava([3.0, 2.0, 1.0])
        assert out == [2.0, 2.0, 2.0]

    def test_output_is_nondecreasing(self):
        rng = random.Random(4)
        for _ in range(50):
            values = [rng.uniform(-5.0, 5.0) for _ in range(20)]
            out = pava(values)
            assert all(a <= b + 1e-12 for a, b in zip(out, out[1:]))

    def test_matches_weighted_quadratic_chain(self):
        rng = random.Random(17)
        values = [rng.uniform(0.0, 10.0) for _ in range(9)]
        weights = [rng.uniform(0.5, 3.0) for _ in range(9)]
        problem = Problem(
            normalize(DirectedTree(9, [(i, i + 1, INF, 0.0) for i in range(1, 9)])),
            [WeightedQuadratic(w, y) for w, y in zip(weights, values)],
        )
        x, _, _ = solve(problem)
        fitted = pava(values, weights=weights)
        for i, want in enumerate(fitted, start=1):
            assert x[i] == pytest.approx(want, abs=1e-8)

    def test_empty_input_gives_empty_fit(self):
        assert pava([]) == []

    def test_nonpositive_weight_rejected(self):
        with pytest.raises(ContractViolationError):
            pava([1.0, 2.0], weights=[1.0, 0.0])

    def test_length_mismatch_rejected(self):
        with pytest.raises(ContractViolationError):
            pava([1.0, 2.0], weights=[1.0])
