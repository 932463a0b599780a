"""
Tests for the coupling module.
"""

import numpy as np
import pytest

from geimlab.coupling import (
    coupled_run,
    extract_trace,
    reconstruct_omega2,
    results_frame,
    solve_omega1,
    stability_constant,
    stability_estimate,
    trace_norm,
)
from geimlab.errors import GridMismatch, SizeMismatch
from geimlab.fieldcore import Field, norm
from geimlab.geim import geim_reconstruct
from geimlab.pde import ParamPoint, solve_snapshots


@pytest.fixture(scope="module")
def truth_case(grid):
    p = ParamPoint(0.5, -0.5, 0.75)
    (truth,) = solve_snapshots(grid, [p])
    return p, truth


class TestTrace:
    """Tests for interface trace helpers."""

    def test_trace_covers_interface(self, grid, truth_case):
        """Test that the trace runs bottom to top along the interface."""
        _, truth = truth_case
        trace = extract_trace(truth)
        assert len(trace) == grid.ny
        assert np.all(grid.cols[trace.nodes] == grid.interface_col)
        assert np.all(np.diff(grid.rows[trace.nodes]) == 1)
        np.testing.assert_array_equal(trace.values, truth.values[trace.nodes])

    def test_trace_grid_mismatch(self, grid, tiny_grid):
        """Test that the field must live on the given grid."""
        with pytest.raises(GridMismatch):
            extract_trace(Field.zeros(tiny_grid), grid)

    def test_trace_norm_of_ones(self, grid):
        """Test that the trace norm of 1 is the square root of the height."""
        assert trace_norm(np.ones(grid.ny), grid) == pytest.approx(1.0)


class TestSolveOmega1:
    """Tests for the omega1 solve driven by interface data."""

    def test_exact_trace_reproduces_truth(self, grid, truth_case):
        """Test that the true trace gives back the global solution on omega1."""
        p, truth = truth_case
        u1 = solve_omega1(p, grid, extract_trace(truth))
        omega1 = grid.mask("omega1").nodes
        scale = np.max(np.abs(truth.values))
        np.testing.assert_allclose(
            u1.values[omega1], truth.values[omega1], atol=1e-10 * scale
        )

    def test_plain_values_accepted(self, grid, truth_case):
        """Test passing the trace as a plain value vector."""
        p, truth = truth_case
        trace = extract_trace(truth)
        a = solve_omega1(p, grid, trace)
        b = solve_omega1(p, grid, trace.values)
        np.testing.assert_array_equal(a.values, b.values)

    def test_trace_wins_at_corners(self, grid):
        """Test that interface data overrides the outer data at the corners."""
        trace = np.full(grid.ny, 2.0)
        u1 = solve_omega1(ParamPoint(0.0, 0.0, 1.0), grid, trace)
        corners = [
            grid.node_index(grid.interface_col, 0),
            grid.node_index(grid.interface_col, grid.ny - 1),
        ]
        np.testing.assert_array_equal(u1.values[corners], 2.0)

    def test_wrong_trace_length(self, grid):
        """Test that the trace must cover the interface."""
        with pytest.raises(SizeMismatch):
            solve_omega1(ParamPoint(0.0, 0.0, 1.0), grid, np.zeros(grid.ny - 1))

    def test_solution_zero_on_omega2(self, grid, truth_case):
        """Test that the omega1 solution leaves omega2 untouched."""
        p, truth = truth_case
        u1 = solve_omega1(p, grid, extract_trace(truth))
        assert np.all(u1.values[grid.mask("omega2").nodes] == 0.0)


class TestStability:
    """Tests for the trace-to-omega1 stability constant."""

    def test_estimate_below_constant(self, grid):
        """Test that random traces never beat the exact constant."""
        exact = stability_constant(grid)
        assert 0.0 < stability_estimate(grid, samples=16, seed=1) <= exact * (
            1 + 1e-9
        )

    def test_h1_above_l2(self, grid):
        """Test that the H1 constant dominates the L2 one."""
        assert stability_constant(grid, "H1") >= stability_constant(grid, "L2")


class TestCoupledRun:
    """Tests for coupled_run."""

    def test_one_result_per_M(self, grid, l2_model, truth_case):
        """Test the default range of dimensions."""
        p, truth = truth_case
        results = coupled_run(l2_model, p, grid, truth=truth)
        assert [r.M for r in results] == list(range(1, l2_model.size + 1))

    def test_custom_range(self, grid, l2_model, truth_case):
        """Test an explicit list of dimensions."""
        p, truth = truth_case
        results = coupled_run(l2_model, p, grid, M_range=[2, 1], truth=truth)
        assert [r.M for r in results] == [2, 1]

    def test_truth_solved_when_omitted(self, grid, l2_model, truth_case):
        """Test that the truth is computed from the parameters if needed."""
        p, truth = truth_case
        given = coupled_run(l2_model, p, grid, M_range=[2], truth=truth)[0]
        solved = coupled_run(l2_model, p, grid, M_range=[2])[0]
        assert solved.err_h1_omega1 == pytest.approx(given.err_h1_omega1)

    def test_omega1_error_bounded_by_trace_error(self, grid, l2_model, truth_case):
        """Test the stability estimate err_omega1 <= C * err_trace."""
        p, truth = truth_case
        constant = stability_constant(grid)
        scale = norm(truth, grid.mask("omega"), "H1")
        for r in coupled_run(l2_model, p, grid, truth=truth):
            bound = constant * r.err_trace * (1 + 1e-8) + 1e-12 * scale
            assert r.err_h1_omega1 <= bound

    def test_reconstruction_matches_geim(self, grid, l2_model, truth_case):
        """Test that the omega2 field is the GEIM reconstruction."""
        p, truth = truth_case
        r = coupled_run(l2_model, p, grid, M_range=[3], truth=truth)[0]
        np.testing.assert_array_equal(
            r.reconstruction_omega2.values, geim_reconstruct(l2_model, truth, 3).values
        )
        np.testing.assert_array_equal(
            reconstruct_omega2(l2_model, truth, 3).values,
            r.reconstruction_omega2.values,
        )

    def test_converged_errors_vanish(self, grid, l2_model, snapshots):
        """Test that a training truth is recovered once the greedy converged."""
        p, truth = snapshots.params[13], snapshots.fields[13]
        last = coupled_run(l2_model, p, grid, M_range=[l2_model.size], truth=truth)[0]
        scale = norm(truth, grid.mask("omega"), "H1")
        assert last.err_h1_omega2 <= 1e-8 * scale
        assert last.err_h1_omega1 <= 1e-8 * scale

    def test_results_frame(self, grid, l2_model, truth_case):
        """Test the tabular form of coupled results."""
        p, truth = truth_case
        frame = results_frame(coupled_run(l2_model, p, grid, truth=truth))
        assert list(frame.columns) == [
            "M",
            "err_l2_omega1",
            "err_h1_omega1",
            "err_l2_omega2",
            "err_h1_omega2",
            "err_trace",
        ]
        assert len(frame) == l2_model.size
