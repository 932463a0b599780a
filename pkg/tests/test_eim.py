"""
Tests for the eim module.
"""

import numpy as np
import pytest

from geimlab.eim import (
    eim_build,
    eim_error,
    eim_interpolate,
    eim_reconstruct,
    lagrange_functions,
    lebesgue_linf,
)
from geimlab.errors import DegenerateSnapshot, SizeMismatch
from geimlab.fieldcore import Field, Product
from geimlab.geim import geim_from_selection, geim_reconstruct


@pytest.fixture(scope="module")
def eim_model(grid, snapshots):
    return eim_build(snapshots.fields, grid.mask("omega"), M_max=10)


class TestEimBuild:
    """Tests for eim_build."""

    def test_points_are_distinct_mask_nodes(self, grid, eim_model):
        """Test that magic points are distinct nodes of the mask."""
        points = eim_model.points
        assert len(set(points.tolist())) == eim_model.size
        assert np.all(grid.mask("omega").indicator[points])

    def test_collocation_is_unit_lower_triangular(self, eim_model):
        """Test the structure of B."""
        B = eim_model.B
        np.testing.assert_allclose(np.diag(B), 1.0)
        np.testing.assert_array_equal(np.triu(B, 1), 0.0)

    def test_basis_vanishes_at_earlier_points(self, eim_model):
        """Test that q_i is zero at x_1..x_{i-1} and one at x_i."""
        Q = eim_model.basis_values
        for i in range(eim_model.size):
            assert Q[i, eim_model.points[i]] == pytest.approx(1.0)
            np.testing.assert_array_equal(Q[i, eim_model.points[:i]], 0.0)

    def test_first_history_entry(self, snapshots, eim_model):
        """Test that the greedy starts from the largest sup norm."""
        largest = max(np.max(np.abs(f.values)) for f in snapshots.fields)
        assert eim_model.history[0] == pytest.approx(largest)
        assert len(eim_model.history) == eim_model.size + 1

    def test_stops_at_tolerance_or_budget(self, eim_model):
        """Test the stopping rule."""
        history = eim_model.history
        assert eim_model.size == 10 or history[-1] <= 1e-12 * history[0]

    def test_low_rank_training_set_is_captured(self, snapshots, eim_model):
        """Test that training fields are reproduced once the span is full."""
        for f in snapshots.fields[::5]:
            scale = np.max(np.abs(f.values))
            assert eim_error(eim_model, f) <= 1e-8 * scale

    def test_degenerate_training_set(self, grid):
        """Test that all-zero snapshots raise DegenerateSnapshot."""
        with pytest.raises(DegenerateSnapshot):
            eim_build([Field.zeros(grid)] * 3, grid.mask("omega"), M_max=3)

    def test_invalid_budget(self, grid, snapshots):
        """Test that M_max must be positive."""
        with pytest.raises(SizeMismatch):
            eim_build(snapshots.fields, grid.mask("omega"), M_max=0)

    def test_budget_caps_size(self, grid, snapshots):
        """Test that the greedy stops at M_max."""
        model = eim_build(snapshots.fields, grid.mask("omega"), M_max=2)
        assert model.size == 2
        assert len(model.history) == 3


class TestEimInterpolation:
    """Tests for EIM interpolation and Lebesgue constants."""

    def test_interpolant_matches_at_points(self, grid, eim_model):
        """Test the interpolation property at the magic points."""
        f = Field.from_function(grid, lambda x, y: np.sin(x) * y * (1 - y))
        for M in (1, 3, eim_model.size):
            rec = eim_reconstruct(eim_model, f, M)
            points = eim_model.points[:M]
            np.testing.assert_allclose(
                rec.values[points], f.values[points], atol=1e-10
            )

    def test_basis_reproduced_exactly(self, eim_model):
        """Test that basis functions are fixed points of the interpolant."""
        for q in eim_model.basis:
            rec = eim_reconstruct(eim_model, q)
            np.testing.assert_allclose(rec.values, q.values, atol=1e-10)

    def test_zero_dimension(self, grid, eim_model):
        """Test that M = 0 interpolates to zero."""
        rec = eim_interpolate(eim_model, 0, [])
        np.testing.assert_array_equal(rec.values, np.zeros(grid.n_nodes))

    def test_wrong_value_count(self, eim_model):
        """Test that one value per point is required."""
        with pytest.raises(SizeMismatch):
            eim_interpolate(eim_model, 3, [1.0, 2.0])

    def test_lagrange_functions_are_cardinal(self, eim_model):
        """Test that h_i(x_j) is the Kronecker delta."""
        M = eim_model.size
        H = np.vstack([h.values for h in lagrange_functions(eim_model, M)])
        np.testing.assert_allclose(H[:, eim_model.points], np.eye(M), atol=1e-10)

    def test_lebesgue_constant_at_least_one(self, eim_model):
        """Test the lower bound of the Lebesgue constant."""
        assert lebesgue_linf(eim_model, 0) == 0.0
        for M in range(1, eim_model.size + 1):
            assert lebesgue_linf(eim_model, M) >= 1.0 - 1e-12

    def test_truncate(self, eim_model):
        """Test that truncation keeps the first M steps."""
        small = eim_model.truncate(2)
        assert small.size == 2
        np.testing.assert_array_equal(small.points, eim_model.points[:2])
        np.testing.assert_array_equal(small.history, eim_model.history[:3])
        with pytest.raises(SizeMismatch):
            eim_model.truncate(eim_model.size + 1)


class TestDiracEquivalence:
    """Tests that GEIM with Dirac sensors reduces to EIM."""

    def test_shared_selection_gives_same_interpolant(
        self, grid, snapshots, dirac_dictionary, eim_model
    ):
        """Test nodewise agreement of both interpolants on random fields."""
        history = eim_model.history
        # Steps taken on residuals well above round-off
        M = int(np.sum(history[:-1] >= 1e-8 * history[0]))
        assert M >= 2
        sensors = [dirac_dictionary.node_sensor(int(p)) for p in eim_model.points[:M]]
        geim_model = geim_from_selection(
            snapshots.fields,
            dirac_dictionary,
            grid.mask("omega"),
            eim_model.selected_snapshots[:M],
            sensors,
            Product.L2,
        )
        np.testing.assert_array_equal(geim_model.sensor_ids, sensors)

        rng = np.random.default_rng(5)
        for _ in range(20):
            f = Field(grid, rng.standard_normal(grid.n_nodes))
            expected = eim_reconstruct(eim_model, f, M).values
            actual = geim_reconstruct(geim_model, f, M).values
            scale = max(np.max(np.abs(expected)), 1.0)
            np.testing.assert_allclose(actual, expected, rtol=0, atol=1e-8 * scale)
