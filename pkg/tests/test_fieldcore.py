"""
Tests for the fieldcore module.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geimlab.errors import GridMismatch, InvalidGeometry
from geimlab.fieldcore import (
    Field,
    Product,
    SubdomainMask,
    inner,
    inner_h1,
    inner_l2,
    make_grid,
    norm,
    restrict,
    row_norms,
    stack_fields,
)

TINY_NODES = 20
finite = st.floats(min_value=-1e3, max_value=1e3, allow_nan=False)
tiny_values = st.lists(finite, min_size=TINY_NODES, max_size=TINY_NODES)


class TestMakeGrid:
    """Tests for make_grid and Grid."""

    def test_interface_snaps_to_column(self, grid):
        """Test that the interface lands on the expected column."""
        assert grid.hx == pytest.approx(0.0625)
        assert grid.interface_col == 12
        assert grid.interface_x == pytest.approx(0.75)

    def test_snaps_to_nearest_column(self):
        """Test snapping of an abscissa between two columns."""
        grid = make_grid(33, 17, (0.0, 2.0, 0.0, 1.0), 0.77)
        assert grid.interface_col == 12

    def test_too_few_nodes(self):
        """Test that grids below 3x3 are rejected."""
        with pytest.raises(InvalidGeometry):
            make_grid(2, 17, (0.0, 2.0, 0.0, 1.0), 0.75)

    def test_interface_on_outer_boundary(self):
        """Test that the interface must be strictly interior."""
        with pytest.raises(InvalidGeometry):
            make_grid(33, 17, (0.0, 2.0, 0.0, 1.0), 0.0)
        with pytest.raises(InvalidGeometry):
            make_grid(33, 17, (0.0, 2.0, 0.0, 1.0), 2.0)

    def test_empty_bounds(self):
        """Test that degenerate bounds are rejected."""
        with pytest.raises(InvalidGeometry):
            make_grid(33, 17, (1.0, 1.0, 0.0, 1.0), 0.75)

    def test_equality_and_hash(self, grid):
        """Test that grids compare by their defining parameters."""
        same = make_grid(33, 17, (0.0, 2.0, 0.0, 1.0), 0.75)
        other = make_grid(33, 17, (0.0, 2.0, 0.0, 1.0), 1.0)
        assert same == grid
        assert hash(same) == hash(grid)
        assert other != grid

    def test_row_major_layout(self, grid):
        """Test that node k = j * nx + i sits at (x_i, y_j)."""
        k = grid.node_index(3, 2)
        assert k == 2 * grid.nx + 3
        assert grid.xx[k] == pytest.approx(grid.x[3])
        assert grid.yy[k] == pytest.approx(grid.y[2])

    def test_nearest_node(self, grid):
        """Test lookup of the closest node."""
        assert grid.nearest_node(0.76, 0.49) == grid.node_index(12, 8)
        assert grid.nearest_node(-5.0, 5.0) == grid.node_index(0, 16)

    def test_quadrature_weights_sum_to_area(self, grid):
        """Test that trapezoid weights integrate constants exactly."""
        assert np.sum(grid.quadrature_weights) == pytest.approx(2.0)

    def test_boundary_count(self, grid):
        """Test the number of outer boundary nodes."""
        assert int(grid.boundary.sum()) == 2 * 33 + 2 * 17 - 4


class TestMasks:
    """Tests for named subdomain masks."""

    def test_omega1_and_omega2_partition(self, grid):
        """Test that omega1 and omega2 split the grid."""
        omega1, omega2 = grid.mask("omega1"), grid.mask("omega2")
        assert len(omega1) + len(omega2) == grid.n_nodes
        assert not np.any(omega1.indicator & omega2.indicator)

    def test_interface_belongs_to_omega1(self, grid):
        """Test the interface column conventions."""
        interface = grid.mask("interface")
        assert len(interface) == grid.ny
        assert np.all(grid.mask("omega1").indicator[interface.nodes])
        assert not np.any(grid.mask("omega2").indicator[interface.nodes])

    def test_closure_adds_interface(self, grid):
        """Test that omega2_closure is omega2 plus the interface column."""
        closure = grid.mask("omega2_closure")
        expected = grid.mask("omega2").indicator | grid.mask("interface").indicator
        assert np.array_equal(closure.indicator, expected)

    def test_unknown_mask(self, grid):
        """Test that unknown mask names are rejected."""
        with pytest.raises(ValueError, match="Unknown mask"):
            grid.mask("omega3")

    def test_empty_mask(self, grid):
        """Test that empty masks are rejected."""
        with pytest.raises(InvalidGeometry):
            SubdomainMask(grid, [], "nothing")

    def test_out_of_range_nodes(self, grid):
        """Test that masks must stay inside the grid."""
        with pytest.raises(InvalidGeometry):
            SubdomainMask(grid, [0, grid.n_nodes], "bad")

    def test_mask_weights_vanish_off_mask(self, grid):
        """Test that mask weights are the global weights on the mask."""
        mask = grid.mask("omega2")
        assert np.all(mask.weights[~mask.indicator] == 0.0)
        np.testing.assert_array_equal(
            mask.weights[mask.nodes], grid.quadrature_weights[mask.nodes]
        )


class TestField:
    """Tests for the Field type."""

    def test_values_are_read_only(self, grid):
        """Test that field values cannot be modified in place."""
        field = Field.zeros(grid)
        with pytest.raises(ValueError):
            field.values[0] = 1.0

    def test_wrong_length(self, grid):
        """Test that the value count must match the grid."""
        with pytest.raises(ValueError, match="field needs"):
            Field(grid, np.zeros(grid.n_nodes - 1))

    def test_non_finite_values(self, grid):
        """Test that NaN values are rejected."""
        values = np.zeros(grid.n_nodes)
        values[3] = np.nan
        with pytest.raises(ValueError, match="finite"):
            Field(grid, values)

    def test_from_function(self, grid):
        """Test sampling a function at the nodes."""
        field = Field.from_function(grid, lambda x, y: x + 2 * y)
        np.testing.assert_allclose(field.values, grid.xx + 2 * grid.yy)
        assert field.as_array().shape == (grid.ny, grid.nx)

    def test_arithmetic(self, grid):
        """Test field arithmetic."""
        a = Field.constant(grid, 2.0)
        b = Field.constant(grid, 0.5)
        np.testing.assert_allclose((a + b).values, 2.5)
        np.testing.assert_allclose((a - b).values, 1.5)
        np.testing.assert_allclose((3 * b).values, 1.5)
        np.testing.assert_allclose((a / 4).values, 0.5)
        np.testing.assert_allclose((-a).values, -2.0)

    def test_arithmetic_grid_mismatch(self, grid, tiny_grid):
        """Test that operands on different grids are rejected."""
        with pytest.raises(GridMismatch):
            Field.zeros(grid) + Field.zeros(tiny_grid)


class TestInnerProducts:
    """Tests for inner, norm and friends."""

    def test_l2_of_constant(self, grid):
        """Test that the L2 norm of 1 is the square root of the area."""
        one = Field.constant(grid, 1.0)
        assert norm(one, grid.mask("omega")) == pytest.approx(np.sqrt(2.0))

    def test_l2_additive_over_partition(self, grid):
        """Test that omega1 and omega2 quadratures add up."""
        f = Field.from_function(grid, lambda x, y: np.sin(x) * np.cos(3 * y))
        total = inner_l2(f, f, grid.mask("omega"))
        parts = inner_l2(f, f, grid.mask("omega1")) + inner_l2(
            f, f, grid.mask("omega2")
        )
        assert parts == pytest.approx(total)

    def test_h1_seminorm_of_linear_field(self, grid):
        """Test that a unit slope in x adds the area to the squared norm."""
        f = Field.from_function(grid, lambda x, y: x)
        omega = grid.mask("omega")
        assert inner_h1(f, f, omega) - inner_l2(f, f, omega) == pytest.approx(2.0)

    def test_h1_seminorm_on_subdomain(self, grid):
        """Test one-sided differences at the mask edges."""
        f = Field.from_function(grid, lambda x, y: 3 * y)
        mask = grid.mask("omega2")
        area = np.sum(mask.weights)
        assert norm(f, mask, "H1") ** 2 - norm(f, mask, "L2") ** 2 == pytest.approx(
            9.0 * area
        )

    def test_norm_ignores_values_off_mask(self, grid):
        """Test that norms on a mask only see values on that mask."""
        mask = grid.mask("omega2")
        f = Field.from_function(grid, lambda x, y: x * y)
        noisy = Field(grid, f.values + 7.0 * grid.mask("omega1").indicator)
        for product in (Product.L2, Product.H1):
            assert norm(noisy, mask, product) == pytest.approx(norm(f, mask, product))

    def test_inner_matches_factor(self, grid):
        """Test that the metric factor reproduces the inner product."""
        mask = grid.mask("omega2_closure")
        f = Field.from_function(grid, lambda x, y: np.exp(x - y))
        g = Field.from_function(grid, lambda x, y: x**2 + y)
        C = mask.factor("H1")
        assert inner(f, g, mask, "H1") == pytest.approx(
            float((C @ f.values) @ (C @ g.values))
        )

    def test_local_factor_matches_global(self, grid):
        """Test that the local factor acts on mask values only."""
        mask = grid.mask("omega2")
        f = Field.from_function(grid, lambda x, y: np.cos(x + y))
        local = mask.local_factor("H1") @ f.values[mask.nodes]
        assert np.linalg.norm(local) == pytest.approx(norm(f, mask, "H1"))

    def test_row_norms(self, grid):
        """Test stacked norms against one-at-a-time norms."""
        mask = grid.mask("omega1")
        fields = [Field.from_function(grid, lambda x, y, k=k: x**k) for k in range(3)]
        expected = [norm(f, mask, "H1") for f in fields]
        np.testing.assert_allclose(
            row_norms(stack_fields(fields), mask, "H1"), expected
        )

    def test_grid_mismatch(self, grid, tiny_grid):
        """Test that inner products across grids are rejected."""
        with pytest.raises(GridMismatch):
            inner(Field.zeros(grid), Field.zeros(grid), tiny_grid.mask("omega"))

    def test_restrict(self, grid):
        """Test that restriction zeroes values off the mask."""
        mask = grid.mask("omega2")
        r = restrict(Field.constant(grid, 1.0), mask)
        np.testing.assert_array_equal(r.values, mask.indicator.astype(float))

    def test_stack_fields_requires_fields(self):
        """Test stacking an empty list."""
        with pytest.raises(ValueError):
            stack_fields([])

    def test_product_parse(self):
        """Test parsing product names."""
        assert Product.parse("h1") is Product.H1
        assert Product.parse(Product.L2) is Product.L2
        with pytest.raises(ValueError, match="Unsupported product"):
            Product.parse("H2")


class TestInnerProductProperties:
    """Property tests for the discrete inner products."""

    @settings(max_examples=50, deadline=None)
    @given(tiny_values, tiny_values)
    def test_symmetry(self, tiny_grid, a, b):
        """Test that both products are symmetric."""
        f, g = Field(tiny_grid, a), Field(tiny_grid, b)
        mask = tiny_grid.mask("omega2_closure")
        for product in ("L2", "H1"):
            assert inner(f, g, mask, product) == pytest.approx(
                inner(g, f, mask, product), rel=1e-9, abs=1e-6
            )

    @settings(max_examples=50, deadline=None)
    @given(tiny_values, tiny_values)
    def test_triangle_inequality(self, tiny_grid, a, b):
        """Test the triangle inequality for both norms."""
        f, g = Field(tiny_grid, a), Field(tiny_grid, b)
        mask = tiny_grid.mask("omega")
        for product in ("L2", "H1"):
            bound = norm(f, mask, product) + norm(g, mask, product)
            assert norm(f + g, mask, product) <= bound * (1 + 1e-12) + 1e-9

    @settings(max_examples=50, deadline=None)
    @given(tiny_values, st.floats(min_value=-10, max_value=10))
    def test_homogeneity(self, tiny_grid, a, scale):
        """Test that norms scale with the absolute value of a factor."""
        f = Field(tiny_grid, a)
        mask = tiny_grid.mask("omega1")
        assert norm(scale * f, mask, "H1") == pytest.approx(
            abs(scale) * norm(f, mask, "H1"), rel=1e-9, abs=1e-9
        )
