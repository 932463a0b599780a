"""
Tests for on-disk formats.
"""

import numpy as np
import pytest

from geimlab.bundles import (
    BundleError,
    load_eim_model,
    load_field_csv,
    load_geim_model,
    load_snapshot_set,
    save_eim_model,
    save_field_csv,
    save_geim_model,
    save_snapshot_set,
)
from geimlab.eim import eim_build, eim_reconstruct
from geimlab.fieldcore import Field
from geimlab.geim import geim_reconstruct, lebesgue_exact


class TestFieldCsv:
    """Test cases for field CSV files."""

    def test_values_and_grid_preserved(self, grid, temp_dir):
        """Test that a field reads back exactly."""
        field = Field.from_function(grid, lambda x, y: np.exp(x) * np.sin(7 * y) / 3)
        path = temp_dir / "field.csv"
        save_field_csv(field, path)
        loaded = load_field_csv(path)
        assert loaded.grid == grid
        np.testing.assert_array_equal(loaded.values, field.values)

    def test_file_layout(self, tiny_grid, temp_dir):
        """Test the header comment and value column."""
        path = temp_dir / "field.csv"
        save_field_csv(Field.constant(tiny_grid, 1.5), path)
        lines = path.read_text().splitlines()
        assert lines[0].startswith("# nx=5 ny=4")
        assert lines[1] == "value"
        assert len(lines) == 2 + tiny_grid.n_nodes

    def test_missing_header(self, temp_dir):
        """Test that files without the grid line are rejected."""
        path = temp_dir / "plain.csv"
        path.write_text("value\n1.0\n")
        with pytest.raises(BundleError):
            load_field_csv(path)


class TestSnapshotSetFiles:
    """Test cases for snapshot-set directories."""

    def test_round_trip(self, snapshots, temp_dir):
        """Test that parameters, fields and metadata survive."""
        directory = save_snapshot_set(snapshots, temp_dir / "snaps")
        assert (directory / "manifest.csv").is_file()
        loaded = load_snapshot_set(directory)
        assert loaded.grid == snapshots.grid
        assert loaded.params == snapshots.params
        np.testing.assert_array_equal(loaded.values(), snapshots.values())
        assert loaded.metadata["counts"] == [3, 3, 3]

    def test_unsupported_version(self, snapshots, temp_dir):
        """Test that other format versions are refused."""
        directory = save_snapshot_set(snapshots, temp_dir / "snaps")
        meta = directory / "grid.toml"
        text = meta.read_text().replace("format_version = 1", "format_version = 9")
        meta.write_text(text)
        with pytest.raises(BundleError):
            load_snapshot_set(directory)


class TestModelBundles:
    """Test cases for EIM and GEIM model bundles."""

    def test_geim_model_reproduces_reconstructions(self, l2_model, heldout, temp_dir):
        """Test that a loaded GEIM model interpolates bit for bit."""
        path = temp_dir / "geim.npz"
        save_geim_model(l2_model, path)
        loaded = load_geim_model(path)
        assert loaded.size == l2_model.size
        assert loaded.product == l2_model.product
        np.testing.assert_array_equal(loaded.sensor_ids, l2_model.sensor_ids)
        for f in heldout.fields[:3]:
            np.testing.assert_array_equal(
                geim_reconstruct(loaded, f).values, geim_reconstruct(l2_model, f).values
            )

    def test_geim_dictionary_restored(self, l2_model, temp_dir):
        """Test that the sensor dictionary is carried in the bundle."""
        path = temp_dir / "geim.npz"
        save_geim_model(l2_model, path)
        loaded = load_geim_model(path)
        assert len(loaded.dictionary) == len(l2_model.dictionary)
        assert (loaded.dictionary.matrix != l2_model.dictionary.matrix).nnz == 0
        assert lebesgue_exact(loaded, 3) == pytest.approx(lebesgue_exact(l2_model, 3))

    def test_eim_model_reproduces_reconstructions(
        self, grid, snapshots, heldout, temp_dir
    ):
        """Test that a loaded EIM model interpolates bit for bit."""
        model = eim_build(snapshots.fields, grid.mask("omega"), M_max=6)
        path = temp_dir / "eim.npz"
        save_eim_model(model, path)
        loaded = load_eim_model(path)
        np.testing.assert_array_equal(loaded.points, model.points)
        f = heldout.fields[4]
        np.testing.assert_array_equal(
            eim_reconstruct(loaded, f).values, eim_reconstruct(model, f).values
        )

    def test_wrong_kind(self, l2_model, temp_dir):
        """Test that loading a GEIM bundle as EIM raises BundleError."""
        path = temp_dir / "geim.npz"
        save_geim_model(l2_model, path)
        with pytest.raises(BundleError, match="not a eim bundle"):
            load_eim_model(path)
