"""
Tests for experiment configuration.
"""

import pytest

from geimlab.config import ExperimentConfig, load_config
from geimlab.errors import ConfigError


class TestExperimentConfig:
    """Test cases for ExperimentConfig."""

    def test_defaults(self):
        """Test the built-in defaults."""
        config = ExperimentConfig()
        assert (config.nx, config.ny) == (65, 33)
        assert config.bounds == (0.0, 2.0, 0.0, 1.0)
        assert config.counts == (6, 6, 6)
        assert config.products == ["L2", "H1"]
        assert config.out_dir == "results"

    def test_from_toml(self, tiny_config_text):
        """Test that file values override the defaults."""
        config = ExperimentConfig.from_toml(tiny_config_text)
        assert (config.nx, config.ny) == (17, 9)
        assert config.counts == (2, 2, 2)
        assert config.trials == 200
        assert config.epsilon == 1e-3

    def test_unknown_key(self):
        """Test that misspelled keys are rejected."""
        with pytest.raises(ConfigError, match="Unknown"):
            ExperimentConfig.from_dict({"nxx": 10})

    def test_wrong_type(self):
        """Test that values of the wrong type are rejected."""
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({"nx": "big"})
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({"nx": 10.5})
        with pytest.raises(ConfigError):
            ExperimentConfig.from_dict({"epsilon": True})

    def test_numeric_coercion(self):
        """Test that integral floats and integers are coerced."""
        config = ExperimentConfig.from_dict({"nx": 21.0, "epsilon": 1})
        assert config.nx == 21 and isinstance(config.nx, int)
        assert config.epsilon == 1.0 and isinstance(config.epsilon, float)

    def test_products_coerced(self):
        """Test that products accept a single lower-case name."""
        assert ExperimentConfig.from_dict({"products": "h1"}).products == ["H1"]

    def test_invalid_products(self):
        """Test that unknown products are rejected."""
        with pytest.raises(ConfigError, match="products"):
            ExperimentConfig.from_dict({"products": ["L2", "W1"]})

    def test_invalid_values(self):
        """Test range checks on values."""
        bad = [
            {"nx": 2},
            {"interface_x": 2.0},
            {"alpha_min": 1.0, "alpha_max": -1.0},
            {"kernel": "gauss"},
            {"epsilon": -1.0},
            {"trials": 0},
            {"threads": 0},
        ]
        for data in bad:
            with pytest.raises(ConfigError):
                ExperimentConfig.from_dict(data)

    def test_invalid_toml(self):
        """Test that malformed files raise ConfigError."""
        with pytest.raises(ConfigError, match="Invalid TOML"):
            ExperimentConfig.from_toml("nx = = 3")

    def test_toml_round_trip(self, tiny_config_text):
        """Test that a dumped configuration reads back unchanged."""
        config = ExperimentConfig.from_toml(tiny_config_text)
        assert ExperimentConfig.from_toml(config.to_toml()) == config

    def test_overrides_ignore_none(self):
        """Test that unset flags leave values alone."""
        config = ExperimentConfig().with_overrides(seed=4, M_max=None)
        assert config.seed == 4
        assert config.M_max == 15


class TestConfigHash:
    """Test cases for the configuration hash."""

    def test_stable(self):
        """Test that equal configurations hash equally."""
        assert ExperimentConfig().config_hash == ExperimentConfig().config_hash
        assert len(ExperimentConfig().config_hash) == 64

    def test_sensitive_to_computation(self):
        """Test that computational settings change the hash."""
        base = ExperimentConfig()
        assert base.with_overrides(seed=1).config_hash != base.config_hash
        assert base.with_overrides(M_max=5).config_hash != base.config_hash

    def test_execution_keys_excluded(self):
        """Test that thread count and output directory do not change the hash."""
        base = ExperimentConfig()
        other = base.with_overrides(threads=8, out_dir="elsewhere")
        assert other.config_hash == base.config_hash


class TestLoadConfig:
    """Test cases for load_config."""

    def test_defaults_without_file(self):
        """Test that no path gives the defaults."""
        assert load_config() == ExperimentConfig()

    def test_file_and_overrides(self, tiny_config_file):
        """Test that flags override file values."""
        config = load_config(tiny_config_file, seed=9, M_max=None)
        assert config.nx == 17
        assert config.seed == 9
        assert config.M_max == 6

    def test_missing_file(self, temp_dir):
        """Test that a missing file raises ConfigError."""
        with pytest.raises(ConfigError, match="does not exist"):
            load_config(temp_dir / "missing.toml")

    def test_invalid_override(self, tiny_config_file):
        """Test that overrides are validated."""
        with pytest.raises(ConfigError):
            load_config(tiny_config_file, threads=0)
