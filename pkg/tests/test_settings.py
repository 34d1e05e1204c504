"""
Configuration Test Suite
Tests for the configuration layer:
- Settings profiles, environment overrides and validation
- Run config schema with dotted field paths on errors
- Curve corpus resolution and file shadowing
"""

import json
import sys
import os

import pytest

# Add project root to path
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from arclength_lab.errors import ConfigError, CurveSpecError
from config.corpus import BUILTIN_CORPUS, list_corpus, random_curve, resolve_curve
from config.run_config import Command, load_run_config, load_run_config_file
from config.settings import Profile, SettingsManager, get_default_settings


@pytest.fixture
def clean_env(monkeypatch):
    for name in ("ARCLAB_LOG_LEVEL", "ARCLAB_RICH", "ARCLAB_WORKERS", "ARCLAB_CHUNK_SIZE",
                 "ARCLAB_QUAD_TOL", "ARCLAB_ROOT_TOL", "ARCLAB_CORPUS_DIR", "ARCLAB_PROFILE"):
        monkeypatch.delenv(name, raising=False)
    return monkeypatch


class TestSettings:
    """Profiles and overrides"""

    def test_profiles(self, clean_env):
        quick = get_default_settings(Profile.QUICK)
        acceptance = get_default_settings(Profile.ACCEPTANCE)
        assert quick.sampling.x_samples < acceptance.sampling.x_samples
        assert quick.bands.epsilon == 1.0 / 64.0
        assert SettingsManager(Profile.STANDARD).validate_config() == []

    def test_environment_overrides(self, clean_env):
        clean_env.setenv("ARCLAB_WORKERS", "3")
        clean_env.setenv("ARCLAB_QUAD_TOL", "1e-7")
        clean_env.setenv("ARCLAB_LOG_LEVEL", "debug")
        clean_env.setenv("ARCLAB_CHUNK_SIZE", "not-a-number")
        settings = SettingsManager(Profile.QUICK).get_config()
        assert settings.sampling.workers == 3
        assert settings.quadrature.base_rel_tol == 1e-7
        assert settings.logging.level == "DEBUG"
        assert settings.sampling.chunk_size == 1024

    def test_validation_errors(self, clean_env):
        manager = SettingsManager()
        manager.settings.sampling.workers = 0
        manager.settings.quadrature.orders = (8, 4)
        errors = manager.validate_config()
        assert "Worker count must be positive" in errors
        assert any("Quadrature orders" in e for e in errors)

    def test_file_round_trip(self, clean_env, tmp_path):
        manager = SettingsManager(Profile.ACCEPTANCE)
        manager.settings.bands.epsilon = 0.01
        path = tmp_path / "settings.json"
        manager.save_to_file(str(path))
        loaded = SettingsManager.load_from_file(str(path))
        assert loaded.profile is Profile.ACCEPTANCE
        assert loaded.settings.bands.epsilon == 0.01
        assert loaded.settings.quadrature.orders == (4, 8, 16, 32, 64)

    def test_level_tolerance(self):
        quadrature = get_default_settings().quadrature
        assert quadrature.level_tolerance(2) == pytest.approx(1e-9 / 16)
        assert quadrature.orders_for(3) == [4, 8, 16]


class TestRunConfig:
    """Run config schema"""

    def test_inline_curve(self):
        config = load_run_config({
            "command": "decompose",
            "curve": {"dim": 2, "coeffs": [[0, "1"], ["0", "0", "0.5"]]},
        })
        assert config.command is Command.DECOMPOSE
        assert config.curve.coeffs[1] == ["0", "0", "1/2"]
        assert config.curve.to_curve().dim == 2

    def test_zero_denominator_path(self):
        with pytest.raises(CurveSpecError) as exc:
            load_run_config({"command": "decompose", "curve": {"dim": 2, "coeffs": [["1/0"], ["1"]]}})
        assert exc.value.field_path.startswith("curve.coeffs")

    def test_dimension_mismatch(self):
        with pytest.raises(CurveSpecError):
            load_run_config({"command": "decompose", "curve": {"dim": 3, "coeffs": [["1"], ["1"]]}})

    def test_sampling_needs_seed(self):
        with pytest.raises(ConfigError):
            load_run_config({"command": "verify-identity", "corpus": "cusp"})
        config = load_run_config({"command": "verify-identity", "corpus": "cusp", "seed": 5})
        assert config.is_sampling

    def test_curve_or_corpus(self):
        with pytest.raises(ConfigError):
            load_run_config({"command": "decompose"})
        assert load_run_config({"command": "corpus-list"}).curve is None

    def test_interval_order(self):
        with pytest.raises(ConfigError) as exc:
            load_run_config({"command": "decompose", "corpus": "cusp", "interval": {"lo": 1.0, "hi": 0.0}})
        assert exc.value.field_path == "interval"

    def test_unknown_field(self):
        with pytest.raises(ConfigError) as exc:
            load_run_config({"command": "decompose", "corpus": "cusp", "sead": 1})
        assert exc.value.field_path == "sead"

    def test_seed_range(self):
        with pytest.raises(ConfigError):
            load_run_config({"command": "verify-identity", "corpus": "cusp", "seed": 2 ** 64})

    def test_echo_and_file(self, tmp_path):
        path = tmp_path / "run.json"
        path.write_text(json.dumps({"command": "bands-build", "params": {"points": [0.1, 0.5]}}))
        echo = load_run_config_file(path).echo()
        assert echo["command"] == "bands-build"
        assert "curve" not in echo

    def test_unreadable_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_run_config_file(tmp_path / "missing.json")


class TestCorpus:
    """Built-in curves and corpus files"""

    def test_builtin_names(self, clean_env):
        names = [entry["name"] for entry in list_corpus()]
        for name in ("moment-2", "moment-5", "cusp", "cubic", "skew", "random-6"):
            assert name in names
        assert set(BUILTIN_CORPUS) <= set(names)

    def test_random_curve_seeded(self):
        a, b = random_curve(4), random_curve(4)
        assert a.to_spec() == b.to_spec()
        assert a.nondegenerate

    def test_unknown_name(self, clean_env):
        with pytest.raises(ConfigError):
            resolve_curve("helix")

    def test_file_shadows_builtin(self, clean_env, tmp_path):
        (tmp_path / "cusp.json").write_text(json.dumps({"dim": 2, "coeffs": [["0", "1"], ["0", "0", "1"]]}))
        curve = resolve_curve("cusp", directory=str(tmp_path))
        assert curve.to_spec()["coeffs"][0] == ["0", "1"]
        assert resolve_curve("cusp").to_spec()["coeffs"][0] == ["0", "0", "1"]


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
