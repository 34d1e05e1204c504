#!/usr/bin/env python3
"""
Verification Settings

This module provides the numeric thresholds used across the lab:
root-finding tolerances, nested quadrature control, comparability grids,
band-structure constants, sampling/parallelism parameters and logging.
Settings come in named profiles and can be overridden from the environment
(``ARCLAB_*`` variables, optionally loaded from a ``.env`` file).
"""

import copy
import json
import os
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

from dotenv import load_dotenv


class Profile(Enum):
    """Named settings profiles"""
    QUICK = "quick"
    STANDARD = "standard"
    ACCEPTANCE = "acceptance"


@dataclass
class RootSettings:
    """Certified root finding"""
    tol: float = 1e-10
    merge_factor: float = 8.0
    newton_steps: int = 60


@dataclass
class QuadratureSettings:
    """Nested Gauss-Legendre quadrature for the J_k ladder"""
    base_rel_tol: float = 1e-9
    level_divisor: float = 4.0
    orders: Tuple[int, ...] = (4, 8, 16, 32, 64)
    max_tensor_nodes: int = 5000
    chunk_rows: int = 20_000

    def level_tolerance(self, depth: int) -> float:
        return self.base_rel_tol / self.level_divisor ** depth

    def orders_for(self, dims: int) -> List[int]:
        """Gauss orders whose tensor rule in `dims` dimensions stays under the node cap"""
        usable = [q for q in self.orders if q ** dims <= self.max_tensor_nodes]
        return usable or [self.orders[0]]


@dataclass
class ComparabilitySettings:
    """Torsion comparability and geometric-inequality probes"""
    grid: int = 64
    truncation_exponent: int = 40
    max_ratio: float = 1e4
    probe_radius_factor: float = 2.0 ** 8


@dataclass
class BandSettings:
    """Constants realizing the qualitative relations used by band construction and refinement"""
    much_less: float = 1.0 / 8.0
    gtrsim: float = 1.0 / 8.0
    epsilon: float = 1.0 / 64.0
    within_band_threshold: float = 0.5


@dataclass
class SamplingSettings:
    """Seeded Monte Carlo campaigns"""
    workers: int = 4
    chunk_size: int = 4096
    default_samples: int = 10_000
    x_samples: int = 2048
    identity_tuples: int = 50
    tower_configurations: int = 1000


@dataclass
class LoggingSettings:
    level: str = "INFO"
    rich: bool = True


@dataclass
class LabSettings:
    """Aggregate settings for a verification run"""
    profile: Profile
    roots: RootSettings = field(default_factory=RootSettings)
    quadrature: QuadratureSettings = field(default_factory=QuadratureSettings)
    comparability: ComparabilitySettings = field(default_factory=ComparabilitySettings)
    bands: BandSettings = field(default_factory=BandSettings)
    sampling: SamplingSettings = field(default_factory=SamplingSettings)
    logging: LoggingSettings = field(default_factory=LoggingSettings)
    corpus_dir: Optional[str] = None


DEFAULT_SETTINGS = {
    Profile.QUICK: LabSettings(
        profile=Profile.QUICK,
        sampling=SamplingSettings(
            workers=2,
            chunk_size=1024,
            default_samples=2000,
            x_samples=512,
            identity_tuples=10,
            tower_configurations=100,
        ),
    ),
    Profile.STANDARD: LabSettings(profile=Profile.STANDARD),
    Profile.ACCEPTANCE: LabSettings(
        profile=Profile.ACCEPTANCE,
        sampling=SamplingSettings(
            workers=8,
            chunk_size=8192,
            default_samples=100_000,
            x_samples=8192,
            identity_tuples=50,
            tower_configurations=1000,
        ),
    ),
}

_SECTIONS = {
    "roots": RootSettings,
    "quadrature": QuadratureSettings,
    "comparability": ComparabilitySettings,
    "bands": BandSettings,
    "sampling": SamplingSettings,
    "logging": LoggingSettings,
}


class SettingsManager:
    """Manager for lab settings"""

    def __init__(self, profile: Profile = Profile.STANDARD, env_file: Optional[str] = None):
        self.profile = profile
        self.settings = copy.deepcopy(DEFAULT_SETTINGS.get(profile, DEFAULT_SETTINGS[Profile.STANDARD]))
        if env_file:
            load_dotenv(env_file)
        else:
            load_dotenv()
        self._load_environment_overrides()

    def _load_environment_overrides(self):
        """Load settings overrides from environment variables"""
        log_level = os.getenv("ARCLAB_LOG_LEVEL")
        if log_level:
            self.settings.logging.level = log_level.upper()

        rich_output = os.getenv("ARCLAB_RICH")
        if rich_output:
            self.settings.logging.rich = rich_output.lower() in ("true", "1", "yes")

        workers = os.getenv("ARCLAB_WORKERS")
        if workers:
            try:
                self.settings.sampling.workers = int(workers)
            except ValueError:
                pass

        chunk_size = os.getenv("ARCLAB_CHUNK_SIZE")
        if chunk_size:
            try:
                self.settings.sampling.chunk_size = int(chunk_size)
            except ValueError:
                pass

        quad_tol = os.getenv("ARCLAB_QUAD_TOL")
        if quad_tol:
            try:
                self.settings.quadrature.base_rel_tol = float(quad_tol)
            except ValueError:
                pass

        root_tol = os.getenv("ARCLAB_ROOT_TOL")
        if root_tol:
            try:
                self.settings.roots.tol = float(root_tol)
            except ValueError:
                pass

        corpus_dir = os.getenv("ARCLAB_CORPUS_DIR")
        if corpus_dir:
            self.settings.corpus_dir = corpus_dir

    def get_config(self) -> LabSettings:
        """Get the current settings"""
        return self.settings

    def to_dict(self) -> Dict[str, Any]:
        """Convert settings to a dictionary"""
        def convert(obj):
            if isinstance(obj, Enum):
                return obj.value
            elif isinstance(obj, dict):
                return {k: convert(v) for k, v in obj.items()}
            elif isinstance(obj, (list, tuple)):
                return [convert(item) for item in obj]
            elif hasattr(obj, '__dict__'):
                return {k: convert(v) for k, v in obj.__dict__.items()}
            return obj

        return convert(self.settings.__dict__)

    def to_json(self, indent: int = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent)

    def save_to_file(self, filepath: str):
        """Save settings to a JSON file"""
        with open(filepath, 'w') as f:
            f.write(self.to_json())

    @classmethod
    def load_from_file(cls, filepath: str) -> 'SettingsManager':
        """Load settings from a JSON file; environment overrides are re-applied on top"""
        with open(filepath, 'r') as f:
            data = json.load(f)

        manager = cls(Profile(data.get('profile', Profile.STANDARD.value)))
        for section, section_cls in _SECTIONS.items():
            values = data.get(section, {})
            current = getattr(manager.settings, section)
            for key, value in values.items():
                if not hasattr(current, key):
                    continue
                if isinstance(getattr(current, key), tuple):
                    value = tuple(value)
                setattr(current, key, value)
        manager.settings.corpus_dir = data.get('corpus_dir', manager.settings.corpus_dir)
        manager._load_environment_overrides()
        return manager

    def validate_config(self) -> List[str]:
        """Validate the current settings and return any errors"""
        errors = []
        s = self.settings

        if s.roots.tol <= 0:
            errors.append("Root tolerance must be positive")
        if s.roots.merge_factor < 1:
            errors.append("Root merge factor must be at least 1")

        if s.quadrature.base_rel_tol <= 0:
            errors.append("Quadrature tolerance must be positive")
        if s.quadrature.level_divisor < 1:
            errors.append("Quadrature level divisor must be at least 1")
        if len(s.quadrature.orders) < 2 or list(s.quadrature.orders) != sorted(set(s.quadrature.orders)):
            errors.append("Quadrature orders must be at least two strictly increasing values")

        if s.comparability.grid < 2:
            errors.append("Comparability grid must have at least 2 points")
        if s.comparability.max_ratio <= 1:
            errors.append("Comparability acceptance ratio must exceed 1")

        if not 0 < s.bands.much_less < 1:
            errors.append("Band 'much less' factor must be in (0, 1)")
        if not 0 < s.bands.epsilon < 1:
            errors.append("Band epsilon must be in (0, 1)")

        if s.sampling.workers <= 0:
            errors.append("Worker count must be positive")
        if s.sampling.chunk_size <= 0:
            errors.append("Chunk size must be positive")

        if s.logging.level not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
            errors.append(f"Unknown log level {s.logging.level}")

        return errors


def get_default_settings(profile: Profile = Profile.STANDARD) -> LabSettings:
    """Get default settings for a profile (no environment overrides)"""
    return copy.deepcopy(DEFAULT_SETTINGS.get(profile, DEFAULT_SETTINGS[Profile.STANDARD]))


def load_settings_from_env() -> SettingsManager:
    """Load settings using the profile named by ARCLAB_PROFILE"""
    load_dotenv()
    profile_str = os.getenv("ARCLAB_PROFILE", "standard")
    try:
        profile = Profile(profile_str.lower())
    except ValueError:
        profile = Profile.STANDARD

    return SettingsManager(profile)


if __name__ == "__main__":
    manager = load_settings_from_env()

    print("Current arclength-lab settings:")
    print(manager.to_json())

    errors = manager.validate_config()
    if errors:
        print("\nValidation errors:")
        for error in errors:
            print(f"  - {error}")
