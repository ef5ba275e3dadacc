"""
Configuration management for annealfactor sweeps.

Sweep configurations are stored as one flat TOML table (problem, hardware,
grid and solver keys side by side) and validated through the pydantic models
that the pipeline itself uses.
"""

import os
from pathlib import Path
from typing import Any, Dict, Optional, Union

import toml
from pydantic import ValidationError

from annealfactor.core.harness import STANDARD_GRIDS, SweepConfig, standard_sweep
from annealfactor.utils.logging import get_logger

logger = get_logger(__name__)

DEFAULT_CONFIG_NAME = "sweep.toml"


class ConfigManager:
    """Loads, saves and creates flat sweep configuration files."""

    def __init__(self, config_file: Optional[Union[Path, str]] = None):
        """Initialize config manager.

        Args:
            config_file: Path of the TOML file. If None, ``sweep.toml`` in the
                default configuration directory is used.
        """
        if config_file is None:
            self.config_file = self._get_default_config_dir() / DEFAULT_CONFIG_NAME
        else:
            self.config_file = Path(config_file)
        self._config: Optional[SweepConfig] = None

    def _get_default_config_dir(self) -> Path:
        """Get the default configuration directory."""
        if os.name == 'nt':  # Windows
            base = Path(os.environ.get('APPDATA', Path.home() / 'AppData' / 'Roaming'))
        else:  # Unix-like
            base = Path(os.environ.get('XDG_CONFIG_HOME', Path.home() / '.config'))

        return base / 'annealfactor'

    def load_config(self) -> SweepConfig:
        """Load and validate the configuration file."""
        if not self.config_file.exists():
            raise ConfigError(f"Config file not found at {self.config_file}")

        try:
            with open(self.config_file, 'r', encoding='utf-8') as f:
                data = toml.load(f)
        except toml.TomlDecodeError as e:
            logger.error(f"Invalid TOML in config file: {e}")
            raise ConfigError(f"Invalid TOML syntax in {self.config_file}: {e}")

        try:
            self._config = SweepConfig.from_flat(data)
        except (ValidationError, ValueError, TypeError, KeyError) as e:
            logger.error(f"Invalid configuration: {e}")
            raise ConfigError(f"Invalid configuration in {self.config_file}: {e}")

        logger.info(f"Loaded configuration from {self.config_file}")
        return self._config

    def save_config(self, config: Optional[SweepConfig] = None) -> None:
        """Save ``config`` (or the last loaded one) as flat TOML."""
        config = config or self._config
        if config is None:
            raise ConfigError("No configuration loaded to save")

        try:
            self.config_file.parent.mkdir(parents=True, exist_ok=True)
            with open(self.config_file, 'w', encoding='utf-8') as f:
                toml.dump(config.to_flat(), f)
            self._config = config
            logger.info(f"Configuration saved to {self.config_file}")
        except OSError as e:
            logger.error(f"Failed to save config: {e}")
            raise ConfigError(f"Failed to save configuration: {e}")

    def default_config(self, n: int = 15, **overrides: Any) -> SweepConfig:
        """Standard sweep for ``n`` (15, 91 or 899), or a coarse grid otherwise."""
        if n in STANDARD_GRIDS:
            return standard_sweep(n, **overrides)
        values: Dict[str, Any] = {"spec": {"n": n}, "grids": [(300, 9900, 300)]}
        values.update(overrides)
        return SweepConfig(**values)

    def get_config(self) -> SweepConfig:
        """Get the current configuration, loading it if necessary."""
        if not self._config:
            return self.load_config()
        return self._config


class ConfigError(Exception):
    """Configuration-related errors."""
    pass
