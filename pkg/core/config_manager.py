"""Configuration manager for obda-express run budgets"""

import json
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Any, Dict, Optional

from core.rewriting import RewritingBudget, RewritingError


class ConfigError(Exception):
    """Configuration-related errors"""
    pass


OUTPUT_FORMATS = ('text', 'json')
OPTIONAL_INTS = ('max_abox', 'max_choices', 'seed', 'oracle_max_domain', 'oracle_max_facts')


@dataclass
class RunConfig:
    """Settings for one command run: defaults, then the config file, then CLI flags"""
    spec_path: Optional[str] = None
    source_query_path: Optional[str] = None
    target_query_path: Optional[str] = None
    max_abox: Optional[int] = None
    max_core: int = 2
    max_outdegree: int = 1
    max_depth: int = 1
    max_choices: Optional[int] = None
    exhaustive: bool = False
    consistent_only: bool = False
    output: str = 'text'
    jobs: int = 1
    seed: Optional[int] = None
    oracle_max_domain: Optional[int] = None
    oracle_max_facts: Optional[int] = None

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'RunConfig':
        """
        Create RunConfig from a dictionary, ignoring unknown keys

        Raises:
            ConfigError: If a known key has a value of the wrong type
        """
        known = {f.name for f in fields(cls)}
        config = cls()
        for key, value in data.items():
            if key not in known:
                continue
            default = getattr(config, key)
            if key in OPTIONAL_INTS and value is not None and (isinstance(value, bool) or not isinstance(value, int)):
                raise ConfigError(f"{key} must be an integer or null, got {value!r}")
            if isinstance(default, bool) and not isinstance(value, bool):
                raise ConfigError(f"{key} must be true or false, got {value!r}")
            if isinstance(default, int) and not isinstance(default, bool) and (
                    isinstance(value, bool) or not isinstance(value, int)):
                raise ConfigError(f"{key} must be an integer, got {value!r}")
            setattr(config, key, value)
        return config

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def merged(self, **overrides) -> 'RunConfig':
        """Copy with every override that is not None applied"""
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})

    def to_budget(self) -> RewritingBudget:
        try:
            return RewritingBudget(
                max_abox_size=self.max_abox,
                max_core=self.max_core,
                max_outdegree=self.max_outdegree,
                max_depth=self.max_depth,
                max_choices=self.max_choices,
                exhaustive=self.exhaustive,
            )
        except RewritingError as e:
            raise ConfigError(f"Invalid budget: {e}") from e

    def validate(self, *required_paths: str):
        """
        Check budgets and that the named path fields point at existing files

        Args:
            required_paths: Field names such as 'spec_path' that must be set

        Raises:
            ConfigError: On negative budgets, unknown output format or missing files
        """
        for name in ('max_abox', 'max_core', 'max_outdegree', 'max_depth'):
            value = getattr(self, name)
            if value is not None and value < 0:
                raise ConfigError(f"{name} must be nonnegative, got {getattr(self, name)}")
        for name in ('max_choices', 'oracle_max_domain', 'oracle_max_facts'):
            value = getattr(self, name)
            if value is not None and value < 1:
                raise ConfigError(f"{name} must be positive, got {value}")
        if self.jobs < 1:
            raise ConfigError(f"jobs must be at least 1, got {self.jobs}")
        if self.output not in OUTPUT_FORMATS:
            raise ConfigError(f"output must be one of {OUTPUT_FORMATS}, got {self.output!r}")
        for name in required_paths:
            path = getattr(self, name)
            if not path:
                raise ConfigError(f"{name.replace('_', ' ')} is required")
            if not Path(path).is_file():
                raise ConfigError(f"File not found: {path}")


class ConfigManager:
    """Manages the budgets.json defaults file"""

    def __init__(self, config_dir: Optional[Path] = None, config_file: Optional[Path] = None):
        """
        Initialize config manager

        Args:
            config_dir: Directory to store configuration files.
                       Defaults to {project_root}/config
            config_file: Explicit file to use instead of budgets.json in config_dir
        """
        if config_file is not None:
            self.config_file = Path(config_file)
            self.config_dir = self.config_file.parent
        else:
            if config_dir is None:
                project_root = Path(__file__).parent.parent
                config_dir = project_root / 'config'
            self.config_dir = Path(config_dir)
            self.config_file = self.config_dir / 'budgets.json'

    def _ensure_config_dir(self):
        """Create config directory if it doesn't exist"""
        self.config_dir.mkdir(parents=True, exist_ok=True)

    def load_config(self) -> dict:
        """
        Load configuration from JSON file, creating it with defaults if missing

        Returns:
            Configuration dictionary

        Raises:
            ConfigError: If config file is corrupted
        """
        if not self.config_file.exists():
            return self._create_default_config()

        try:
            with open(self.config_file, 'r', encoding='utf-8') as f:
                config = json.load(f)
            if not isinstance(config, dict):
                raise ConfigError(f"Config file must hold a JSON object: {self.config_file}")
            return config
        except json.JSONDecodeError as e:
            backup_file = self.config_file.with_suffix('.json.backup')
            self.config_file.rename(backup_file)
            raise ConfigError(
                f"Config file is corrupted: {e}\n"
                f"Backup saved to: {backup_file}"
            ) from e
        except OSError as e:
            raise ConfigError(f"Failed to load config: {e}") from e

    def _create_default_config(self) -> dict:
        """Create default configuration"""
        config = RunConfig().to_dict()
        for key in ('spec_path', 'source_query_path', 'target_query_path'):
            config.pop(key)
        self.save_config(config)
        return config

    def save_config(self, config: dict):
        """
        Save configuration to JSON file

        Raises:
            ConfigError: If save fails
        """
        try:
            self._ensure_config_dir()
            with open(self.config_file, 'w', encoding='utf-8') as f:
                json.dump(config, f, indent=2)
        except OSError as e:
            raise ConfigError(f"Failed to save config: {e}") from e

    def load_run_config(self) -> RunConfig:
        return RunConfig.from_dict(self.load_config())
