"""
Settings Manager - Run configuration from a JSON/YAML file, overridden by command-line flags.

File layout (every section optional):
    {"model": {ModelConfig fields}, "training": {TrainingConfig fields}}
A flat document with ModelConfig field names is accepted as the "model" section.
"""

from __future__ import annotations

import json
from dataclasses import fields
from pathlib import Path
from typing import Any, Dict, Optional

import yaml

from .errors import ConfigError
from .trainer import TrainingConfig
from .tree_transformer import ModelConfig

SECTIONS = ("model", "training")


class SettingsManager:
    def __init__(self, config_path: Optional[Path] = None):
        self._path = Path(config_path) if config_path is not None else None
        self._config: Dict[str, Dict[str, Any]] = {section: {} for section in SECTIONS}

    def load(self) -> None:
        """Read the config file if one was given; a missing path is an error, no path means defaults."""
        if self._path is None:
            return
        try:
            document = yaml.safe_load(self._path.read_text(encoding="utf-8"))
        except FileNotFoundError as e:
            raise ConfigError(f"config file {self._path} does not exist") from e
        except yaml.YAMLError as e:
            raise ConfigError(f"config file {self._path} is not valid JSON/YAML: {e}") from e
        if document is None:
            return
        if not isinstance(document, dict):
            raise ConfigError(f"config file {self._path} must hold an object")
        if set(document) & set(SECTIONS):
            extra = set(document) - set(SECTIONS)
            if extra:
                raise ConfigError(f"unknown config sections: {', '.join(sorted(extra))}")
            for section in SECTIONS:
                values = document.get(section) or {}
                if not isinstance(values, dict):
                    raise ConfigError(f"config section {section!r} must be an object", section)
                self._config[section] = dict(values)
        else:
            self._config["model"] = dict(document)
        self._check_keys()

    def _check_keys(self) -> None:
        for section, cls in (("model", ModelConfig), ("training", TrainingConfig)):
            known = {f.name for f in fields(cls)}
            for key in self._config[section]:
                if key not in known:
                    raise ConfigError(f"unknown {section} config key {key!r}", key)

    def save(self, path: Optional[Path] = None) -> None:
        target = Path(path) if path is not None else self._path
        if target is None:
            raise ConfigError("no config path to save to")
        target.write_text(json.dumps(self._config, indent=2, sort_keys=True) + "\n", encoding="utf-8")

    @property
    def config(self) -> Dict[str, Dict[str, Any]]:
        return self._config

    def get(self, section: str, key: str, fallback: Any = None) -> Any:
        return self._config.get(section, {}).get(key, fallback)

    def set(self, section: str, key: str, value: Any) -> None:
        if section not in SECTIONS:
            raise ConfigError(f"unknown config section {section!r}", section)
        self._config[section][key] = value
        self._check_keys()

    def apply_overrides(self, section: str, overrides: Dict[str, Any]) -> None:
        """Flags win over the file; None means the flag was not given."""
        for key, value in overrides.items():
            if value is not None:
                self.set(section, key, value)

    def model_config(self) -> ModelConfig:
        config = ModelConfig.from_dict(self._config["model"])
        return config

    def training_config(self) -> TrainingConfig:
        training = TrainingConfig.from_dict(self._config["training"])
        training.validate()
        return training
