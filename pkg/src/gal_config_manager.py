#!/usr/bin/env python
# coding: utf-8

import os
import json
import yaml
import logging
from typing import Dict, Any, Optional

from gal_errors import ConfigError

logger = logging.getLogger('galloping_prediction')


def coerce_value(raw: Any, data_type: str) -> Any:
    """
    Convert a stored value to its declared type.

    Args:
        raw: Value as read from YAML, a flat config file or the command line
        data_type: One of int, float, bool, string, json

    Returns:
        The converted value

    Raises:
        ValueError: If the value cannot be converted
    """
    if data_type == 'int':
        if isinstance(raw, bool):
            raise ValueError(f"expected int, got {raw!r}")
        if isinstance(raw, float) and not raw.is_integer():
            raise ValueError(f"expected int, got {raw!r}")
        return int(raw)
    elif data_type == 'float':
        if isinstance(raw, bool):
            raise ValueError(f"expected float, got {raw!r}")
        return float(raw)
    elif data_type == 'bool':
        if isinstance(raw, bool):
            return raw
        text = str(raw).strip().lower()
        if text in ('true', 't', 'yes', 'y', '1'):
            return True
        if text in ('false', 'f', 'no', 'n', '0'):
            return False
        raise ValueError(f"expected bool, got {raw!r}")
    elif data_type == 'json':
        return json.loads(raw) if isinstance(raw, str) else raw
    else:  # string and others
        return str(raw)


class ConfigManager:
    """
    Manages application parameters backed by a YAML file.

    This class provides functionality to:
    1. Load parameters from the YAML file, falling back to built-in defaults
    2. Coerce every value to its declared type
    3. Export the parameter table to a file
    4. Reset parameters to default values
    5. Update parameters in memory
    """

    DEFAULT_CONFIG_PARAMETERS = {
        "log_level": {
            "nombre_parametro": "Logging level",
            "valor_parametro": "INFO",
            "tipo_dato": "string",
            "descripcion": "Detail level for log records (DEBUG, INFO, WARNING, ERROR, CRITICAL)"
        },
        "log_to_file": {
            "nombre_parametro": "File logging",
            "valor_parametro": "false",
            "tipo_dato": "bool",
            "descripcion": "Also write log records to a dated file under log_directory"
        },
        "log_directory": {
            "nombre_parametro": "Log directory",
            "valor_parametro": "logs",
            "tipo_dato": "string",
            "descripcion": "Directory for dated log files"
        },
        "max_workers": {
            "nombre_parametro": "Maximum workers",
            "valor_parametro": "2",
            "tipo_dato": "int",
            "descripcion": "Worker threads for experiment cells (1 runs inline)"
        },
        "memory_pause_percent": {
            "nombre_parametro": "Memory pause threshold",
            "valor_parametro": "85.0",
            "tipo_dato": "float",
            "descripcion": "System memory usage (%) above which task submission pauses"
        },
        "batch_size": {
            "nombre_parametro": "Batch size",
            "valor_parametro": "2048",
            "tipo_dato": "int",
            "descripcion": "Rows per block for kernel evaluation and neighbour search"
        },
        "full_gram_limit": {
            "nombre_parametro": "Full Gram limit",
            "valor_parametro": "8000",
            "tipo_dato": "int",
            "descripcion": "Largest training set for which the full kernel matrix is precomputed"
        },
        "kernel_cache_rows": {
            "nombre_parametro": "Kernel cache rows",
            "valor_parametro": "1024",
            "tipo_dato": "int",
            "descripcion": "Rows held by the LRU kernel cache above the full Gram limit"
        },
        "default_c": {
            "nombre_parametro": "Default C",
            "valor_parametro": "10.0",
            "tipo_dato": "float",
            "descripcion": "Box constraint used when none is given"
        },
        "kkt_tolerance": {
            "nombre_parametro": "KKT tolerance",
            "valor_parametro": "0.001",
            "tipo_dato": "float",
            "descripcion": "Stopping tolerance of the SMO solver"
        },
        "max_passes": {
            "nombre_parametro": "Maximum verification passes",
            "valor_parametro": "10",
            "tipo_dato": "int",
            "descripcion": "Full-gradient re-verifications allowed after the working-pair gap closes"
        },
        "max_iterations": {
            "nombre_parametro": "Maximum iterations",
            "valor_parametro": "1000000",
            "tipo_dato": "int",
            "descripcion": "Safety cap on SMO pair updates"
        },
        "smote_k": {
            "nombre_parametro": "SMOTE neighbours",
            "valor_parametro": "5",
            "tipo_dato": "int",
            "descripcion": "Nearest minority neighbours considered by SMOTE"
        },
        "kl_bins": {
            "nombre_parametro": "KL bins",
            "valor_parametro": "20",
            "tipo_dato": "int",
            "descripcion": "Histogram bins of the KL divergence estimator"
        },
        "search_max_train": {
            "nombre_parametro": "Feature search training cap",
            "valor_parametro": "4000",
            "tipo_dato": "int",
            "descripcion": "Training points per mask in the feature search (pool is subsampled above it)"
        },
        "sweep_repetitions": {
            "nombre_parametro": "Sweep repetitions",
            "valor_parametro": "5",
            "tipo_dato": "int",
            "descripcion": "Repetitions averaged per balance-sweep cell"
        }
    }

    def __init__(self, config_file_path: Optional[str] = None):
        """
        Initialize the configuration manager.

        Args:
            config_file_path: Path to the YAML parameter file (optional)
        """
        if config_file_path is None:
            self.config_file_path = os.path.join(
                os.path.dirname(os.path.dirname(os.path.abspath(__file__))), 'config_params.yaml')
        else:
            self.config_file_path = config_file_path
        self.config_values: Dict[str, Any] = {}

    def initialize(self):
        """Load parameters from the file, or from the defaults if it is missing."""
        self.config_values = self._get_default_config_values()
        self.load_config_from_file()

    def load_config_from_file(self) -> Dict[str, Any]:
        """
        Load configuration from file on top of the current values.

        Returns:
            Dict containing configuration values

        Raises:
            ConfigError: If the file holds an unknown parameter or a bad value
        """
        if not os.path.exists(self.config_file_path):
            logger.debug(f"Configuration file not found, using defaults: {self.config_file_path}")
            return self.config_values

        try:
            with open(self.config_file_path, 'r', encoding='utf-8') as f:
                file_values = yaml.safe_load(f) or {}
        except (OSError, yaml.YAMLError) as e:
            raise ConfigError(f"Cannot read configuration file {self.config_file_path}: {e}") from e

        if not isinstance(file_values, dict):
            raise ConfigError(f"Configuration file {self.config_file_path} must hold a mapping")

        for param_id, raw in file_values.items():
            # exported files carry the full parameter record
            if isinstance(raw, dict) and 'valor_parametro' in raw:
                raw = raw['valor_parametro']
            self.config_values[param_id] = self._coerce(param_id, raw)

        logger.debug(f"Loaded configuration from file: {self.config_file_path}")
        return self.config_values

    def _coerce(self, param_id: str, raw: Any) -> Any:
        param_info = self.DEFAULT_CONFIG_PARAMETERS.get(param_id)
        if param_info is None:
            raise ConfigError(f"Unknown configuration parameter '{param_id}'")
        try:
            return coerce_value(raw, param_info['tipo_dato'])
        except (TypeError, ValueError) as e:
            raise ConfigError(f"Invalid value for '{param_id}': {e}") from e

    def _get_default_config_values(self) -> Dict[str, Any]:
        """Get default configuration values."""
        return {
            param_id: coerce_value(param_info['valor_parametro'], param_info['tipo_dato'])
            for param_id, param_info in self.DEFAULT_CONFIG_PARAMETERS.items()
        }

    def export_config(self, file_path: Optional[str] = None):
        """Export current configuration to a file."""
        if file_path is None:
            file_path = self.config_file_path

        config_data = {}
        for param_id, param_info in self.DEFAULT_CONFIG_PARAMETERS.items():
            config_data[param_id] = {
                'nombre_parametro': param_info['nombre_parametro'],
                'valor_parametro': str(self.get(param_id)),
                'tipo_dato': param_info['tipo_dato'],
                'descripcion': param_info['descripcion']
            }

        with open(file_path, 'w', encoding='utf-8') as f:
            yaml.dump(config_data, f, default_flow_style=False, allow_unicode=True)

        logger.info(f"Configuration exported to: {file_path}")

    def update_parameter(self, param_id: str, new_value: Any):
        """
        Update a configuration parameter in memory.

        Args:
            param_id: Parameter ID
            new_value: New value for the parameter
        """
        self.config_values[param_id] = self._coerce(param_id, new_value)
        logger.debug(f"Updated parameter {param_id} to {self.config_values[param_id]!r}")

    def reset_to_defaults(self, param_id: Optional[str] = None):
        """
        Reset configuration to default values.

        Args:
            param_id: Specific parameter to reset (if None, reset all)
        """
        defaults = self._get_default_config_values()
        if param_id is None:
            self.config_values = defaults
            logger.info("Reset all parameters to default values")
        elif param_id in defaults:
            self.config_values[param_id] = defaults[param_id]
        else:
            raise ConfigError(f"Unknown configuration parameter '{param_id}'")

    def get(self, param_id: str, default_value: Any = None) -> Any:
        """
        Get a configuration parameter value.

        Args:
            param_id: Parameter ID
            default_value: Default value if parameter not found

        Returns:
            Parameter value
        """
        if param_id in self.config_values:
            return self.config_values[param_id]
        return default_value

    def set(self, param_id: str, value: Any):
        """Set a configuration parameter value."""
        self.update_parameter(param_id, value)

    def get_all(self) -> Dict[str, Any]:
        """Get all configuration parameters."""
        return self.config_values.copy()


def parse_flat_config(path: str, schema: Dict[str, str]) -> Dict[str, Any]:
    """
    Read a flat ``key=value`` file.

    Args:
        path: File to read
        schema: Mapping of allowed keys to their data type

    Returns:
        Dict of typed values for the keys present in the file

    Raises:
        ConfigError: On a missing file, unknown or duplicate key, or bad value
    """
    try:
        with open(path, 'r', encoding='utf-8') as f:
            lines = f.read().splitlines()
    except OSError as e:
        raise ConfigError(f"Cannot read config file {path}: {e}") from e

    values: Dict[str, Any] = {}
    for line_number, line in enumerate(lines, start=1):
        text = line.split('#', 1)[0].strip()
        if not text:
            continue
        if '=' not in text:
            raise ConfigError(f"{path}:{line_number}: expected key=value, got {line!r}")
        key, raw = (part.strip() for part in text.split('=', 1))
        if key not in schema:
            raise ConfigError(f"{path}:{line_number}: unknown key '{key}'")
        if key in values:
            raise ConfigError(f"{path}:{line_number}: duplicate key '{key}'")
        try:
            values[key] = coerce_value(raw, schema[key])
        except (TypeError, ValueError) as e:
            raise ConfigError(f"{path}:{line_number}: invalid value for '{key}': {e}") from e
    return values


def write_flat_config(values: Dict[str, Any], path: str):
    """Write ``key=value`` lines; floats use repr() so a reload is exact."""
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        for key, value in values.items():
            if isinstance(value, bool):
                text = 'true' if value else 'false'
            elif isinstance(value, float):
                text = repr(value)
            else:
                text = str(value)
            f.write(f"{key}={text}\n")


# Global configuration manager instance
_config_manager = None


def get_config_manager(config_file_path: Optional[str] = None) -> ConfigManager:
    """Get the global configuration manager instance."""
    global _config_manager
    if _config_manager is None or (config_file_path is not None
                                   and config_file_path != _config_manager.config_file_path):
        _config_manager = ConfigManager(config_file_path)
        _config_manager.initialize()
    return _config_manager


def get_config(param_id: Optional[str] = None, default_value: Any = None) -> Any:
    """
    Get a configuration parameter.

    Args:
        param_id: Parameter ID
        default_value: Default value if parameter not found

    Returns:
        Parameter value or all parameters if param_id is None
    """
    config_manager = get_config_manager()
    if param_id is None:
        return config_manager.get_all()
    return config_manager.get(param_id, default_value)


def set_config(param_id: str, value: Any):
    """Set a configuration parameter."""
    get_config_manager().set(param_id, value)
