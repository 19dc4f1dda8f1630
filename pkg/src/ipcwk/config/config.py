"""
Module for the configuration parser object.
"""

import os
import sys
from pathlib import Path

import yaml
from packaging import version

from ..errors import ConfigError
from ..version import VERSION
from .scheme import Scheme

LAST_CONFIG_VERSION = 3

DEFAULTS = {
    "kernel": "epanechnikov",
    "theta": 2.718281828459045,
    "grid_steps": 201,
    "seed": 0,
    "float_format": "%.17g",
    "ell": 0.1,
    "hazard_guard": 1e-10,
}
"""
Estimation defaults written to a first time configuration.
"""


def default_config_dir():
    """
    Resolves the configuration directory.

    Returns
    -------
    pathlib.Path
        The value of the IPCWK_CONFIG_DIR environment variable if set, ~/.config/ipcwk otherwise.
    """
    env = os.environ.get("IPCWK_CONFIG_DIR")
    if env:
        return Path(env)
    return Path.home() / ".config" / "ipcwk"


class Config:
    """
    Configuration parser and holder.

    Attributes
    ----------
    version_updaters : dict
        A numbered dict of update functions for incrementally upgrading an outdated configuration file.
    path : pathlib.Path
        The configuration parent path, where all configuration data is stored.
    config_path : pathlib.Path
        The path to the configuration yaml file.
    scheme : ipcwk.config.scheme.Scheme
        The figure style holder instance.
    config : dict
        The loaded configuration.
    """

    def __init__(self, path=None):
        """
        Initializes a Config object.

        Parameters
        ----------
        path : str
            The configuration parent path, if not default. Defaults to IPCWK_CONFIG_DIR or ~/.config/ipcwk.
        """
        self.version_updaters = {
            1: self._update_1,
            2: self._update_2,
            3: self._update_3,
        }
        path = default_config_dir() if path is None else Path(path)
        if not path.exists():
            path.mkdir(parents=True, exist_ok=True)
        self.path = path
        self.config_path = self.path / "config.yaml"

        if not self.config_path.exists():
            self.create_default_config()
        else:
            self.parse_config()
        self.scheme = Scheme(self)

    def initialize(self):
        """
        Late initializer for the Config object. Upgrades an outdated configuration file.

        Returns
        -------
        list(str)
            Warnings to be logged once logging is available.
        """
        return self.update_version()

    def _update_1(self):
        """
        Version 1 configuration update.

        Do not call.
        """
        self.config["defaults"] = dict(DEFAULTS)

    def _update_2(self):
        """
        Version 2 configuration update.

        Do not call.
        """
        self.config["log_retention"] = {
            "max_lines": 1000,
            "max_age": 2419200,
        }

    def _update_3(self):
        """
        Version 3 configuration update.

        Do not call.
        """
        self.config["threads"] = 1
        self.config["figure_style"] = "style.yaml"

    def update_version(self):
        """
        Main configuration update sequence. Always called by initialize(), not required to call separately.

        Returns
        -------
        list(str)
            Warnings about the configuration file which should be logged by the caller.
        """
        warnings = []
        written_by = self.config.get("library_version")
        if written_by is not None and version.parse(str(written_by)) > version.parse(VERSION):
            warnings.append(
                f"Configuration was written by ipcwk {written_by}, running {VERSION}."
            )
        config_version = self.config.get("version", 0)
        while config_version < LAST_CONFIG_VERSION:
            self.version_updaters[config_version + 1]()
            config_version += 1
        self.config["version"] = config_version
        if written_by is None or version.parse(str(written_by)) < version.parse(VERSION):
            self.config["library_version"] = VERSION
        self.write_config()
        return warnings

    def create_default_config(self):
        """
        Generates first time default configuration. Should match the expected format of the latest update version.

        Writes the generated configuration to the configuration file in config_path.
        """
        print("Creating first time configuration...", file=sys.stderr)
        self.config = {
            "version": LAST_CONFIG_VERSION,
            "library_version": VERSION,
            "defaults": dict(DEFAULTS),
            "threads": 1,
            "log_retention": {
                "max_lines": 1000,
                "max_age": 2419200,
            },
            "figure_style": "style.yaml",
        }
        self.write_config()

    def write_config(self):
        """
        Immediately writes the configuration to the configuration file in config_path.
        """
        with self.config_path.open("w", encoding="utf-8") as file:
            file.write(yaml.dump(self.config))

    def parse_config(self):
        """
        Parses the configuration file specified in config_path and replaces the currently loaded config with its contents.
        """
        with self.config_path.open("r", encoding="utf-8") as file:
            try:
                config = yaml.safe_load(file.read()) or {}
            except yaml.YAMLError as error:
                raise ConfigError(f"Cannot parse {self.config_path}: {error}") from error
        if not isinstance(config, dict):
            raise ConfigError(f"{self.config_path} must hold a mapping, got {type(config).__name__}.")
        self.config = config

    def default(self, key):
        """
        Retrieve an estimation default, falling back to the built-in value if the configuration file lacks it.

        Parameters
        ----------
        key : str
            The name of the default.

        Returns
        -------
        object
            The configured default.
        """
        return self.config.get("defaults", {}).get(key, DEFAULTS[key])

    def __contains__(self, item):
        return item in self.config

    def __getitem__(self, item):
        """
        Retrieve a configuration value.

        Parameters
        ----------
        item : str
            The configuration key.

        Returns
        -------
        object
            The configuration value.
        """
        return self.config[item]

    def __setitem__(self, item, value):
        """
        Set a configuration value.

        Parameters
        ----------
        item : str
            The configuration key.
        value : object
            The configuration value.
        """
        self.config[item] = value
