"""
Module for the figure style configuration object.
"""

import sys

import yaml

from ..errors import ConfigError


class Scheme:
    """
    Figure style holder class.

    Attributes
    ----------
    config : ipcwk.config.config.Config
        The parent configuration object instance.
    style_file : pathlib.Path
        The path to the figure style yaml file.
    style : dict
        Holds the line styles and figure geometry. Refer to the contents of style_file for more information on structure.
    """

    def __init__(self, config):
        """
        Initializes a Scheme object.

        Parameters
        ----------
        config : ipcwk.config.config.Config
            The parent configuration object instance.
        """
        self.style_file = config.path / config.config.get("figure_style", "style.yaml")
        self.config = config
        if not self.style_file.exists():
            self.create_default_config()
        else:
            self.parse_config()

    def backup_and_reset(self):
        """
        Restores the figure style to default, creating a backup in the process.
        """
        print(
            "Restoring figure style to defaults. Creating backup of pre-restore style.",
            file=sys.stderr,
        )
        backup = self.style_file.with_name(self.style_file.name + ".bak")
        self.style_file.rename(backup)
        self.create_default_config()

    def create_default_config(self):
        """
        Creates the default first time figure style, if the style file doesn't exist. This will overwrite the style file.
        """
        self.style = {
            "figure": {
                "width": 6.4,
                "height": 4.0,
            },
            "lines": {
                "estimate": {"color": "#1f4e79", "linestyle": "--", "linewidth": 1.2},
                "truth": {"color": "#000000", "linestyle": "-", "linewidth": 1.2},
                "band": {"color": "#c55a11", "linestyle": ":", "linewidth": 1.0},
            },
            "boxplot": {
                "facecolor": "#dae3f3",
                "edgecolor": "#1f4e79",
            },
        }
        self.write_config()

    def write_config(self):
        """
        Immediately writes the figure style to the style file.
        """
        with self.style_file.open("w", encoding="utf-8") as file:
            file.write(yaml.dump(self.style))

    def parse_config(self):
        """
        Parses the style file and replaces the currently loaded style with its contents.
        """
        with self.style_file.open("r", encoding="utf-8") as file:
            try:
                style = yaml.safe_load(file.read())
            except yaml.YAMLError as error:
                raise ConfigError(f"Cannot parse {self.style_file}: {error}") from error
        if not isinstance(style, dict):
            raise ConfigError(f"{self.style_file} must hold a mapping, got {type(style).__name__}.")
        self.style = style

    def line(self, name):
        """
        Returns the matplotlib keyword arguments for a named line.

        Parameters
        ----------
        name : str
            One of "estimate", "truth" or "band".

        Returns
        -------
        dict
            Keyword arguments for matplotlib.axes.Axes.plot.
        """
        return dict(self.style["lines"][name])

    def __getitem__(self, item):
        return self.style[item]
