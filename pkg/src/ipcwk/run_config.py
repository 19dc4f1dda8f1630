"""
Module for resolving the configuration of a command line run.

Values are layered: the defaults of the user configuration file, then a JSON file given by --config, then explicit flags.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional

import numpy as np

from .bands import BandConfig, parse_bandwidth_rule, parse_region
from .dataio import parse_dataset, read_json, read_known_g, read_truth
from .errors import ConfigError, DataIOError
from .estimators import GMode, GSpec, Transform, bandwidth_grid
from .kernels import KernelSpec
from .simulation import CosineDesign, SimConfig, TabulatedTruth, provenance
from .survival import Dataset

CONFIG_DEFAULTS = {
    "kernel": "kernel",
    "theta": "theta",
    "grid": "grid_steps",
    "seed": "seed",
    "float_format": "float_format",
    "ell": "ell",
    "guard": "hazard_guard",
}
"""
Run options taking their default from the configuration file, mapped to the key in its defaults section.
"""

OPTIONS = {
    "dataset",
    "out",
    "summary",
    "figures",
    "svg",
    "kernel",
    "theta",
    "grid",
    "seed",
    "float_format",
    "ell",
    "guard",
    "h",
    "h_grid",
    "psi",
    "tau0",
    "known_g",
    "points",
    "region",
    "t",
    "bandwidth",
    "c1",
    "c2",
    "reference_h",
    "truth",
    "n",
    "reps",
    "inflation",
    "g_mode",
    "psi_threshold",
    "threads",
    "limit",
    "category",
}
"""
Every option a run accepts, by flag destination name.
"""

TEXT_OPTIONS = {
    "dataset",
    "out",
    "summary",
    "figures",
    "svg",
    "kernel",
    "float_format",
    "h_grid",
    "psi",
    "known_g",
    "points",
    "region",
    "bandwidth",
    "truth",
    "g_mode",
    "category",
}
"""
Options that must be given as strings in a --config file.
"""

DATASET_COMMANDS = {"km", "fit", "cdf", "density", "hazard", "bands"}
SIMULATE_COMMANDS = {"simulate generate", "simulate epsilon1", "simulate coverage", "simulate deviation"}


def resolve_options(flags, configuration, config_file=None):
    """
    Layers the option sources.

    Parameters
    ----------
    flags : dict
        Options given on the command line. None values are treated as not given.
    configuration : ipcwk.config.config.Config
        The user configuration.
    config_file : str or pathlib.Path, optional
        A JSON object of options, keys spelled like the flags with or without leading dashes.

    Returns
    -------
    dict
        The resolved options.
    """
    options = {key: configuration.default(name) for key, name in CONFIG_DEFAULTS.items()}
    if config_file is not None:
        for key, value in read_json(config_file).items():
            name = key.lstrip("-").replace("-", "_")
            if name not in OPTIONS:
                raise ConfigError(f"Unknown option {key!r} in {config_file}.")
            if name in TEXT_OPTIONS and not isinstance(value, str):
                raise ConfigError(f"Option {key!r} in {config_file} must be a string, got {value!r}.")
            options[name] = value
    options.update({key: value for key, value in flags.items() if value is not None})
    return options


def _number(options, key, kind=float, default=None):
    value = options.get(key, default)
    if value is None:
        return None
    try:
        return kind(value)
    except (TypeError, ValueError) as error:
        raise ConfigError(f"Option {key} must be a number, got {value!r}.") from error


def _h_values(options):
    if options.get("h_grid") is not None:
        parts = str(options["h_grid"]).split(":")
        if len(parts) != 3:
            raise ConfigError(f"Bad --h-grid {options['h_grid']!r}, expected lo:hi:steps.")
        try:
            return bandwidth_grid(float(parts[0]), float(parts[1]), int(parts[2]))
        except ValueError as error:
            raise ConfigError(f"Bad --h-grid {options['h_grid']!r}.") from error
    values = options.get("h")
    if values is None:
        return None
    try:
        values = np.atleast_1d(np.asarray(values, dtype=float))
    except (TypeError, ValueError) as error:
        raise ConfigError(f"Bandwidths must be numbers, got {values!r}.") from error
    if values.ndim != 1:
        raise ConfigError(f"Bandwidths must be a flat list, got {options['h']!r}.")
    if np.any(~(values > 0)):
        raise ConfigError("Bandwidths must be positive.")
    return values


def covariate_range(data, pad):
    """
    The bounding box of the covariates. A coordinate taking a single value x is widened to [x - pad, x + pad].

    Parameters
    ----------
    data : ipcwk.survival.Dataset
        The sample.
    pad : float
        Half-width given to degenerate coordinates.

    Returns
    -------
    tuple(tuple(float, float))
        One (lo, hi) interval per coordinate.
    """
    bounds = []
    for column in data.x.T:
        lo, hi = float(column.min()), float(column.max())
        bounds.append((lo - pad, hi + pad) if lo == hi else (lo, hi))
    return tuple(bounds)


def _g_mode(options):
    try:
        return GMode(options.get("g_mode", GMode.KAPLAN_MEIER.value))
    except ValueError as error:
        raise ConfigError(f"Unknown censoring mode {options.get('g_mode')!r}, expected known or kaplan-meier.") from error


@dataclass(frozen=True, eq=False)
class RunConfig:
    """
    The resolved configuration of a run.

    Attributes
    ----------
    subcommand : str
        The subcommand, "simulate <study>" for simulations.
    options : dict
        The resolved options, recorded in output provenance.
    dataset : pathlib.Path
        The input dataset, for dataset commands.
    data : ipcwk.survival.Dataset
        The parsed dataset, for dataset commands.
    sim : ipcwk.simulation.SimConfig
        The simulation parameters, for simulation commands.
    kernel : ipcwk.kernels.KernelSpec
        The kernel.
    psi : ipcwk.estimators.Transform
        The response transform.
    g : ipcwk.estimators.GSpec
        The censoring distribution.
    band : ipcwk.bands.BandConfig
        The band configuration, where one is needed.
    outputs : dict
        Output paths keyed by role ("out", "summary", "svg", "figures").
    seed : int
        The master seed.
    """

    subcommand: str
    options: dict
    dataset: Optional[Path] = None
    data: Optional[Dataset] = None
    sim: Optional[SimConfig] = None
    kernel: Optional[KernelSpec] = None
    psi: Optional[Transform] = None
    g: Optional[GSpec] = None
    band: Optional[BandConfig] = None
    outputs: Dict[str, Path] = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.subcommand == "logs":
            return
        if (self.dataset is None) == (self.sim is None):
            raise ConfigError("A run needs either a dataset or a simulation configuration, not both.")
        inputs = {
            Path(path).resolve()
            for path in (self.dataset, self.options.get("known_g"), self.options.get("points"), self.options.get("truth"))
            if path is not None
        }
        for role, path in self.outputs.items():
            path = Path(path)
            if path.resolve() in inputs:
                raise ConfigError(f"The {role} output {path} would overwrite an input file.")
            parent = path if role == "figures" else path.parent
            if not parent.is_dir():
                raise DataIOError(f"Output directory {parent} does not exist.")

    @classmethod
    def build(cls, subcommand, options):
        """
        Builds a run configuration from resolved options. Dataset commands parse their dataset here.

        Parameters
        ----------
        subcommand : str
            The subcommand.
        options : dict
            The resolved options.

        Returns
        -------
        ipcwk.run_config.RunConfig
            The run configuration.
        """
        outputs = {
            role: Path(options[role]) for role in ("out", "summary", "svg", "figures") if options.get(role) is not None
        }
        seed = _number(options, "seed", int, 0)
        if subcommand == "logs":
            return cls(subcommand, options, outputs=outputs, seed=seed)
        cutoff = _number(options, "tau0")
        psi = Transform.parse(str(options.get("psi", "identity")), cutoff)
        if subcommand in SIMULATE_COMMANDS:
            threshold = _number(options, "psi_threshold", float, 0.9)
            kernel = KernelSpec.from_name(str(options["kernel"]), 1)
            design = None
            if options.get("truth") and subcommand in ("simulate epsilon1", "simulate coverage"):
                x, values = read_truth(options["truth"])
                design = TabulatedTruth(x, values, CosineDesign(threshold), str(options["truth"]))
            sim = SimConfig(
                n=_number(options, "n", int, 2000),
                seed=seed,
                psi_threshold=threshold,
                design=design,
                kernel=kernel,
                g_mode=_g_mode(options),
            )
            band = None
            if subcommand in ("simulate epsilon1", "simulate coverage"):
                band = cls._band(options, ((-1.0, 1.0),), "fixed:0.15")
            return cls(subcommand, options, sim=sim, kernel=kernel, psi=sim.psi, g=sim.gspec, band=band, outputs=outputs, seed=seed)
        if subcommand not in DATASET_COMMANDS:
            raise ConfigError(f"Unknown subcommand {subcommand!r}.")
        if options.get("dataset") is None:
            raise ConfigError(f"{subcommand} needs a dataset.")
        dataset = Path(options["dataset"])
        data = parse_dataset(dataset)
        kernel = KernelSpec.from_name(str(options["kernel"]), data.d)
        g = GSpec.known(read_known_g(options["known_g"])) if options.get("known_g") else GSpec.kaplan_meier()
        band = None
        if subcommand == "bands":
            h_values = _h_values(options)
            fallback = f"fixed:{float(h_values[0])!r}" if h_values is not None else None
            band = cls._band(options, lambda rule: covariate_range(data, float(np.max(rule.resolve(data.x, data.n)))), fallback)
        return cls(
            subcommand,
            options,
            dataset=dataset,
            data=data,
            kernel=kernel,
            psi=psi,
            g=g,
            band=band,
            outputs=outputs,
            seed=seed,
        )

    @staticmethod
    def _band(options, default_region, default_bandwidth):
        text = options.get("bandwidth") or default_bandwidth
        if text is None:
            raise ConfigError("Bands need --bandwidth (or --h).")
        reference = _number(options, "reference_h")
        rule = parse_bandwidth_rule(str(text), _number(options, "c1"), _number(options, "c2"), reference)
        if options.get("region"):
            region = parse_region(options["region"])
        else:
            region = default_region(rule) if callable(default_region) else default_region
        return BandConfig(theta=_number(options, "theta"), region=region, bandwidth=rule)

    def bandwidths(self):
        """
        Returns
        -------
        numpy.ndarray
            The bandwidths of --h or --h-grid.

        Raises
        ------
        ipcwk.errors.ConfigError
            If neither is given.
        """
        values = _h_values(self.options)
        if values is None:
            raise ConfigError(f"{self.subcommand} needs --h or --h-grid.")
        return values

    def number(self, key, kind=float, default=None):
        """
        Returns
        -------
        float or int
            A numeric option, or default if unset.
        """
        return _number(self.options, key, kind, default)

    def region(self):
        """
        Returns
        -------
        tuple(tuple(float, float))
            The region of --region, else the band region, else the covariate range of the data, else [-1, 1].
        """
        if self.options.get("region"):
            return parse_region(self.options["region"])
        if self.band is not None:
            return self.band.region
        if self.data is not None:
            return covariate_range(self.data, 0.0)
        return ((-1.0, 1.0),)

    def provenance(self):
        """
        Returns
        -------
        dict
            The provenance entries embedded in every output.
        """
        options = {key: value for key, value in sorted(self.options.items()) if value is not None}
        return {"command": self.subcommand, "seed": self.seed, "config": options, **provenance()}
