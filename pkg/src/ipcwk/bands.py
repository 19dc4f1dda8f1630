"""
Module for plug-in variance estimation and almost sure simultaneous confidence bands.

The half-width of the band at x is

    L_n(x) = sqrt( 2 log_{theta,K}(V_I / h^d) / (n h^d) * sigma*^2(x; h) / f_{X;n}(x; h) ) * sqrt(int K^2),

where sigma*^2 is clamped at zero and h = H_n(x) is resolved from the bandwidth rule.
"""

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Optional, Tuple

import numpy as np
import pandas as pd

from .common import Common
from .errors import AllPointsMissingError, ConfigError, DimensionMismatchError, ZeroDensityError
from .estimators import ipcw_terms, kernel_matrix, kernel_sums, nw_weights, power_law_bandwidth


class BandwidthRule(ABC):
    """
    Resolves the bandwidth H_n(x) at every grid point.
    """

    @abstractmethod
    def resolve(self, points, n):
        """
        Parameters
        ----------
        points : numpy.ndarray
            Grid points, shape (m, d).
        n : int
            The sample size.

        Returns
        -------
        numpy.ndarray
            Bandwidths, shape (m,).
        """

    def check(self, points, n):
        """
        Logs the rule's diagnostics for a grid. Called once per run, outside of worker processes.

        Parameters
        ----------
        points : numpy.ndarray
            Grid points, shape (m, d).
        n : int
            The sample size.

        Returns
        -------
        bool
            Whether the rule is within its stated bounds.
        """
        return True

    @abstractmethod
    def describe(self):
        """
        Returns
        -------
        str
            The command line form of the rule.
        """


@dataclass(frozen=True)
class FixedBandwidth(BandwidthRule):
    """
    The same bandwidth everywhere.
    """

    h: float

    def __post_init__(self):
        if not self.h > 0:
            raise ConfigError(f"Bandwidth must be positive, got {self.h!r}.")

    def resolve(self, points, n):
        return np.full(len(points), float(self.h))

    def describe(self):
        return f"fixed:{self.h!r}"


@dataclass(frozen=True)
class PowerLawBandwidth(BandwidthRule):
    """
    h_n = A n^(-delta0), with 1/(4+d) <= delta0 < 1.
    """

    scale: float
    delta0: float

    def __post_init__(self):
        if not self.scale > 0:
            raise ConfigError(f"Bandwidth constant must be positive, got {self.scale!r}.")
        if not 0 < self.delta0 < 1:
            raise ConfigError(f"Bandwidth exponent must lie in (0, 1), got {self.delta0!r}.")

    def check_dimension(self, dim):
        """
        Checks the exponent against the lower bound 1/(4+d).

        Parameters
        ----------
        dim : int
            The covariate dimension.
        """
        if self.delta0 < 1.0 / (4 + dim):
            raise ConfigError(
                f"Bandwidth exponent {self.delta0} is below 1/(4+d) = {1.0 / (4 + dim):.6g} for d={dim}."
            )

    def resolve(self, points, n):
        self.check_dimension(points.shape[1])
        return np.full(len(points), power_law_bandwidth(n, self.scale, self.delta0))

    def describe(self):
        return f"power:{self.scale!r}:{self.delta0!r}"


@dataclass(frozen=True, eq=False)
class TabulatedBandwidth(BandwidthRule):
    """
    Per-point bandwidths H_n(x) read from a table; grid points take the bandwidth of the nearest tabulated point.

    Attributes
    ----------
    points : numpy.ndarray
        Tabulated points, shape (k, d).
    values : numpy.ndarray
        Tabulated bandwidths, shape (k,).
    c1 : float
        Lower constant of the bound c1 h_n <= H_n(x) <= c2 h_n.
    c2 : float
        Upper constant of the same bound.
    reference_h : float
        The reference bandwidth h_n of the bound. Violations are logged as warnings.
    source : str
        Where the table was read from, for provenance.
    """

    points: np.ndarray
    values: np.ndarray
    c1: Optional[float] = None
    c2: Optional[float] = None
    reference_h: Optional[float] = None
    source: str = "<memory>"

    def __post_init__(self):
        points = np.asarray(self.points, dtype=float)
        if points.ndim == 1:
            points = points.reshape(-1, 1)
        values = np.asarray(self.values, dtype=float)
        if points.ndim != 2 or values.shape != (points.shape[0],) or len(values) == 0:
            raise ConfigError("A bandwidth table needs one bandwidth per tabulated point.")
        if np.any(~(values > 0)):
            raise ConfigError("Tabulated bandwidths must be positive.")
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "values", values)

    def resolve(self, points, n):
        if points.shape[1] != self.points.shape[1]:
            raise DimensionMismatchError(
                f"Bandwidth table has dimension {self.points.shape[1]}, grid has {points.shape[1]}."
            )
        distances = np.linalg.norm(points[:, None, :] - self.points[None, :, :], axis=-1)
        return self.values[np.argmin(distances, axis=1)]

    def check(self, points, n):
        return self.check_bounds(self.resolve(np.asarray(points, dtype=float).reshape(len(points), -1), n))

    def check_bounds(self, resolved):
        """
        Logs a warning if the resolved bandwidths leave [c1 h_n, c2 h_n]. The bound is asymptotic, so this is not an error.

        Parameters
        ----------
        resolved : numpy.ndarray
            The resolved bandwidths.

        Returns
        -------
        bool
            Whether the bound holds (or could not be checked).
        """
        if self.reference_h is None or (self.c1 is None and self.c2 is None):
            return True
        low = -np.inf if self.c1 is None else self.c1 * self.reference_h
        high = np.inf if self.c2 is None else self.c2 * self.reference_h
        outside = int(np.count_nonzero((resolved < low) | (resolved > high)))
        if outside:
            Common.warning(
                f"{outside} bandwidths outside [{low:g}, {high:g}].",
                "Bandwidth bound",
                "Bands",
                resource=self.source,
                c1=self.c1,
                c2=self.c2,
                reference_h=self.reference_h,
            )
            return False
        return True

    def describe(self):
        return f"table:{self.source}"


def parse_bandwidth_rule(text, c1=None, c2=None, reference_h=None):
    """
    Parses the command line form of a bandwidth rule.

    Parameters
    ----------
    text : str
        "fixed:<h>", "power:<A>:<delta0>" or "table:<file.csv>".
    c1, c2, reference_h : float, optional
        Bound constants for tabulated rules.

    Returns
    -------
    ipcwk.bands.BandwidthRule
        The rule.
    """
    kind, _, rest = text.strip().partition(":")
    try:
        if kind == "fixed":
            return FixedBandwidth(float(rest))
        if kind == "power":
            scale, delta0 = rest.split(":")
            return PowerLawBandwidth(float(scale), float(delta0))
    except ValueError as error:
        raise ConfigError(f"Bad bandwidth rule {text!r}.") from error
    if kind == "table" and rest:
        # Imported here, dataio depends on this module.
        from .dataio import read_bandwidth_table  # pylint: disable=import-outside-toplevel

        points, values = read_bandwidth_table(rest)
        return TabulatedBandwidth(points, values, c1, c2, reference_h, rest)
    raise ConfigError(
        f"Unknown bandwidth rule {text!r}, expected fixed:h, power:A:delta0 or table:file.csv."
    )


def parse_region(text):
    """
    Parses the command line form of a box region.

    Parameters
    ----------
    text : str
        "lo:hi[,lo:hi...]", one interval per coordinate.

    Returns
    -------
    tuple(tuple(float, float))
        The intervals.
    """
    if not isinstance(text, str):
        raise ConfigError(f"Bad region {text!r}, expected a string lo:hi[,lo:hi...].")
    try:
        region = tuple(
            tuple(float(bound) for bound in part.split(":", 1)) for part in text.split(",")
        )
    except ValueError as error:
        raise ConfigError(f"Bad region {text!r}, expected lo:hi[,lo:hi...].") from error
    if any(len(bounds) != 2 for bounds in region):
        raise ConfigError(f"Bad region {text!r}, expected lo:hi[,lo:hi...].")
    return region


def box_grid(region, steps):
    """
    Tensor grid of equally spaced points over a box.

    Parameters
    ----------
    region : tuple(tuple(float, float))
        One (lo, hi) interval per coordinate.
    steps : int
        Points per coordinate.

    Returns
    -------
    numpy.ndarray
        Shape (steps^d, d), the last coordinate varying fastest.
    """
    if int(steps) < 1:
        raise ConfigError(f"A grid needs at least one point per coordinate, got {steps!r}.")
    axes = [np.linspace(lo, hi, int(steps)) for lo, hi in region]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([axis.ravel() for axis in mesh], axis=1)


@dataclass(frozen=True)
class BandConfig:
    """
    Configuration of a simultaneous confidence band.

    Attributes
    ----------
    theta : float
        The floor constant of log_{theta,K}, theta > 1.
    region : tuple(tuple(float, float))
        The box I, one (lo, hi) interval per coordinate.
    bandwidth : ipcwk.bands.BandwidthRule
        The rule resolving H_n(x).
    """

    theta: float = math.e
    region: Tuple[Tuple[float, float], ...] = ((-1.0, 1.0),)
    bandwidth: BandwidthRule = field(default_factory=lambda: FixedBandwidth(0.15))

    def __post_init__(self):
        if not self.theta > 1:
            raise ConfigError(f"theta must exceed 1, got {self.theta!r}.")
        region = tuple((float(lo), float(hi)) for lo, hi in self.region)
        if not region or any(not hi > lo for lo, hi in region):
            raise ConfigError(f"Region {self.region!r} must be a nonempty box of positive volume.")
        object.__setattr__(self, "region", region)
        if isinstance(self.bandwidth, PowerLawBandwidth):
            self.bandwidth.check_dimension(len(region))

    @property
    def dim(self):
        """
        Returns
        -------
        int
            The dimension of the region.
        """
        return len(self.region)

    @property
    def volume(self):
        """
        Returns
        -------
        float
            The Lebesgue measure V_I of the region.
        """
        return float(np.prod([hi - lo for lo, hi in self.region]))

    def contains(self, points):
        """
        Parameters
        ----------
        points : numpy.ndarray
            Points of shape (m, d).

        Returns
        -------
        numpy.ndarray
            Boolean mask of shape (m,).
        """
        lows = np.array([lo for lo, _ in self.region])
        highs = np.array([hi for _, hi in self.region])
        return np.all((points >= lows) & (points <= highs), axis=1)

    def grid(self, steps):
        """
        Tensor grid of equally spaced points over the region.

        Parameters
        ----------
        steps : int
            Points per coordinate.

        Returns
        -------
        numpy.ndarray
            Shape (steps^d, d).
        """
        return box_grid(self.region, steps)

    def with_bandwidth(self, rule):
        """
        Returns
        -------
        ipcwk.bands.BandConfig
            A copy using another bandwidth rule.
        """
        return replace(self, bandwidth=rule)


class BandPoint(NamedTuple):
    """
    One grid point of an estimated curve. Missing points carry NaN numbers and a nonempty flag.
    """

    x: Tuple[float, ...]
    h_used: float
    estimate: float
    lower: float
    upper: float
    halfwidth: float
    variance: float
    flag: str


@dataclass(frozen=True)
class EstimateCurve:
    """
    Point estimates and band limits over a grid.

    Attributes
    ----------
    points : tuple(ipcwk.bands.BandPoint)
        The grid points, in grid order.
    """

    points: Tuple[BandPoint, ...]

    @property
    def x(self):
        """
        Returns
        -------
        numpy.ndarray
            The grid, shape (m, d).
        """
        return np.array([point.x for point in self.points], dtype=float)

    @property
    def estimates(self):
        return np.array([point.estimate for point in self.points], dtype=float)

    @property
    def halfwidths(self):
        return np.array([point.halfwidth for point in self.points], dtype=float)

    @property
    def valid(self):
        """
        Returns
        -------
        numpy.ndarray
            Boolean mask of the points which are not missing.
        """
        return np.array([point.flag == "" for point in self.points], dtype=bool)

    def inflated(self, factor):
        """
        The band with its half-width multiplied by factor, the (1 +/- epsilon) bands.

        Parameters
        ----------
        factor : float
            The nonnegative inflation factor.

        Returns
        -------
        ipcwk.bands.EstimateCurve
            The inflated curve.
        """
        if factor < 0:
            raise ConfigError(f"Inflation must be nonnegative, got {factor!r}.")
        points = []
        for point in self.points:
            halfwidth = point.halfwidth * factor if point.halfwidth > 0 else 0.0
            if point.flag:
                halfwidth = np.nan
            points.append(
                point._replace(
                    halfwidth=halfwidth,
                    lower=point.estimate - halfwidth,
                    upper=point.estimate + halfwidth,
                )
            )
        return EstimateCurve(tuple(points))

    def to_frame(self):
        """
        Returns
        -------
        pandas.DataFrame
            Columns x (or x1..xd), h, estimate, lower, upper, halfwidth, variance, flag.
        """
        xs = self.x
        if xs.shape[1] == 1:
            columns = {"x": xs[:, 0]}
        else:
            columns = {f"x{j + 1}": xs[:, j] for j in range(xs.shape[1])}
        for name in ("h_used", "estimate", "lower", "upper", "halfwidth", "variance", "flag"):
            columns[name] = [getattr(point, name) for point in self.points]
        frame = pd.DataFrame(columns)
        return frame.rename(columns={"h_used": "h"})


def variance_estimate(data, psi, x, h, kernel, g):
    """
    Plug-in estimate of the conditional variance sigma_psi^2(x) of the weighted response.

    sigma*^2(x; h) = sum_i delta_i psi(Z_i)^2 / (1 - G(Z_i))^2 w_i(x) - m*(x)^2. May be negative in small samples.

    Parameters
    ----------
    data : ipcwk.survival.Dataset
        The censored sample.
    psi : ipcwk.estimators.Transform
        The response transform.
    x : array-like
        The evaluation point, length d.
    h : float
        The bandwidth.
    kernel : ipcwk.kernels.KernelSpec
        The kernel.
    g : ipcwk.estimators.GSpec
        The censoring distribution.

    Returns
    -------
    float
        The raw estimate.
    """
    weights = nw_weights(data, x, h, kernel)
    estimate = weights @ ipcw_terms(data, psi, g)
    return float(weights @ ipcw_terms(data, psi, g, power=2) - estimate**2)


def variance_estimate_clamped(data, psi, x, h, kernel, g):
    """
    The variance estimate clamped at zero.

    See variance_estimate() for parameter descriptions.
    """
    return max(variance_estimate(data, psi, x, h, kernel, g), 0.0)


def log_theta_k(u, kernel, theta):
    """
    log(max(theta, u * int K^2)).

    Parameters
    ----------
    u : float
        A positive argument.
    kernel : ipcwk.kernels.KernelSpec
        The kernel.
    theta : float
        The floor constant, theta > 1.

    Returns
    -------
    float
        The floored logarithm.
    """
    if not theta > 1:
        raise ConfigError(f"theta must exceed 1, got {theta!r}.")
    return float(np.log(np.maximum(theta, np.asarray(u, dtype=float) * kernel.squared_norm)))


def design_density(data, x, h, kernel):
    """
    Kernel estimate f_{X;n}(x; h) = sum_i K((x - X_i) / h) / (n h^d) of the covariate density.

    Parameters
    ----------
    data : ipcwk.survival.Dataset
        The censored sample.
    x : array-like
        The evaluation point, length d.
    h : float
        The bandwidth.
    kernel : ipcwk.kernels.KernelSpec
        The kernel.

    Returns
    -------
    float
        The density estimate.
    """
    point = np.atleast_1d(np.asarray(x, dtype=float))
    total = kernel_matrix(data, point[None, :], h, kernel).sum()
    return float(total / (data.n * h**data.d))


def halfwidth_from_plugins(n, h, dim, variance, density, kernel, theta, volume):
    """
    L_n from frozen plug-ins. Vectorised over h, variance and density.

    Parameters
    ----------
    n : int
        The sample size.
    h : float or numpy.ndarray
        The bandwidths.
    dim : int
        The covariate dimension.
    variance : float or numpy.ndarray
        The variance plug-in; negative values are clamped at zero.
    density : float or numpy.ndarray
        The positive design density plug-in.
    kernel : ipcwk.kernels.KernelSpec
        The kernel.
    theta : float
        The floor constant of log_{theta,K}.
    volume : float
        The volume V_I of the region.

    Returns
    -------
    float or numpy.ndarray
        The half-widths.
    """
    h_d = np.asarray(h, dtype=float) ** dim
    norm = kernel.squared_norm
    log_term = np.log(np.maximum(theta, volume / h_d * norm))
    ratio = np.maximum(np.asarray(variance, dtype=float), 0.0) / np.asarray(density, dtype=float)
    return np.sqrt(2.0 * log_term / (n * h_d) * ratio) * math.sqrt(norm)


def band_halfwidth(data, psi, x, h, kernel, g, cfg):
    """
    The band half-width L_n(x).

    Parameters
    ----------
    data : ipcwk.survival.Dataset
        The censored sample.
    psi : ipcwk.estimators.Transform
        The response transform.
    x : array-like
        The evaluation point, length d.
    h : float
        The bandwidth H_n(x).
    kernel : ipcwk.kernels.KernelSpec
        The kernel.
    g : ipcwk.estimators.GSpec
        The censoring distribution.
    cfg : ipcwk.bands.BandConfig
        Supplies theta and the region volume.

    Returns
    -------
    float
        L_n(x).

    Raises
    ------
    ipcwk.errors.ZeroDensityError
        If the design density estimate at x is not positive.
    """
    density = design_density(data, x, h, kernel)
    if not density > 0:
        raise ZeroDensityError(f"Design density estimate {density:g} at x={np.ravel(x).tolist()} is not positive.")
    variance = variance_estimate(data, psi, x, h, kernel, g)
    return float(
        halfwidth_from_plugins(data.n, h, data.d, variance, density, kernel, cfg.theta, cfg.volume)
    )


def confidence_band(data, psi, grid, kernel, g, cfg, n_jobs=1):
    """
    Estimates and simultaneous band limits over a grid.

    Parameters
    ----------
    data : ipcwk.survival.Dataset
        The censored sample.
    psi : ipcwk.estimators.Transform
        The response transform.
    grid : array-like
        Evaluation points inside the region, shape (m, d).
    kernel : ipcwk.kernels.KernelSpec
        The kernel.
    g : ipcwk.estimators.GSpec
        The censoring distribution.
    cfg : ipcwk.bands.BandConfig
        The band configuration.
    n_jobs : int
        Parallel workers over grid chunks.

    Returns
    -------
    ipcwk.bands.EstimateCurve
        The curve. Points with an empty window are flagged "empty_window", points with a nonpositive density estimate "zero_density".

    Raises
    ------
    ipcwk.errors.AllPointsMissingError
        If every grid point is missing.
    """
    points = np.asarray(grid, dtype=float)
    if points.ndim <= 1:
        points = points.reshape(-1, 1)
    if points.shape[0] == 0:
        raise ConfigError("The evaluation grid is empty.")
    if points.shape[1] != cfg.dim or points.shape[1] != data.d:
        raise DimensionMismatchError(
            f"Grid of dimension {points.shape[1]}, region of dimension {cfg.dim}, covariates of dimension {data.d}."
        )
    if not np.all(cfg.contains(points)):
        raise ConfigError("Every grid point must lie inside the band region.")
    bandwidths = cfg.bandwidth.resolve(points, data.n)
    responses = np.stack([ipcw_terms(data, psi, g), ipcw_terms(data, psi, g, power=2)], axis=1)
    totals, sums = kernel_sums(data, points, bandwidths, kernel, responses, n_jobs)
    valid = totals != 0
    moments = sums / np.where(valid, totals, 1.0)[:, None]
    estimates = moments[:, 0]
    variances = moments[:, 1] - estimates**2
    densities = totals / (data.n * bandwidths**data.d)
    positive = valid & (densities > 0)
    halfwidths = halfwidth_from_plugins(
        data.n,
        bandwidths,
        data.d,
        variances,
        np.where(positive, densities, 1.0),
        kernel,
        cfg.theta,
        cfg.volume,
    )
    curve = []
    for idx, point in enumerate(points):
        if not valid[idx]:
            flag = "empty_window"
        elif not positive[idx]:
            flag = "zero_density"
        else:
            flag = ""
        if flag:
            estimate = halfwidth = variance = np.nan
        else:
            estimate, halfwidth, variance = estimates[idx], halfwidths[idx], variances[idx]
        curve.append(
            BandPoint(
                tuple(point.tolist()),
                float(bandwidths[idx]),
                float(estimate),
                float(estimate - halfwidth),
                float(estimate + halfwidth),
                float(halfwidth),
                float(variance),
                flag,
            )
        )
    if not np.any(positive):
        raise AllPointsMissingError(
            f"All {len(points)} grid points are missing; the bandwidth is too small for this design."
        )
    return EstimateCurve(tuple(curve))
