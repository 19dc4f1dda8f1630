"""
Module for the inverse-probability-of-censoring-weighted kernel estimators.

Every estimator averages the terms delta_i * phi(Z_i) / (1 - G(Z_i)) with Nadaraya-Watson weights. Terms with delta_i = 0 contribute
nothing, and terms where 1 - G(Z_i) = 0 are dropped, following the convention 0/0 = 0.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Callable, NamedTuple, Optional

import numpy as np
from joblib import Parallel, delayed

from .errors import (
    ConfigError,
    DegenerateDenominatorError,
    DimensionMismatchError,
    EmptyWindowError,
    MonteCarloError,
)
from .survival import StepFunction

GRID_CHUNK_ENTRIES = 2**22
"""
Upper bound on the entries of the (rows, n, d) difference array built for one chunk of grid points.
"""


class TransformKind(str, Enum):
    """
    Kinds of response transforms psi.
    """

    IDENTITY = "identity"
    INDICATOR = "indicator"
    TABULATED = "tabulated"


@dataclass(frozen=True)
class Transform:
    """
    A response transform psi, whose conditional expectation is estimated.

    Attributes
    ----------
    kind : ipcwk.estimators.TransformKind
        The transform kind.
    threshold : float
        For INDICATOR transforms, psi(y) = 1{y <= threshold}.
    table : ipcwk.survival.StepFunction
        For TABULATED transforms, psi is this step function.
    upper_cutoff : float
        If set, psi is forced to 0 on (upper_cutoff, inf).
    scale : float
        A constant factor applied to psi.
    """

    kind: TransformKind = TransformKind.IDENTITY
    threshold: Optional[float] = None
    table: Optional[StepFunction] = None
    upper_cutoff: Optional[float] = None
    scale: float = 1.0

    def __post_init__(self):
        kind = TransformKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind == TransformKind.INDICATOR and self.threshold is None:
            raise ConfigError("An indicator transform needs a threshold.")
        if kind == TransformKind.TABULATED and self.table is None:
            raise ConfigError("A tabulated transform needs a table.")

    @classmethod
    def identity(cls, upper_cutoff=None):
        """
        Returns
        -------
        ipcwk.estimators.Transform
            psi(y) = y.
        """
        return cls(TransformKind.IDENTITY, upper_cutoff=upper_cutoff)

    @classmethod
    def indicator(cls, threshold, upper_cutoff=None):
        """
        Returns
        -------
        ipcwk.estimators.Transform
            psi(y) = 1{y <= threshold}.
        """
        return cls(TransformKind.INDICATOR, threshold=float(threshold), upper_cutoff=upper_cutoff)

    @classmethod
    def tabulated(cls, table, upper_cutoff=None):
        """
        Returns
        -------
        ipcwk.estimators.Transform
            psi given by a step function.
        """
        return cls(TransformKind.TABULATED, table=table, upper_cutoff=upper_cutoff)

    @classmethod
    def parse(cls, text, upper_cutoff=None):
        """
        Parses the command line form of a transform.

        Parameters
        ----------
        text : str
            "identity" or "indicator:<t>".
        upper_cutoff : float, optional
            The cutoff tau_0.

        Returns
        -------
        ipcwk.estimators.Transform
            The transform.
        """
        text = text.strip().lower()
        if text == "identity":
            return cls.identity(upper_cutoff)
        if text.startswith("indicator:"):
            try:
                return cls.indicator(float(text.split(":", 1)[1]), upper_cutoff)
            except ValueError as error:
                raise ConfigError(f"Bad indicator threshold in {text!r}.") from error
        raise ConfigError(f"Unknown transform {text!r}, expected identity or indicator:<t>.")

    def scaled(self, factor):
        """
        Returns
        -------
        ipcwk.estimators.Transform
            The transform multiplied by factor.
        """
        return Transform(self.kind, self.threshold, self.table, self.upper_cutoff, self.scale * factor)

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        if self.kind == TransformKind.IDENTITY:
            values = y.copy()
        elif self.kind == TransformKind.INDICATOR:
            values = (y <= self.threshold).astype(float)
        else:
            values = np.asarray(self.table(y), dtype=float)
        if self.upper_cutoff is not None:
            values = np.where(y > self.upper_cutoff, 0.0, values)
        return self.scale * values

    def describe(self):
        """
        Returns
        -------
        str
            The command line form of the transform.
        """
        if self.kind == TransformKind.INDICATOR:
            return f"indicator:{self.threshold!r}"
        return self.kind.value


class GMode(str, Enum):
    """
    How the censoring distribution G is obtained.
    """

    KNOWN = "known"
    KAPLAN_MEIER = "kaplan-meier"


@dataclass(frozen=True)
class GSpec:
    """
    The censoring distribution used in the weights 1 / (1 - G(Z_i)).

    Attributes
    ----------
    mode : ipcwk.estimators.GMode
        Whether G is known or estimated by Kaplan-Meier.
    function : callable
        For KNOWN mode, the distribution function G, vectorised (a StepFunction or a closed form).
    """

    mode: GMode = GMode.KAPLAN_MEIER
    function: Optional[Callable] = None

    def __post_init__(self):
        object.__setattr__(self, "mode", GMode(self.mode))
        if self.mode == GMode.KNOWN and self.function is None:
            raise ConfigError("A known censoring distribution needs a function.")

    @classmethod
    def known(cls, function):
        """
        Returns
        -------
        ipcwk.estimators.GSpec
            A known censoring distribution.
        """
        return cls(GMode.KNOWN, function)

    @classmethod
    def kaplan_meier(cls):
        """
        Returns
        -------
        ipcwk.estimators.GSpec
            The plug-in Kaplan-Meier censoring distribution.
        """
        return cls(GMode.KAPLAN_MEIER)

    def resolve(self, data):
        """
        Parameters
        ----------
        data : ipcwk.survival.Dataset
            The censored sample.

        Returns
        -------
        callable
            G, either the known function or the memoised G*_n of the dataset.
        """
        if self.mode == GMode.KNOWN:
            return self.function
        return data.censoring_km


def ipcw_terms(data, psi, g, power=1):
    """
    The inverse-probability-of-censoring-weighted responses delta_i * psi(Z_i)^power / (1 - G(Z_i))^power.

    Parameters
    ----------
    data : ipcwk.survival.Dataset
        The censored sample.
    psi : callable
        The response transform.
    g : ipcwk.estimators.GSpec
        The censoring distribution.
    power : int
        1 for the estimators, 2 for the variance plug-in.

    Returns
    -------
    numpy.ndarray
        The terms, shape (n,), zero where delta_i = 0 or 1 - G(Z_i) = 0.
    """
    survival = 1.0 - np.asarray(g.resolve(data)(data.z), dtype=float)
    usable = (data.delta == 1) & (survival > 0)
    safe = np.where(usable, survival, 1.0)
    return np.where(usable, (np.asarray(psi(data.z), dtype=float) / safe) ** power, 0.0)


def _as_point(x, dim):
    point = np.atleast_1d(np.asarray(x, dtype=float))
    if point.shape != (dim,):
        raise DimensionMismatchError(f"Expected a point of dimension {dim}, got shape {point.shape}.")
    return point


def _grid_and_bandwidths(data, grid, h, kernel):
    if kernel.dim != data.d:
        raise DimensionMismatchError(
            f"Kernel of dimension {kernel.dim} used on covariates of dimension {data.d}."
        )
    points = np.asarray(grid, dtype=float)
    if data.d == 1 and points.ndim <= 1:
        points = points.reshape(-1, 1)
    if points.ndim != 2 or points.shape[1] != data.d:
        raise DimensionMismatchError(
            f"Expected points of dimension {data.d}, got shape {np.shape(grid)}."
        )
    bandwidths = np.broadcast_to(np.asarray(h, dtype=float), (points.shape[0],))
    if np.any(~(bandwidths > 0)):
        raise ConfigError("Bandwidths must be positive.")
    return points, bandwidths


def kernel_matrix(data, grid, h, kernel):
    """
    Kernel values K((x - X_i) / h) for every grid point x and observation i.

    Parameters
    ----------
    data : ipcwk.survival.Dataset
        The censored sample.
    grid : array-like
        Evaluation points, shape (m, d). For d = 1 a flat array of length m is accepted.
    h : float or array-like
        A bandwidth, or one bandwidth per grid point.
    kernel : ipcwk.kernels.KernelSpec
        The kernel.

    Returns
    -------
    numpy.ndarray
        Shape (m, n).
    """
    points, bandwidths = _grid_and_bandwidths(data, grid, h, kernel)
    scaled = (points[:, None, :] - data.x[None, :, :]) / bandwidths[:, None, None]
    return kernel.evaluate(scaled)


def _kernel_chunk(data, points, bandwidths, kernel, responses):
    values = kernel_matrix(data, points, bandwidths, kernel)
    return values.sum(axis=1), values @ responses


def kernel_sums(data, grid, h, kernel, responses, n_jobs=1):
    """
    Row sums of the kernel matrix and kernel weighted sums of responses, evaluated over chunks of grid points so the full
    (m, n) matrix is never held at once.

    Parameters
    ----------
    data : ipcwk.survival.Dataset
        The censored sample.
    grid : array-like
        Evaluation points, shape (m, d).
    h : float or array-like
        A bandwidth, or one bandwidth per grid point.
    kernel : ipcwk.kernels.KernelSpec
        The kernel.
    responses : array-like
        Per-observation values, shape (n,) or (n, k).
    n_jobs : int
        Parallel workers over chunks.

    Returns
    -------
    tuple(numpy.ndarray, numpy.ndarray)
        The row sums, shape (m,), and the weighted sums, shape (m,) or (m, k).
    """
    points, bandwidths = _grid_and_bandwidths(data, grid, h, kernel)
    responses = np.asarray(responses, dtype=float)
    if responses.shape[0] != data.n:
        raise DimensionMismatchError(f"Expected {data.n} responses, got {responses.shape[0]}.")
    rows = max(1, GRID_CHUNK_ENTRIES // max(data.n * data.d, 1))
    starts = range(0, points.shape[0], rows)
    parts = Parallel(n_jobs=n_jobs if len(starts) > 1 else 1)(
        delayed(_kernel_chunk)(data, points[start : start + rows], bandwidths[start : start + rows], kernel, responses)
        for start in starts
    )
    if not parts:
        return np.zeros(0), np.zeros((0,) + responses.shape[1:])
    return np.concatenate([totals for totals, _ in parts]), np.concatenate([sums for _, sums in parts])


def weight_matrix(data, grid, h, kernel):
    """
    Nadaraya-Watson weights for every grid point, without raising on empty windows.

    Parameters
    ----------
    data : ipcwk.survival.Dataset
        The censored sample.
    grid : array-like
        Evaluation points, shape (m, d).
    h : float or array-like
        A bandwidth, or one bandwidth per grid point.
    kernel : ipcwk.kernels.KernelSpec
        The kernel.

    Returns
    -------
    tuple(numpy.ndarray, numpy.ndarray, numpy.ndarray)
        The weights of shape (m, n) (rows of empty windows are zero), the validity mask of shape (m,) and the row sums of the kernel
        matrix of shape (m,).
    """
    values = kernel_matrix(data, grid, h, kernel)
    totals = values.sum(axis=1)
    valid = totals != 0
    safe = np.where(valid, totals, 1.0)
    weights = np.where(valid[:, None], values / safe[:, None], 0.0)
    return weights, valid, totals


def nw_weights(data, x, h, kernel):
    """
    Nadaraya-Watson weights at a single point.

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
    numpy.ndarray
        The weights, shape (n,), summing to one.

    Raises
    ------
    ipcwk.errors.EmptyWindowError
        If no covariate lies within h * support_radius of x.
    """
    point = _as_point(x, data.d)
    weights, valid, _ = weight_matrix(data, point[None, :], h, kernel)
    if not valid[0]:
        raise EmptyWindowError(
            f"No covariate within {h * kernel.support_radius:g} of x={point.tolist()}; the bandwidth is too small there."
        )
    return weights[0]


def ipcw_regression(data, psi, x, h, kernel, g):
    """
    Estimates m_psi(x) = E[psi(Y) | X = x].

    With a known G this is the estimator with true censoring weights, with the Kaplan-Meier mode it is the plug-in estimator.

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
        The estimate.
    """
    weights = nw_weights(data, x, h, kernel)
    return float(weights @ ipcw_terms(data, psi, g))


def regression_curve(data, psi, grid, h, kernel, g, n_jobs=1):
    """
    Evaluates ipcw_regression over a grid, reporting empty windows as NaN.

    Parameters
    ----------
    data : ipcwk.survival.Dataset
        The censored sample.
    psi : ipcwk.estimators.Transform
        The response transform.
    grid : array-like
        Evaluation points, shape (m, d).
    h : float or array-like
        A bandwidth, or one bandwidth per grid point.
    kernel : ipcwk.kernels.KernelSpec
        The kernel.
    g : ipcwk.estimators.GSpec
        The censoring distribution.
    n_jobs : int
        Parallel workers over grid chunks.

    Returns
    -------
    numpy.ndarray
        The estimates, shape (m,).
    """
    totals, sums = kernel_sums(data, grid, h, kernel, ipcw_terms(data, psi, g), n_jobs)
    valid = totals != 0
    return np.where(valid, sums / np.where(valid, totals, 1.0), np.nan)


def centering_term_mc(h, x, psi, kernel, generator, mc_size, seed):
    """
    Monte Carlo estimate of E[psi(Y) K((x - X) / h)] / E[K((x - X) / h)] under the true law of a simulation design.

    Parameters
    ----------
    h : float
        The bandwidth.
    x : array-like
        The evaluation point, length d.
    psi : ipcwk.estimators.Transform
        The response transform.
    kernel : ipcwk.kernels.KernelSpec
        The kernel.
    generator : ipcwk.simulation.Design
        The simulation design providing the latent law of (X, Y).
    mc_size : int
        The number of draws, at least 10^4.
    seed : int
        Seed of the draws.

    Returns
    -------
    float
        The centering term.

    Raises
    ------
    ipcwk.errors.MonteCarloError
        If the Monte Carlo denominator is not positive.
    """
    if mc_size < 10**4:
        raise ConfigError(f"The centering term needs at least 10^4 draws, got {mc_size}.")
    point = _as_point(x, kernel.dim)
    rng = np.random.Generator(np.random.PCG64(seed))
    covariates, responses, _ = generator.sample_latent(int(mc_size), rng)
    values = kernel.evaluate((point[None, :] - covariates) / h)
    denominator = values.mean()
    if not denominator > 0:
        raise MonteCarloError(
            f"Monte Carlo kernel mass is {denominator:g} at x={point.tolist()}, h={h:g}; increase mc_size or h."
        )
    return float(np.mean(psi(responses) * values) / denominator)


class ClampedValue(NamedTuple):
    """
    An estimate clamped to [0, 1], along with the raw value.
    """

    value: float
    raw: float


def conditional_cdf(data, t, x, h, kernel, g):
    """
    Estimates F(t; x) = P(Y <= t | X = x).

    Parameters
    ----------
    data : ipcwk.survival.Dataset
        The censored sample.
    t : float
        The response level.
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
    ipcwk.estimators.ClampedValue
        The estimate clamped to [0, 1] and the raw sum.
    """
    raw = ipcw_regression(data, Transform.indicator(t), x, h, kernel, g)
    return ClampedValue(min(max(raw, 0.0), 1.0), raw)


class _WindowIndicator:
    def __init__(self, lower, upper):
        self.lower = lower
        self.upper = upper

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        return ((y >= self.lower) & (y <= self.upper)).astype(float)


def conditional_density(data, t, x, h, ell, kernel, g):
    """
    Estimates the conditional density f(t; x), smoothing over the response window [t - ell/2, t + ell/2].

    Parameters
    ----------
    data : ipcwk.survival.Dataset
        The censored sample.
    t : float
        The response level.
    x : array-like
        The evaluation point, length d.
    h : float
        The covariate bandwidth.
    ell : float
        The response bandwidth.
    kernel : ipcwk.kernels.KernelSpec
        The kernel.
    g : ipcwk.estimators.GSpec
        The censoring distribution.

    Returns
    -------
    float
        The estimate.
    """
    if not ell > 0:
        raise ConfigError(f"The response bandwidth must be positive, got {ell!r}.")
    window = _WindowIndicator(t - ell / 2.0, t + ell / 2.0)
    weights = nw_weights(data, x, h, kernel)
    return float(weights @ ipcw_terms(data, window, g)) / ell


def conditional_hazard(data, t, x, h, ell, kernel, g, guard=1e-10):
    """
    Estimates the conditional hazard rate f(t; x) / (1 - F(t; x)).

    Parameters
    ----------
    data : ipcwk.survival.Dataset
        The censored sample.
    t : float
        The response level.
    x : array-like
        The evaluation point, length d.
    h : float
        The covariate bandwidth.
    ell : float
        The response bandwidth.
    kernel : ipcwk.kernels.KernelSpec
        The kernel.
    g : ipcwk.estimators.GSpec
        The censoring distribution.
    guard : float
        Minimal distance of the raw conditional distribution function estimate from one.

    Returns
    -------
    float
        The estimate.

    Raises
    ------
    ipcwk.errors.DegenerateDenominatorError
        If the conditional distribution function estimate is at least 1 - guard.
    """
    cdf = conditional_cdf(data, t, x, h, kernel, g).raw
    if cdf >= 1.0 - guard:
        raise DegenerateDenominatorError(
            f"Conditional distribution estimate {cdf:.12g} at t={t:g} is too close to 1; t is too deep in the tail."
        )
    density = conditional_density(data, t, x, h, ell, kernel, g)
    return density / (1.0 - cdf)


def bandwidth_grid(lo, hi, steps):
    """
    Equally spaced bandwidths, as given by the --h-grid lo:hi:steps flag.

    Parameters
    ----------
    lo : float
        The smallest bandwidth.
    hi : float
        The largest bandwidth.
    steps : int
        The number of bandwidths.

    Returns
    -------
    numpy.ndarray
        The bandwidths.
    """
    if not 0 < lo <= hi or steps < 1:
        raise ConfigError(f"Invalid bandwidth grid {lo}:{hi}:{steps}.")
    if steps == 1:
        return np.array([float(lo)])
    return np.linspace(lo, hi, int(steps))


def power_law_bandwidth(n, scale, delta0):
    """
    The deterministic bandwidth h_n = A n^(-delta0).

    Parameters
    ----------
    n : int
        The sample size.
    scale : float
        The constant A > 0.
    delta0 : float
        The exponent.

    Returns
    -------
    float
        h_n.
    """
    if not scale > 0:
        raise ConfigError(f"The bandwidth constant must be positive, got {scale!r}.")
    return float(scale * n ** (-delta0))
