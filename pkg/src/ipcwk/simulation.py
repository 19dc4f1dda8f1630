"""
Module for simulation designs and seeded Monte Carlo studies.

Replication r of a study with seed s draws from numpy's PCG64 generator seeded with SeedSequence(entropy=s, spawn_key=(r,)). Results
therefore do not depend on execution order or on the number of workers.
"""

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Optional, Tuple

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from scipy import integrate, stats

from .bands import BandConfig, band_halfwidth, confidence_band
from .common import Common
from .errors import ConfigError, DimensionMismatchError, NumericError
from .estimators import GMode, GSpec, Transform, regression_curve
from .kernels import KernelSpec
from .survival import Dataset
from .version import VERSION

RNG_ALGORITHM = "PCG64"
SEED_SCHEME = "SeedSequence(entropy=seed, spawn_key=(replication,))"
QUANTILES = (5, 25, 50, 75, 95)


def default_x_grid(steps=201):
    """
    Returns
    -------
    numpy.ndarray
        steps equally spaced points on [-1, 1].
    """
    return np.linspace(-1.0, 1.0, int(steps))


def uniform_cdf(u):
    """
    Distribution function of U(0, 1), the censoring law of the cosine design.

    Parameters
    ----------
    u : float or array-like
        Evaluation points.

    Returns
    -------
    float or numpy.ndarray
        min(max(u, 0), 1).
    """
    result = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
    return float(result) if np.ndim(u) == 0 else result


class Design(ABC):
    """
    A simulation design: the joint law of (X, Y, C) and the population functionals needed by the studies.
    """

    dim = 1

    @abstractmethod
    def sample_latent(self, size, rng):
        """
        Draws the latent variables.

        Parameters
        ----------
        size : int
            The number of draws.
        rng : numpy.random.Generator
            The random generator.

        Returns
        -------
        tuple(numpy.ndarray, numpy.ndarray, numpy.ndarray)
            Covariates of shape (size, d), responses Y and censoring times C of shape (size,).
        """

    @abstractmethod
    def true_regression(self, x):
        """
        The regression function m_psi(x) of the design's transform.
        """

    @abstractmethod
    def censoring_cdf(self, u):
        """
        The censoring distribution G.
        """

    @abstractmethod
    def covariate_density(self, x):
        """
        The covariate density f_X.
        """

    @abstractmethod
    def conditional_variance(self, x):
        """
        The population conditional variance sigma_psi^2(x) = E[psi(Y)^2 / (1 - G(Y)) | X = x] - m_psi(x)^2.
        """

    @abstractmethod
    def psi(self):
        """
        Returns
        -------
        ipcwk.estimators.Transform
            The transform whose regression the design targets.
        """

    @abstractmethod
    def describe(self):
        """
        Returns
        -------
        str
            A short description for provenance metadata.
        """

    def centering_term(self, h, x, kernel):
        """
        The centering E[psi(Y) K((x - X) / h)] / E[K((x - X) / h)], by adaptive quadrature over the kernel window.

        Parameters
        ----------
        h : float
            The bandwidth.
        x : float
            The evaluation point.
        kernel : ipcwk.kernels.KernelSpec
            A one dimensional kernel.

        Returns
        -------
        float
            The centering term.
        """
        if kernel.dim != 1:
            raise DimensionMismatchError("Closed form centering terms are only available for d = 1.")
        x = float(np.ravel(x)[0])
        lo, hi = x - h * kernel.support_radius, x + h * kernel.support_radius

        def weight(u):
            return float(kernel.evaluate(np.array([(x - u) / h]))) * float(self.covariate_density(u))

        numerator, _ = integrate.quad(
            lambda u: float(self.true_regression(u)) * weight(u), lo, hi, points=[x], limit=200
        )
        denominator, _ = integrate.quad(weight, lo, hi, points=[x], limit=200)
        if not denominator > 0:
            raise NumericError(f"No covariate mass in the window of x={x:g}, h={h:g}.")
        return numerator / denominator


@dataclass(frozen=True)
class CosineDesign(Design):
    """
    X ~ N(0, 1), Y | X ~ U(0.9 - p(X), 1.9 - p(X)) with p(x) = 0.25 + 0.5 cos^2(x), C ~ U(0, 1) independent of (X, Y).

    With psi(y) = 1{y <= 0.9}, m_psi = p and about 20% of the observations are uncensored.

    Attributes
    ----------
    threshold : float
        The level t of psi(y) = 1{y <= t}, below 1.
    """

    threshold: float = 0.9

    def __post_init__(self):
        if not self.threshold < 1:
            raise ConfigError(
                f"The transform threshold must be below 1, the censoring support end, got {self.threshold!r}."
            )

    @staticmethod
    def p(x):
        """
        Returns
        -------
        float or numpy.ndarray
            0.25 + 0.5 cos^2(x).
        """
        return 0.25 + 0.5 * np.cos(x) ** 2

    def _lower(self, x):
        return 0.9 - self.p(np.asarray(x, dtype=float))

    def sample_latent(self, size, rng):
        covariates = rng.standard_normal(size)
        uniforms = rng.random(size)
        censoring = rng.random(size)
        responses = 0.9 - self.p(covariates) + uniforms
        return covariates.reshape(-1, 1), responses, censoring

    def true_regression(self, x):
        result = np.clip(self.threshold - self._lower(x), 0.0, 1.0)
        return float(result) if np.ndim(x) == 0 else result

    def censoring_cdf(self, u):
        return uniform_cdf(u)

    def covariate_density(self, x):
        result = stats.norm.pdf(np.asarray(x, dtype=float))
        return float(result) if np.ndim(x) == 0 else result

    def conditional_variance(self, x):
        lower = self._lower(x)
        upper = np.minimum(self.threshold, lower + 1.0)
        second = np.where(upper > lower, np.log((1.0 - lower) / (1.0 - np.maximum(upper, lower))), 0.0)
        result = second - np.clip(self.threshold - lower, 0.0, 1.0) ** 2
        return float(result) if np.ndim(x) == 0 else result

    def psi(self):
        return Transform.indicator(self.threshold)

    def describe(self):
        return f"cosine(threshold={self.threshold!r})"


@dataclass(frozen=True, eq=False)
class TabulatedTruth(Design):
    """
    A design whose regression function is a user supplied table, linearly interpolated. Sampling and the laws of X and C come from
    the base design.

    Attributes
    ----------
    x : numpy.ndarray
        Increasing tabulated points.
    values : numpy.ndarray
        The regression function at the tabulated points.
    base : ipcwk.simulation.Design
        The design generating the data.
    source : str
        Where the table was read from.
    """

    x: np.ndarray
    values: np.ndarray
    base: Design = field(default_factory=CosineDesign)
    source: str = "<memory>"

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if x.ndim != 1 or x.shape != values.shape or len(x) < 1:
            raise ConfigError("A truth table needs one value per tabulated point.")
        order = np.argsort(x, kind="stable")
        object.__setattr__(self, "x", x[order])
        object.__setattr__(self, "values", values[order])

    def sample_latent(self, size, rng):
        return self.base.sample_latent(size, rng)

    def true_regression(self, x):
        result = np.interp(np.asarray(x, dtype=float), self.x, self.values)
        return float(result) if np.ndim(x) == 0 else result

    def censoring_cdf(self, u):
        return self.base.censoring_cdf(u)

    def covariate_density(self, x):
        return self.base.covariate_density(x)

    def conditional_variance(self, x):
        raise ConfigError(f"No conditional variance is known for the tabulated truth {self.source}.")

    def psi(self):
        return self.base.psi()

    def describe(self):
        return f"table:{self.source} over {self.base.describe()}"


def true_regression(x):
    """
    The regression function p(x) = 0.25 + 0.5 cos^2(x) of the cosine design.

    Parameters
    ----------
    x : float or array-like
        Evaluation points.

    Returns
    -------
    float or numpy.ndarray
        p(x).
    """
    return CosineDesign().true_regression(x)


@dataclass(frozen=True)
class SimConfig:
    """
    Parameters of a simulated sample.

    Attributes
    ----------
    n : int
        The sample size.
    seed : int
        The master seed, a nonnegative 64-bit integer.
    psi_threshold : float
        The level of psi(y) = 1{y <= t} for the default cosine design.
    design : ipcwk.simulation.Design
        The design. Defaults to CosineDesign(psi_threshold).
    kernel : ipcwk.kernels.KernelSpec
        The kernel of the estimators.
    g_mode : ipcwk.estimators.GMode
        Kaplan-Meier weights, or the design's known censoring law.
    stream : int
        The replication counter selecting the random stream.
    """

    n: int
    seed: int = 0
    psi_threshold: float = 0.9
    design: Optional[Design] = None
    kernel: KernelSpec = field(default_factory=KernelSpec)
    g_mode: GMode = GMode.KAPLAN_MEIER
    stream: int = 0

    def __post_init__(self):
        if int(self.n) < 1:
            raise ConfigError(f"The sample size must be positive, got {self.n!r}.")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError(f"The seed must be a 64-bit nonnegative integer, got {self.seed!r}.")
        if self.design is None:
            object.__setattr__(self, "design", CosineDesign(self.psi_threshold))
        object.__setattr__(self, "g_mode", GMode(self.g_mode))
        if self.kernel.dim != self.design.dim:
            raise DimensionMismatchError(
                f"Kernel of dimension {self.kernel.dim} for a design of dimension {self.design.dim}."
            )

    def for_replication(self, replication):
        """
        Returns
        -------
        ipcwk.simulation.SimConfig
            The configuration of replication number replication.
        """
        return replace(self, stream=int(replication))

    def rng(self):
        """
        Returns
        -------
        numpy.random.Generator
            The generator of this configuration's stream.
        """
        sequence = np.random.SeedSequence(entropy=int(self.seed), spawn_key=(int(self.stream),))
        return np.random.Generator(np.random.PCG64(sequence))

    @property
    def psi(self):
        """
        Returns
        -------
        ipcwk.estimators.Transform
            The design's transform.
        """
        return self.design.psi()

    @property
    def gspec(self):
        """
        Returns
        -------
        ipcwk.estimators.GSpec
            The censoring distribution used by the estimators.
        """
        if self.g_mode == GMode.KNOWN:
            return GSpec.known(self.design.censoring_cdf)
        return GSpec.kaplan_meier()

    def as_dict(self):
        """
        Returns
        -------
        dict
            A JSON-able description for provenance metadata.
        """
        return {
            "n": int(self.n),
            "seed": int(self.seed),
            "psi": self.psi.describe(),
            "design": self.design.describe(),
            "kernel": self.kernel.describe(),
            "g_mode": self.g_mode.value,
        }


def generate_sample(cfg):
    """
    Draws a censored sample.

    Parameters
    ----------
    cfg : ipcwk.simulation.SimConfig
        The sample parameters, including the stream.

    Returns
    -------
    ipcwk.survival.Dataset
        Z_i = min(Y_i, C_i), delta_i = 1{Y_i <= C_i} and X_i. Identical for identical configurations.
    """
    covariates, responses, censoring = cfg.design.sample_latent(int(cfg.n), cfg.rng())
    return Dataset(np.minimum(responses, censoring), (responses <= censoring).astype(np.int8), covariates)


def limit_constant(design, kernel, region=((-1.0, 1.0),), steps=2001):
    """
    The constant R = sqrt(int K^2 * sup_{x in I} sigma_psi^2(x) / f_X(x)), the almost sure limit of the normalized sup-deviation.

    Parameters
    ----------
    design : ipcwk.simulation.Design
        The design providing sigma_psi^2 and f_X in closed form.
    kernel : ipcwk.kernels.KernelSpec
        The kernel.
    region : tuple(tuple(float, float))
        The interval I.
    steps : int
        Resolution of the grid on which the supremum is taken.

    Returns
    -------
    float
        R.
    """
    if len(region) != 1:
        raise DimensionMismatchError("The limit constant is only available for d = 1.")
    (lo, hi), = region
    grid = np.linspace(lo, hi, int(steps))
    ratio = np.asarray(design.conditional_variance(grid)) / np.asarray(design.covariate_density(grid))
    return float(math.sqrt(kernel.squared_norm * float(np.max(ratio))))


class Epsilon1Record(NamedTuple):
    """
    One replication of the worst-point coverage gap study.
    """

    replication: int
    censoring_rate: float
    x0: float
    estimate: float
    truth: float
    halfwidth: float
    epsilon1: float
    failed: bool


class CoverageRecord(NamedTuple):
    """
    One replication of the simultaneous coverage study.
    """

    replication: int
    censoring_rate: float
    covered: bool
    covered_nominal: bool
    sup_error: float
    missing: int
    failed: bool


class DeviationRecord(NamedTuple):
    """
    One replication of the uniform-in-bandwidth deviation study.
    """

    replication: int
    censoring_rate: float
    sup_error: float
    d_n: float
    ratio: float
    failed: bool


@dataclass(frozen=True)
class SimReport:
    """
    The outcome of a Monte Carlo study.

    Attributes
    ----------
    kind : str
        "epsilon1", "coverage" or "deviation".
    config : dict
        The study parameters.
    records : tuple
        One record per replication, in replication order.
    point_coverage : numpy.ndarray
        For coverage studies, the per grid point coverage fraction.
    """

    kind: str
    config: dict
    records: Tuple[NamedTuple, ...]
    point_coverage: Optional[np.ndarray] = None

    @property
    def replications(self):
        return len(self.records)

    @property
    def failed(self):
        return sum(1 for record in self.records if record.failed)

    def to_frame(self):
        """
        Returns
        -------
        pandas.DataFrame
            One row per replication.
        """
        return pd.DataFrame([record._asdict() for record in self.records])

    def values(self, column):
        """
        Parameters
        ----------
        column : str
            A record field.

        Returns
        -------
        numpy.ndarray
            The column over the replications which did not fail.
        """
        return np.array([getattr(record, column) for record in self.records if not record.failed], dtype=float)

    def quantiles(self, column):
        """
        Parameters
        ----------
        column : str
            A numeric record field.

        Returns
        -------
        dict
            The 5, 25, 50, 75 and 95% quantiles, keyed "q5".."q95". NaN if every replication failed.
        """
        values = self.values(column)
        if len(values) == 0:
            return {f"q{q}": math.nan for q in QUANTILES}
        return {f"q{q}": float(v) for q, v in zip(QUANTILES, np.percentile(values, QUANTILES))}

    def coverage(self, column="covered"):
        """
        Returns
        -------
        float
            The fraction of replications in which the band covered the truth everywhere. Failed replications count as not covered.
        """
        return float(np.mean([bool(getattr(record, column)) for record in self.records]))

    def summary(self):
        """
        Returns
        -------
        dict
            JSON-able summary of the study, with provenance.
        """
        summary = {
            "kind": self.kind,
            "replications": self.replications,
            "failed": self.failed,
            "censoring_rate": float(np.mean([record.censoring_rate for record in self.records])),
            "config": self.config,
            "provenance": provenance(),
        }
        if self.kind == "epsilon1":
            summary["epsilon1"] = self.quantiles("epsilon1")
            summary["median_abs_epsilon1"] = float(np.median(np.abs(self.values("epsilon1"))))
        elif self.kind == "coverage":
            summary["coverage"] = self.coverage()
            summary["coverage_nominal"] = self.coverage("covered_nominal")
            summary["sup_error"] = self.quantiles("sup_error")
            summary["point_coverage"] = [float(v) for v in self.point_coverage]
        else:
            summary["sup_error"] = self.quantiles("sup_error")
            summary["ratio"] = self.quantiles("ratio")
        return summary


def provenance():
    """
    Returns
    -------
    dict
        Library version, random generator algorithm and version, and the seed scheme.
    """
    return {
        "library_version": VERSION,
        "rng": RNG_ALGORITHM,
        "numpy_version": np.__version__,
        "seed_scheme": SEED_SCHEME,
    }


def _grid_errors(cfg, data, grid, h):
    estimates = regression_curve(data, cfg.psi, grid, h, cfg.kernel, cfg.gspec)
    valid = ~np.isnan(estimates)
    truth = np.asarray(cfg.design.true_regression(grid[:, 0]), dtype=float)
    return estimates, truth, valid


def _epsilon1_replication(cfg, replication, h, grid, band_cfg):
    cfg = cfg.for_replication(replication)
    data = generate_sample(cfg)
    estimates, truth, valid = _grid_errors(cfg, data, grid, h)
    if not np.any(valid):
        return Epsilon1Record(replication, data.censoring_rate, *([math.nan] * 5), True)
    errors = np.where(valid, np.abs(estimates - truth), -np.inf)
    worst = np.flatnonzero(errors == errors.max())
    idx = worst[np.argmin(grid[worst, 0])]
    try:
        halfwidth = band_halfwidth(data, cfg.psi, grid[idx], h, cfg.kernel, cfg.gspec, band_cfg)
    except NumericError:
        return Epsilon1Record(replication, data.censoring_rate, *([math.nan] * 5), True)
    estimate, value = float(estimates[idx]), float(truth[idx])
    return Epsilon1Record(
        replication,
        data.censoring_rate,
        float(grid[idx, 0]),
        estimate,
        value,
        halfwidth,
        abs(estimate - value) - halfwidth,
        False,
    )


def _coverage_replication(cfg, replication, band_cfg, grid, inflation):
    cfg = cfg.for_replication(replication)
    data = generate_sample(cfg)
    try:
        curve = confidence_band(data, cfg.psi, grid, cfg.kernel, cfg.gspec, band_cfg)
    except NumericError:
        return CoverageRecord(replication, data.censoring_rate, False, False, math.nan, len(grid), True), np.zeros(
            len(grid), dtype=bool
        )
    truth = np.asarray(cfg.design.true_regression(grid[:, 0]), dtype=float)
    valid = curve.valid
    errors = np.abs(curve.estimates - truth)
    if math.isinf(inflation):
        points = valid.copy()
    else:
        points = valid & (errors <= inflation * curve.halfwidths)
    nominal = valid & (errors <= curve.halfwidths)
    record = CoverageRecord(
        replication,
        data.censoring_rate,
        bool(np.all(points)),
        bool(np.all(nominal)),
        float(np.max(errors[valid])),
        int(np.count_nonzero(~valid)),
        False,
    )
    return record, points


def _deviation_replication(cfg, replication, h_grid, grid, centering, constant):
    cfg = cfg.for_replication(replication)
    data = generate_sample(cfg)
    sup_error = 0.0
    d_n = 0.0
    seen = False
    truth = np.asarray(cfg.design.true_regression(grid[:, 0]), dtype=float)
    for k, h in enumerate(h_grid):
        estimates = regression_curve(data, cfg.psi, grid, h, cfg.kernel, cfg.gspec)
        valid = ~np.isnan(estimates)
        if not np.any(valid):
            continue
        seen = True
        h_d = h**data.d
        scale = math.sqrt(data.n * h_d) / math.sqrt(2.0 * math.log(1.0 / h_d))
        sup_error = max(sup_error, float(np.max(np.abs(estimates - truth)[valid])))
        d_n = max(d_n, scale * float(np.max(np.abs(estimates - centering[k])[valid])))
    if not seen:
        return DeviationRecord(replication, data.censoring_rate, math.nan, math.nan, math.nan, True)
    return DeviationRecord(replication, data.censoring_rate, sup_error, d_n, d_n / constant, False)


def _run(function, replications, n_jobs, *args):
    if int(replications) < 1:
        raise ConfigError(f"At least one replication is needed, got {replications!r}.")
    workers = n_jobs if n_jobs is not None else Common.threads()
    return Parallel(n_jobs=workers)(delayed(function)(*args[:1], r, *args[1:]) for r in range(int(replications)))


def _as_grid(x_grid):
    grid = default_x_grid() if x_grid is None else np.asarray(x_grid, dtype=float)
    grid = grid.reshape(-1, 1) if grid.ndim <= 1 else grid
    if grid.shape[0] == 0:
        raise ConfigError("The evaluation grid is empty.")
    return grid


def _report_failures(report):
    if report.failed:
        Common.warning(
            f"{report.failed} of {report.replications} replications failed, every grid point had an empty window.",
            "Failed replications",
            "Simulation",
            subcategory=report.kind,
            n=report.config.get("n"),
        )
    return report


def epsilon1_study(cfg, h, replications, x_grid=None, band_cfg=None, n_jobs=None):
    """
    The worst-point coverage gap epsilon_1(h, n) = |m*(x0) - m(x0)| - L_n(x0), where x0 maximizes the absolute error over the grid.
    Ties go to the smallest x.

    Parameters
    ----------
    cfg : ipcwk.simulation.SimConfig
        The sample parameters.
    h : float
        The bandwidth.
    replications : int
        The number of replications.
    x_grid : array-like, optional
        The grid, 201 points on [-1, 1] by default.
    band_cfg : ipcwk.bands.BandConfig, optional
        Supplies theta and the region volume. The band bandwidth rule is not used, h is.
    n_jobs : int, optional
        Parallel workers. Defaults to Common.threads().

    Returns
    -------
    ipcwk.simulation.SimReport
        The per-replication records.
    """
    grid = _as_grid(x_grid)
    band_cfg = band_cfg or BandConfig()
    records = _run(_epsilon1_replication, replications, n_jobs, cfg, float(h), grid, band_cfg)
    config = {**cfg.as_dict(), "h": float(h), "replications": int(replications), "theta": band_cfg.theta}
    return _report_failures(SimReport("epsilon1", config, tuple(records)))


def coverage_study(cfg, band_cfg, replications, x_grid=None, inflation=1.0, n_jobs=None):
    """
    Simultaneous coverage of the bands with half-width inflation * L_n(x).

    Parameters
    ----------
    cfg : ipcwk.simulation.SimConfig
        The sample parameters.
    band_cfg : ipcwk.bands.BandConfig
        The band configuration.
    replications : int
        The number of replications.
    x_grid : array-like, optional
        The grid, 201 points on [-1, 1] by default.
    inflation : float
        The nonnegative inflation factor, infinity accepted.
    n_jobs : int, optional
        Parallel workers. Defaults to Common.threads().

    Returns
    -------
    ipcwk.simulation.SimReport
        The per-replication records and the per-point coverage. Missing points count as not covered.
    """
    if not inflation >= 0:
        raise ConfigError(f"Inflation must be nonnegative, got {inflation!r}.")
    grid = _as_grid(x_grid)
    band_cfg.bandwidth.check(grid, cfg.n)
    results = _run(_coverage_replication, replications, n_jobs, cfg, band_cfg, grid, float(inflation))
    records = tuple(record for record, _ in results)
    point_coverage = np.mean(np.stack([points for _, points in results]), axis=0)
    config = {
        **cfg.as_dict(),
        "bandwidth": band_cfg.bandwidth.describe(),
        "theta": band_cfg.theta,
        "region": [list(bounds) for bounds in band_cfg.region],
        "inflation": float(inflation),
        "replications": int(replications),
    }
    return _report_failures(SimReport("coverage", config, records, point_coverage))


def deviation_study(cfg, h_grid, x_grid, replications, n_jobs=None):
    """
    The normalized uniform-in-bandwidth deviation D_n = sup_{h, x} sqrt(n h^d) |m*(x; h) - E m(x; h)| / sqrt(2 log(1 / h^d)), and its
    ratio to the limit constant R.

    Parameters
    ----------
    cfg : ipcwk.simulation.SimConfig
        The sample parameters.
    h_grid : array-like
        Bandwidths in (0, 1).
    x_grid : array-like
        The grid, 201 points on [-1, 1] if None.
    replications : int
        The number of replications.
    n_jobs : int, optional
        Parallel workers. Defaults to Common.threads().

    Returns
    -------
    ipcwk.simulation.SimReport
        The per-replication records.
    """
    h_grid = np.atleast_1d(np.asarray(h_grid, dtype=float))
    if len(h_grid) == 0 or np.any((h_grid <= 0) | (h_grid >= 1)):
        raise ConfigError("Deviation studies need bandwidths in (0, 1).")
    grid = _as_grid(x_grid)
    lo, hi = float(grid[:, 0].min()), float(grid[:, 0].max())
    constant = limit_constant(cfg.design, cfg.kernel, ((lo, hi),))
    centering = np.array(
        [[cfg.design.centering_term(h, x, cfg.kernel) for x in grid[:, 0]] for h in h_grid]
    )
    records = _run(_deviation_replication, replications, n_jobs, cfg, h_grid, grid, centering, constant)
    config = {
        **cfg.as_dict(),
        "h_grid": h_grid.tolist(),
        "replications": int(replications),
        "limit_constant": constant,
    }
    return _report_failures(SimReport("deviation", config, tuple(records)))
