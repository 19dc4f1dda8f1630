"""
Module for censored datasets, right-continuous step functions and Kaplan-Meier estimation.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ConfigError, DatasetFormatError


def _frozen(array):
    array = np.array(array, dtype=float, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class StepFunction:
    """
    Right-continuous piecewise constant function on the real line.

    Attributes
    ----------
    jump_locations : numpy.ndarray
        Strictly increasing jump locations.
    values : numpy.ndarray
        values[k] is the value on [jump_locations[k], jump_locations[k + 1]).
    left_value : float
        The value on (-inf, jump_locations[0]).
    """

    jump_locations: np.ndarray
    values: np.ndarray
    left_value: float = 0.0

    def __post_init__(self):
        locations = _frozen(np.atleast_1d(self.jump_locations))
        values = _frozen(np.atleast_1d(self.values))
        if locations.ndim != 1 or locations.shape != values.shape:
            raise ConfigError(
                "Step function jump locations and values must be one dimensional and of equal length."
            )
        if np.any(np.diff(locations) <= 0):
            raise ConfigError("Step function jump locations must be strictly increasing.")
        if np.any(np.isnan(locations)) or np.any(np.isnan(values)):
            raise ConfigError("Step function entries must not be NaN.")
        object.__setattr__(self, "jump_locations", locations)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "left_value", float(self.left_value))

    @classmethod
    def constant(cls, value):
        """
        A constant step function.

        Parameters
        ----------
        value : float
            The constant.

        Returns
        -------
        ipcwk.survival.StepFunction
            The function equal to value everywhere.
        """
        return cls(np.empty(0), np.empty(0), value)

    @classmethod
    def from_table(cls, locations, values, left_value=0.0):
        """
        Builds a step function from a possibly unsorted table. Repeated locations keep their last value.

        Parameters
        ----------
        locations : array-like
            The jump locations.
        values : array-like
            The value from each location onwards.
        left_value : float
            The value left of the first location.

        Returns
        -------
        ipcwk.survival.StepFunction
            The tabulated step function.
        """
        locations = np.asarray(locations, dtype=float)
        values = np.asarray(values, dtype=float)
        order = np.argsort(locations, kind="stable")
        locations, values = locations[order], values[order]
        unique, first = np.unique(locations[::-1], return_index=True)
        last = len(locations) - 1 - first
        return cls(unique, values[last], left_value)

    def __call__(self, u):
        """
        Evaluates the step function, vectorised over u.

        Parameters
        ----------
        u : float or array-like
            Evaluation points.

        Returns
        -------
        float or numpy.ndarray
            The values, with right-continuity at jumps.
        """
        scalar = np.ndim(u) == 0
        idx = np.searchsorted(self.jump_locations, np.asarray(u, dtype=float), side="right")
        padded = np.concatenate(([self.left_value], self.values))
        result = padded[idx]
        return float(result) if scalar else result

    def is_nondecreasing(self):
        """
        Returns
        -------
        bool
            Whether the function is nondecreasing.
        """
        return bool(np.all(np.diff(np.concatenate(([self.left_value], self.values))) >= 0))

    def table(self):
        """
        Returns
        -------
        list(tuple(float, float))
            The (location, value) pairs at the jump locations.
        """
        return list(zip(self.jump_locations.tolist(), self.values.tolist()))


def step_eval(sf, u):
    """
    Value of a step function at a single point, with right-continuity.

    Parameters
    ----------
    sf : ipcwk.survival.StepFunction
        The step function.
    u : float
        The evaluation point.

    Returns
    -------
    float
        sf(u).
    """
    return sf(float(u))


@dataclass(frozen=True, eq=False)
class Dataset:
    """
    A right-censored sample of triples (Z_i, delta_i, X_i).

    Attributes
    ----------
    z : numpy.ndarray
        Observed times Z_i = min(Y_i, C_i), shape (n,).
    delta : numpy.ndarray
        Uncensoring indicators delta_i = 1{Y_i <= C_i}, shape (n,), values in {0, 1}.
    x : numpy.ndarray
        Covariates, shape (n, d). A one dimensional array is read as d = 1.
    """

    z: np.ndarray
    delta: np.ndarray
    x: np.ndarray

    def __post_init__(self):
        z = _frozen(np.atleast_1d(self.z))
        delta = np.atleast_1d(np.asarray(self.delta))
        x = np.asarray(self.x, dtype=float)
        if x.ndim == 1:
            x = x.reshape(-1, 1)
        if z.ndim != 1 or z.shape[0] < 1:
            raise DatasetFormatError("A dataset needs at least one observation.")
        n = z.shape[0]
        if delta.shape != (n,) or x.ndim != 2 or x.shape[0] != n:
            raise DatasetFormatError(
                f"Inconsistent dataset shapes: z {z.shape}, delta {delta.shape}, x {x.shape}."
            )
        if np.any(np.isnan(z)) or np.any(np.isnan(x)):
            raise DatasetFormatError("Dataset entries must not be NaN.")
        if not np.all(np.isin(delta, (0, 1))):
            raise DatasetFormatError("Censoring indicators must be 0 or 1.")
        delta = np.asarray(delta, dtype=np.int8)
        delta.setflags(write=False)
        object.__setattr__(self, "z", z)
        object.__setattr__(self, "delta", delta)
        object.__setattr__(self, "x", _frozen(x))

    @property
    def n(self):
        """
        Returns
        -------
        int
            The number of observations.
        """
        return self.z.shape[0]

    @property
    def d(self):
        """
        Returns
        -------
        int
            The covariate dimension.
        """
        return self.x.shape[1]

    @property
    def censoring_rate(self):
        """
        Returns
        -------
        float
            The fraction of censored observations.
        """
        return float(1.0 - np.mean(self.delta))

    @cached_property
    def censoring_km(self):
        """
        Kaplan-Meier estimator of the censoring distribution, computed once per dataset.

        Returns
        -------
        ipcwk.survival.StepFunction
            G*_n.
        """
        return km_estimator(self.z, 1 - self.delta)


def km_estimator(times, events):
    """
    Product-limit estimator of the distribution function of the events.

    The product runs over observations, not distinct times: every event observation i with Z_i <= u contributes the factor
    (N_n(Z_i) - 1) / N_n(Z_i), where N_n(t) = #{j : Z_j >= t} is shared by tied observations.

    Parameters
    ----------
    times : array-like
        Observed times, shape (n,).
    events : array-like
        Event indicators, shape (n,).

    Returns
    -------
    ipcwk.survival.StepFunction
        The estimated distribution function, jumping at the distinct event times and equal to 0 left of them.
    """
    times = np.asarray(times, dtype=float)
    events = np.asarray(events).astype(bool)
    if times.ndim != 1 or times.shape[0] < 1:
        raise DatasetFormatError("Kaplan-Meier estimation needs at least one observation.")
    order = np.argsort(times, kind="stable")
    sorted_times = times[order]
    sorted_events = events[order]
    at_risk = times.shape[0] - np.searchsorted(sorted_times, sorted_times, side="left")
    factors = np.where(sorted_events, (at_risk - 1) / at_risk, 1.0)
    survival = np.cumprod(factors)
    locations = np.unique(sorted_times[sorted_events])
    last = np.searchsorted(sorted_times, locations, side="right") - 1
    return StepFunction(locations, 1.0 - survival[last], 0.0)


def km_censoring(data):
    """
    Kaplan-Meier estimator G*_n of the censoring distribution, with the indicators 1 - delta_i.

    Parameters
    ----------
    data : ipcwk.survival.Dataset
        The censored sample.

    Returns
    -------
    ipcwk.survival.StepFunction
        G*_n, nondecreasing, right-continuous, 0 at -inf.
    """
    return data.censoring_km


def km_lifetime(data):
    """
    Kaplan-Meier estimator F*_n of the distribution of the response, with the indicators delta_i.

    Parameters
    ----------
    data : ipcwk.survival.Dataset
        The censored sample.

    Returns
    -------
    ipcwk.survival.StepFunction
        F*_n.
    """
    return km_estimator(data.z, data.delta)
