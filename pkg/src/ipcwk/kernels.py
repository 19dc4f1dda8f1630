"""
Module for compactly supported smoothing kernels on R^d.

Built-in families are products of one dimensional profiles. The weight argument used throughout ipcwk is (x - X_i) / h, so the effective
window of a kernel is h * support_radius around the evaluation point.
"""

from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Callable, Optional, Tuple

import numpy as np
from scipy import integrate

from .errors import ConfigError, DimensionMismatchError


def _epanechnikov(u):
    return np.where(np.abs(u) < 1.0, 0.75 * (1.0 - u * u), 0.0)


def _box(u):
    return np.where(np.abs(u) < 0.5, 1.0, 0.0)


def _triangular(u):
    return np.where(np.abs(u) < 1.0, 1.0 - np.abs(u), 0.0)


PROFILES = {
    "epanechnikov": (_epanechnikov, 1.0, 0.6),
    "box": (_box, 0.5, 1.0),
    "triangular": (_triangular, 1.0, 2.0 / 3.0),
}
"""
One dimensional profiles, keyed by name: (profile, support radius, integral of the squared profile).
"""


class KernelFamily(str, Enum):
    """
    Kernel families. The first three are the same profile on every coordinate.
    """

    EPANECHNIKOV = "epanechnikov"
    BOX = "box"
    TRIANGULAR = "triangular"
    PRODUCT = "product"
    CUSTOM = "custom"


@dataclass(frozen=True)
class KernelSpec:
    """
    A kernel function on R^d vanishing outside the cube of half-width support_radius.

    Attributes
    ----------
    family : ipcwk.kernels.KernelFamily
        The kernel family.
    dim : int
        The dimension d of the covariate space.
    factors : tuple(str)
        The one dimensional profile names per coordinate. Derived from the family unless the family is PRODUCT.
    support_radius : float
        Half-width of the cube outside which the kernel vanishes. Derived for built-in families, required for CUSTOM.
    profile : callable
        For CUSTOM kernels, a function mapping an array of shape (..., d) to the kernel values of shape (...).
    allow_signed : bool
        Accept kernels taking negative values. Monotonicity of conditional distribution function estimates is not guaranteed for these.
    """

    family: KernelFamily = KernelFamily.EPANECHNIKOV
    dim: int = 1
    factors: Tuple[str, ...] = ()
    support_radius: Optional[float] = None
    profile: Optional[Callable] = field(default=None, compare=False)
    allow_signed: bool = False

    def __post_init__(self):
        family = KernelFamily(self.family)
        object.__setattr__(self, "family", family)
        if not isinstance(self.dim, (int, np.integer)) or self.dim < 1:
            raise ConfigError(f"Kernel dimension must be a positive integer, got {self.dim!r}.")
        if family == KernelFamily.CUSTOM:
            self._init_custom()
            return
        if family == KernelFamily.PRODUCT:
            factors = tuple(self.factors)
            if len(factors) != self.dim:
                raise ConfigError(
                    f"A product kernel of dimension {self.dim} needs {self.dim} factors, got {len(factors)}."
                )
        else:
            factors = (family.value,) * self.dim
        for name in factors:
            if name not in PROFILES:
                raise ConfigError(f"Unknown kernel profile {name!r}.")
        radius = max(PROFILES[name][1] for name in factors)
        if self.support_radius is not None and not np.isclose(self.support_radius, radius):
            raise ConfigError(
                f"The {family.value} kernel has support radius {radius}, got {self.support_radius}."
            )
        object.__setattr__(self, "factors", factors)
        object.__setattr__(self, "support_radius", float(radius))

    def _init_custom(self):
        if self.profile is None:
            raise ConfigError("A custom kernel needs a profile function.")
        if self.support_radius is None or not self.support_radius > 0:
            raise ConfigError("A custom kernel needs a positive support radius.")
        object.__setattr__(self, "support_radius", float(self.support_radius))
        if not self.allow_signed:
            samples = np.linspace(-self.support_radius, self.support_radius, 41)
            if self.dim <= 3:
                mesh = np.stack(np.meshgrid(*([samples] * self.dim), indexing="ij"), axis=-1)
                points = mesh.reshape(-1, self.dim)
            else:
                rng = np.random.default_rng(0)
                points = rng.uniform(-self.support_radius, self.support_radius, (10000, self.dim))
            if np.min(self.evaluate(points)) < 0:
                raise ConfigError("The kernel takes negative values; pass allow_signed=True to use it.")

    @classmethod
    def from_name(cls, name, dim=1):
        """
        Builds a kernel from its command line name.

        Parameters
        ----------
        name : str
            One of "epanechnikov", "box", "triangular", or "product:<profile>,<profile>,..." with one profile per coordinate.
        dim : int
            The covariate dimension.

        Returns
        -------
        ipcwk.kernels.KernelSpec
            The kernel.
        """
        name = name.strip().lower()
        if name.startswith("product:"):
            factors = tuple(part.strip() for part in name[len("product:") :].split(","))
            return cls(KernelFamily.PRODUCT, dim=dim, factors=factors)
        try:
            family = KernelFamily(name)
        except ValueError as error:
            raise ConfigError(f"Unknown kernel {name!r}.") from error
        if family in (KernelFamily.PRODUCT, KernelFamily.CUSTOM):
            raise ConfigError(f"Kernel {name!r} cannot be selected by name alone.")
        return cls(family, dim=dim)

    def describe(self):
        """
        Returns
        -------
        str
            The command line name of the kernel.
        """
        if self.family == KernelFamily.PRODUCT:
            return "product:" + ",".join(self.factors)
        return self.family.value

    def evaluate(self, u):
        """
        Vectorised kernel evaluation.

        Parameters
        ----------
        u : array-like
            Points of shape (..., d).

        Returns
        -------
        numpy.ndarray
            Kernel values of shape (...).

        Raises
        ------
        ipcwk.errors.DimensionMismatchError
            If the last axis of u does not have length d.
        """
        u = np.asarray(u, dtype=float)
        if u.ndim == 0 or u.shape[-1] != self.dim:
            raise DimensionMismatchError(
                f"Expected points of dimension {self.dim}, got shape {u.shape}."
            )
        if self.family == KernelFamily.CUSTOM:
            values = np.asarray(self.profile(u), dtype=float)
            outside = np.max(np.abs(u), axis=-1) >= self.support_radius
            return np.where(outside, 0.0, values)
        values = np.ones(u.shape[:-1])
        for j, name in enumerate(self.factors):
            values = values * PROFILES[name][0](u[..., j])
        return values

    @cached_property
    def squared_norm(self):
        """
        The integral of K^2 over R^d. Analytic for products of built-in profiles, adaptive quadrature otherwise.

        Returns
        -------
        float
            The squared L2 norm of the kernel.
        """
        if self.family != KernelFamily.CUSTOM:
            return float(np.prod([PROFILES[name][2] for name in self.factors]))
        return self._custom_integral(lambda t: self.profile(t) ** 2)

    def _custom_integral(self, integrand):
        radius = self.support_radius
        value, _ = integrate.nquad(
            lambda *t: float(integrand(np.array(t))),
            [[-radius, radius]] * self.dim,
            opts={"epsrel": 1e-8, "epsabs": 1e-12, "points": [0.0]},
        )
        return float(value)


def kernel_eval(spec, u):
    """
    Evaluates a kernel at a single point.

    Parameters
    ----------
    spec : ipcwk.kernels.KernelSpec
        The kernel.
    u : array-like
        A point of length d. A scalar is accepted for d = 1.

    Returns
    -------
    float
        K(u), exactly zero outside the support cube.

    Raises
    ------
    ipcwk.errors.DimensionMismatchError
        If u does not have length d.
    """
    u = np.atleast_1d(np.asarray(u, dtype=float))
    if u.ndim != 1:
        raise DimensionMismatchError(f"Expected a single point, got shape {u.shape}.")
    return float(spec.evaluate(u))


def kernel_l2_norm(spec):
    """
    The integral of K^2 over R^d, the constant entering band widths.

    Parameters
    ----------
    spec : ipcwk.kernels.KernelSpec
        The kernel.

    Returns
    -------
    float
        The squared L2 norm of the kernel.
    """
    return spec.squared_norm


def kernel_integral(spec):
    """
    The integral of K over R^d, by adaptive quadrature.

    Parameters
    ----------
    spec : ipcwk.kernels.KernelSpec
        The kernel.

    Returns
    -------
    float
        The integral, which should be 1 for a proper kernel.
    """
    if spec.family == KernelFamily.CUSTOM:
        return spec._custom_integral(spec.profile)  # pylint: disable=protected-access
    total = 1.0
    for name in spec.factors:
        profile, radius, _ = PROFILES[name]
        value, _ = integrate.quad(
            lambda s, fn=profile: float(fn(s)),
            -radius,
            radius,
            points=[0.0],
            epsabs=1e-13,
            epsrel=1e-12,
        )
        total *= value
    return total
