import math

import numpy as np
import pytest

from ipcwk.errors import ConfigError, DimensionMismatchError
from ipcwk.kernels import KernelFamily, KernelSpec, kernel_eval, kernel_integral, kernel_l2_norm

BUILTIN = [KernelFamily.EPANECHNIKOV, KernelFamily.BOX, KernelFamily.TRIANGULAR]


def test_epanechnikov_values():
    spec = KernelSpec(KernelFamily.EPANECHNIKOV)
    assert kernel_eval(spec, 0.0) == 0.75
    assert kernel_eval(spec, 1.2) == 0.0
    assert kernel_eval(spec, [0.5]) == pytest.approx(0.75 * 0.75)


def test_product_epanechnikov_at_origin():
    spec = KernelSpec(KernelFamily.EPANECHNIKOV, dim=2)
    assert kernel_eval(spec, [0.0, 0.0]) == pytest.approx(0.5625, abs=1e-15)


def test_dimension_mismatch():
    spec = KernelSpec(KernelFamily.EPANECHNIKOV, dim=2)
    with pytest.raises(DimensionMismatchError):
        kernel_eval(spec, [0.0])
    with pytest.raises(ValueError):
        spec.evaluate(np.zeros((4, 3)))


@pytest.mark.parametrize(
    "spec,expected",
    [
        (KernelSpec(KernelFamily.BOX), 1.0),
        (KernelSpec(KernelFamily.EPANECHNIKOV), 0.6),
        (KernelSpec(KernelFamily.EPANECHNIKOV, dim=2), 0.36),
        (KernelSpec(KernelFamily.TRIANGULAR), 2.0 / 3.0),
    ],
)
def test_l2_norm(spec, expected):
    assert kernel_l2_norm(spec) == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("family", BUILTIN)
def test_l2_norm_matches_quadrature(family):
    spec = KernelSpec(family)
    custom = KernelSpec(
        KernelFamily.CUSTOM, support_radius=spec.support_radius, profile=spec.evaluate
    )
    assert custom.squared_norm == pytest.approx(spec.squared_norm, rel=1e-8)


@pytest.mark.parametrize("family", BUILTIN)
@pytest.mark.parametrize("dim", [1, 2])
def test_integrates_to_one(family, dim):
    assert kernel_integral(KernelSpec(family, dim=dim)) == pytest.approx(1.0, abs=1e-8)


@pytest.mark.parametrize("family", BUILTIN)
@pytest.mark.parametrize("dim", [1, 2, 3])
def test_vanishes_outside_support(family, dim):
    spec = KernelSpec(family, dim=dim)
    rng = np.random.default_rng(11)
    u = rng.uniform(-3.0, 3.0, (2000, dim))
    coordinate = rng.integers(0, dim, 2000)
    signs = rng.choice([-1.0, 1.0], 2000)
    u[np.arange(2000), coordinate] = signs * rng.uniform(spec.support_radius, 4.0, 2000)
    assert np.all(spec.evaluate(u) == 0.0)


@pytest.mark.parametrize("family", BUILTIN)
def test_symmetric(family):
    spec = KernelSpec(family, dim=2)
    u = np.random.default_rng(3).uniform(-1.2, 1.2, (500, 2))
    assert np.array_equal(spec.evaluate(u), spec.evaluate(-u))


def test_product_is_product_of_factors():
    rng = np.random.default_rng(5)
    spec = KernelSpec(KernelFamily.PRODUCT, dim=3, factors=("epanechnikov", "box", "triangular"))
    one = [KernelSpec(KernelFamily(name)) for name in spec.factors]
    for u in rng.uniform(-1.1, 1.1, (1000, 3)):
        expected = math.prod(kernel_eval(k, [value]) for k, value in zip(one, u))
        assert kernel_eval(spec, u) == pytest.approx(expected, rel=1e-15, abs=0)


@pytest.mark.parametrize("family", BUILTIN)
@pytest.mark.parametrize("dim", [2, 3])
def test_product_l2_norm(family, dim):
    assert kernel_l2_norm(KernelSpec(family, dim=dim)) == pytest.approx(
        kernel_l2_norm(KernelSpec(family)) ** dim, abs=1e-8
    )


def test_from_name():
    assert KernelSpec.from_name("Epanechnikov").family == KernelFamily.EPANECHNIKOV
    spec = KernelSpec.from_name("product:epanechnikov,box", 2)
    assert spec.factors == ("epanechnikov", "box")
    assert spec.support_radius == 1.0
    assert spec.describe() == "product:epanechnikov,box"
    with pytest.raises(ConfigError):
        KernelSpec.from_name("gaussian")
    with pytest.raises(ConfigError):
        KernelSpec.from_name("product:epanechnikov", 2)


def test_custom_kernel():
    spec = KernelSpec(
        KernelFamily.CUSTOM,
        support_radius=1.0,
        profile=lambda u: 0.75 * (1.0 - u[..., 0] ** 2),
    )
    assert spec.squared_norm == pytest.approx(0.6, rel=1e-8)
    assert kernel_integral(spec) == pytest.approx(1.0, abs=1e-8)
    assert kernel_eval(spec, 1.5) == 0.0


def test_signed_kernel_needs_flag():
    def profile(u):
        return 0.75 * (1.0 - u[..., 0] ** 2) - 0.1

    with pytest.raises(ConfigError):
        KernelSpec(KernelFamily.CUSTOM, support_radius=1.0, profile=profile)
    spec = KernelSpec(KernelFamily.CUSTOM, support_radius=1.0, profile=profile, allow_signed=True)
    assert spec.evaluate([[0.0]])[0] == pytest.approx(0.65)


def test_invalid_specs():
    with pytest.raises(ConfigError):
        KernelSpec(KernelFamily.EPANECHNIKOV, dim=0)
    with pytest.raises(ConfigError):
        KernelSpec(KernelFamily.BOX, support_radius=1.0)
    with pytest.raises(ConfigError):
        KernelSpec(KernelFamily.CUSTOM, support_radius=1.0)
