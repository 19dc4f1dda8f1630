import math

import numpy as np
import pytest

from ipcwk import estimators
from ipcwk.bands import (
    BandConfig,
    EstimateCurve,
    FixedBandwidth,
    PowerLawBandwidth,
    TabulatedBandwidth,
    band_halfwidth,
    box_grid,
    confidence_band,
    design_density,
    halfwidth_from_plugins,
    log_theta_k,
    parse_bandwidth_rule,
    parse_region,
    variance_estimate,
    variance_estimate_clamped,
)
from ipcwk.common import Common
from ipcwk.errors import AllPointsMissingError, ConfigError, ZeroDensityError
from ipcwk.estimators import GSpec, Transform, ipcw_regression
from ipcwk.kernels import KernelFamily, KernelSpec
from ipcwk.survival import Dataset

EPANECHNIKOV = KernelSpec()
IDENTITY = Transform.identity()


def epanechnikov(u):
    return 0.75 * (1.0 - u**2) if abs(u) < 1.0 else 0.0


def test_variance_of_constant_response(no_censoring):
    data = Dataset([2.0], [1], [0.0])
    assert variance_estimate(data, IDENTITY, [0.0], 1.0, EPANECHNIKOV, no_censoring) == 0.0


def test_variance_of_two_points(no_censoring):
    data = Dataset([1.0, 3.0], [1, 1], [-0.5, 0.5])
    assert variance_estimate(data, IDENTITY, [0.0], 1.0, EPANECHNIKOV, no_censoring) == pytest.approx(1.0)


def test_variance_oracle(make_dataset):
    rng = np.random.default_rng(12)
    g = GSpec.kaplan_meier()
    for _ in range(300):
        data = make_dataset(rng, int(rng.integers(2, 30)))
        x = float(data.x[int(rng.integers(0, data.n)), 0])
        h = float(rng.uniform(0.2, 1.5))
        kernel = np.array([epanechnikov((x - v) / h) for v in data.x[:, 0]])
        weights = kernel / kernel.sum()
        survival = 1.0 - data.censoring_km(data.z)
        terms = np.array(
            [d * z / s if d == 1 and s > 0 else 0.0 for z, d, s in zip(data.z, data.delta, survival)]
        )
        expected = weights @ terms**2 - (weights @ terms) ** 2
        assert variance_estimate(data, IDENTITY, [x], h, EPANECHNIKOV, g) == pytest.approx(expected, abs=1e-10)
        assert variance_estimate_clamped(data, IDENTITY, [x], h, EPANECHNIKOV, g) >= 0.0


@pytest.mark.parametrize(
    "u,kernel,theta,expected",
    [
        (1.0, EPANECHNIKOV, math.e, 1.0),
        (100.0, EPANECHNIKOV, math.e, math.log(60.0)),
        (100.0, KernelSpec(KernelFamily.BOX), 2.0, math.log(100.0)),
        (1.0, KernelSpec(KernelFamily.BOX), 2.0, math.log(2.0)),
    ],
)
def test_log_theta_k(u, kernel, theta, expected):
    assert log_theta_k(u, kernel, theta) == pytest.approx(expected, abs=1e-15)


def test_log_theta_k_needs_theta_above_one():
    with pytest.raises(ConfigError):
        log_theta_k(5.0, EPANECHNIKOV, 1.0)


def test_single_observation_gives_degenerate_band():
    data = Dataset([0.7], [1], [0.0])
    cfg = BandConfig(bandwidth=FixedBandwidth(0.5))
    curve = confidence_band(data, IDENTITY, [0.0], EPANECHNIKOV, GSpec.kaplan_meier(), cfg)
    point = curve.points[0]
    assert point.halfwidth == 0.0
    assert point.lower == point.estimate == point.upper == 0.7


def test_hand_computed_band(band_toy):
    cfg = BandConfig(bandwidth=FixedBandwidth(1.0))
    g = GSpec.kaplan_meier()
    total = 0.63 + 0.7425 + 0.72 + 0.48
    mean = 2.9775 / total
    variance = 8.58 / total - mean**2
    density = total / 4.0
    expected = math.sqrt(2.0 * 1.0 / 4.0 * variance / density) * math.sqrt(0.6)
    assert design_density(band_toy, [0.0], 1.0, EPANECHNIKOV) == pytest.approx(density, abs=1e-12)
    assert variance_estimate(band_toy, IDENTITY, [0.0], 1.0, EPANECHNIKOV, g) == pytest.approx(variance, abs=1e-12)
    assert band_halfwidth(band_toy, IDENTITY, [0.0], 1.0, EPANECHNIKOV, g, cfg) == pytest.approx(expected, abs=1e-12)
    curve = confidence_band(band_toy, IDENTITY, [0.0], EPANECHNIKOV, g, cfg)
    assert curve.estimates[0] == pytest.approx(mean, abs=1e-12)
    assert curve.halfwidths[0] == pytest.approx(expected, abs=1e-12)
    assert curve.points[0].lower == pytest.approx(mean - expected, abs=1e-12)


def test_doubling_psi_doubles_band(band_toy):
    cfg = BandConfig(bandwidth=FixedBandwidth(1.0))
    g = GSpec.kaplan_meier()
    grid = np.linspace(-0.5, 0.5, 11)
    single = confidence_band(band_toy, IDENTITY, grid, EPANECHNIKOV, g, cfg)
    double = confidence_band(band_toy, IDENTITY.scaled(2.0), grid, EPANECHNIKOV, g, cfg)
    assert np.allclose(double.estimates, 2.0 * single.estimates, atol=1e-12, rtol=0)
    assert np.allclose(double.halfwidths, 2.0 * single.halfwidths, atol=1e-12, rtol=0)


def test_band_matches_point_estimates(make_dataset):
    rng = np.random.default_rng(21)
    data = make_dataset(rng, 200)
    g = GSpec.kaplan_meier()
    cfg = BandConfig(bandwidth=FixedBandwidth(0.3))
    grid = np.linspace(-0.9, 0.9, 19)
    curve = confidence_band(data, IDENTITY, grid, EPANECHNIKOV, g, cfg)
    for x, estimate, halfwidth in zip(grid, curve.estimates, curve.halfwidths):
        assert estimate == pytest.approx(ipcw_regression(data, IDENTITY, [x], 0.3, EPANECHNIKOV, g), abs=1e-12)
        assert halfwidth == pytest.approx(band_halfwidth(data, IDENTITY, [x], 0.3, EPANECHNIKOV, g, cfg), abs=1e-12)


def test_band_is_the_same_over_grid_chunks(make_dataset, monkeypatch):
    rng = np.random.default_rng(23)
    data = make_dataset(rng, 120)
    g = GSpec.kaplan_meier()
    cfg = BandConfig(bandwidth=FixedBandwidth(0.3))
    grid = np.linspace(-0.9, 0.9, 37)
    whole = confidence_band(data, IDENTITY, grid, EPANECHNIKOV, g, cfg)
    monkeypatch.setattr(estimators, "GRID_CHUNK_ENTRIES", 500)
    chunked = confidence_band(data, IDENTITY, grid, EPANECHNIKOV, g, cfg, n_jobs=2)
    assert np.allclose(chunked.estimates, whole.estimates, rtol=1e-12, atol=0, equal_nan=True)
    assert np.allclose(chunked.halfwidths, whole.halfwidths, rtol=1e-12, atol=0, equal_nan=True)
    assert [point.flag for point in chunked.points] == [point.flag for point in whole.points]


def test_reflection_symmetry(make_dataset):
    rng = np.random.default_rng(5)
    g = GSpec.kaplan_meier()
    for _ in range(1000):
        data = make_dataset(rng, int(rng.integers(1, 20)))
        mirrored = Dataset(data.z, data.delta, -data.x)
        x = float(rng.uniform(-1.0, 1.0))
        cfg = BandConfig(bandwidth=FixedBandwidth(float(rng.uniform(0.3, 2.0))))
        try:
            left = confidence_band(data, IDENTITY, [x], EPANECHNIKOV, g, cfg)
        except AllPointsMissingError:
            with pytest.raises(AllPointsMissingError):
                confidence_band(mirrored, IDENTITY, [-x], EPANECHNIKOV, g, cfg)
            continue
        right = confidence_band(mirrored, IDENTITY, [-x], EPANECHNIKOV, g, cfg)
        assert right.estimates[0] == pytest.approx(left.estimates[0], abs=1e-12)
        assert right.halfwidths[0] == pytest.approx(left.halfwidths[0], abs=1e-12)


def test_frozen_plugins_scale_with_n_and_h():
    base = halfwidth_from_plugins(100, 0.1, 1, 0.4, 0.5, EPANECHNIKOV, 1e6, 2.0)
    assert halfwidth_from_plugins(400, 0.1, 1, 0.4, 0.5, EPANECHNIKOV, 1e6, 2.0) == pytest.approx(base / 2.0, rel=1e-12)
    assert halfwidth_from_plugins(100, 0.4, 1, 0.4, 0.5, EPANECHNIKOV, 1e6, 2.0) == pytest.approx(base / 2.0, rel=1e-12)
    assert halfwidth_from_plugins(100, 0.1, 1, -0.4, 0.5, EPANECHNIKOV, 1e6, 2.0) == 0.0


def test_uncensored_band_uses_classical_variance(no_censoring):
    rng = np.random.default_rng(9)
    data = Dataset(rng.normal(1.0, 0.5, 100), np.ones(100, dtype=int), rng.uniform(-1.0, 1.0, 100))
    cfg = BandConfig(bandwidth=FixedBandwidth(0.4))
    curve = confidence_band(data, IDENTITY, [0.2], EPANECHNIKOV, no_censoring, cfg)
    kernel = np.array([epanechnikov((0.2 - v) / 0.4) for v in data.x[:, 0]])
    weights = kernel / kernel.sum()
    mean = weights @ data.z
    variance = weights @ (data.z - mean) ** 2
    density = kernel.sum() / (100 * 0.4)
    log_term = math.log(max(math.e, 2.0 / 0.4 * 0.6))
    expected = math.sqrt(2.0 * log_term / (100 * 0.4) * variance / density) * math.sqrt(0.6)
    assert curve.estimates[0] == pytest.approx(mean, abs=1e-12)
    assert curve.halfwidths[0] == pytest.approx(expected, abs=1e-10)


def test_missing_points_are_flagged(band_toy):
    cfg = BandConfig(bandwidth=FixedBandwidth(0.1))
    curve = confidence_band(band_toy, IDENTITY, [-1.0, -0.4], EPANECHNIKOV, GSpec.kaplan_meier(), cfg)
    assert curve.valid.tolist() == [False, True]
    assert curve.points[0].flag == "empty_window"
    assert math.isnan(curve.points[0].estimate)
    assert curve.points[1].estimate == pytest.approx(0.5)
    frame = curve.to_frame()
    assert list(frame.columns) == ["x", "h", "estimate", "lower", "upper", "halfwidth", "variance", "flag"]


def test_all_points_missing(band_toy):
    cfg = BandConfig(bandwidth=FixedBandwidth(0.1))
    with pytest.raises(AllPointsMissingError) as error:
        confidence_band(band_toy, IDENTITY, [-1.0, 1.0], EPANECHNIKOV, GSpec.kaplan_meier(), cfg)
    assert error.value.exit_code == 4


def test_grid_outside_region(band_toy):
    with pytest.raises(ConfigError):
        confidence_band(band_toy, IDENTITY, [1.5], EPANECHNIKOV, GSpec.kaplan_meier(), BandConfig())


def test_zero_density(band_toy):
    with pytest.raises(ZeroDensityError):
        band_halfwidth(band_toy, IDENTITY, [-1.0], 0.1, EPANECHNIKOV, GSpec.kaplan_meier(), BandConfig())


def test_band_config_validation():
    assert BandConfig(region=((0, 2), (0, 3))).volume == 6.0
    with pytest.raises(ConfigError):
        BandConfig(theta=1.0)
    with pytest.raises(ConfigError):
        BandConfig(region=((1.0, 1.0),))
    with pytest.raises(ConfigError):
        BandConfig(bandwidth=PowerLawBandwidth(1.0, 0.1))
    assert BandConfig(bandwidth=PowerLawBandwidth(1.0, 0.2)).dim == 1
    assert BandConfig(region=((0, 1), (0, 1)), bandwidth=PowerLawBandwidth(1.0, 0.17)).dim == 2
    with pytest.raises(ConfigError):
        BandConfig(bandwidth=PowerLawBandwidth(1.0, 0.17))


def test_grids():
    assert box_grid(((0.0, 1.0), (2.0, 3.0)), 2).tolist() == [[0.0, 2.0], [0.0, 3.0], [1.0, 2.0], [1.0, 3.0]]
    assert BandConfig().grid(3)[:, 0].tolist() == [-1.0, 0.0, 1.0]
    with pytest.raises(ConfigError):
        box_grid(((0.0, 1.0),), 0)


def test_parse_rules():
    assert parse_bandwidth_rule("fixed:0.2") == FixedBandwidth(0.2)
    assert parse_bandwidth_rule("power:1.5:0.3") == PowerLawBandwidth(1.5, 0.3)
    assert parse_bandwidth_rule("power:1.5:0.3").resolve(np.zeros((2, 1)), 100).tolist() == pytest.approx(
        [1.5 * 100**-0.3] * 2
    )
    assert parse_region("-1:1,0:2") == ((-1.0, 1.0), (0.0, 2.0))
    for text in ["fixed:abc", "power:1", "gauss:2", "table:"]:
        with pytest.raises(ConfigError):
            parse_bandwidth_rule(text)
    for value in ["a:b", "0", "0:1,2", 5]:
        with pytest.raises(ConfigError):
            parse_region(value)


def test_table_rule(write_file):
    path = write_file("bandwidths.csv", "x,h\n-0.5,0.2\n0.5,0.4\n")
    rule = parse_bandwidth_rule(f"table:{path}")
    assert rule.resolve(np.array([[-1.0], [0.1], [0.9]]), 100).tolist() == [0.2, 0.4, 0.4]
    assert rule.describe() == f"table:{path}"


def test_table_bound_violation_is_logged():
    rule = TabulatedBandwidth([0.0, 1.0], [0.1, 0.5], c1=0.5, c2=2.0, reference_h=0.1, source="bw.csv")
    grid = np.array([[0.0], [1.0]])
    assert rule.resolve(grid, 100).tolist() == [0.1, 0.5]
    assert Common.entries(category="Bands") == []
    assert not rule.check(grid, 100)
    entries = Common.entries(category="Bands")
    assert len(entries) == 1
    assert entries[0]["summary"] == "Bandwidth bound"
    assert entries[0]["type"] == "warning"
    assert entries[0]["resource"] == "bw.csv"
    assert entries[0]["context"]["c2"] == 2.0


def test_table_within_bounds_is_silent():
    rule = TabulatedBandwidth([0.0], [0.1], c1=0.5, c2=2.0, reference_h=0.1)
    assert rule.check_bounds(np.array([0.1]))
    assert Common.entries(category="Bands") == []


def test_inflation(band_toy):
    cfg = BandConfig(bandwidth=FixedBandwidth(0.5))
    curve = confidence_band(band_toy, IDENTITY, [-1.0, 0.0, 0.3], EPANECHNIKOV, GSpec.kaplan_meier(), cfg)
    wide = curve.inflated(1.5)
    assert isinstance(wide, EstimateCurve)
    assert np.allclose(wide.halfwidths[1:], 1.5 * curve.halfwidths[1:])
    assert math.isnan(wide.halfwidths[0])
    assert np.array_equal(curve.inflated(0.0).halfwidths[1:], [0.0, 0.0])
    assert np.all(np.isinf(curve.inflated(math.inf).halfwidths[1:]))
    with pytest.raises(ConfigError):
        curve.inflated(-1.0)
