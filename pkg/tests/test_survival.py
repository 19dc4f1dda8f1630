import numpy as np
import pytest

from ipcwk.errors import ConfigError, DatasetFormatError
from ipcwk.survival import Dataset, StepFunction, km_censoring, km_estimator, km_lifetime, step_eval


def brute_force_g(z, delta, u):
    """
    The censoring product-limit estimator at u, iterating the product over observations.
    """
    product = 1.0
    for z_i, d_i in zip(z, delta):
        if z_i <= u:
            at_risk = sum(1 for z_j in z if z_j >= z_i)
            product *= ((at_risk - 1) / at_risk) ** (1 - d_i)
    return 1.0 - product


def test_no_censoring_gives_zero():
    data = Dataset([0.3, 1.2, 0.7, 2.0], [1, 1, 1, 1], [0.0, 0.1, 0.2, 0.3])
    g = km_censoring(data)
    assert len(g.jump_locations) == 0
    assert np.all(g(np.linspace(-5, 5, 101)) == 0.0)


def test_single_censored_observation():
    g = km_censoring(Dataset([5.0], [0], [0.0]))
    assert g(4.999) == 0.0
    assert g(5.0) == 1.0
    assert g(50.0) == 1.0


def test_hand_example(km_toy):
    g = km_censoring(km_toy)
    assert g.table() == [(2.0, 0.5)]
    assert step_eval(g, 2.0) == 0.5
    assert step_eval(g, 1.999) == 0.0
    assert step_eval(g, 3.0) == 0.5


def test_constant_step_function():
    sf = StepFunction.constant(0.0)
    assert step_eval(sf, -1e300) == 0.0
    assert step_eval(sf, 7.5) == 0.0


@pytest.mark.parametrize("seed", range(10))
def test_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    for _ in range(100):
        n = int(rng.integers(1, 21))
        z = rng.integers(1, 8, n).astype(float)
        delta = rng.integers(0, 2, n)
        if rng.random() < 0.3:
            # Censored largest observation.
            delta[np.argmax(z)] = 0
        g = km_censoring(Dataset(z, delta, np.zeros(n)))
        for u in np.concatenate(([0.0], np.unique(z), np.unique(z) + 0.5)):
            assert g(u) == pytest.approx(brute_force_g(z, delta, u), abs=1e-12)


def test_monotone_and_bounded(make_dataset):
    rng = np.random.default_rng(2)
    for _ in range(200):
        data = make_dataset(rng, int(rng.integers(1, 40)), ties=bool(rng.random() < 0.5))
        g = km_censoring(data)
        assert g.is_nondecreasing()
        values = g(np.linspace(-1.0, 10.0, 200))
        assert np.all((values >= 0.0) & (values <= 1.0))


def test_product_with_lifetime_estimator(make_dataset):
    rng = np.random.default_rng(4)
    for _ in range(200):
        data = make_dataset(rng, int(rng.integers(1, 30)))
        f = km_lifetime(data)
        g = km_censoring(data)
        order = np.sort(data.z)
        points = np.concatenate(([order[0] - 1.0], (order[:-1] + order[1:]) / 2.0, [order[-1] + 1.0]))
        empirical = np.array([np.mean(data.z > u) for u in points])
        assert np.allclose((1.0 - f(points)) * (1.0 - g(points)), empirical, atol=1e-12, rtol=0)


def test_lifetime_without_censoring_is_empirical():
    z = np.array([3.0, 1.0, 2.0, 2.0])
    f = km_lifetime(Dataset(z, [1, 1, 1, 1], np.zeros(4)))
    assert f(0.5) == 0.0
    assert f(1.0) == pytest.approx(0.25)
    assert f(2.0) == pytest.approx(0.75)
    assert f(3.0) == pytest.approx(1.0)


def test_estimator_needs_observations():
    with pytest.raises(DatasetFormatError):
        km_estimator([], [])


def test_censoring_estimate_is_cached(km_toy):
    assert km_censoring(km_toy) is km_censoring(km_toy)


def test_step_function_vectorised_and_right_continuous():
    sf = StepFunction([1.0, 2.0, 4.0], [0.1, 0.4, 0.9], left_value=-1.0)
    assert np.array_equal(sf([0.0, 1.0, 1.5, 2.0, 3.9, 4.0, 9.0]), [-1.0, 0.1, 0.1, 0.4, 0.4, 0.9, 0.9])
    assert isinstance(sf(1.0), float)
    assert sf.is_nondecreasing()
    assert not StepFunction([1.0, 2.0], [0.4, 0.2]).is_nondecreasing()


def test_step_function_validation():
    with pytest.raises(ConfigError):
        StepFunction([2.0, 1.0], [0.1, 0.2])
    with pytest.raises(ConfigError):
        StepFunction([1.0, 2.0], [0.1])
    with pytest.raises(ConfigError):
        StepFunction([1.0], [np.nan])


def test_step_function_from_table_keeps_last_duplicate():
    sf = StepFunction.from_table([3.0, 1.0, 3.0], [0.2, 0.1, 0.5])
    assert sf.table() == [(1.0, 0.1), (3.0, 0.5)]


def test_dataset_validation():
    data = Dataset([1.0, 2.0], [1, 0], [0.5, 0.7])
    assert (data.n, data.d) == (2, 1)
    assert data.censoring_rate == 0.5
    with pytest.raises(DatasetFormatError):
        Dataset([1.0, 2.0], [1, 2], [0.5, 0.7])
    with pytest.raises(DatasetFormatError):
        Dataset([1.0, np.nan], [1, 0], [0.5, 0.7])
    with pytest.raises(DatasetFormatError):
        Dataset([], [], np.zeros((0, 1)))
    with pytest.raises(DatasetFormatError):
        Dataset([1.0, 2.0], [1, 0], [0.5])


def test_dataset_is_read_only():
    data = Dataset([1.0, 2.0], [1, 0], [[0.5, 0.1], [0.7, 0.2]])
    assert data.d == 2
    with pytest.raises(ValueError):
        data.z[0] = 3.0
