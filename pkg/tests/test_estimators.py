import numpy as np
import pytest
from sklearn.base import clone

from asyncnet.estimators import CentralizedLMS, DiffusionLMS, check_network_data
from asyncnet.rng import stream


def make_data(n=3000, N=5, M=2, noise=0.01, seed=0):
    rng = stream(seed, "estimator-data")
    w_o = np.array([0.6 - 0.2j, -0.3 + 0.7j])[:M]
    X = (rng.standard_normal((n, N, M)) + 1j * rng.standard_normal((n, N, M))) / np.sqrt(2)
    y = X @ w_o + np.sqrt(noise / 2) * (rng.standard_normal((n, N)) + 1j * rng.standard_normal((n, N)))
    return X, y, w_o


@pytest.mark.parametrize("est", [
    DiffusionLMS(mu=0.02, random_state=0),
    DiffusionLMS(mu=0.02, q=0.5, eta=0.6, random_state=1),
    DiffusionLMS(mu=0.02, q=0.5, eta=0.6, asynchronous=False),
    CentralizedLMS(mu=0.02, q=0.7, eta=0.6, fusion_t=20, random_state=2),
    CentralizedLMS(mu=0.02, q=0.7, asynchronous=False),
])
def test_recovers_model(est):
    X, y, w_o = make_data()
    est.fit(X, y)
    coef = np.atleast_2d(est.coef_)
    assert np.max(np.abs(coef - w_o)) < 0.1
    assert est.score(X, y) > -0.05


def test_get_params_and_clone():
    est = DiffusionLMS(topology="ring(4)", mu=0.05, q=0.7)
    params = est.get_params()
    assert params["topology"] == "ring(4)" and params["q"] == 0.7
    other = clone(est)
    assert other.get_params() == params
    assert not hasattr(other, "coef_")


def test_predict_shapes():
    X, y, _ = make_data(n=50)
    d = DiffusionLMS(random_state=0).fit(X, y)
    c = CentralizedLMS(fusion_t=10, random_state=0).fit(X, y)
    assert d.coef_.shape == (5, 2) and d.predict(X).shape == (50, 5)
    assert c.coef_.shape == (2,) and c.predict(X).shape == (50, 5)


def test_fit_resets_partial_fit_continues():
    X, y, _ = make_data(n=200)
    a = DiffusionLMS(random_state=3).fit(X, y)
    b = DiffusionLMS(random_state=3).partial_fit(X[:100], y[:100]).partial_fit(X[100:], y[100:])
    np.testing.assert_allclose(a.coef_, b.coef_)
    again = DiffusionLMS(random_state=3).fit(X, y).fit(X, y)
    np.testing.assert_allclose(a.coef_, again.coef_)


def test_real_data_stays_real():
    rng = stream(0, "real-est")
    X = rng.standard_normal((100, 5, 2))
    y = X @ np.array([1.0, -1.0])
    assert np.isrealobj(DiffusionLMS().fit(X, y).coef_)


def test_predict_before_fit():
    from sklearn.exceptions import NotFittedError
    with pytest.raises(NotFittedError):
        DiffusionLMS().predict(np.zeros((1, 5, 2)))


@pytest.mark.parametrize("X,y", [
    (np.zeros((4, 5, 2, 1)), None),
    (np.full((4, 5, 2), np.nan), None),
    (np.zeros((4, 5, 2)), np.zeros((4, 3))),
    (np.zeros((0, 5, 2)), None),
])
def test_check_network_data_rejects(X, y):
    with pytest.raises(ValueError):
        check_network_data(X, y)


def test_check_network_data_complex_and_2d():
    X, y = check_network_data(np.ones((3, 4)) * 1j, np.zeros((3, 4)))
    assert X.shape == (3, 4, 1) and np.iscomplexobj(X)
    with pytest.raises(ValueError, match="agents"):
        check_network_data(np.ones((3, 4, 2)), n_agents=5)
