import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bregsmooth import (
    Dataset,
    GridSpec,
    LocalFitConfig,
    PLDataset,
    SingularMatrixError,
    difference_estimator,
    profile_fit,
    select_bandwidth,
    two_stage_select,
)


def _pl(n=400, seed=0, a=lambda u: np.sin(2 * np.pi * u), beta=(1.0, -0.5), sigma=0.5):
    rng = np.random.default_rng(seed)
    u = np.sort(rng.uniform(0, 1, n))
    Z = rng.normal(size=(n, len(beta)))
    y = a(u) + Z @ np.asarray(beta) + sigma * rng.normal(size=n)
    return PLDataset(u, Z, y, (0.0, 1.0))


def test_dataset_validation():
    with pytest.raises(ValueError):
        PLDataset([0.2, 0.1, 0.3], np.ones((3, 1)), [1, 2, 3])
    with pytest.raises(ValueError):
        PLDataset([0.1, 0.2], np.ones((2, 1)), [1, 2])
    d = PLDataset.from_unsorted([0.3, 0.1, 0.2], [[3.0], [1.0], [2.0]], [30, 10, 20])
    assert np.array_equal(d.Z[:, 0], [1, 2, 3]) and d.q == 1
    assert PLDataset([0.1, 0.2, 0.3], [], [1, 2, 3]).q == 0


def test_difference_estimator_exact_when_linear():
    rng = np.random.default_rng(1)
    n = 50
    u = np.sort(rng.uniform(0, 1, n))
    Z = rng.normal(size=(n, 3))
    beta = np.array([0.3, -1.0, 2.0])
    assert np.allclose(difference_estimator(PLDataset(u, Z, Z @ beta)), beta, atol=1e-12)


def test_difference_estimator_oracle():
    d = _pl(n=100, seed=2)
    dz, dy = np.diff(d.Z, axis=0), np.diff(d.y)
    ref = np.linalg.solve(dz.T @ dz, dz.T @ dy)
    assert np.allclose(difference_estimator(d), ref, atol=1e-12)


def test_difference_estimator_rank_error():
    u = np.linspace(0, 1, 20)
    Z = np.column_stack([np.ones(20), np.arange(20.0)])
    with pytest.raises(SingularMatrixError):
        difference_estimator(PLDataset(u, Z, np.arange(20.0)))


def test_difference_estimator_root_n():
    def rmse(n):
        err = [difference_estimator(_pl(n, 1000 * n + s, a=lambda u: u**2, beta=(1.0,)))[0] - 1.0
               for s in range(200)]
        return float(np.sqrt(np.mean(np.square(err))))

    ratio = rmse(200) / rmse(800)
    assert 1.6 <= ratio <= 2.5


@settings(max_examples=30, deadline=None)
@given(st.floats(-100, 100))
def test_difference_estimator_shift_invariant(c):
    d = _pl(n=60, seed=3)
    shifted = PLDataset(d.u, d.Z, d.y + c, d.support)
    assert np.allclose(difference_estimator(shifted), difference_estimator(d), rtol=0, atol=1e-9)


def test_profile_fit_limits():
    d = _pl(n=200, seed=4, a=lambda u: 2 + 0 * u, sigma=0.0)
    beta = np.array([1.0, -0.5])
    fit = profile_fit(d, beta, 0.2, "gaussian")
    assert np.allclose(fit.theta_hat, 2.0, atol=1e-10)
    noisy = _pl(n=200, seed=5)
    wide = profile_fit(noisy, beta, 1e6, "gaussian", LocalFitConfig(1.0, ridge=0.0))
    r = noisy.y - noisy.Z @ beta
    line = np.polyval(np.polyfit(noisy.u, r, 1), noisy.u)
    assert np.allclose(wide.theta_hat, line, atol=1e-8)


def test_profile_fit_bias_only():
    d = _pl(n=400, seed=6, sigma=0.0)
    fit = profile_fit(d, np.array([1.0, -0.5]), 0.05, "gaussian")
    inner = (d.u > 0.1) & (d.u < 0.9)
    assert np.max(np.abs(fit.theta_hat[inner] - np.sin(2 * np.pi * d.u[inner]))) < 0.02


def test_two_stage_standard_fixture():
    d = _pl(n=400, seed=7)
    res = two_stage_select(d)
    h_hat, beta_hat, a_hat = res
    assert np.max(np.abs(beta_hat - [1.0, -0.5])) < 0.1
    assert res.converged and res.rounds <= 50
    truth = np.sin(2 * np.pi * d.u)
    wide = profile_fit(d, beta_hat, min(10 * h_hat, 1e3), "gaussian")
    assert np.mean((a_hat - truth) ** 2) < np.mean((wide.theta_hat - truth) ** 2)


def test_two_stage_rss_half_steps():
    res = two_stage_select(_pl(n=300, seed=8))
    rss = np.array(res.rss)
    # the beta update is a least-squares projection given a_hat
    assert np.all(rss[1::2] <= rss[0::2] + 1e-10)


def test_two_stage_zero_smooth_part_is_ols():
    # the wide-bandwidth limit of a local linear fit is a global line in u
    d = _pl(n=400, seed=9, a=lambda u: 0 * u)
    X = np.column_stack([np.ones(d.n), d.u, d.Z])
    ols = np.linalg.lstsq(X, d.y, rcond=None)[0][2:]
    res = two_stage_select(d)
    assert res.h_hat == res.selection.grid[-1]
    assert np.allclose(res.beta_hat, ols, atol=1e-3)
    wide = two_stage_select(d, grid_spec=GridSpec(hi=1e4))
    assert wide.h_hat == 1e4 and np.allclose(wide.beta_hat, ols, atol=1e-8)


def test_two_stage_without_parametric_part():
    d = _pl(n=300, seed=10)
    bare = PLDataset(d.u, np.zeros((d.n, 0)), d.y - d.Z @ [1.0, -0.5], d.support)
    res = two_stage_select(bare, grid_spec=GridSpec(npts=12))
    ref = select_bandwidth(Dataset(bare.u, bare.y, bare.support), "gaussian", "deviance", "ecv",
                           GridSpec(npts=12))
    assert res.h_hat == ref.selected_h and res.beta_hat.size == 0 and res.rounds == 0


def test_poisson_is_experimental():
    rng = np.random.default_rng(11)
    n = 400
    u = np.sort(rng.uniform(0, 1, n))
    Z = rng.normal(size=(n, 1))
    y = rng.poisson(np.exp(1 + np.sin(2 * np.pi * u) + 0.3 * Z[:, 0])).astype(float)
    res = two_stage_select(PLDataset(u, Z, y, (0.0, 1.0)), family="poisson", grid_spec=GridSpec(npts=10))
    assert res.experimental and abs(res.beta_hat[0] - 0.3) < 0.1
