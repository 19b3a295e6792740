from __future__ import annotations

import math

import numpy as np
import pytest

from exctop import synthesis
from exctop.errors import EmbeddingError, FactorizationError, RegularityError
from exctop.synthesis import (CovarianceModel, dense_covariance, reduced_cov, sample_field,
                              sample_field_dense, spectral_moment)

SE1 = CovarianceModel("squared-exponential", 1.0)


def matern52(r, ell):
    # independent transcription of the standard Matern nu=5/2 correlation
    a = math.sqrt(5.0) * r / ell
    return (1.0 + a + 5.0 * r * r / (3.0 * ell * ell)) * math.exp(-a)


def fd_moment(sigma, h):
    return 2.0 * (1.0 - sigma(h)) / (h * h)


def test_reduced_cov_at_zero():
    for kind in synthesis.KINDS:
        assert reduced_cov(CovarianceModel(kind, 1.0), 0.0) == 1.0


def test_reduced_cov_decays_monotonically():
    r = np.linspace(0.0, 12.0, 400)
    for kind in synthesis.KINDS:
        c = reduced_cov(CovarianceModel(kind, 1.0), r)
        assert np.all(np.diff(c) < 0)
        assert c[-1] < 1e-4


def test_matern52_form():
    m = CovarianceModel("matern-5/2", 0.7)
    for r in (0.1, 0.5, 2.0):
        assert reduced_cov(m, r) == pytest.approx(matern52(r, 0.7), rel=1e-14)


@pytest.mark.parametrize("model, sigma, expected", [
    (CovarianceModel("se", 1.0), lambda r: math.exp(-r * r / 2.0), 1.0),
    (CovarianceModel("se", 2.0), lambda r: math.exp(-r * r / 8.0), 0.25),
    (CovarianceModel("matern-5/2", 1.0), lambda r: matern52(r, 1.0), 5.0 / 3.0),
])
def test_spectral_moment_against_finite_differences(model, sigma, expected):
    mu = spectral_moment(model)
    assert mu == pytest.approx(expected, rel=1e-12)
    assert abs(mu - fd_moment(sigma, 1e-4)) <= 1e-6
    # second-order convergence of the finite-difference definition
    e2, e3 = abs(mu - fd_moment(sigma, 1e-2)), abs(mu - fd_moment(sigma, 1e-3))
    assert e2 < 1e-3 * max(mu, 1.0)
    assert 50 < e2 / e3 < 200


def test_matern32_needs_override():
    m = CovarianceModel("matern-3/2", 1.0)
    assert m.regularity_violated
    with pytest.raises(RegularityError):
        spectral_moment(m)
    assert spectral_moment(m, allow_irregular=True) == pytest.approx(3.0)


def test_bad_model_arguments():
    with pytest.raises(ValueError):
        CovarianceModel("cauchy", 1.0)
    with pytest.raises(ValueError):
        CovarianceModel("se", 0.0)


@pytest.mark.parametrize("mode", ["torus", "bounded"])
def test_sampling_is_deterministic(mode):
    m = CovarianceModel("se", 0.1)
    a = sample_field(m, (64, 48), 0.01, 7, mode, stream=3)
    b = sample_field(m, (64, 48), 0.01, 7, mode, stream=3)
    c = sample_field(m, (64, 48), 0.01, 7, mode, stream=4)
    assert a.values.tobytes() == b.values.tobytes()
    assert not np.array_equal(a.values, c.values)
    assert a.dims == (64, 48)


def test_dense_is_deterministic():
    m = CovarianceModel("matern-5/2", 0.3)
    a = sample_field_dense(m, (8, 8), 0.1, 11)
    b = sample_field_dense(m, (8, 8), 0.1, 11)
    assert a.values.tobytes() == b.values.tobytes()


def test_small_grid_rejected():
    with pytest.raises(ValueError):
        sample_field(SE1, (4, 16), 0.1, 0)
    with pytest.raises(ValueError):
        sample_field_dense(SE1, (33, 8), 0.1, 0)


def test_embedding_error_when_padding_too_small():
    with pytest.raises(EmbeddingError):
        sample_field(CovarianceModel("se", 0.1), (16, 16), 0.01, 1, "bounded", pad=0.0)


def test_factorization_error(monkeypatch):
    def indefinite(model, dims, eps, mode="bounded"):
        n = dims[0] * dims[1]
        return np.eye(n) - 2.0 * np.ones((n, n)) / n * 1.5
    monkeypatch.setattr(synthesis, "dense_covariance", indefinite)
    with pytest.raises(FactorizationError):
        sample_field_dense(SE1, (4, 4), 0.1, 0)


def _cov_z(samples: np.ndarray, target: np.ndarray) -> np.ndarray:
    """Entrywise z-scores of the empirical covariance (known zero mean) against target."""
    n = samples.shape[0]
    prods = samples[:, :, None] * samples[:, None, :]
    mean = prods.mean(axis=0)
    se = prods.std(axis=0, ddof=1) / math.sqrt(n)
    return (mean - target) / se


def _check_cov(samples, target):
    z = _cov_z(samples, target)
    iu = np.triu_indices(target.shape[0])
    z = z[iu]
    # one z per entry: allow the chance rate of 3-sigma excursions, nothing more extreme
    assert np.mean(np.abs(z) < 3) >= 0.99
    assert np.max(np.abs(z)) < 5


@pytest.mark.parametrize("mode", ["bounded", "torus"])
def test_dense_covariance_matches_model(mode):
    m = CovarianceModel("se", 0.2)
    dims, eps = (8, 8), 0.1
    x = np.stack([sample_field_dense(m, dims, eps, 5, mode, stream=s).values.ravel() for s in range(2000)])
    _check_cov(x, dense_covariance(m, dims, eps, mode))
    assert np.mean(x * x) == pytest.approx(1.0, abs=0.05)


@pytest.mark.parametrize("mode", ["bounded", "torus"])
def test_fft_sampler_matches_dense_law(mode):
    m = CovarianceModel("matern-5/2", 0.2)
    dims, eps = (8, 8), 0.1
    x = np.stack([sample_field(m, dims, eps, 9, mode, stream=s).values.ravel() for s in range(2000)])
    _check_cov(x, dense_covariance(m, dims, eps, mode))


def test_unit_variance_on_torus():
    m = CovarianceModel("se", 0.1)
    v = np.array([np.mean(sample_field(m, (256, 256), 1 / 256, 21, stream=s).values ** 2) for s in range(50)])
    se = v.std(ddof=1) / math.sqrt(v.size)
    assert abs(v.mean() - 1.0) < 3 * se
    assert 0.9 <= np.median(v) <= 1.1


def test_lag_one_correlation_and_isotropy():
    m = CovarianceModel("se", 0.1)
    eps = 1 / 256
    c1, c2 = [], []
    for s in range(50):
        f = sample_field(m, (256, 256), eps, 22, stream=s).values
        c1.append(np.mean(f * np.roll(f, -1, axis=1)))
        c2.append(np.mean(f * np.roll(f, -1, axis=0)))
    c1, c2 = np.array(c1), np.array(c2)
    target = reduced_cov(m, eps)
    for c in (c1, c2):
        assert abs(c.mean() - target) < 3 * c.std(ddof=1) / math.sqrt(c.size)
    d = c1 - c2
    z = d.mean() / (d.std(ddof=1) / math.sqrt(d.size))
    assert abs(z) < 4


def test_torus_stationarity_at_long_lags():
    # the periodized covariance is the exact law: long lags match it, not the raw sigma
    m = CovarianceModel("se", 0.4)
    n, eps = 16, 1 / 16
    x = np.stack([sample_field(m, (n, n), eps, 3, stream=s).values for s in range(3000)])
    wrapped = synthesis._wrapped_cov(m, n, n, eps, periodized=True)
    for lag in (1, 4, 8):
        prod = np.mean(x * np.roll(x, -lag, axis=2), axis=(1, 2))
        se = prod.std(ddof=1) / math.sqrt(prod.size)
        assert abs(prod.mean() - wrapped[0, lag]) < 3.5 * se


def test_subsample():
    f = sample_field(SE1, (32, 16), 0.1, 0, "bounded", origin=(1.0, 2.0))
    g = f.subsample(4)
    assert g.dims == (8, 4) and g.eps == pytest.approx(0.4) and g.origin == (1.0, 2.0)
    assert np.array_equal(g.values, f.values[::4, ::4])
    with pytest.raises(ValueError):
        f.subsample(3)


def test_default_pad_grows_for_small_domains():
    m = CovarianceModel("se", 0.1)
    with pytest.raises(EmbeddingError):
        sample_field(m, (32, 32), 0.01, 1, "bounded", pad=0.3)
    f = sample_field(m, (32, 32), 0.01, 1, "bounded")
    assert np.all(np.isfinite(f.values))
