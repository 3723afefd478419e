"""GP surrogates: fitting, prediction, incremental updates, and the
profile-likelihood lengthscale search.

All surrogates standardize responses internally (sample mean/sd, ddof=1)
and factorize with a base jitter of 1e-8 * scale; the frozen oracles
below were produced by an independent direct solve (numpy.linalg.solve)
under those same documented conventions.
"""

import math

import numpy as np
import pytest

from albo.gp import (
    DesignSet,
    FactorizationError,
    GPHyper,
    fit_gp,
    log_marginal_likelihood,
    mle_lengthscale,
    predict,
    predict_batch,
    update_gp,
)
from albo.problems import _toy_values


def toy_design(n, seed, response="c1"):
    rng = np.random.default_rng(seed)
    U = rng.random((n, 2))
    idx = {"f": None, "c1": 0, "c2": 1}[response]
    vals = [_toy_values(u) for u in U]
    y = np.array([v[0] if idx is None else v[1][idx] for v in vals])
    return DesignSet(U, y)


class TestDesignSet:
    def test_validation(self):
        with pytest.raises(ValueError):
            DesignSet(np.array([[0.5], [1.5]]), np.array([0.0, 1.0]))  # cube
        with pytest.raises(ValueError):
            DesignSet(np.array([[0.5], [0.5]]), np.array([0.0, 1.0]))  # dup
        with pytest.raises(ValueError):
            DesignSet(np.array([[0.5]]), np.array([np.nan]))
        with pytest.raises(ValueError):
            DesignSet(np.array([[0.5], [0.6]]), np.array([1.0]))       # ragged

    def test_append_returns_new(self):
        d = DesignSet(np.array([[0.1, 0.1]]), np.array([1.0]))
        d2 = d.append([0.9, 0.9], 2.0)
        assert len(d) == 1 and len(d2) == 2
        assert d2.dim == 2


class TestFitAndPredict:
    def test_single_point_design(self):
        d = DesignSet(np.array([[0.5, 0.5]]), np.array([3.0]))
        s = fit_gp(d)
        pd = predict(s, [0.5, 0.5])
        assert pd.mean == pytest.approx(3.0, abs=1e-9)
        # one standardized response -> sd fallback 1.0, so the predictive
        # variance at the training point is on the order of nugget+jitter
        assert 0.0 <= pd.var <= s.hypers.nugget + s.jitter + 1e-12

    def test_empty_design_rejected(self):
        with pytest.raises(ValueError):
            fit_gp(DesignSet(np.empty((0, 2)), np.empty(0)))

    def test_two_point_hand_solve(self):
        # {(0, 0.0), (1, 1.0)}, lengthscale 1, nugget 0, scale 1;
        # oracle = direct 2x2 solve including the base 1e-8 jitter
        d = DesignSet(np.array([[0.0], [1.0]]), np.array([0.0, 1.0]))
        s = fit_gp(d, GPHyper(lengthscale=1.0, scale=1.0, nugget=0.0))
        pd = predict(s, [0.5])
        assert pd.mean == pytest.approx(0.5, abs=1e-12)
        assert pd.sd == pytest.approx(0.12340254635703492, abs=1e-10)

    def test_prior_reversion_far_away(self):
        d = DesignSet(np.array([[0.0, 0.0], [0.05, 0.0]]),
                      np.array([1.0, 2.0]))
        s = fit_gp(d, GPHyper(lengthscale=0.02))
        pd = predict(s, [1.0, 1.0])
        assert pd.mean == pytest.approx(s.y_mean, abs=1e-12)
        assert pd.var / s.y_sd ** 2 == pytest.approx(1.0, abs=1e-12)

    def test_interpolation(self):
        d = toy_design(20, seed=1)
        s = fit_gp(d, GPHyper(lengthscale=0.1))
        mu, _ = predict_batch(s, d.X)
        assert np.max(np.abs(mu - d.y)) <= 1e-6

    def test_batch_equals_pointwise(self, rng):
        # batch and scalar paths order their BLAS reductions differently,
        # so agreement is to rounding, not bit-for-bit
        s = fit_gp(toy_design(15, seed=2))
        Q = rng.random((200, 2))
        mu, sd = predict_batch(s, Q)
        for i in (0, 7, 63, 199):
            pd = predict(s, Q[i])
            assert pd.mean == pytest.approx(mu[i], abs=1e-10)
            assert pd.sd == pytest.approx(sd[i], abs=1e-10)

    def test_variance_bounds_many_queries(self, rng):
        s = fit_gp(toy_design(25, seed=3), GPHyper(lengthscale=0.2))
        Q = rng.random((10_000, 2))
        _, sd = predict_batch(s, Q)
        var_std = (sd / s.y_sd) ** 2      # back on the standardized scale
        assert np.all(sd >= 0.0)
        assert np.all(var_std <= s.hypers.scale + s.hypers.nugget + 1e-8)

    def test_near_duplicates_are_rescued_by_jitter(self):
        # two nearly identical rows (just above the distinctness gate)
        # are ill-conditioned but the ladder finds a working rung
        X = np.array([[0.5, 0.5], [0.5 + 2e-12, 0.5]])
        d = DesignSet(X, np.array([0.0, 1.0]))
        s = fit_gp(d, GPHyper(nugget=0.0))
        assert s.jitter >= 1e-8

    def test_jitter_ladder_gives_up_on_indefinite_matrix(self):
        # eigenvalues 3 and -1: no rung up to 1e-2*scale can rescue it
        from albo.gp import _jittered_cholesky

        K = np.array([[1.0, 2.0], [2.0, 1.0]])
        with pytest.raises(FactorizationError):
            _jittered_cholesky(K, scale=1.0)

    def test_jitter_ladder_first_rung_suffices(self):
        from albo.gp import _jittered_cholesky

        _, jitter = _jittered_cholesky(np.eye(3), scale=2.0)
        assert jitter == pytest.approx(2e-8)


class TestUpdate:
    def test_update_then_predict_at_new_point(self):
        s = fit_gp(toy_design(10, seed=4), GPHyper(lengthscale=0.2))
        s2 = update_gp(s, [0.33, 0.77], 5.0)
        assert predict(s2, [0.33, 0.77]).mean == pytest.approx(5.0, abs=1e-5)

    def test_single_update_matches_refit(self, rng):
        d = toy_design(10, seed=5)
        s = update_gp(fit_gp(d), [0.4, 0.9], -0.25)
        full = fit_gp(d.append([0.4, 0.9], -0.25))
        Q = rng.random((100, 2))
        m1, s1 = predict_batch(s, Q)
        m2, s2 = predict_batch(full, Q)
        np.testing.assert_allclose(m1, m2, rtol=0, atol=1e-8)
        np.testing.assert_allclose(s1, s2, rtol=0, atol=1e-8)

    def test_sequential_updates_match_refit(self, rng):
        # grow 10 -> 50 one point at a time; same hypers throughout
        hy = GPHyper(lengthscale=0.3, nugget=1e-6)
        d = toy_design(50, seed=6)
        s = fit_gp(DesignSet(d.X[:10], d.y[:10]), hy)
        for i in range(10, 50):
            s = update_gp(s, d.X[i], d.y[i])
        full = fit_gp(d, hy)
        Q = rng.random((100, 2))
        m1, s1 = predict_batch(s, Q)
        m2, s2 = predict_batch(full, Q)
        np.testing.assert_allclose(m1, m2, rtol=0, atol=1e-8)
        np.testing.assert_allclose(s1, s2, rtol=0, atol=1e-8)

    def test_duplicate_point_rejected(self):
        d = toy_design(10, seed=7)
        s = fit_gp(d)
        with pytest.raises(ValueError):
            update_gp(s, d.X[3], 1.0)


class TestMLE:
    def test_recovers_generating_lengthscale(self):
        # 1-d data drawn from a GP with lengthscale 0.3
        rng = np.random.default_rng(104)
        X = rng.random((40, 1))
        ell = 0.3
        K = np.exp(-((X - X.T) ** 2) / (2 * ell * ell)) + 1e-8 * np.eye(40)
        y = np.linalg.cholesky(K) @ rng.standard_normal(40)
        s = fit_gp(DesignSet(X, y))
        h = mle_lengthscale(s)
        assert 0.15 <= h.lengthscale <= 0.6

    @pytest.mark.parametrize("ell0", [0.05, 0.5, 5.0])
    def test_never_decreases_likelihood(self, ell0):
        d = toy_design(15, seed=8)
        s = fit_gp(d, GPHyper(lengthscale=ell0))
        h = mle_lengthscale(s)
        assert (log_marginal_likelihood(d, h)
                >= log_marginal_likelihood(d, s.hypers))

    def test_profile_scale_is_used(self):
        d = toy_design(25, seed=9)
        h = mle_lengthscale(fit_gp(d, GPHyper(scale=50.0, nugget=5e-7)))
        # nugget-to-scale ratio is preserved by the profile search
        assert h.nugget / h.scale == pytest.approx(1e-8, rel=1e-9)

    def test_constant_responses_fall_back(self):
        d = DesignSet(np.array([[0.1, 0.1], [0.5, 0.5], [0.9, 0.2]]),
                      np.array([2.0, 2.0, 2.0]))
        s = fit_gp(d)
        h = mle_lengthscale(s)
        assert h is s.hypers

    def test_single_point_returns_incoming(self):
        s = fit_gp(DesignSet(np.array([[0.5]]), np.array([1.0])))
        assert mle_lengthscale(s) is s.hypers

    def test_bad_bounds_rejected(self):
        s = fit_gp(toy_design(5, seed=10))
        with pytest.raises(ValueError):
            mle_lengthscale(s, bounds=(1.0, 0.5))


class TestHyperValidation:
    @pytest.mark.parametrize("kw", [dict(lengthscale=0.0),
                                    dict(lengthscale=-1.0),
                                    dict(scale=0.0),
                                    dict(nugget=-1e-9),
                                    dict(lengthscale=np.nan)])
    def test_rejects(self, kw):
        with pytest.raises(ValueError):
            GPHyper(**kw)


def test_standardization_round_trip():
    # predictions land back on the original response scale
    d = DesignSet(np.array([[0.0], [0.5], [1.0]]),
                  np.array([100.0, 101.0, 107.0]))
    s = fit_gp(d, GPHyper(lengthscale=0.3))
    mu, _ = predict_batch(s, d.X)
    np.testing.assert_allclose(mu, d.y, rtol=0, atol=1e-5)
    assert s.y_mean == pytest.approx(np.mean(d.y))
    assert s.y_sd == pytest.approx(np.std(d.y, ddof=1))
