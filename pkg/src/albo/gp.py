"""Gaussian process surrogates on the unit cube.

Model conventions, fixed across the package:

* inputs live in [0, 1]^d (callers rescale their boxes);
* responses are standardized internally to sample mean zero and unit
  sample standard deviation (ddof=1; the divisor falls back to 1.0 for
  n < 2 or nearly constant responses), and the prior mean of the
  standardized process is zero;
* the covariance is an isotropic squared exponential,
  ``scale * exp(-||x - x'||^2 / (2 lengthscale^2)) + nugget * 1[x == x']``,
  with ``scale`` and ``nugget`` referring to the standardized responses;
* factorizations add a diagonal jitter, starting at 1e-8 * scale and
  escalating tenfold to at most 1e-2 * scale before giving up with
  :class:`FactorizationError`;
* predictions are of the latent surface (nugget excluded from the
  predictive variance), reported on the original response scale.

Lengthscale selection maximizes the profile likelihood: for fixed
lengthscale and fixed noise-to-signal ratio ``nugget / scale``, the
scale maximizing the likelihood is available in closed form, leaving a
one-dimensional search on the lengthscale (coarse log grid, then
golden-section refinement).  The incoming hyperparameters always remain
a candidate, so a refit never decreases the log marginal likelihood.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from . import kernels

_JITTER_LADDER = tuple(10.0 ** e for e in range(-8, -1))
_LOG_2PI = math.log(2.0 * math.pi)
_SD_FLOOR = 1e-12
_DISTINCT_TOL = 1e-12
_CUBE_TOL = 1e-9


class FactorizationError(RuntimeError):
    """Covariance factorization failed after full jitter escalation.

    Signals an ill-conditioned design (near-duplicate points or an
    extreme lengthscale), not a transient condition.
    """


@dataclass(frozen=True)
class GPHyper:
    """Kernel hyperparameters on the standardized response scale."""

    lengthscale: float = 0.5
    scale: float = 1.0
    nugget: float = 1e-8

    def __post_init__(self):
        if not (np.isfinite(self.lengthscale) and self.lengthscale > 0.0):
            raise ValueError("lengthscale must be positive")
        if not (np.isfinite(self.scale) and self.scale > 0.0):
            raise ValueError("scale must be positive")
        if not (np.isfinite(self.nugget) and self.nugget >= 0.0):
            raise ValueError("nugget must be nonnegative")


def _check_unit_rows(X: np.ndarray):
    if X.size and (X.min() < -_CUBE_TOL or X.max() > 1.0 + _CUBE_TOL):
        raise ValueError("design inputs must lie in the unit cube")


def _min_pairwise_gap(X: np.ndarray) -> float:
    if X.shape[0] < 2:
        return np.inf
    d2 = np.sum((X[:, None, :] - X[None, :, :]) ** 2, axis=-1)
    np.fill_diagonal(d2, np.inf)
    return float(np.sqrt(d2.min()))


@dataclass(frozen=True)
class DesignSet:
    """Immutable (X, y) pairs with X in the unit cube, rows distinct."""

    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.X, dtype=np.float64))
        y = np.atleast_1d(np.asarray(self.y, dtype=np.float64))
        if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
            raise ValueError("need X (n, d) and y (n,) with matching n")
        if not (np.isfinite(X).all() and np.isfinite(y).all()):
            raise ValueError("design contains non-finite values")
        _check_unit_rows(X)
        if _min_pairwise_gap(X) < _DISTINCT_TOL:
            raise ValueError("design rows must be pairwise distinct")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    def __len__(self) -> int:
        return self.X.shape[0]

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    def append(self, x, y: float) -> "DesignSet":
        x = np.asarray(x, dtype=np.float64).reshape(1, -1)
        return DesignSet(np.vstack([self.X, x]),
                         np.append(self.y, float(y)))


@dataclass(frozen=True)
class GPSurrogate:
    """A fitted GP: design, hypers, Cholesky factor, and solved weights."""

    design: DesignSet
    hypers: GPHyper
    L: np.ndarray
    alpha: np.ndarray
    y_mean: float
    y_sd: float
    jitter: float

    def predict(self, x):
        return predict(self, x)

    def predict_batch(self, X):
        return predict_batch(self, X)


@dataclass(frozen=True)
class PredictiveDistribution:
    mean: float
    sd: float

    @property
    def var(self) -> float:
        return self.sd * self.sd


def _standardize(y: np.ndarray):
    y_mean = float(y.mean())
    if y.shape[0] > 1:
        y_sd = float(y.std(ddof=1))
        if not (np.isfinite(y_sd) and y_sd > _SD_FLOOR):
            y_sd = 1.0
    else:
        y_sd = 1.0
    return (y - y_mean) / y_sd, y_mean, y_sd


def _jittered_cholesky(K: np.ndarray, scale: float):
    """Cholesky of K + jitter * I, escalating jitter along the ladder."""
    n = K.shape[0]
    idx = np.diag_indices(n)
    for rung in _JITTER_LADDER:
        jitter = rung * scale
        Kj = K.copy()
        Kj[idx] += jitter
        try:
            L = np.linalg.cholesky(Kj)
        except np.linalg.LinAlgError:
            continue
        return L, jitter
    raise FactorizationError(
        f"covariance not factorizable for n={n} even with jitter "
        f"{_JITTER_LADDER[-1] * scale:g}; design is ill-conditioned")


def fit_gp(design: DesignSet, hypers: GPHyper = None) -> GPSurrogate:
    """Fit a GP to ``design``; raises ValueError on an empty design."""
    if hypers is None:
        hypers = GPHyper()
    if len(design) == 0:
        raise ValueError("cannot fit a GP to an empty design")
    ys, y_mean, y_sd = _standardize(design.y)
    K = hypers.scale * kernels.sqexp_sym(design.X, hypers.lengthscale)
    K[np.diag_indices(len(design))] += hypers.nugget
    L, jitter = _jittered_cholesky(K, hypers.scale)
    alpha = cho_solve((L, True), ys)
    return GPSurrogate(design=design, hypers=hypers, L=L, alpha=alpha,
                       y_mean=y_mean, y_sd=y_sd, jitter=jitter)


def update_gp(surrogate: GPSurrogate, x, y: float) -> GPSurrogate:
    """Add one observation via a rank-one Cholesky extension.

    O(n^2) instead of a full refit; falls back to :func:`fit_gp` when the
    appended row is too close to singular.  The new point must be
    distinct from every design point (ValueError otherwise).
    """
    design = surrogate.design.append(x, y)  # validates cube + distinctness
    h = surrogate.hypers
    n = len(surrogate.design)
    ys, y_mean, y_sd = _standardize(design.y)
    xq = design.X[-1:, :]
    k12 = (h.scale * kernels.sqexp_cross(surrogate.design.X, xq,
                                         h.lengthscale)).reshape(n)
    d_new = h.scale + h.nugget + surrogate.jitter
    l12 = solve_triangular(surrogate.L, k12, lower=True)
    r2 = d_new - float(l12 @ l12)
    if r2 <= 1e-12 * d_new:
        return fit_gp(design, h)
    L = np.zeros((n + 1, n + 1))
    L[:n, :n] = surrogate.L
    L[n, :n] = l12
    L[n, n] = math.sqrt(r2)
    alpha = cho_solve((L, True), ys)
    return GPSurrogate(design=design, hypers=h, L=L, alpha=alpha,
                       y_mean=y_mean, y_sd=y_sd, jitter=surrogate.jitter)


def predict_batch(surrogate: GPSurrogate, X):
    """Predictive means and standard deviations at query rows X (q, d)."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    h = surrogate.hypers
    Kc = h.scale * kernels.sqexp_cross(surrogate.design.X, X, h.lengthscale)
    mean_s = Kc.T @ surrogate.alpha
    V = solve_triangular(surrogate.L, Kc, lower=True)
    var_s = h.scale - np.einsum("ij,ij->j", V, V)
    np.maximum(var_s, 0.0, out=var_s)
    mean = surrogate.y_mean + surrogate.y_sd * mean_s
    sd = surrogate.y_sd * np.sqrt(var_s)
    return mean, sd


def predict(surrogate: GPSurrogate, x) -> PredictiveDistribution:
    """Predictive distribution of the latent surface at one point."""
    mean, sd = predict_batch(surrogate, np.asarray(x).reshape(1, -1))
    return PredictiveDistribution(mean=float(mean[0]), sd=float(sd[0]))


def log_marginal_likelihood(design: DesignSet, hypers: GPHyper) -> float:
    """Log marginal likelihood of the standardized responses."""
    if len(design) == 0:
        raise ValueError("empty design")
    ys, _, _ = _standardize(design.y)
    n = len(design)
    K = hypers.scale * kernels.sqexp_sym(design.X, hypers.lengthscale)
    K[np.diag_indices(n)] += hypers.nugget
    L, _ = _jittered_cholesky(K, hypers.scale)
    alpha = cho_solve((L, True), ys)
    logdet_half = float(np.sum(np.log(np.diag(L))))
    return float(-0.5 * (ys @ alpha) - logdet_half - 0.5 * n * _LOG_2PI)


def _profile_ll(design: DesignSet, ys: np.ndarray, lengthscale: float,
                noise_ratio: float):
    """Profile log likelihood over the scale, for fixed noise ratio.

    With M = C(lengthscale) + noise_ratio * I, the maximizing scale is
    ys' M^-1 ys / n; returns (ll at that scale, the scale), or
    (-inf, None) when degenerate.
    """
    n = len(design)
    M = kernels.sqexp_sym(design.X, lengthscale)
    M[np.diag_indices(n)] += noise_ratio
    try:
        L, _ = _jittered_cholesky(M, 1.0)
    except FactorizationError:
        return -np.inf, None
    q = float(ys @ cho_solve((L, True), ys))
    scale = q / n
    if not (np.isfinite(scale) and scale > 0.0):
        return -np.inf, None
    logdet_half = float(np.sum(np.log(np.diag(L))))
    ll = -0.5 * n * math.log(scale) - logdet_half - 0.5 * n * (1.0 + _LOG_2PI)
    return ll, scale


_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def mle_lengthscale(surrogate: GPSurrogate,
                    bounds=(1e-2, 10.0)) -> GPHyper:
    """Profile-likelihood lengthscale selection.

    Coarse log-spaced grid over ``bounds``, golden-section refinement
    around the best cell, then a head-to-head likelihood comparison
    against the incoming hyperparameters, which win ties; the selected
    hypers therefore never decrease the log marginal likelihood.  The
    nugget-to-scale ratio is held at the incoming value, and the scale
    is the closed-form profile maximizer.
    """
    design = surrogate.design
    incoming = surrogate.hypers
    if len(design) < 2:
        return incoming
    lo, hi = bounds
    if not (0.0 < lo < hi):
        raise ValueError("need 0 < bounds[0] < bounds[1]")
    ys, _, _ = _standardize(design.y)
    ratio = incoming.nugget / incoming.scale

    def pll(log_l):
        return _profile_ll(design, ys, math.exp(log_l), ratio)

    grid = np.log(np.geomspace(lo, hi, 12))
    vals = [pll(g) for g in grid]
    i_best = int(np.argmax([v[0] for v in vals]))
    best_ll, best_scale = vals[i_best]
    best_log_l = grid[i_best]

    # golden-section refinement inside the bracketing cells
    a = grid[max(i_best - 1, 0)]
    b = grid[min(i_best + 1, len(grid) - 1)]
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, sc = pll(c)
    fd, sd_ = pll(d)
    for _ in range(40):
        if b - a < 1e-2:
            break
        if fc >= fd:
            b, d, fd, sd_ = d, c, fc, sc
            c = b - _GOLDEN * (b - a)
            fc, sc = pll(c)
        else:
            a, c, fc, sc = c, d, fd, sd_
            d = a + _GOLDEN * (b - a)
            fd, sd_ = pll(d)
    for ll, scale, log_l in ((fc, sc, c), (fd, sd_, d)):
        if ll > best_ll and scale is not None:
            best_ll, best_scale, best_log_l = ll, scale, log_l

    if best_scale is None or not np.isfinite(best_ll):
        return incoming
    candidate = GPHyper(lengthscale=float(math.exp(best_log_l)),
                        scale=best_scale, nugget=ratio * best_scale)
    if (log_marginal_likelihood(design, candidate)
            > log_marginal_likelihood(design, incoming)):
        return candidate
    return incoming
