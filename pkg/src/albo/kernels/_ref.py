"""Reference numpy implementations of the numeric hot loops.

These mirror ``_core`` (the Cython extension) operation for operation and
are the fallback when the extension was not built.  Keep the two in sync:
every function here has a compiled twin with the same signature, and the
backend-agreement tests hold them to ~1e-10 of each other.
"""

import numpy as np

_SQRT_2PI = float(np.sqrt(2.0 * np.pi))


def sqexp_cross(X, Z, lengthscale):
    """Squared-exponential correlation block k(X, Z), shape (n, q).

    Isotropic kernel exp(-||x - z||^2 / (2 l^2)) with unit scale; callers
    multiply by the process scale themselves.
    """
    X = np.ascontiguousarray(X, dtype=np.float64)
    Z = np.ascontiguousarray(Z, dtype=np.float64)
    xx = np.sum(X * X, axis=1)
    zz = np.sum(Z * Z, axis=1)
    d2 = xx[:, None] + zz[None, :] - 2.0 * (X @ Z.T)
    np.maximum(d2, 0.0, out=d2)
    return np.exp(d2 * (-0.5 / (lengthscale * lengthscale)))


def sqexp_sym(X, lengthscale):
    """Symmetric correlation matrix k(X, X) with exact unit diagonal."""
    C = sqexp_cross(X, X, lengthscale)
    C = 0.5 * (C + C.T)
    np.fill_diagonal(C, 1.0)
    return C


def ey_scores(mu, sd, fvals, lam, rho, drop_max):
    """Composite expected-value score per candidate.

    mu, sd: (q, m) predictive means and standard deviations for the m
    constraint surrogates; fvals: (q,) objective values; lam: (m,)
    multipliers; rho: penalty parameter.  Returns (q,) scores

        f + lam . mu + (1 / (2 rho)) * sum_j E{ h(Y_j)^2 }

    where h is the identity when drop_max is set and max(0, .) otherwise.
    The hinge case uses the closed form
    E{max(0,Y)^2} = (mu^2 + sd^2) Phi(mu/sd) + mu sd phi(mu/sd).
    """
    mu = np.asarray(mu, dtype=np.float64)
    sd = np.asarray(sd, dtype=np.float64)
    if drop_max:
        sq = mu * mu + sd * sd
    else:
        sq = np.empty_like(mu)
        pos = sd > 0.0
        z = np.divide(mu, sd, out=np.zeros_like(mu), where=pos)
        phi = np.exp(-0.5 * z * z) / _SQRT_2PI
        Phi = 0.5 * (1.0 + _erf(z / np.sqrt(2.0)))
        sq[:] = (mu * mu + sd * sd) * Phi + mu * sd * phi
        np.copyto(sq, np.square(np.maximum(mu, 0.0)), where=~pos)
        np.maximum(sq, 0.0, out=sq)
    return fvals + mu @ lam + sq.sum(axis=1) / (2.0 * rho)


def mc_improvement_stats(mu, sd, Zc, fvals, lam, rho, y_min, drop_max,
                         sd_f=None, zf=None):
    """Monte Carlo improvement mean and standard error per candidate.

    mu, sd: (q, m) constraint predictive moments; Zc: (T, m) standard
    normal draws shared across candidates; fvals: (q,) objective values
    (posterior means when the objective is modeled, in which case sd_f
    (q,) and zf (T,) add the objective draw).  Returns (means, ses),
    each (q,), where means[i] = mean_t max(0, y_min - L_t(x_i)) and ses
    the corresponding standard errors (ddof=1; zero when T == 1).
    """
    mu = np.asarray(mu, dtype=np.float64)
    sd = np.asarray(sd, dtype=np.float64)
    Zc = np.asarray(Zc, dtype=np.float64)
    T = Zc.shape[0]
    # (T, q, m) sampled constraint values
    yc = mu[None, :, :] + sd[None, :, :] * Zc[:, None, :]
    h = yc if drop_max else np.maximum(yc, 0.0)
    comp = fvals[None, :] + yc @ lam + np.sum(h * h, axis=2) / (2.0 * rho)
    if sd_f is not None:
        comp = comp + sd_f[None, :] * np.asarray(zf)[:, None]
    imp = np.maximum(y_min - comp, 0.0)
    means = imp.mean(axis=0)
    if T > 1:
        ses = imp.std(axis=0, ddof=1) / np.sqrt(T)
    else:
        ses = np.zeros_like(means)
    return means, ses


def _erf(x):
    from scipy.special import erf

    return erf(x)
