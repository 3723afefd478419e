"""Acquisition functions over the augmented-Lagrangian composite.

Candidates are scored against surrogates of the constraints (and of the
objective when it is not known in closed form).  Two families:

* expected composite value (``ey``): minimize the posterior mean of the
  composite, using E{max(0, Y)^2} = (mu^2 + s^2) Phi(mu/s) + mu s phi(mu/s)
  for the hinge term;
* expected improvement (``ei``): maximize E max(0, y_min - L(x)), which
  has no closed form under the hinge and is estimated by Monte Carlo
  over the constraint posteriors; with the hinge dropped and a single
  constraint the improvement integral collapses to a closed form
  (:func:`analytic_ei_nomax`).

All points here live in the GP's unit-cube coordinates.
"""

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import kernels
from .auglag import ALParams
from .gp import GPSurrogate

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
_SQRT1_2 = math.sqrt(0.5)


def _phi(z: float) -> float:
    return _INV_SQRT_2PI * math.exp(-0.5 * z * z)


def _Phi(z: float) -> float:
    return 0.5 * (1.0 + math.erf(z * _SQRT1_2))


def ei_gaussian(mu: float, sigma: float, f_min: float) -> float:
    """Expected improvement of a Gaussian belief below incumbent f_min."""
    if sigma < 0.0:
        raise ValueError("sigma must be nonnegative")
    gap = f_min - mu
    if sigma == 0.0:
        return max(0.0, gap)
    z = gap / sigma
    return max(0.0, gap * _Phi(z) + sigma * _phi(z))


def expected_sq_hinge(mu: float, sigma: float) -> float:
    """E{max(0, Y)^2} for Y ~ N(mu, sigma^2)."""
    if sigma < 0.0:
        raise ValueError("sigma must be nonnegative")
    if sigma == 0.0:
        return max(0.0, mu) ** 2
    z = mu / sigma
    return max(0.0, (mu * mu + sigma * sigma) * _Phi(z)
               + mu * sigma * _phi(z))


@dataclass(frozen=True)
class AcquisitionScore:
    value: float
    std_error: float


@dataclass
class AcquisitionContext:
    """Everything needed to score a candidate.

    ``constraint_models`` are GPs over unit-cube inputs, one per
    constraint; ``y_min`` is the best composite over evaluated points
    under ``params`` (must be finite for improvement scores);
    ``objective_model`` is set only when the objective is blackbox too.
    """

    constraint_models: tuple
    params: ALParams
    y_min: float
    drop_max: bool = False
    T: int = 100
    rng_seed: int = 0
    objective_model: Optional[GPSurrogate] = None

    def __post_init__(self):
        if self.T < 1:
            raise ValueError("T must be at least 1")
        if not self.constraint_models:
            raise ValueError("need at least one constraint model")


def _constraint_moments(ctx: AcquisitionContext, U: np.ndarray):
    cols = [s.predict_batch(U) for s in ctx.constraint_models]
    mu = np.column_stack([c[0] for c in cols])
    sd = np.column_stack([c[1] for c in cols])
    return mu, sd


def _objective_values(ctx: AcquisitionContext, U: np.ndarray, fvals):
    """Resolve objective values: known values, or posterior moments."""
    if fvals is not None:
        return np.asarray(fvals, dtype=np.float64), None
    if ctx.objective_model is None:
        raise ValueError("need objective values or an objective model")
    mu_f, sd_f = ctx.objective_model.predict_batch(U)
    return mu_f, sd_f


def score_ey(U, ctx: AcquisitionContext, fvals=None) -> np.ndarray:
    """Expected composite value at each unit-cube row of U; lower is better."""
    U = np.atleast_2d(np.asarray(U, dtype=np.float64))
    mu, sd = _constraint_moments(ctx, U)
    f_use, _ = _objective_values(ctx, U, fvals)
    return kernels.ey_scores(mu, sd, f_use, ctx.params.lam, ctx.params.rho,
                             ctx.drop_max)


def score_mc_ei(U, ctx: AcquisitionContext, fvals=None, rng=None):
    """Monte Carlo expected improvement at each row of U.

    Returns (means, standard errors).  The T draws are shared across
    candidates, so scores are comparable within one call.
    """
    if not np.isfinite(ctx.y_min):
        raise ValueError("y_min must be finite for improvement scoring")
    U = np.atleast_2d(np.asarray(U, dtype=np.float64))
    if rng is None:
        rng = np.random.default_rng(ctx.rng_seed)
    mu, sd = _constraint_moments(ctx, U)
    f_use, sd_f = _objective_values(ctx, U, fvals)
    Zc = rng.standard_normal((ctx.T, len(ctx.constraint_models)))
    zf = rng.standard_normal(ctx.T) if sd_f is not None else None
    return kernels.mc_improvement_stats(mu, sd, Zc, f_use, ctx.params.lam,
                                        ctx.params.rho, ctx.y_min,
                                        ctx.drop_max, sd_f=sd_f, zf=zf)


def ey_composite(x, ctx: AcquisitionContext,
                 f_known: Optional[Callable] = None) -> float:
    """Expected composite value at one unit-cube point.

    ``f_known`` maps a batch of unit points to objective values; omit it
    to use ``ctx.objective_model`` (the expectation is linear in the
    objective, so only its posterior mean enters).
    """
    U = np.asarray(x, dtype=np.float64).reshape(1, -1)
    fvals = np.atleast_1d(f_known(U)) if f_known is not None else None
    return float(score_ey(U, ctx, fvals)[0])


def mc_ei(x, ctx: AcquisitionContext,
          f_known: Optional[Callable] = None) -> AcquisitionScore:
    """Monte Carlo expected improvement at one unit-cube point.

    Draws are seeded from ``ctx.rng_seed``, so repeated calls with the
    same context reproduce the same estimate.
    """
    U = np.asarray(x, dtype=np.float64).reshape(1, -1)
    fvals = np.atleast_1d(f_known(U)) if f_known is not None else None
    means, ses = score_mc_ei(U, ctx, fvals,
                             rng=np.random.default_rng(ctx.rng_seed))
    return AcquisitionScore(value=float(means[0]), std_error=float(ses[0]))


def analytic_ei_nomax(f: float, mu: float, sigma: float, params: ALParams,
                      y_min: float) -> float:
    """Closed-form improvement for one constraint with the hinge dropped.

    The composite L(Y) = f + lam Y + Y^2 / (2 rho) dips below ``y_min``
    on an interval of Y (empty when the discriminant is negative), and
    the truncated-Gaussian moments of the improvement integrate exactly.
    """
    if len(params.lam) != 1:
        raise ValueError("closed form requires exactly one constraint")
    lam = float(params.lam[0])
    rho = params.rho
    disc = lam * lam - 2.0 * (f - y_min) / rho
    if disc < 0.0:
        return 0.0
    if sigma < 0.0:
        raise ValueError("sigma must be nonnegative")
    if sigma == 0.0:
        return max(0.0, y_min - (f + lam * mu + mu * mu / (2.0 * rho)))
    root = math.sqrt(disc)
    u_lo = rho * (-lam - root)
    u_hi = rho * (-lam + root)
    v1 = (u_lo - mu) / sigma
    v2 = (u_hi - mu) / sigma
    dPhi = _Phi(v2) - _Phi(v1)
    dphi = _phi(v2) - _phi(v1)
    ei = ((y_min - f - lam * mu - (mu * mu + sigma * sigma) / (2.0 * rho))
          * dPhi
          + (sigma * mu / rho + lam * sigma) * dphi
          + sigma * sigma / (2.0 * rho) * (v2 * _phi(v2) - v1 * _phi(v1)))
    return max(0.0, ei)
