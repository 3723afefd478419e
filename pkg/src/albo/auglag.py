"""Augmented Lagrangian bookkeeping.

The composite for objective f and constraint values c under multipliers
lam >= 0 and penalty parameter rho > 0 is

    L(x) = f(x) + lam . c(x) + (1 / (2 rho)) * sum_j max(0, c_j(x))^2.

``drop_max`` switches to the variant that squares c_j directly, which is
smooth but penalizes slack constraints.  Outer updates move lam toward
the constraint violation and halve rho only when the chosen point is
invalid.
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ALParams:
    """Multipliers, penalty parameter, and outer-iteration counter."""

    lam: np.ndarray
    rho: float
    k: int = 0

    def __post_init__(self):
        lam = np.atleast_1d(np.asarray(self.lam, dtype=np.float64))
        if lam.ndim != 1:
            raise ValueError("lam must be a vector")
        if not np.all(lam >= 0.0):
            raise ValueError("multipliers must be nonnegative")
        if not (np.isfinite(self.rho) and self.rho > 0.0):
            raise ValueError("rho must be positive")
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "rho", float(self.rho))


@dataclass(frozen=True)
class ALValue:
    """Composite value split into its three terms."""

    value: float
    objective: float
    multiplier_term: float
    penalty_term: float


def al_value(f: float, c, params: ALParams, drop_max: bool = False) -> ALValue:
    """Composite at a point with known objective and constraint values."""
    c = np.atleast_1d(np.asarray(c, dtype=np.float64))
    if c.shape != params.lam.shape:
        raise ValueError("constraint vector length does not match lam")
    mult = float(params.lam @ c)
    h = c if drop_max else np.maximum(c, 0.0)
    pen = float(h @ h) / (2.0 * params.rho)
    f = float(f)
    return ALValue(value=f + mult + pen, objective=f,
                   multiplier_term=mult, penalty_term=pen)


def update_multipliers(params: ALParams, c_at_xk) -> ALParams:
    """lam_j <- max(0, lam_j + c_j / rho); rho and k unchanged."""
    c = np.atleast_1d(np.asarray(c_at_xk, dtype=np.float64))
    lam = np.maximum(0.0, params.lam + c / params.rho)
    return ALParams(lam=lam, rho=params.rho, k=params.k)


def update_penalty(params: ALParams, c_at_xk) -> ALParams:
    """Halve rho iff the chosen point violates some constraint."""
    c = np.atleast_1d(np.asarray(c_at_xk, dtype=np.float64))
    rho = params.rho / 2.0 if float(np.max(c)) > 0.0 else params.rho
    return ALParams(lam=params.lam, rho=rho, k=params.k)


def best_al_value(history, params: ALParams, drop_max: bool = False) -> float:
    """Smallest composite over evaluated points, under the given params."""
    if len(history) == 0:
        raise ValueError("empty history")
    return min(al_value(e.f, e.c, params, drop_max).value for e in history)


def argbest_al(history, params: ALParams, drop_max: bool = False) -> int:
    """Index into ``history`` of the smallest composite (first on ties)."""
    if len(history) == 0:
        raise ValueError("empty history")
    vals = [al_value(e.f, e.c, params, drop_max).value for e in history]
    return int(np.argmin(vals))
