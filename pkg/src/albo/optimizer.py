"""Surrogate-assisted augmented-Lagrangian search.

The driver alternates two loops.  The inner loop proposes one point at a
time by scoring a fresh cloud of candidates against the constraint
surrogates under the current multipliers: either by maximum expected
improvement of the composite (``EI`` variants, Monte Carlo scored) or by
minimum expected composite value (``EY`` variants).  When the inner loop
stops making progress, the outer loop updates the multipliers from the
constraint values at the best composite point of the finished inner
loop, halves the penalty parameter if that point was invalid, and starts
a new inner loop.

Candidate clouds are uniform on the sublevel set {x : f(x) < f*}, where
f* is the best objective value seen at a strictly valid point (the whole
box while no valid point is known, or when the objective is blackbox).

Inner-loop convergence, per trial:

* ``stall``: ``stall_limit`` consecutive evaluations without improving
  the incumbent composite;
* ``ei_small`` (EI variants): the best usable candidate improvement
  fell below ``ei_tol`` while improvement scoring was active;
* thin-improvement fallback (EI variants): when fewer than
  ``ei_fraction`` of candidates show positive improvement, the trial is
  scored by expected composite value instead, and ``ei_tol`` does not
  apply.

The ``-nomax`` variants square the constraint values directly instead of
their hinge, making the composite smooth at the boundary.
"""

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .acquisition import AcquisitionContext, score_ey, score_mc_ei
from .auglag import ALParams, argbest_al, best_al_value, update_multipliers, \
    update_penalty
from .gp import DesignSet, GPHyper, fit_gp, mle_lengthscale, update_gp
from .problems import BlackboxError, Evaluation, Hyperrectangle, Problem, \
    evaluate

log = logging.getLogger(__name__)

VARIANTS = ("EY", "EI", "EY_nomax", "EI_nomax")

_COLLISION_TOL = 1e-12
_MAX_ZERO_EVAL_OUTERS = 20


@dataclass
class SearchConfig:
    """Knobs of the augmented-Lagrangian search."""

    variant: str = "EI"
    budget: int = 100
    n_init: int = 10
    n_cand: int = 1000
    T: int = 100
    stall_limit: int = 10
    ei_tol: float = 1e-5
    ei_fraction: float = 0.05
    seed: int = 0

    def validate(self, dim: int):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; "
                             f"choose from {VARIANTS}")
        if self.n_init < dim + 1:
            raise ValueError("n_init must be at least dim + 1")
        if self.budget < self.n_init:
            raise ValueError("budget must cover the initial design")
        if self.n_cand < 1 or self.T < 1 or self.stall_limit < 1:
            raise ValueError("n_cand, T, stall_limit must be positive")
        if not 0.0 < self.ei_fraction < 1.0:
            raise ValueError("ei_fraction must be in (0, 1)")
        if self.ei_tol < 0.0:
            raise ValueError("ei_tol must be nonnegative")

    @property
    def drop_max(self) -> bool:
        return self.variant.endswith("_nomax")

    @property
    def use_ei(self) -> bool:
        return self.variant.startswith("EI")


@dataclass
class TraceRow:
    """One counted evaluation with the search state that proposed it."""

    n: int
    x: np.ndarray
    f: float
    c: np.ndarray
    valid: bool
    best_valid_f: float
    lam: np.ndarray
    rho: float
    k: int
    decision: str


@dataclass
class ProgressTrace:
    """Per-evaluation progress record of one run."""

    dim: int
    m: int
    rows: list = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.rows)

    @property
    def best_valid_f(self) -> float:
        """Best objective at a strictly valid point so far (nan if none)."""
        return self.rows[-1].best_valid_f if self.rows else float("nan")

    def record(self, ev: Evaluation, lam, rho: float, k: int, decision: str):
        best = self.best_valid_f
        if ev.valid and not (best <= ev.f):  # also replaces nan
            best = ev.f
        self.rows.append(TraceRow(
            n=len(self.rows) + 1, x=ev.x.copy(), f=ev.f, c=ev.c.copy(),
            valid=ev.valid, best_valid_f=best,
            lam=np.atleast_1d(np.asarray(lam, dtype=np.float64)).copy(),
            rho=float(rho), k=int(k), decision=decision))


def initial_design(bounds: Hyperrectangle, n_init: int, rng) -> np.ndarray:
    """Space-filling start: best of 50 Latin hypercube draws by maximin.

    Each of the 50 draws stratifies every coordinate into ``n_init``
    equal bins with one point per bin; the draw with the largest minimum
    pairwise distance wins.  Returns points in original coordinates.
    """
    if n_init < 2:
        raise ValueError("need at least two initial points")
    rng = np.random.default_rng(rng)
    d = bounds.dim
    best_U, best_gap = None, -np.inf
    for _ in range(50):
        U = np.empty((n_init, d))
        for j in range(d):
            U[:, j] = (rng.permutation(n_init) + rng.random(n_init)) / n_init
        d2 = np.sum((U[:, None, :] - U[None, :, :]) ** 2, axis=-1)
        np.fill_diagonal(d2, np.inf)
        gap = d2.min()
        if gap > best_gap:
            best_U, best_gap = U, gap
    return bounds.from_unit(best_U)


@dataclass(frozen=True)
class CandidateSet:
    """Uniform draws on the objective-improving sublevel set."""

    U: np.ndarray                       # (q, d) unit coordinates
    X: np.ndarray                       # (q, d) original coordinates
    f_values: Optional[np.ndarray]      # (q,) when the objective is known
    n_proposed: int
    truncated: bool

    def __len__(self) -> int:
        return self.U.shape[0]


def _objective_batch(objective, X: np.ndarray) -> np.ndarray:
    """Evaluate a known objective on rows of X, vectorized when possible."""
    try:
        v = np.asarray(objective(X), dtype=np.float64)
    except Exception:
        v = None
    if v is not None and v.shape == (X.shape[0],):
        # guard against an objective that silently mis-broadcasts
        probe = float(objective(X[0]))
        if abs(probe - v[0]) <= 1e-9 * max(1.0, abs(probe)):
            return v
    return np.array([float(objective(x)) for x in X])


def gen_oic_candidates(bounds: Hyperrectangle, objective, f_star_min: float,
                       n_cand: int, rng,
                       max_proposals: int = 1_000_000) -> CandidateSet:
    """Rejection-sample ``n_cand`` points with f below the valid incumbent.

    With no valid incumbent (``f_star_min`` infinite) or no known
    objective, draws are uniform on the whole box.  If the sublevel set
    is so small that ``max_proposals`` uniform draws cannot fill the
    request, returns what was accepted with ``truncated`` set (and a
    logged warning).
    """
    d = bounds.dim
    rng = np.random.default_rng(rng)
    filtering = objective is not None and np.isfinite(f_star_min)
    got_u, got_f = [], []
    n_acc = 0
    n_prop = 0
    while n_acc < n_cand and n_prop < max_proposals:
        b = min(4096, max_proposals - n_prop)
        U = rng.random((b, d))
        n_prop += b
        if objective is not None:
            fv = _objective_batch(objective, bounds.from_unit(U))
            if filtering:
                keep = fv < f_star_min
                U, fv = U[keep], fv[keep]
            got_f.append(fv)
        got_u.append(U)
        n_acc += U.shape[0]
    U = np.vstack(got_u) if got_u else np.empty((0, d))
    U = U[:n_cand]
    fv = np.concatenate(got_f)[:n_cand] if got_f else None
    truncated = U.shape[0] < n_cand
    if truncated:
        log.warning("candidate region too small: %d/%d accepted after %d "
                    "proposals (f* = %r)", U.shape[0], n_cand, n_prop,
                    f_star_min)
    return CandidateSet(U=U, X=bounds.from_unit(U), f_values=fv,
                        n_proposed=n_prop, truncated=truncated)


@dataclass(frozen=True)
class InnerProposal:
    """Next point to evaluate, in original and unit coordinates."""

    x: np.ndarray
    u: np.ndarray
    decision: str               # "EI" or "EY"
    score: float
    ei_fraction: Optional[float] = None


@dataclass(frozen=True)
class InnerConverged:
    reason: str                 # "stall" | "ei_small" | "no_candidates"


def _pick_distinct(order: np.ndarray, U: np.ndarray,
                   design_X: np.ndarray) -> int:
    """First index along ``order`` not colliding with a design point."""
    for idx in order:
        gap2 = np.min(np.sum((design_X - U[idx]) ** 2, axis=1))
        if gap2 > _COLLISION_TOL ** 2:
            return int(idx)
    return -1


def inner_search(ctx: AcquisitionContext, config: SearchConfig,
                 bounds: Hyperrectangle, objective, f_star_min: float,
                 rng, stall_count: int = 0):
    """One inner-loop trial: a proposal, or a convergence signal.

    Draws a candidate cloud, scores it under ``ctx``, and returns either
    an :class:`InnerProposal` or an :class:`InnerConverged`.  Ties break
    toward the lowest candidate index in generation order; candidates
    within 1e-12 of an evaluated point are skipped.
    """
    if stall_count >= config.stall_limit:
        return InnerConverged("stall")
    cands = gen_oic_candidates(bounds, objective, f_star_min,
                               config.n_cand, rng)
    if len(cands) == 0:
        return InnerConverged("no_candidates")
    design_X = ctx.constraint_models[0].design.X

    ei_frac = None
    if config.use_ei:
        means, _ = score_mc_ei(cands.U, ctx, cands.f_values, rng=rng)
        ei_frac = float(np.mean(means > 0.0))
        if ei_frac >= config.ei_fraction:
            order = np.argsort(-means, kind="stable")
            idx = _pick_distinct(order, cands.U, design_X)
            if idx < 0:
                return InnerConverged("no_candidates")
            if means[idx] < config.ei_tol:
                return InnerConverged("ei_small")
            return InnerProposal(x=cands.X[idx], u=cands.U[idx],
                                 decision="EI", score=float(means[idx]),
                                 ei_fraction=ei_frac)
        # improvement region too thin: score by expected value instead

    scores = score_ey(cands.U, ctx, cands.f_values)
    order = np.argsort(scores, kind="stable")
    idx = _pick_distinct(order, cands.U, design_X)
    if idx < 0:
        return InnerConverged("no_candidates")
    return InnerProposal(x=cands.X[idx], u=cands.U[idx], decision="EY",
                         score=float(scores[idx]), ei_fraction=ei_frac)


def _fit_with_mle(design: DesignSet):
    fitted = fit_gp(design, GPHyper())
    hypers = mle_lengthscale(fitted)
    return fitted if hypers is fitted.hypers else fit_gp(design, hypers)


def _refit(model, u, value):
    updated = update_gp(model, u, value)
    hypers = mle_lengthscale(updated)
    return updated if hypers is updated.hypers else fit_gp(updated.design,
                                                           hypers)


def optim_auglag(problem: Problem, config: SearchConfig = None) -> ProgressTrace:
    """Run the surrogate-assisted augmented-Lagrangian search.

    Spends exactly ``config.budget`` counted evaluations unless the
    outer loop reaches a fixed point with nothing left to propose.
    Every evaluation refits the surrogates (rank-one update plus
    lengthscale re-selection).
    """
    if config is None:
        config = SearchConfig()
    config.validate(problem.dim)
    rng = np.random.default_rng(config.seed)
    bounds = problem.bounds
    m = problem.m
    drop_max = config.drop_max

    al = ALParams(lam=np.zeros(m), rho=0.5, k=0)
    trace = ProgressTrace(dim=problem.dim, m=m)
    history = []

    def counted_eval(x):
        try:
            return evaluate(problem, x)
        except BlackboxError as exc:
            exc.partial_trace = trace
            raise

    for x in initial_design(bounds, config.n_init, rng):
        ev = counted_eval(x)
        history.append(ev)
        trace.record(ev, al.lam, al.rho, al.k, "init")

    U0 = bounds.to_unit(np.array([e.x for e in history]))
    models = [_fit_with_mle(DesignSet(U0, np.array([e.c[j] for e in history])))
              for j in range(m)]
    model_f = None
    if not problem.known_objective:
        model_f = _fit_with_mle(DesignSet(U0, np.array([e.f for e in history])))

    f_star_min = min((e.f for e in history if e.valid), default=np.inf)
    y_min = best_al_value(history, al, drop_max)
    stall = 0
    inner_evals = 0
    inner_start = 0
    zero_eval_outers = 0

    while len(history) < config.budget:
        ctx = AcquisitionContext(
            constraint_models=tuple(models), params=al, y_min=y_min,
            drop_max=drop_max, T=config.T, objective_model=model_f)
        res = inner_search(ctx, config, bounds, problem.objective,
                           f_star_min, rng, stall)
        if isinstance(res, InnerProposal):
            ev = counted_eval(res.x)
            history.append(ev)
            trace.record(ev, al.lam, al.rho, al.k, res.decision)
            models = [_refit(mdl, res.u, ev.c[j])
                      for j, mdl in enumerate(models)]
            if model_f is not None:
                model_f = _refit(model_f, res.u, ev.f)
            if ev.valid and ev.f < f_star_min:
                f_star_min = ev.f
            y_new = best_al_value(history, al, drop_max)
            stall = 0 if y_new < y_min else stall + 1
            y_min = y_new
            inner_evals += 1
            zero_eval_outers = 0
        else:
            # inner loop done: update multipliers from the best composite
            # point of the finished loop (whole history if it was empty)
            seg = history[inner_start:] if inner_evals > 0 else history
            xk = seg[argbest_al(seg, al, drop_max)]
            bumped = update_penalty(update_multipliers(al, xk.c), xk.c)
            unchanged = (np.array_equal(bumped.lam, al.lam)
                         and bumped.rho == al.rho)
            if inner_evals == 0:
                zero_eval_outers += 1
                if unchanged:
                    log.debug("fixed point after %d evaluations; stopping",
                              len(history))
                    break
                if zero_eval_outers >= _MAX_ZERO_EVAL_OUTERS:
                    log.debug("%d outer updates without an evaluation; "
                              "stopping", zero_eval_outers)
                    break
            al = ALParams(lam=bumped.lam, rho=bumped.rho, k=al.k + 1)
            stall = 0
            inner_evals = 0
            inner_start = len(history)
            y_min = best_al_value(history, al, drop_max)
    return trace
