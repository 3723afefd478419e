"""Baseline searches the surrogate method is benchmarked against.

``run_sann`` is a simulated-annealing descent on an additive penalty
composite, modeled on the classic Belisle scheme: logarithmic cooling
T_s = T0 / ln(s * tmax + e) held for ``tmax`` evaluations per stage,
Gaussian increments on the unit-scaled box whose standard deviation
cools with the temperature (sd = T_s / T0), and Metropolis acceptance.
The composite rescales objective and total constraint violation by
average magnitudes measured from uniform probes of the box; those probes
and any out-of-box proposals (redrawn) are not counted against the
budget, an idealization that favors the baseline.

``run_oic_random`` evaluates one uniform draw per iteration from
{x : f(x) < f*}, the sublevel set of the best strictly valid objective
value seen so far; it shares the candidate distribution with the
surrogate method but none of the modeling.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from .optimizer import ProgressTrace, SearchConfig, _objective_batch
from .problems import Problem, evaluate, peek

log = logging.getLogger(__name__)


@dataclass
class SannConfig:
    initial_temperature: float = 10.0
    evals_per_temperature: int = 10
    penalty_weight: float = 1.0
    budget: int = 100
    seed: int = 0
    n_scale_probes: int = 100

    def validate(self):
        if self.initial_temperature <= 0.0:
            raise ValueError("initial_temperature must be positive")
        if self.evals_per_temperature < 1:
            raise ValueError("evals_per_temperature must be positive")
        if self.penalty_weight < 0.0:
            raise ValueError("penalty_weight must be nonnegative")
        if self.budget < 1:
            raise ValueError("budget must be positive")
        if self.n_scale_probes < 1:
            raise ValueError("n_scale_probes must be positive")


def run_sann(problem: Problem, config: SannConfig = None) -> ProgressTrace:
    """Penalty-composite simulated annealing; see the module docstring."""
    if config is None:
        config = SannConfig()
    config.validate()
    rng = np.random.default_rng(config.seed)
    bounds = problem.bounds
    d = bounds.dim
    m = problem.m
    tmax = config.evals_per_temperature
    t0 = config.initial_temperature
    no_lam = np.zeros(m)
    trace = ProgressTrace(dim=d, m=m)

    # magnitude calibration from uncounted uniform probes
    probes = rng.random((config.n_scale_probes, d))
    fs = np.empty(config.n_scale_probes)
    viols = np.empty(config.n_scale_probes)
    for i, u in enumerate(probes):
        ev = peek(problem, bounds.from_unit(u))
        fs[i] = ev.f
        viols[i] = np.maximum(ev.c, 0.0).sum()
    s_f = float(np.mean(np.abs(fs)))
    s_v = float(np.mean(viols))
    if s_f < 1e-12:
        s_f = 1.0
    if s_v < 1e-12:
        s_v = 1.0

    def composite(ev):
        viol = float(np.maximum(ev.c, 0.0).sum())
        return ev.f / s_f + config.penalty_weight * viol / s_v

    u_cur = rng.random(d)
    ev = evaluate(problem, bounds.from_unit(u_cur))
    trace.record(ev, no_lam, float("nan"), 0, "SANN")
    comp_cur = composite(ev)

    i = 1                       # proposal counter, after the start point
    while len(trace) < config.budget:
        stage = (i - 1) // tmax
        temp = t0 / math.log(stage * tmax + math.e)
        sd = temp / t0
        for _ in range(10_000):
            u_new = u_cur + sd * rng.standard_normal(d)
            if np.all(u_new >= 0.0) and np.all(u_new <= 1.0):
                break
        else:
            u_new = np.clip(u_new, 0.0, 1.0)
        ev = evaluate(problem, bounds.from_unit(u_new))
        trace.record(ev, no_lam, float("nan"), stage, "SANN")
        comp_new = composite(ev)
        dy = comp_new - comp_cur
        if dy <= 0.0 or rng.random() < math.exp(-dy / temp):
            u_cur, comp_cur = u_new, comp_new
        i += 1
    return trace


def run_oic_random(problem: Problem, config: SearchConfig = None) -> ProgressTrace:
    """One uniform draw per iteration from the improving sublevel set.

    Uses only ``budget`` and ``seed`` from the config.  Falls back to
    plain uniform sampling while no strictly valid point is known or the
    objective is blackbox.
    """
    if config is None:
        config = SearchConfig()
    rng = np.random.default_rng(config.seed)
    bounds = problem.bounds
    d = bounds.dim
    no_lam = np.zeros(problem.m)
    trace = ProgressTrace(dim=d, m=problem.m)
    f_star = np.inf

    def draw():
        if problem.objective is None or not np.isfinite(f_star):
            return rng.random(d)
        best_u, best_f = None, np.inf
        for _ in range(256):
            U = rng.random((1024, d))
            fv = _objective_batch(problem.objective, bounds.from_unit(U))
            hit = np.flatnonzero(fv < f_star)
            if hit.size:
                return U[hit[0]]
            j = int(np.argmin(fv))
            if fv[j] < best_f:
                best_u, best_f = U[j], fv[j]
        log.warning("sublevel set below f*=%r too small; using best of "
                    "%d uniform draws", f_star, 256 * 1024)
        return best_u

    while len(trace) < config.budget:
        u = draw()
        ev = evaluate(problem, bounds.from_unit(u))
        trace.record(ev, no_lam, float("nan"), 0, "OIC")
        if ev.valid and ev.f < f_star:
            f_star = ev.f
    return trace


def relaxed_best_curve(trace: ProgressTrace, tol: float = 1e-3) -> np.ndarray:
    """Running best objective among points violating no constraint by > tol.

    The relaxed notion of validity used when comparing against penalty
    methods that only approach the boundary; nan before the first such
    point.
    """
    out = np.full(len(trace), np.nan)
    best = np.nan
    for i, row in enumerate(trace.rows):
        if float(np.max(row.c)) <= tol and not (best <= row.f):
            best = row.f
        out[i] = best
    return out
