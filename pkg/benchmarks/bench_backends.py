"""Time the compiled kernel backend against the numpy reference.

Workloads are shaped like one real inner-search iteration: a few dozen
training points, a ~thousand-point candidate cloud, two constraint
surrogates, and a hundred Monte Carlo draws.  For each hot kernel the
script reports the per-call time of both backends, the speedup, and the
largest elementwise disagreement on identical inputs.

    python3 benchmarks/bench_backends.py
    python3 benchmarks/bench_backends.py --q 4000 --T 400 --number 200
"""

import argparse
import timeit

import numpy as np

from albo.kernels import _ref

try:
    from albo.kernels import _core
except ImportError:
    _core = None


def build_workloads(q, n, m, T, seed):
    rng = np.random.default_rng(seed)
    X = rng.random((n, 2))
    U = rng.random((q, 2))
    mu = rng.normal(size=(q, m))
    sd = np.abs(rng.normal(size=(q, m))) + 1e-3
    fvals = U.sum(axis=1)
    lam = np.array([0.4, 0.0])[:m]
    Zc = rng.standard_normal((T, m))
    sd_f = np.abs(rng.normal(size=q)) + 1e-3
    zf = rng.standard_normal(T)
    ell, rho, y_min = 0.3, 0.5, 0.7
    return [
        ("sqexp_cross (q x n)", lambda b: b.sqexp_cross(U, X, ell)),
        ("sqexp_sym (n x n)", lambda b: b.sqexp_sym(U[:100], ell)),
        ("ey_scores hinge", lambda b: b.ey_scores(mu, sd, fvals, lam, rho, False)),
        ("ey_scores squared", lambda b: b.ey_scores(mu, sd, fvals, lam, rho, True)),
        ("mc stats, known f", lambda b: b.mc_improvement_stats(
            mu, sd, Zc, fvals, lam, rho, y_min, False)),
        ("mc stats, modeled f", lambda b: b.mc_improvement_stats(
            mu, sd, Zc, fvals, lam, rho, y_min, False, sd_f, zf)),
    ]


def per_call(fn, number, repeats):
    return min(timeit.repeat(fn, number=number, repeat=repeats)) / number


def max_disagreement(a, b):
    if isinstance(a, tuple):
        return max(max_disagreement(x, y) for x, y in zip(a, b))
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b))))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--q", type=int, default=1000, help="candidate cloud size")
    ap.add_argument("--n", type=int, default=40, help="training design size")
    ap.add_argument("--m", type=int, default=2, help="number of constraints")
    ap.add_argument("--T", type=int, default=100, help="Monte Carlo draws")
    ap.add_argument("--number", type=int, default=100,
                    help="calls per timing sample")
    ap.add_argument("--repeats", type=int, default=5,
                    help="timing samples (min is reported)")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    work = build_workloads(args.q, args.n, args.m, args.T, args.seed)
    print(f"q={args.q} n={args.n} m={args.m} T={args.T}  "
          f"(min of {args.repeats} x {args.number} calls)")
    if _core is None:
        print("compiled extension not built; timing the numpy reference only")
        for name, call in work:
            t = per_call(lambda: call(_ref), args.number, args.repeats)
            print(f"  {name:<22} {t * 1e6:9.1f} us")
        return

    hdr = f"  {'kernel':<22} {'numpy':>10} {'compiled':>10} {'speedup':>8} {'max|diff|':>10}"
    print(hdr)
    print("  " + "-" * (len(hdr) - 2))
    for name, call in work:
        diff = max_disagreement(call(_ref), call(_core))
        t_ref = per_call(lambda: call(_ref), args.number, args.repeats)
        t_core = per_call(lambda: call(_core), args.number, args.repeats)
        print(f"  {name:<22} {t_ref * 1e6:7.1f} us {t_core * 1e6:7.1f} us "
              f"{t_ref / t_core:7.1f}x {diff:10.1e}")


if __name__ == "__main__":
    main()
