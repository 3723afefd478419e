"""Command-line interface.

Subcommands:

* ``run``    one run of one method, optionally writing the trace CSV;
* ``bench``  repeated runs, trace files plus an aggregate CSV;
* ``table``  re-aggregate existing trace files at chosen checkpoints.

``bench`` and ``run`` accept ``--config FILE`` with ``key = value``
lines (``#`` comments); command-line flags beat config values, which
beat defaults.

Exit codes: 0 success, 1 usage or configuration error, 2 blackbox
failure, 3 numerical failure.
"""

import argparse
import logging
import sys

import numpy as np

from .comparators import SannConfig
from .gp import FactorizationError
from .harness import ExperimentSpec, METHODS, collect_traces, format_tables, \
    read_trace, run_experiment, run_one, summarize, write_aggregate, \
    write_trace
from .optimizer import SearchConfig
from .problems import BlackboxError


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _parse_checkpoints(text):
    try:
        pts = tuple(int(p) for p in str(text).replace(" ", "").split(","))
    except ValueError:
        raise UsageError(f"bad checkpoint list {text!r}")
    if not pts:
        raise UsageError("empty checkpoint list")
    return pts


_PROBLEM_KEYS = {"problem": str, "blackbox_cmd": str, "dim": int, "m": int}
_SPEC_KEYS = {"method": str, "reps": int, "budget": int, "base_seed": int,
              "checkpoints": _parse_checkpoints, "out_dir": str,
              "workers": int, "placeholder": float, **_PROBLEM_KEYS}
_SEARCH_KEYS = {"n_init": int, "n_cand": int, "T": int, "stall_limit": int,
                "ei_tol": float, "ei_fraction": float}
_SANN_KEYS = {"initial_temperature": float, "evals_per_temperature": int,
              "penalty_weight": float, "n_scale_probes": int}
_RUN_KEYS = {"method": str, "budget": int, "seed": int, "rep": int,
             "out": str, **_PROBLEM_KEYS}


def load_config(path):
    """Parse a key = value config file into a string dict."""
    values = {}
    try:
        with open(path) as fh:
            for lineno, raw in enumerate(fh, 1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise UsageError(
                        f"{path}:{lineno}: expected 'key = value', "
                        f"got {raw.strip()!r}")
                key, value = line.split("=", 1)
                values[key.strip().replace("-", "_")] = value.strip()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}")
    return values


def _merge(args, known_keys, config):
    """CLI flag > config file > None, with unknown-key detection."""
    merged = {}
    for name, conv in known_keys.items():
        v = getattr(args, name, None)
        if v is None and name in config:
            raw = config[name]
            try:
                v = conv(raw)
            except (ValueError, TypeError):
                raise UsageError(f"bad config value {name} = {raw!r}")
        merged[name] = v
    return merged


def _check_config_keys(config, *key_tables):
    known = set()
    for table in key_tables:
        known.update(table)
    unknown = sorted(set(config) - known)
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(unknown)}")


def _search_config(values):
    kw = {k: v for k, v in values.items() if v is not None}
    return SearchConfig(**kw) if kw else None


def _sann_config(values):
    kw = {k: v for k, v in values.items() if v is not None}
    return SannConfig(**kw) if kw else None


def _add_problem_flags(p):
    p.add_argument("--problem", choices=("toy", "external"),
                   help="problem to optimize (default toy)")
    p.add_argument("--blackbox-cmd", dest="blackbox_cmd", metavar="CMD",
                   help="external simulator command (line protocol)")
    p.add_argument("--dim", type=int, help="external problem dimension")
    p.add_argument("--m", type=int, help="external constraint count")


def _add_search_flags(p):
    p.add_argument("--n-init", dest="n_init", type=int,
                   help="initial space-filling design size")
    p.add_argument("--n-cand", dest="n_cand", type=int,
                   help="candidates per inner trial")
    p.add_argument("--T", dest="T", type=int,
                   help="Monte Carlo draws per improvement score")
    p.add_argument("--stall-limit", dest="stall_limit", type=int)
    p.add_argument("--ei-tol", dest="ei_tol", type=float)
    p.add_argument("--ei-fraction", dest="ei_fraction", type=float)


def build_parser() -> _Parser:
    parser = _Parser(prog="albo",
                     description="Surrogate-assisted augmented-Lagrangian "
                                 "optimization of blackbox-constrained "
                                 "problems.")
    parser.add_argument("-v", "--verbose", action="count", default=0,
                        help="-v info, -vv debug")
    sub = parser.add_subparsers(dest="command", metavar="command")

    p_run = sub.add_parser("run", help="one optimization run")
    p_run.add_argument("--config", help="key = value config file")
    p_run.add_argument("--method", choices=METHODS)
    p_run.add_argument("--budget", type=int)
    p_run.add_argument("--seed", type=int)
    p_run.add_argument("--rep", type=int,
                       help="repetition label written into the trace")
    p_run.add_argument("--out", help="trace CSV path")
    _add_problem_flags(p_run)
    _add_search_flags(p_run)
    p_run.set_defaults(func=cmd_run)

    p_bench = sub.add_parser("bench", help="repeated-run benchmark")
    p_bench.add_argument("--config", help="key = value config file")
    p_bench.add_argument("--method", choices=METHODS)
    p_bench.add_argument("--reps", type=int)
    p_bench.add_argument("--budget", type=int)
    p_bench.add_argument("--base-seed", dest="base_seed", type=int)
    p_bench.add_argument("--checkpoints", type=_parse_checkpoints,
                         help="comma-separated budgets, e.g. 25,50,100")
    p_bench.add_argument("--out-dir", dest="out_dir")
    p_bench.add_argument("--workers", type=int,
                         help="worker processes (default serial)")
    p_bench.add_argument("--placeholder", type=float,
                         help="value standing in for runs with no valid "
                              "point")
    _add_problem_flags(p_bench)
    _add_search_flags(p_bench)
    p_bench.set_defaults(func=cmd_bench)

    p_table = sub.add_parser("table",
                             help="aggregate existing trace files")
    p_table.add_argument("sources", nargs="+",
                         help="trace files, globs, or directories")
    p_table.add_argument("--checkpoints", type=_parse_checkpoints)
    p_table.add_argument("--placeholder", type=float)
    p_table.add_argument("--out", help="aggregate CSV path")
    p_table.set_defaults(func=cmd_table)
    return parser


def cmd_run(args) -> int:
    config = load_config(args.config) if args.config else {}
    _check_config_keys(config, _RUN_KEYS, _SEARCH_KEYS, _SANN_KEYS)
    opts = _merge(args, _RUN_KEYS, config)
    search_kw = _merge(args, _SEARCH_KEYS, config)
    sann_kw = _merge(args, _SANN_KEYS, config)
    method = opts["method"] or "EI"
    budget = opts["budget"] if opts["budget"] is not None else 100
    spec = ExperimentSpec(
        method=method, reps=1,
        budget=budget,
        base_seed=opts["seed"] if opts["seed"] is not None else 0,
        checkpoints=(budget,),
        problem=opts["problem"] or "toy",
        blackbox_cmd=opts["blackbox_cmd"],
        dim=opts["dim"], m=opts["m"],
        search=_search_config(search_kw),
        sann=_sann_config(sann_kw))
    try:
        spec.validate()
    except ValueError as exc:
        raise UsageError(str(exc))
    trace = run_one(spec, 0)
    best = trace.best_valid_f
    best_txt = f"{best!r}" if np.isfinite(best) else "none"
    print(f"{method}: {len(trace)} evaluations, best valid f = {best_txt}")
    if opts["out"]:
        write_trace(opts["out"], trace, opts["rep"] or 0)
        print(f"trace written to {opts['out']}")
    return 0


def cmd_bench(args) -> int:
    config = load_config(args.config) if args.config else {}
    _check_config_keys(config, _SPEC_KEYS, _SEARCH_KEYS, _SANN_KEYS)
    opts = _merge(args, _SPEC_KEYS, config)
    search_kw = _merge(args, _SEARCH_KEYS, config)
    sann_kw = _merge(args, _SANN_KEYS, config)
    defaults = ExperimentSpec()
    spec = ExperimentSpec(
        method=opts["method"] or defaults.method,
        reps=opts["reps"] if opts["reps"] is not None else defaults.reps,
        budget=opts["budget"] if opts["budget"] is not None
        else defaults.budget,
        base_seed=opts["base_seed"] if opts["base_seed"] is not None
        else defaults.base_seed,
        checkpoints=opts["checkpoints"] or defaults.checkpoints,
        out_dir=opts["out_dir"] or defaults.out_dir,
        problem=opts["problem"] or defaults.problem,
        blackbox_cmd=opts["blackbox_cmd"],
        dim=opts["dim"], m=opts["m"],
        placeholder=opts["placeholder"],
        workers=opts["workers"],
        search=_search_config(search_kw),
        sann=_sann_config(sann_kw))
    try:
        spec.validate()
    except ValueError as exc:
        raise UsageError(str(exc))
    result = run_experiment(spec)
    print(format_tables([result.table]))
    if result.failures:
        print(f"{len(result.failures)} of {spec.reps} repetitions failed; "
              f"see log", file=sys.stderr)
    print(f"aggregate written to {result.aggregate_path}")
    return 0


def cmd_table(args) -> int:
    checkpoints = args.checkpoints or (25, 50, 100)
    groups = collect_traces(args.sources)
    tables = []
    for method, entries in groups.items():
        traces = [read_trace(path)[1] for _, path in entries]
        tables.append(summarize(traces, checkpoints, method=method,
                                placeholder=args.placeholder))
    print(format_tables(tables))
    if args.out:
        write_aggregate(args.out, tables)
        print(f"aggregate written to {args.out}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.verbose >= 2:
            level = logging.DEBUG
        elif args.verbose == 1:
            level = logging.INFO
        else:
            level = logging.WARNING
        logging.basicConfig(level=level,
                            format="%(levelname)s %(name)s: %(message)s")
        if not getattr(args, "func", None):
            parser.print_help(sys.stderr)
            return 1
        return args.func(args)
    except UsageError as exc:
        print(f"albo: {exc}", file=sys.stderr)
        return 1
    except BlackboxError as exc:
        print(f"albo: blackbox failure: {exc}", file=sys.stderr)
        return 2
    # before the ValueError clause: numpy's LinAlgError subclasses it
    except (FactorizationError, np.linalg.LinAlgError,
            FloatingPointError) as exc:
        print(f"albo: numerical failure: {exc}", file=sys.stderr)
        return 3
    except (ValueError, FileNotFoundError) as exc:
        print(f"albo: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
