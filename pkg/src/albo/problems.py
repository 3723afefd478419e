"""Constrained blackbox problems and the evaluation budget.

A :class:`Problem` couples a bounding box with a blackbox returning the
objective and `m` constraint values at a point.  :func:`evaluate` is the
only counted entry point: it enforces bounds, validates the reply, logs
the call, and increments the budget counter.  Known (free) objectives are
attached separately so optimizers can probe them without spending budget.

External simulators speak a line protocol on stdin/stdout: the parent
writes the coordinates of one point as space-separated decimals on a
single line, the child replies with ``m + 1`` decimals on a single line,
objective first, and flushes after each reply.
"""

import logging
import math
import queue
import shlex
import subprocess
import threading
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

log = logging.getLogger(__name__)


class OutOfBoundsError(ValueError):
    """A point outside the problem's bounding box was submitted."""


class BlackboxError(RuntimeError):
    """The blackbox failed or replied with something unusable.

    ``raw`` holds the offending child output (or a rendering of the bad
    values) so failures can be diagnosed from the exception alone.
    """

    def __init__(self, message, raw=""):
        self.raw = raw
        if raw:
            message = f"{message} [raw: {raw!r}]"
        super().__init__(message)


@dataclass(frozen=True)
class Hyperrectangle:
    """Axis-aligned box; maps between original and unit-cube coordinates."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lower, dtype=np.float64))
        hi = np.atleast_1d(np.asarray(self.upper, dtype=np.float64))
        if lo.ndim != 1 or lo.shape != hi.shape:
            raise ValueError("lower and upper must be 1-d arrays of equal length")
        if not (np.isfinite(lo).all() and np.isfinite(hi).all()):
            raise ValueError("bounds must be finite")
        if not np.all(lo < hi):
            raise ValueError("need lower < upper in every coordinate")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @property
    def dim(self) -> int:
        return self.lower.shape[0]

    @property
    def span(self) -> np.ndarray:
        return self.upper - self.lower

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=np.float64)
        return bool(np.all(x >= self.lower) and np.all(x <= self.upper))

    def to_unit(self, x) -> np.ndarray:
        return (np.asarray(x, dtype=np.float64) - self.lower) / self.span

    def from_unit(self, u) -> np.ndarray:
        return self.lower + np.asarray(u, dtype=np.float64) * self.span


@dataclass(frozen=True)
class Evaluation:
    """One counted blackbox evaluation."""

    x: np.ndarray
    f: float
    c: np.ndarray
    index: int

    @property
    def valid(self) -> bool:
        """Strict feasibility: every constraint value is <= 0."""
        return bool(np.max(self.c) <= 0.0)


@dataclass
class Problem:
    """A constrained problem with a counted evaluation budget.

    ``blackbox`` maps a point (d,) to ``(f, c)`` with ``c`` of length m.
    When ``objective`` is set the objective is known in closed form: it is
    evaluated for free (also vectorized over a leading axis of points) and
    the blackbox's objective slot is ignored.
    """

    bounds: Hyperrectangle
    m: int
    blackbox: Callable
    objective: Optional[Callable] = None
    name: str = ""
    n_evals: int = 0
    _closer: Optional[Callable] = field(default=None, repr=False)

    @property
    def dim(self) -> int:
        return self.bounds.dim

    @property
    def known_objective(self) -> bool:
        return self.objective is not None

    def close(self):
        if self._closer is not None:
            self._closer()
            self._closer = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False


def _check_point(problem: Problem, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if x.shape[0] != problem.dim:
        raise ValueError(f"point has {x.shape[0]} coordinates, "
                         f"problem has {problem.dim}")
    if not problem.bounds.contains(x):
        raise OutOfBoundsError(f"x={x.tolist()} outside bounds")
    return x


def _call_blackbox(problem: Problem, x: np.ndarray):
    f_raw, c = problem.blackbox(x)
    c = np.asarray(c, dtype=np.float64).reshape(-1)
    if c.shape[0] != problem.m:
        raise BlackboxError(
            f"blackbox returned {c.shape[0]} constraint values, "
            f"expected {problem.m}", raw=repr(c.tolist()))
    if problem.objective is not None:
        f = float(problem.objective(x))
    else:
        f = float(f_raw)
    if not (math.isfinite(f) and np.isfinite(c).all()):
        raise BlackboxError(
            f"non-finite evaluation at x={x.tolist()}",
            raw=f"f={f!r} c={c.tolist()!r}")
    return f, c


def evaluate(problem: Problem, x) -> Evaluation:
    """Counted evaluation of ``problem`` at ``x``.

    Raises :class:`OutOfBoundsError` (budget untouched) for points outside
    the box and :class:`BlackboxError` for unusable replies.
    """
    x = _check_point(problem, x)
    f, c = _call_blackbox(problem, x)
    problem.n_evals += 1
    log.debug("eval %d %s: x=%s f=%r c=%s",
              problem.n_evals, problem.name, x.tolist(), f, c.tolist())
    return Evaluation(x=x, f=f, c=c, index=problem.n_evals)


def peek(problem: Problem, x) -> Evaluation:
    """Uncounted evaluation; for comparator calibration and diagnostics."""
    x = _check_point(problem, x)
    f, c = _call_blackbox(problem, x)
    log.debug("peek %s: x=%s f=%r c=%s",
              problem.name, x.tolist(), f, c.tolist())
    return Evaluation(x=x, f=f, c=c, index=0)


# ---------------------------------------------------------------------------
# toy problem: linear objective, one wavy and one circular constraint on
# the unit square

def _toy_values(x):
    x1 = float(x[0])
    x2 = float(x[1])
    f = x1 + x2
    c1 = 1.5 - x1 - 2.0 * x2 - 0.5 * math.sin(2.0 * math.pi * (x1 * x1 - 2.0 * x2))
    c2 = x1 * x1 + x2 * x2 - 1.5
    return f, (c1, c2)


def _toy_blackbox(x):
    f, c = _toy_values(x)
    return f, np.array(c)


def _toy_objective(x):
    x = np.asarray(x, dtype=np.float64)
    return x[..., 0] + x[..., 1]


def toy_problem() -> Problem:
    """Two-dimensional test problem on [0, 1]^2 with a known objective."""
    bounds = Hyperrectangle(np.zeros(2), np.ones(2))
    return Problem(bounds=bounds, m=2, blackbox=_toy_blackbox,
                   objective=_toy_objective, name="toy")


# ---------------------------------------------------------------------------
# external blackboxes over the stdin/stdout line protocol

class _LineProtocolChild:
    """One child process speaking the one-line-per-evaluation protocol."""

    def __init__(self, command, timeout: float):
        args = shlex.split(command) if isinstance(command, str) else list(command)
        self.timeout = timeout
        self.command = args
        self.proc = subprocess.Popen(
            args, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
            stderr=subprocess.PIPE)
        self._replies = queue.Queue()
        self._stderr_tail = deque(maxlen=40)
        self._lock = threading.Lock()
        threading.Thread(target=self._pump_stdout, daemon=True).start()
        threading.Thread(target=self._pump_stderr, daemon=True).start()

    def _pump_stdout(self):
        for raw in self.proc.stdout:
            self._replies.put(raw)
        self._replies.put(None)

    def _pump_stderr(self):
        for raw in self.proc.stderr:
            self._stderr_tail.append(raw.decode("utf-8", errors="replace"))

    def _stderr_text(self) -> str:
        return "".join(self._stderr_tail).strip()

    def ask(self, line: str) -> str:
        """Send one request line, return the reply line (serialized)."""
        with self._lock:
            try:
                self.proc.stdin.write((line + "\n").encode("utf-8"))
                self.proc.stdin.flush()
            except (BrokenPipeError, OSError):
                raise BlackboxError(
                    f"child {self.command} is gone", raw=self._stderr_text())
            try:
                raw = self._replies.get(timeout=self.timeout)
            except queue.Empty:
                raise BlackboxError(
                    f"child {self.command} gave no reply within "
                    f"{self.timeout}s", raw=self._stderr_text())
            if raw is None:
                raise BlackboxError(
                    f"child {self.command} closed its stdout",
                    raw=self._stderr_text())
            return raw.decode("utf-8", errors="replace").strip()

    def close(self):
        with self._lock:
            if self.proc.poll() is None:
                try:
                    self.proc.stdin.close()
                except OSError:
                    pass
                try:
                    self.proc.wait(timeout=2.0)
                except subprocess.TimeoutExpired:
                    self.proc.kill()
                    self.proc.wait()


def external_blackbox(command, dim: int, m: int, bounds: Hyperrectangle = None,
                      objective: Callable = None,
                      timeout: float = 30.0) -> Problem:
    """Wrap an external simulator as a :class:`Problem`.

    ``command`` is a shell string or argv list; the child is spawned once
    and fed one request line per evaluation.  Replies must carry ``m + 1``
    decimals (objective first).  ``bounds`` defaults to the unit cube;
    pass ``objective`` when the objective is known so the child's
    objective slot is ignored and candidate generation stays free.
    Use as a context manager (or call ``close()``) to stop the child.
    """
    if bounds is None:
        bounds = Hyperrectangle(np.zeros(dim), np.ones(dim))
    if bounds.dim != dim:
        raise ValueError("bounds dimension does not match dim")
    child = _LineProtocolChild(command, timeout)

    def bb(x):
        request = " ".join(repr(float(v)) for v in x)
        reply = child.ask(request)
        parts = reply.split()
        if len(parts) != m + 1:
            raise BlackboxError(
                f"expected {m + 1} values in reply, got {len(parts)}",
                raw=reply)
        try:
            vals = [float(p) for p in parts]
        except ValueError:
            raise BlackboxError("non-numeric value in reply", raw=reply)
        return vals[0], np.array(vals[1:])

    return Problem(bounds=bounds, m=m, blackbox=bb, objective=objective,
                   name=command if isinstance(command, str) else " ".join(command),
                   _closer=child.close)
