"""Line-protocol server for the toy problem.

Run as ``python -m albo.toyserver``.  Reads one point per line from stdin
(two space-separated decimals), writes ``f c1 c2`` on one line to stdout,
flushing after each reply, and exits cleanly on EOF.  Uses the same
arithmetic as the in-process toy problem, so replies round-trip
bit-exactly through ``repr``.
"""

import sys

from .problems import _toy_values


def main(stdin=None, stdout=None) -> int:
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    for line in stdin:
        stripped = line.strip()
        if not stripped:
            continue
        parts = stripped.split()
        if len(parts) != 2:
            print(f"toyserver: expected 2 coordinates, got {len(parts)}",
                  file=sys.stderr, flush=True)
            return 1
        try:
            x = [float(p) for p in parts]
        except ValueError:
            print(f"toyserver: bad coordinate in {stripped!r}",
                  file=sys.stderr, flush=True)
            return 1
        f, (c1, c2) = _toy_values(x)
        stdout.write(f"{f!r} {c1!r} {c2!r}\n")
        stdout.flush()
    return 0


if __name__ == "__main__":
    sys.exit(main())
