"""Numeric kernel backend selection.

Prefers the compiled Cython extension (``_core``) and falls back to the
numpy reference implementation (``_ref``) when the extension is absent.
``ALBO_BACKEND=numpy`` or ``ALBO_BACKEND=compiled`` forces a choice;
forcing ``compiled`` raises if the extension was not built.  The active
choice is exposed as ``BACKEND``.
"""

import os

_forced = os.environ.get("ALBO_BACKEND")

if _forced == "numpy":
    from . import _ref as _impl

    BACKEND = "numpy"
elif _forced == "compiled":
    from . import _core as _impl  # noqa: F401  (raises if not built)

    BACKEND = "compiled"
elif _forced:
    raise ImportError(f"unknown ALBO_BACKEND {_forced!r}; "
                      "use 'numpy' or 'compiled'")
else:
    try:
        from . import _core as _impl
        BACKEND = "compiled"
    except ImportError:
        from . import _ref as _impl
        BACKEND = "numpy"

sqexp_cross = _impl.sqexp_cross
sqexp_sym = _impl.sqexp_sym
ey_scores = _impl.ey_scores
mc_improvement_stats = _impl.mc_improvement_stats

__all__ = ["BACKEND", "sqexp_cross", "sqexp_sym", "ey_scores",
           "mc_improvement_stats"]
