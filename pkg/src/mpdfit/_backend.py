"""Kernel backend selection.

The compiled extension is preferred; setting ``MPDFIT_PURE_PYTHON=1`` or a
failed import falls back to the numpy implementation.
"""

import os

COMPILED = False

if os.environ.get("MPDFIT_PURE_PYTHON", "") not in ("", "0"):
    from . import _fallback as kernels
else:
    try:
        from . import _kernels as kernels

        COMPILED = True
    except ImportError:  # extension not built
        from . import _fallback as kernels


def worker_count():
    """Thread cap for kernel loops, from ``MPD_THREADS`` (default: all cores)."""
    raw = os.environ.get("MPD_THREADS", "")
    if raw.strip():
        try:
            return max(1, int(raw))
        except ValueError:
            pass
    return os.cpu_count() or 1
