"""Simulation kernel backends.

The compiled Cython kernels are used when importable; the numpy fallback
replays the identical draw schedule.  ``PATHSUM_BACKEND=python`` or
``PATHSUM_BACKEND=cython`` forces a choice (the latter raises if the
extension is missing).  Models carrying a Python drift callable always run
on the numpy backend.
"""
from __future__ import annotations

import os

from . import pykernels

_forced = os.environ.get("PATHSUM_BACKEND", "").strip().lower()

_ck = None
if _forced != "python":
    try:
        from . import _ckernels as _ck
    except ImportError:
        _ck = None
        if _forced == "cython":
            raise ImportError(
                "PATHSUM_BACKEND=cython but the compiled kernels are not built; "
                "run `python setup.py build_ext --inplace` or reinstall"
            )


def active_backend_name() -> str:
    return "cython" if _ck is not None else "python"


def kernels_for(plan):
    """Kernel module serving this plan."""
    if _ck is None or plan.needs_python:
        return pykernels
    return _ck
