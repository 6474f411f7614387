"""Selects the compiled split-step kernel, falling back to numpy.

Set ``CZISWAP_PURE_PYTHON=1`` to force the fallback.
"""

from __future__ import annotations

import os

from . import _split_fallback

split_steps_python = _split_fallback.split_steps

try:
    if os.environ.get("CZISWAP_PURE_PYTHON", "") not in ("", "0"):
        raise ImportError("pure-python kernel requested")
    from ._split_kernel import split_steps as split_steps_compiled
except ImportError:
    split_steps_compiled = None

if split_steps_compiled is not None:
    split_steps = split_steps_compiled
    BACKEND = "cython"
else:
    split_steps = split_steps_python
    BACKEND = "python"

__all__ = ["BACKEND", "split_steps", "split_steps_compiled", "split_steps_python"]
