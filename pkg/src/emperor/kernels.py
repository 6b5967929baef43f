"""Selects the EM kernel implementation at import time.

The compiled ``_ckernels`` extension is used when it was built; otherwise
the numpy module ``_pykernels`` is. Setting ``EMPEROR_PURE_PYTHON=1`` in the
environment forces the numpy version.
"""

import os

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

if _ckernels is not None and not os.environ.get("EMPEROR_PURE_PYTHON"):
    active = _ckernels
else:
    active = _pykernels

BACKEND = active.BACKEND


def available() -> list[str]:
    return ["python"] + (["cython"] if _ckernels is not None else [])


def get(name: str | None = None):
    """Kernel module by name (``"cython"`` or ``"python"``); ``None`` gives the active one."""
    if name is None:
        return active
    if name == "python":
        return _pykernels
    if name == "cython":
        if _ckernels is None:
            raise ImportError("the compiled kernel extension is not built")
        return _ckernels
    raise ValueError(f"unknown kernel backend {name!r}")
