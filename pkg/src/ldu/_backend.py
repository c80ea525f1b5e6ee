"""Pick the training kernel at import time.

The compiled ``ldu._kernels`` extension is preferred.  Set
``LDU_BACKEND=python`` to force the numpy fallback, or ``LDU_BACKEND=cython``
to make a missing extension an import error.
"""
import importlib
import logging
import os

log = logging.getLogger(__name__)

BACKENDS = ("cython", "python")


def load(name=None):
    """Return the kernel module for ``name`` (``None`` means best available)."""
    if name == "python":
        return importlib.import_module("ldu._fallback")
    if name == "cython":
        return importlib.import_module("ldu._kernels")
    if name is not None:
        raise ValueError(f"unknown backend {name!r}; expected one of {BACKENDS}")
    try:
        return importlib.import_module("ldu._kernels")
    except ImportError:
        log.debug("compiled kernel unavailable, using numpy fallback")
        return importlib.import_module("ldu._fallback")


kernel = load(os.environ.get("LDU_BACKEND") or None)
BACKEND = kernel.NAME
