"""Kernel backend selection.

The multiplier search runs either through the compiled extension
(grls._lambda_cy, built with Cython) or the NumPy fallback (grls._lambda_py).
The compiled kernel is preferred when importable; set GRLS_BACKEND=python or
GRLS_BACKEND=compiled to force a choice.
"""

from __future__ import annotations

import os

from . import _lambda_py

_choice = os.environ.get("GRLS_BACKEND", "").strip().lower()

if _choice == "python":
    _mod = _lambda_py
elif _choice == "compiled":
    from . import _lambda_cy as _mod  # hard failure if not built
else:
    try:
        from . import _lambda_cy as _mod
    except ImportError:
        _mod = _lambda_py

_COMPILED_SMAX = 16


def lambda_search(A2, r, k, n, rho, lam_tol, lam_start, lam_cap):
    # the compiled kernel uses stack buffers; oversized blocks (only possible
    # with many-generator factored matrices) route to the NumPy path
    if _mod is not _lambda_py and A2.shape[0] > _COMPILED_SMAX:
        return _lambda_py.lambda_search(A2, r, k, n, rho, lam_tol, lam_start, lam_cap)
    return _mod.lambda_search(A2, r, k, n, rho, lam_tol, lam_start, lam_cap)


def backend_name() -> str:
    return _mod.BACKEND


def available_backends() -> list[str]:
    names = ["python"]
    try:
        from . import _lambda_cy  # noqa: F401

        names.append("compiled")
    except ImportError:
        pass
    return names


def get_kernel(name: str):
    """Kernel function by backend name, for benchmarks and tests."""
    if name == "python":
        return _lambda_py.lambda_search
    if name == "compiled":
        from . import _lambda_cy

        return _lambda_cy.lambda_search
    raise ValueError(f"unknown backend {name!r}")
