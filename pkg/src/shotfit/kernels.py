"""Kernel backend selection.

The hot numerical kernels (forward kinematics with Jacobians, trilinear
grid sampling) exist twice: a Cython extension (shotfit._core) and a pure
numpy fallback (shotfit._core_py). The extension is preferred when it
imports; set SHOTFIT_PURE_PYTHON=1 to force the fallback. Both expose the
same functions and are cross-checked in the test suite.
"""

from __future__ import annotations

import os

from . import _core_py

if os.environ.get("SHOTFIT_PURE_PYTHON", "") not in ("", "0"):
    _impl = _core_py
else:
    try:
        from . import _core as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _core_py

BACKEND: str = _impl.BACKEND

rotations = _impl.rotations
rotation_derivs = _impl.rotation_derivs
bone_scales = _impl.bone_scales
fk = _impl.fk
grid_sample = _impl.grid_sample


def available_backends() -> list[str]:
    names = ["python"]
    try:
        from . import _core  # noqa: F401

        names.insert(0, "native")
    except ImportError:
        pass
    return names
