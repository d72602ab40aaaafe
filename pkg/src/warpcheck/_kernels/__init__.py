"""Kernel backend selection.

The compiled extension (``_native``, built from Cython) is preferred; the
numpy fallback (``_python``) is used when the extension is missing.  Set
``WARPCHECK_BACKEND=python`` or ``=native`` to force a backend (forcing
``native`` raises if the extension was not built).
"""

import os

_requested = os.environ.get("WARPCHECK_BACKEND", "").strip().lower()

if _requested not in ("", "native", "python"):
    raise ImportError(
        f"WARPCHECK_BACKEND={_requested!r} not recognized "
        "(expected 'native' or 'python')")

if _requested == "python":
    from . import _python as _impl
    BACKEND = "python"
else:
    try:
        from . import _native as _impl  # type: ignore[no-redef]
        BACKEND = "native"
    except ImportError:
        if _requested == "native":
            raise ImportError(
                "WARPCHECK_BACKEND=native but the compiled extension is "
                "not available; reinstall with a C compiler present")
        from . import _python as _impl  # type: ignore[no-redef]
        BACKEND = "python"

affine_sample = _impl.affine_sample
resize_bilinear = _impl.resize_bilinear
separable_blur = _impl.separable_blur
conv3x3_forward = _impl.conv3x3_forward
conv3x3_backward = _impl.conv3x3_backward
maxpool2_forward = _impl.maxpool2_forward
maxpool2_backward = _impl.maxpool2_backward


def backend_name() -> str:
    """Name of the kernel backend selected at import ('native' or 'python')."""
    return BACKEND
