"""Pick the integration kernel: compiled if importable, else pure Python.

``RESETFREQ_KERNEL=python`` forces the fallback.
"""

import os

from . import _pykernel

try:
    from . import _ckernel
except ImportError:  # extension not built
    _ckernel = None

KERNELS = {"python": _pykernel.integrate}
if _ckernel is not None:
    KERNELS["compiled"] = _ckernel.integrate

_forced = os.environ.get("RESETFREQ_KERNEL", "").strip().lower()
if _forced and _forced not in KERNELS:
    raise ImportError(f"RESETFREQ_KERNEL={_forced!r} is not available "
                      f"(have: {', '.join(sorted(KERNELS))})")
BACKEND = _forced or ("compiled" if "compiled" in KERNELS else "python")


def get_kernel(name: str | None = None):
    return KERNELS[name or BACKEND]
