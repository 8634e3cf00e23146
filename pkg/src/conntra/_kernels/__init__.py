"""Backend selection for the hot kernels.

The compiled extension (``_core``, built from ``_core.pyx``) is used when it
imports; otherwise the pure-numpy fallback takes over transparently.  Set
``CONNTRA_KERNELS=python`` to force the fallback, ``CONNTRA_KERNELS=compiled``
to require the extension (ImportError if missing).  ``BACKEND`` names the
active choice; ``get_backend`` fetches a specific one (used by the
benchmark and the parity tests).
"""

import os

from . import _fallback

_forced = os.environ.get("CONNTRA_KERNELS", "").strip().lower()

if _forced in ("python", "fallback"):
    _active = _fallback
    BACKEND = "python"
elif _forced == "compiled":
    from . import _core as _active  # noqa: F401  (hard requirement)

    BACKEND = "compiled"
else:
    try:
        from . import _core as _active
        BACKEND = "compiled"
    except ImportError:
        _active = _fallback
        BACKEND = "python"


def get_backend(name: str):
    """Return the kernel module for ``name`` in {"python", "compiled"}."""
    if name == "python":
        return _fallback
    if name == "compiled":
        from . import _core

        return _core
    raise ValueError(f"unknown kernel backend {name!r}")


xent_from_logits = _active.xent_from_logits
euclid_from_logits = _active.euclid_from_logits
set_column_scaled = _active.set_column_scaled
set_column_shift = _active.set_column_shift
