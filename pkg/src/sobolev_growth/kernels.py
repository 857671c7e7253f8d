"""Back-end selection for hot loops.

The compiled extension is used when it was built; otherwise, or when the
environment variable ``SOBOLEV_GROWTH_PURE`` is set to a non-empty value,
the numpy implementation is used.  Both expose the same functions.
"""

from __future__ import annotations

import os

from . import _sweep_py

try:  # pragma: no cover - depends on the build
    from . import _sweep as _compiled
except ImportError:  # pragma: no cover
    _compiled = None

if _compiled is not None and not os.environ.get("SOBOLEV_GROWTH_PURE"):
    sweep_canonical = _compiled.sweep_canonical
    BACKEND = "compiled"
else:
    sweep_canonical = _sweep_py.sweep_canonical
    BACKEND = "python"

python_sweep_canonical = _sweep_py.sweep_canonical
compiled_sweep_canonical = None if _compiled is None else _compiled.sweep_canonical
