"""Kernel backend selection.

The compiled extension is preferred when present; set
``CONTEXTDB_PURE_PYTHON=1`` to force the pure Python twin (used by the
benchmark and the backend-equivalence tests).
"""

import os

from . import pure

if os.environ.get("CONTEXTDB_PURE_PYTHON") == "1":
    _impl = pure
else:
    try:
        from . import _speedups as _impl  # type: ignore[attr-defined]
    except ImportError:
        _impl = pure

BACKEND = _impl.BACKEND
compose_maps = _impl.compose_maps
compose_chain = _impl.compose_chain
pair_rows = _impl.pair_rows
group_reduce = _impl.group_reduce
preimage_keys = _impl.preimage_keys
