"""Backend selection for the hot kernels.

The compiled extension is preferred when it imports cleanly; setting
``GMM_REPLAY_BACKEND=numpy`` or ``=cython`` forces one side (useful for
the benchmark and for cross-checking the two implementations).
"""

import os

from gmm_replay import _kernels_np


def _select():
    forced = os.environ.get("GMM_REPLAY_BACKEND", "").strip().lower()
    if forced == "numpy":
        return _kernels_np
    try:
        from gmm_replay import _kernels_cy
    except ImportError:
        if forced == "cython":
            raise
        return _kernels_np
    return _kernels_cy


_impl = _select()

BACKEND = _impl.BACKEND
component_log_densities = _impl.component_log_densities
weighted_moments = _impl.weighted_moments
