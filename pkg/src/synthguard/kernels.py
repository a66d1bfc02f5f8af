"""Select the compiled kernel backend, falling back to numpy.

``BACKEND`` is ``"cython"`` or ``"python"``.  Set ``SYNTHGUARD_PURE_PYTHON=1``
to force the fallback (the benchmark and the equivalence tests do this).
"""

from __future__ import annotations

import os

from synthguard import _kernels_py

if os.environ.get("SYNTHGUARD_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from synthguard import _kernels as _impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _kernels_py
        BACKEND = "python"

lstm_gates_forward = _impl.lstm_gates_forward
lstm_gates_backward = _impl.lstm_gates_backward
auc_raw = _impl.auc_raw
max_tpr_fpr_gap = _impl.max_tpr_fpr_gap
# a BLAS dot per lag beats a compiled loop, so both backends share this one
acf = _kernels_py.acf

__all__ = ["BACKEND", "lstm_gates_forward", "lstm_gates_backward", "auc_raw", "max_tpr_fpr_gap", "acf"]
