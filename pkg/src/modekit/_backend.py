"""Select the compiled kernels when available, else the NumPy fallback.

Set ``MODEKIT_PURE_PYTHON=1`` to force the fallback (used by the benchmark and
by the tests that compare both paths).
"""

import os

from modekit import _fallback

if os.environ.get("MODEKIT_PURE_PYTHON", "") not in ("", "0"):
    _impl = _fallback
    NAME = "python"
else:
    try:
        from modekit import _kernels as _impl
        NAME = "cython"
    except ImportError:
        _impl = _fallback
        NAME = "python"

vandermonde = _impl.vandermonde
vandermonde_deriv_rows = _impl.vandermonde_deriv_rows
contract_vandermonde_deriv = _impl.contract_vandermonde_deriv
projection_gram = _impl.projection_gram
