"""Select the likelihood kernel backend at import.

The compiled extension is used when it was built; otherwise the numpy
implementation is used.  Setting ``SCORELINE_PURE_PYTHON=1`` forces the
numpy backend.
"""
import os

from . import _pykernels

BACKEND = "python"

if not os.environ.get("SCORELINE_PURE_PYTHON"):
    try:
        from . import _ckernels as _impl

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _pykernels
else:
    _impl = _pykernels

LOGIT_EPS = _pykernels.LOGIT_EPS
logit_cdf = _impl.logit_cdf
dc_loglik_grad = _impl.dc_loglik_grad
marco_loglik_grad = _impl.marco_loglik_grad

__all__ = ["BACKEND", "LOGIT_EPS", "logit_cdf", "dc_loglik_grad", "marco_loglik_grad"]
