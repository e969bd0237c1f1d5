"""Hot-kernel backend selection.

The compiled extension (_ext, Cython) is preferred; the pure-numpy
fallback (_py) is used when the extension is missing or when the
environment variable RISKGEN_PURE_PYTHON=1 is set. `BACKEND` names the
active implementation.
"""

import os

if os.environ.get("RISKGEN_PURE_PYTHON") == "1":
    from . import _py as _impl

    BACKEND = "python"
else:
    try:
        from . import _ext as _impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        from . import _py as _impl

        BACKEND = "python"

REGIME_BI = 0
REGIME_AGENT = 1
REGIME_EGO = 2
REGIME_AWAY = 3

agent_risk_batch = _impl.agent_risk_batch
splat_max = _impl.splat_max

__all__ = [
    "BACKEND",
    "REGIME_BI",
    "REGIME_AGENT",
    "REGIME_EGO",
    "REGIME_AWAY",
    "agent_risk_batch",
    "splat_max",
]
