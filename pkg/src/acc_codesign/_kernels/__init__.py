"""Hot loops of the schedule simulator and the plant integrator.

The compiled ``_fast`` extension is used when it was built; otherwise, or
when ``ACC_CODESIGN_PURE=1`` is set, the pure-Python ``_pure`` module is
used.  Both produce identical results.
"""
import os

from . import _pure

BACKEND = "python"
if os.environ.get("ACC_CODESIGN_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _fast as _impl

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _pure
else:
    _impl = _pure

simulate_fp = _impl.simulate_fp
integrate_plant = _impl.integrate_plant
EXEC = _pure.EXEC
BLOCKED = _pure.BLOCKED


def backends():
    """Available backend modules keyed by name."""
    found = {"python": _pure}
    try:
        from . import _fast

        found["cython"] = _fast
    except ImportError:
        pass
    return found
