"""Selects the compiled core when it is importable, else the pure-Python twin.

Set ``TTSALAB_PURE=1`` to force the fallback.
"""

import os

from . import _core_py

python_core = _core_py
compiled_core = None

if os.environ.get("TTSALAB_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _core as compiled_core
    except ImportError:  # extension not built
        compiled_core = None

core = compiled_core if compiled_core is not None else python_core
NAME = core.BACKEND

IID, SHUFFLE, RANDOM_SHUFFLE, SRW, NBRW, CHAIN = (
    _core_py.IID, _core_py.SHUFFLE, _core_py.RANDOM_SHUFFLE,
    _core_py.SRW, _core_py.NBRW, _core_py.CHAIN,
)
LINEAR, MOMENTUM, SGDA, GTD2, TDC = (
    _core_py.LINEAR, _core_py.MOMENTUM, _core_py.SGDA, _core_py.GTD2, _core_py.TDC,
)
