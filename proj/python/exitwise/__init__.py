"""Energy-accuracy analysis for early-exit CNNs.

Thin wrapper over the compiled extension; everything public lives in
``exitwise._exitwise``.
"""

from ._exitwise import *  # noqa: F401,F403
from ._exitwise import __doc__  # noqa: F401

__version__ = "0.1.0"
