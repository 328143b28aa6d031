"""Spectral EPDiff laboratory on the flat torus."""

from ._epdiff import *  # noqa: F401,F403
from ._epdiff import __doc__  # noqa: F401
