"""Python bindings for the faag C++ library."""

from ._faag import *  # noqa: F401,F403
from ._faag import FaagError, __version__  # noqa: F401
