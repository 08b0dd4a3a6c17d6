"""Sum-of-squares polynomial flows (C++ core)."""

from ._sosflow import *  # noqa: F401,F403
from ._sosflow import SosflowError, ErrorKind

__all__ = [name for name in dir() if not name.startswith("_")]
