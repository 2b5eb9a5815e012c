"""Geocoded, timestamped symmetric keys (Python bindings)."""

from ._geokey import *  # noqa: F401,F403
from ._geokey import GeokeyError, CELL_COUNT

__all__ = [name for name in dir() if not name.startswith("_")]
