"""HTTP/JSON service over a loaded run."""

from .cache import ResponseCache
from .session import Session

__all__ = ["ResponseCache", "Session", "create_app"]


def create_app(*args, **kwargs):
    from .app import create_app as _create_app

    return _create_app(*args, **kwargs)
