"""Session-oriented HTTP service around the rostering engine."""

from .app import create_app, run_server
from .sessions import Conflict, Invalid, NotFound, ServiceError, SessionManager
from .store import SessionStore

__all__ = [
    "Conflict",
    "Invalid",
    "NotFound",
    "ServiceError",
    "SessionManager",
    "SessionStore",
    "create_app",
    "run_server",
]
