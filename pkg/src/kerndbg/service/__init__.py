from .sessions import SessionManager, SessionError

__all__ = ["SessionManager", "SessionError"]
