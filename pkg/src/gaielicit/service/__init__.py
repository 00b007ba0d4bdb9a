from .app import create_app, load_service_config
from .store import SessionStore

__all__ = ["create_app", "load_service_config", "SessionStore"]
