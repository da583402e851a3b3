"""HTTP service exposing the screening-policy toolkit to multiple clients."""

from .app import app, create_app

__all__ = ["app", "create_app"]
