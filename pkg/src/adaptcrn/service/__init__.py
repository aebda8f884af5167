"""HTTP service exposing the enhancement engine."""

from .app import create_app

__all__ = ["create_app"]
