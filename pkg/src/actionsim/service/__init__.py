"""HTTP service wrapping the core pipeline."""

from .app import create_app

__all__ = ["create_app"]
