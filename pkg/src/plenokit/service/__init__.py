"""HTTP service wrapping the decoding pipeline."""

from plenokit.service.app import create_app

__all__ = ["create_app"]
