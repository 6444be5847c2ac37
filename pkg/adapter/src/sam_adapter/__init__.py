"""HTTP adapter serving mask proposals and box+point prompt masks.

Implements the wire protocol the seco pipeline's http backend speaks:
POST /v1/auto_masks and POST /v1/segment, with a mock mode for protocol
conformance testing and an optional real promptable-segmentation backbone.
"""
from .app import create_app

__version__ = "0.1.0"
__all__ = ["create_app"]
