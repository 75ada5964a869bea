"""HTTP server hosting relighting and victim models behind the wire protocol.

The package is deliberately self-contained: it shares a JSON protocol with the
advlight client package but no code, so either side can be deployed alone.
"""

from .codec import TensorError, decode_tensor, encode_tensor
from .config import ShimConfig
from .models import EchoRelight, EchoVictim, build_relight_model, build_victim_model
from .app import create_app

__all__ = [
    "TensorError",
    "decode_tensor",
    "encode_tensor",
    "ShimConfig",
    "EchoRelight",
    "EchoVictim",
    "build_relight_model",
    "build_victim_model",
    "create_app",
]
