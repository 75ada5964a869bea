"""Tensor encoding for the wire protocol.

Tensors travel as {"shape": [H, W, 3], "dtype": "f32", "data": base64}, where
data is the little-endian row-major float32 buffer. Decode followed by encode
reproduces the base64 string byte for byte, which is what makes echo-model
round trips bit-exact.
"""

import base64
import binascii

import numpy as np

DTYPE_TAG = "f32"


class TensorError(ValueError):
    """Raised when a wire tensor fails validation."""


def encode_tensor(arr: np.ndarray) -> dict:
    """Serialize an (H, W, 3) float array to a wire tensor dict."""
    arr = np.ascontiguousarray(arr, dtype="<f4")
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise TensorError(f"expected (H, W, 3) array, got shape {arr.shape}")
    return {
        "shape": [int(d) for d in arr.shape],
        "dtype": DTYPE_TAG,
        "data": base64.b64encode(arr.tobytes()).decode("ascii"),
    }


def decode_tensor(obj) -> np.ndarray:
    """Parse and validate a wire tensor dict into an (H, W, 3) float32 array."""
    if not isinstance(obj, dict):
        raise TensorError(f"tensor must be an object, got {type(obj).__name__}")
    missing = {"shape", "dtype", "data"} - obj.keys()
    if missing:
        raise TensorError(f"tensor missing fields: {sorted(missing)}")
    if obj["dtype"] != DTYPE_TAG:
        raise TensorError(f"unsupported dtype {obj['dtype']!r}, expected {DTYPE_TAG!r}")
    shape = obj["shape"]
    if (
        not isinstance(shape, list)
        or len(shape) != 3
        or not all(isinstance(d, int) and not isinstance(d, bool) for d in shape)
    ):
        raise TensorError(f"shape must be a list of three ints, got {shape!r}")
    h, w, c = shape
    if h < 1 or w < 1 or c != 3:
        raise TensorError(f"shape must be (H >= 1, W >= 1, 3), got {shape!r}")
    if not isinstance(obj["data"], str):
        raise TensorError("data must be a base64 string")
    try:
        raw = base64.b64decode(obj["data"], validate=True)
    except (binascii.Error, ValueError) as exc:
        raise TensorError(f"data is not valid base64: {exc}") from exc
    expected = h * w * c * 4
    if len(raw) != expected:
        raise TensorError(f"data holds {len(raw)} bytes, shape {shape} needs {expected}")
    arr = np.frombuffer(raw, dtype="<f4").reshape(h, w, c)
    if not np.all(np.isfinite(arr)):
        raise TensorError("tensor contains non-finite values")
    return arr
