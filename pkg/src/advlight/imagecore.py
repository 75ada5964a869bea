"""Pixel containers and the linear image operations everything else builds on.

Images are (H, W, 3) float64 RGB arrays with values in [0, 1]; gradients share
the layout but are unbounded. Resizing is bilinear with the half-pixel-center
convention (sample k of an n-long axis sits at (k + 0.5)/n) and edge clamping,
which makes the map linear in the pixels and gives it an exact adjoint.

The PNG codec is self-contained on purpose: decoding must normalize 16-bit
samples by 65535 (not truncate to 8-bit) and report byte offsets on malformed
input, which the usual imaging libraries don't expose.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass

import numpy as np

from .errors import PngDecodeError, UnsupportedFormatError

PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"


def _validated_array(data, bounded: bool) -> np.ndarray:
    arr = np.array(data, dtype=np.float64, copy=True)
    if arr.ndim != 3 or arr.shape[2] != 3 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"expected shape (H, W, 3) with H, W >= 1, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("data contains non-finite values")
    if bounded and (arr.min() < 0.0 or arr.max() > 1.0):
        raise ValueError("pixel values outside [0, 1]; use Image.clamped to project")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class Image:
    """RGB image, shape (height, width, 3), float64 values in [0, 1]."""

    data: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "data", _validated_array(self.data, bounded=True))

    @classmethod
    def clamped(cls, arr) -> "Image":
        """Project finite data onto [0, 1] and wrap it."""
        arr = np.asarray(arr, dtype=np.float64)
        if not np.all(np.isfinite(arr)):
            raise ValueError("cannot clamp non-finite data")
        return cls(np.clip(arr, 0.0, 1.0))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple:
        return self.data.shape


@dataclass(frozen=True)
class GradientTensor:
    """Gradient with respect to an image; same layout, unbounded values."""

    data: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "data", _validated_array(self.data, bounded=False))

    @property
    def shape(self) -> tuple:
        return self.data.shape


# ---------------------------------------------------------------------------
# bilinear resize and its exact adjoint
# ---------------------------------------------------------------------------


def _axis_taps(n_src: int, n_out: int):
    """Gather indices (i0, i1) and blend fraction for one axis.

    Output sample k reads source coordinate (k + 0.5) * n_src/n_out - 0.5,
    clamped to the valid index range at both edges.
    """
    coords = (np.arange(n_out, dtype=np.float64) + 0.5) * (n_src / n_out) - 0.5
    lo = np.floor(coords)
    frac = coords - lo
    i0 = np.clip(lo, 0, n_src - 1).astype(np.int64)
    i1 = np.clip(lo + 1, 0, n_src - 1).astype(np.int64)
    return i0, i1, frac


def resize_bilinear_array(arr: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resample of an (H, W, C) array to (out_h, out_w, C).

    Linear in ``arr``. Equal input and output sizes return an identical copy.
    """
    if out_h < 1 or out_w < 1:
        raise ValueError(f"target size must be >= 1x1, got {out_h}x{out_w}")
    src_h, src_w = arr.shape[:2]
    if (src_h, src_w) == (out_h, out_w):
        return arr.copy()
    y0, y1, fy = _axis_taps(src_h, out_h)
    tmp = arr[y0] * (1.0 - fy)[:, None, None] + arr[y1] * fy[:, None, None]
    x0, x1, fx = _axis_taps(src_w, out_w)
    return tmp[:, x0] * (1.0 - fx)[None, :, None] + tmp[:, x1] * fx[None, :, None]


def resize_adjoint_array(grad: np.ndarray, src_h: int, src_w: int) -> np.ndarray:
    """Exact transpose of ``resize_bilinear_array``: scatter a gradient at the
    output resolution back to the (src_h, src_w) source grid."""
    if src_h < 1 or src_w < 1:
        raise ValueError(f"source size must be >= 1x1, got {src_h}x{src_w}")
    out_h, out_w = grad.shape[:2]
    if (src_h, src_w) == (out_h, out_w):
        return grad.copy()
    # Forward order is rows then columns, so the transpose scatters columns first.
    x0, x1, fx = _axis_taps(src_w, out_w)
    tmp = np.zeros((out_h, src_w, grad.shape[2]), dtype=np.float64)
    np.add.at(tmp, (slice(None), x0), grad * (1.0 - fx)[None, :, None])
    np.add.at(tmp, (slice(None), x1), grad * fx[None, :, None])
    y0, y1, fy = _axis_taps(src_h, out_h)
    out = np.zeros((src_h, src_w, grad.shape[2]), dtype=np.float64)
    np.add.at(out, y0, tmp * (1.0 - fy)[:, None, None])
    np.add.at(out, y1, tmp * fy[:, None, None])
    return out


def resize_bilinear(img: Image, out_h: int, out_w: int) -> Image:
    """Resize an image. The ~1 ulp of blend rounding is clipped back to [0, 1]."""
    return Image(np.clip(resize_bilinear_array(img.data, out_h, out_w), 0.0, 1.0))


def resize_adjoint(grad: GradientTensor, src_h: int, src_w: int) -> GradientTensor:
    """Adjoint resize for gradients (see resize_adjoint_array)."""
    return GradientTensor(resize_adjoint_array(grad.data, src_h, src_w))


def flip_horizontal(img: Image) -> Image:
    """Mirror an image left-to-right."""
    return Image(img.data[:, ::-1])


# ---------------------------------------------------------------------------
# PNG codec (RFC 2083 subset: color types 2 and 6, depths 8 and 16)
# ---------------------------------------------------------------------------


def _paeth(a: int, b: int, c: int) -> int:
    p = a + b - c
    pa, pb, pc = abs(p - a), abs(p - b), abs(p - c)
    if pa <= pb and pa <= pc:
        return a
    if pb <= pc:
        return b
    return c


def _unfilter(raw: bytes, width: int, height: int, bpp: int, data_offset: int) -> np.ndarray:
    stride = width * bpp
    if len(raw) != height * (stride + 1):
        raise PngDecodeError(
            f"decompressed length {len(raw)} != expected {height * (stride + 1)}",
            data_offset,
        )
    out = np.zeros((height, stride), dtype=np.uint8)
    prev = np.zeros(stride, dtype=np.int64)
    for row in range(height):
        ftype = raw[row * (stride + 1)]
        line = np.frombuffer(raw, dtype=np.uint8, count=stride, offset=row * (stride + 1) + 1).astype(np.int64)
        if ftype == 0:
            cur = line
        elif ftype == 2:
            cur = (line + prev) & 0xFF
        elif ftype in (1, 3, 4):
            cur = np.zeros(stride, dtype=np.int64)
            for i in range(stride):
                left = cur[i - bpp] if i >= bpp else 0
                if ftype == 1:
                    cur[i] = (line[i] + left) & 0xFF
                elif ftype == 3:
                    cur[i] = (line[i] + (left + prev[i]) // 2) & 0xFF
                else:
                    upleft = prev[i - bpp] if i >= bpp else 0
                    cur[i] = (line[i] + _paeth(left, prev[i], upleft)) & 0xFF
        else:
            raise PngDecodeError(f"unknown filter type {ftype} in row {row}", data_offset)
        out[row] = cur.astype(np.uint8)
        prev = cur
    return out


def png_decode(data: bytes) -> Image:
    """Decode a PNG byte stream to an Image.

    Supports color types 2 (RGB) and 6 (RGBA, alpha dropped) at bit depths 8
    and 16, non-interlaced. Samples are normalized as s / (2**depth - 1).
    Malformed input raises PngDecodeError carrying the byte offset; valid PNGs
    outside the subset raise UnsupportedFormatError.
    """
    if len(data) < 8 or data[:8] != PNG_SIGNATURE:
        raise PngDecodeError("not a PNG signature", 0)
    pos = 8
    header = None
    idat = bytearray()
    first_idat_offset = None
    seen_iend = False
    while pos < len(data):
        if pos + 8 > len(data):
            raise PngDecodeError("truncated chunk header", pos)
        (length,) = struct.unpack(">I", data[pos : pos + 4])
        ctype = data[pos + 4 : pos + 8]
        body_start = pos + 8
        crc_start = body_start + length
        if crc_start + 4 > len(data):
            raise PngDecodeError(f"truncated {ctype!r} chunk", pos)
        body = data[body_start:crc_start]
        (crc,) = struct.unpack(">I", data[crc_start : crc_start + 4])
        if zlib.crc32(ctype + body) & 0xFFFFFFFF != crc:
            raise PngDecodeError(f"CRC mismatch in {ctype!r} chunk", crc_start)
        if header is None:
            if ctype != b"IHDR":
                raise PngDecodeError("first chunk is not IHDR", pos)
            if length != 13:
                raise PngDecodeError(f"IHDR length {length} != 13", pos)
            width, height, depth, color, comp, filt, interlace = struct.unpack(">IIBBBBB", body)
            if width < 1 or height < 1:
                raise PngDecodeError(f"invalid dimensions {width}x{height}", body_start)
            if comp != 0 or filt != 0:
                raise PngDecodeError(f"bad compression/filter method {comp}/{filt}", body_start)
            if interlace != 0:
                raise UnsupportedFormatError("interlaced PNG is not supported")
            if color not in (2, 6) or depth not in (8, 16):
                raise UnsupportedFormatError(
                    f"unsupported color type {color} / bit depth {depth} (need RGB or RGBA at 8 or 16 bits)"
                )
            header = (width, height, depth, color)
        elif ctype == b"IDAT":
            if first_idat_offset is None:
                first_idat_offset = body_start
            idat.extend(body)
        elif ctype == b"IEND":
            seen_iend = True
            pos = crc_start + 4
            break
        pos = crc_start + 4
    if header is None:
        raise PngDecodeError("missing IHDR chunk", pos)
    if not seen_iend:
        raise PngDecodeError("missing IEND chunk", pos)
    if not idat:
        raise PngDecodeError("missing IDAT data", pos)
    width, height, depth, color = header
    try:
        raw = zlib.decompress(bytes(idat))
    except zlib.error as exc:
        raise PngDecodeError(f"IDAT decompression failed: {exc}", first_idat_offset) from exc
    channels = 3 if color == 2 else 4
    bpp = channels * (depth // 8)
    rows = _unfilter(raw, width, height, bpp, first_idat_offset)
    if depth == 8:
        samples = rows.reshape(height, width, channels).astype(np.float64)
        maxval = 255.0
    else:
        samples = rows.reshape(height, width * channels * 2).view(">u2").reshape(height, width, channels)
        samples = samples.astype(np.float64)
        maxval = 65535.0
    rgb = samples[:, :, :3] / maxval
    return Image(rgb)


def _chunk(tag: bytes, payload: bytes) -> bytes:
    return (
        struct.pack(">I", len(payload))
        + tag
        + payload
        + struct.pack(">I", zlib.crc32(tag + payload) & 0xFFFFFFFF)
    )


def png_encode(img: Image) -> bytes:
    """Encode an image as an 8-bit RGB PNG.

    Quantization is round-half-up: q = floor(p * 255 + 0.5). Output bytes are
    deterministic for identical pixels (fixed filter, fixed zlib level).
    """
    quant = np.floor(img.data * 255.0 + 0.5).astype(np.uint8)
    height, width = quant.shape[:2]
    stride = width * 3
    raw = bytearray()
    flat = quant.reshape(height, stride)
    for row in range(height):
        raw.append(0)
        raw.extend(flat[row].tobytes())
    ihdr = struct.pack(">IIBBBBB", width, height, 8, 2, 0, 0, 0)
    return (
        PNG_SIGNATURE
        + _chunk(b"IHDR", ihdr)
        + _chunk(b"IDAT", zlib.compress(bytes(raw), 6))
        + _chunk(b"IEND", b"")
    )
