"""Image representation, PNG/PPM codecs, color conversion and Gaussian smoothing.

Images are 8-bit RGB rasters. Supported containers are PNG (8-bit RGB/RGBA,
alpha dropped) and binary PPM (P6). All operations are pure functions on
immutable inputs.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np
import PIL.Image

from .errors import LogodetError

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


class MalformedImage(LogodetError):
    """Unparseable header or truncated payload."""


class UnsupportedFormat(LogodetError):
    """Container other than PNG or PPM(P6)."""


@dataclass(frozen=True, eq=False)
class Image:
    """8-bit RGB raster. `pixels` is a (height, width, 3) uint8 array."""

    pixels: np.ndarray

    def __post_init__(self):
        p = self.pixels
        if p.ndim != 3 or p.shape[2] != 3 or p.dtype != np.uint8:
            raise ValueError("pixels must be (h, w, 3) uint8")
        if p.shape[0] < 1 or p.shape[1] < 1:
            raise ValueError("image must be at least 1x1")

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def __eq__(self, other):
        return isinstance(other, Image) and np.array_equal(self.pixels, other.pixels)


def decode_image(data: bytes) -> Image:
    """Decode a PNG or binary PPM (P6) byte stream into an RGB Image.

    16-bit channels are truncated to their high byte; PNG alpha is dropped.
    Raises MalformedImage on a broken stream, UnsupportedFormat on any other
    container.
    """
    if data[:8] == PNG_MAGIC:
        return _decode_png(data)
    if data[:2] == b"P6":
        return _decode_ppm(data)
    raise UnsupportedFormat("not a PNG or PPM(P6) stream")


def _decode_png(data: bytes) -> Image:
    try:
        pil = PIL.Image.open(io.BytesIO(data))
        pil.load()
    except Exception as exc:
        raise MalformedImage(f"broken PNG stream: {exc}") from exc
    arr = np.asarray(pil)
    if arr.dtype == np.uint16:
        arr = (arr >> 8).astype(np.uint8)
    if arr.ndim == 2:  # grayscale
        arr = np.repeat(arr[:, :, None], 3, axis=2)
    elif arr.ndim == 3 and arr.shape[2] == 4:  # drop alpha, no compositing
        arr = arr[:, :, :3]
    elif arr.ndim == 3 and arr.shape[2] == 3:
        pass
    else:  # palette or exotic modes: let Pillow expand to RGB
        arr = np.asarray(pil.convert("RGB"))
    return Image(np.ascontiguousarray(arr.astype(np.uint8)))


def _decode_ppm(data: bytes) -> Image:
    pos = 2  # past magic
    fields = []
    while len(fields) < 3:
        if pos >= len(data):
            raise MalformedImage("PPM header ended early")
        c = data[pos : pos + 1]
        if c == b"#":  # comment runs to end of line
            while pos < len(data) and data[pos : pos + 1] != b"\n":
                pos += 1
        elif c.isspace():
            pos += 1
        elif c.isdigit():
            start = pos
            while pos < len(data) and data[pos : pos + 1].isdigit():
                pos += 1
            fields.append(int(data[start:pos]))
        else:
            raise MalformedImage(f"unexpected byte {c!r} in PPM header")
    width, height, maxval = fields
    if width < 1 or height < 1 or not (0 < maxval < 65536):
        raise MalformedImage("bad PPM dimensions or maxval")
    if pos >= len(data) or not data[pos : pos + 1].isspace():
        raise MalformedImage("missing whitespace after PPM maxval")
    pos += 1
    bytes_per_sample = 2 if maxval > 255 else 1
    need = width * height * 3 * bytes_per_sample
    payload = data[pos : pos + need]
    if len(payload) < need:
        raise MalformedImage(
            f"truncated PPM payload: expected {need} bytes, got {len(payload)}"
        )
    if bytes_per_sample == 2:
        arr = np.frombuffer(payload, dtype=">u2").reshape(height, width, 3)
        arr = (arr >> 8).astype(np.uint8)
    else:
        arr = np.frombuffer(payload, dtype=np.uint8).reshape(height, width, 3).copy()
    return Image(arr)


def encode_ppm(img: Image) -> bytes:
    """Serialize as binary PPM (P6); decode_image round-trips it bit-exactly."""
    header = f"P6\n{img.width} {img.height}\n255\n".encode("ascii")
    return header + img.pixels.tobytes()


def encode_png(img: Image) -> bytes:
    buf = io.BytesIO()
    PIL.Image.fromarray(img.pixels, "RGB").save(buf, format="PNG")
    return buf.getvalue()


def read_image(path) -> Image:
    with open(path, "rb") as fh:
        return decode_image(fh.read())


def image_size(path) -> tuple[int, int]:
    """(width, height) from the container header without decoding pixels."""
    try:
        with PIL.Image.open(path) as pil:
            return pil.size
    except Exception as exc:
        raise MalformedImage(f"cannot read header of {path}: {exc}") from exc


def gaussian_kernel(sigma: float) -> np.ndarray:
    """1-D Gaussian taps truncated at radius ceil(3*sigma), renormalized to sum 1."""
    radius = math.ceil(3.0 * sigma)
    xs = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-(xs * xs) / (2.0 * sigma * sigma))
    return k / k.sum()


def smooth_plane(plane: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian smoothing of one float plane with edge-clamped borders."""
    plane = np.asarray(plane, dtype=np.float64)
    if sigma <= 0:
        return plane.copy()
    k = gaussian_kernel(sigma)
    r = (len(k) - 1) // 2
    h, w = plane.shape
    padded = np.pad(plane, ((0, 0), (r, r)), mode="edge")
    out = np.zeros_like(plane)
    for i, tap in enumerate(k):
        out += tap * padded[:, i : i + w]
    padded = np.pad(out, ((r, r), (0, 0)), mode="edge")
    out = np.zeros_like(plane)
    for i, tap in enumerate(k):
        out += tap * padded[i : i + h, :]
    return out


def gaussian_smooth(img: Image, sigma: float) -> Image:
    """Per-channel Gaussian smoothing; sigma = 0 returns the input unchanged."""
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    if sigma == 0:
        return img
    planes = [smooth_plane(img.pixels[:, :, c], sigma) for c in range(3)]
    out = np.stack(planes, axis=2)
    return Image(np.clip(np.rint(out), 0, 255).astype(np.uint8))


def to_hsv(img: Image) -> Image:
    """RGB -> HSV with every channel rescaled to 0-255 (hue 0-360 maps to 0-255)."""
    rgb = img.pixels.astype(np.float64) / 255.0
    r, g, b = rgb[:, :, 0], rgb[:, :, 1], rgb[:, :, 2]
    mx = rgb.max(axis=2)
    mn = rgb.min(axis=2)
    delta = mx - mn
    v = mx
    s = np.where(mx > 0, delta / np.where(mx > 0, mx, 1.0), 0.0)
    # hue in [0, 1); gray pixels (delta == 0) get hue 0
    safe = np.where(delta > 0, delta, 1.0)
    h = np.zeros_like(mx)
    is_r = (mx == r) & (delta > 0)
    is_g = (mx == g) & (delta > 0) & ~is_r
    is_b = (delta > 0) & ~is_r & ~is_g
    h[is_r] = (((g - b) / safe)[is_r] / 6.0) % 1.0
    h[is_g] = (((b - r) / safe)[is_g] + 2.0) / 6.0
    h[is_b] = (((r - g) / safe)[is_b] + 4.0) / 6.0
    out = np.stack([h, s, v], axis=2)
    return Image(np.clip(np.rint(out * 255.0), 0, 255).astype(np.uint8))
