"""Image I/O: binary PPM (P6, maxval 255) as the native format, PNG via Pillow."""

from __future__ import annotations

import io
from pathlib import Path

import numpy as np


def to_uint8(image: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(np.asarray(image, dtype=np.float64) * 255.0), 0, 255).astype(
        np.uint8
    )


def write_ppm(image: np.ndarray, path: str | Path) -> None:
    """Write an HxWx3 float image in [0, 1] as binary PPM."""
    u8 = to_uint8(image)
    if u8.ndim != 3 or u8.shape[2] != 3:
        raise ValueError(f"expected HxWx3 image, got shape {image.shape}")
    h, w = u8.shape[:2]
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(u8.tobytes())


def read_ppm(path: str | Path) -> np.ndarray:
    """Read a binary PPM into an HxWx3 float64 image in [0, 1]."""
    data = Path(path).read_bytes()
    if not data.startswith(b"P6"):
        raise ValueError(f"{path}: not a binary PPM (P6)")
    # header = magic, width, height, maxval as whitespace-separated tokens,
    # with optional '#' comments
    tokens: list[bytes] = []
    pos = 2
    while len(tokens) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    pos += 1  # single whitespace after maxval
    w, h, maxval = (int(t) for t in tokens)
    if maxval != 255:
        raise ValueError(f"{path}: unsupported maxval {maxval}")
    pixels = np.frombuffer(data, dtype=np.uint8, count=w * h * 3, offset=pos)
    return pixels.reshape(h, w, 3).astype(np.float64) / 255.0


def write_png(image: np.ndarray, path: str | Path) -> None:
    from PIL import Image

    Image.fromarray(to_uint8(image), mode="RGB").save(path, format="PNG")


def png_bytes(image: np.ndarray) -> bytes:
    from PIL import Image

    buf = io.BytesIO()
    Image.fromarray(to_uint8(image), mode="RGB").save(buf, format="PNG")
    return buf.getvalue()


def write_image(image: np.ndarray, path: str | Path) -> None:
    """Dispatch on extension: .ppm native, anything else through Pillow."""
    path = Path(path)
    if path.suffix.lower() == ".ppm":
        write_ppm(image, path)
    else:
        write_png(image, path)


def load_image(path: str | Path) -> np.ndarray:
    path = Path(path)
    if path.suffix.lower() == ".ppm":
        return read_ppm(path)
    from PIL import Image

    with Image.open(path) as im:
        arr = np.asarray(im.convert("RGB"), dtype=np.float64)
    return arr / 255.0
