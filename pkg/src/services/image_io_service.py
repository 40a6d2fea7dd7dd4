"""
Image file service: binary PPM (P6) read/write by hand, PNG through Pillow.
"""
import os
from pathlib import Path
from typing import List, Union

import numpy as np
from PIL import Image

from ..config.settings import settings
from ..models.images import ImageRGB8
from ..utils.errors import ImageParseError, UsageError
from ..utils.logging_utils import setup_logger

# Set up logger for this module
logger = setup_logger("ImageIOService")

PathLike = Union[str, os.PathLike]

_WHITESPACE = b" \t\n\r\x0b\x0c"


def _read_token(data: bytes, pos: int, path: str):
    """Next whitespace-delimited header token, skipping '#' comments."""
    n = len(data)
    while pos < n:
        if data[pos:pos + 1] in (b"#",):
            while pos < n and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif data[pos] in _WHITESPACE:
            pos += 1
        else:
            break
    start = pos
    while pos < n and data[pos] not in _WHITESPACE and data[pos:pos + 1] != b"#":
        pos += 1
    if start == pos:
        raise ImageParseError("Unexpected end of header", start, path)
    return data[start:pos], start, pos


def _read_int(data: bytes, pos: int, path: str, what: str):
    token, start, pos = _read_token(data, pos, path)
    if not token.isdigit():
        raise ImageParseError(f"Expected {what}, found {token[:16]!r}", start, path)
    return int(token), start, pos


def parse_ppm(data: bytes, path: str = "<bytes>") -> ImageRGB8:
    """Decode a binary P6 file with maxval 255."""
    magic, start, pos = _read_token(data, 0, path)
    if magic != b"P6":
        raise ImageParseError(f"Bad magic {magic[:8]!r}, expected b'P6'", start, path)
    width, width_start, pos = _read_int(data, pos, path, "width")
    height, _, pos = _read_int(data, pos, path, "height")
    maxval, maxval_start, pos = _read_int(data, pos, path, "maxval")
    if width < 1 or height < 1:
        raise ImageParseError(f"Invalid dimensions {width}x{height}", width_start, path)
    if maxval != 255:
        raise ImageParseError(f"Unsupported maxval {maxval}, only 255 is accepted", maxval_start, path)
    if pos >= len(data) or data[pos] not in _WHITESPACE:
        raise ImageParseError("Missing whitespace after maxval", pos, path)
    pos += 1

    expected = 3 * width * height
    payload = data[pos:]
    if len(payload) != expected:
        raise ImageParseError(
            f"Payload has {len(payload)} bytes, expected {expected} for {width}x{height}",
            pos + min(len(payload), expected),
            path,
        )
    pixels = np.frombuffer(payload, dtype=np.uint8).reshape(height, width, 3).copy()
    return ImageRGB8(pixels)


def encode_ppm(img: ImageRGB8) -> bytes:
    header = f"P6\n{img.width} {img.height}\n255\n".encode("ascii")
    return header + np.ascontiguousarray(img.pixels).tobytes()


class ImageIOService:
    """Loads and saves RGB images; the format follows the file extension."""

    def load_image(self, path: PathLike) -> ImageRGB8:
        path = Path(path)
        logger.debug(f"Loading image {path}")
        if path.suffix.lower() == ".png":
            with Image.open(path) as im:
                return ImageRGB8(np.array(im.convert("RGB"), dtype=np.uint8))
        return parse_ppm(path.read_bytes(), str(path))

    def save_image(self, img: ImageRGB8, path: PathLike):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        if path.suffix.lower() == ".png":
            Image.fromarray(img.pixels).save(path)
        else:
            path.write_bytes(encode_ppm(img))
        logger.debug(f"Saved {img.width}x{img.height} image to {path}")

    def list_images(self, directory: PathLike) -> List[Path]:
        """Image files of a directory in lexicographic order by name."""
        directory = Path(directory)
        if not directory.is_dir():
            raise UsageError(f"Not a readable directory: {directory}")
        files = sorted(
            (p for p in directory.iterdir() if p.suffix.lower() in settings.IMAGE_EXTENSIONS),
            key=lambda p: p.name,
        )
        if not files:
            raise UsageError(f"No images ({', '.join(settings.IMAGE_EXTENSIONS)}) found in {directory}")
        logger.info(f"Found {len(files)} image(s) in {directory}")
        return files
