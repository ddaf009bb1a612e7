"""Image file I/O for droplet images (PNG and binary PGM)."""

import io
from pathlib import Path
from typing import Optional, Union

import numpy as np
from PIL import Image, UnidentifiedImageError

from src.core.vision import DropletImage
from src.utils.errors import BadImageError, IoError
from src.utils.logger import get_logger

logger = get_logger(__name__)

LUMA = np.array([0.299, 0.587, 0.114])
SAVE_FORMATS = {".png": "PNG", ".pgm": "PPM"}


def to_grayscale(img: Image.Image, source: Optional[str] = None) -> np.ndarray:
    """8-bit grayscale pixels of a PIL image; color by luminance rounded half-up."""
    if img.mode == "L":
        return np.array(img, dtype=np.uint8)
    if img.mode == "1":
        return np.array(img.convert("L"), dtype=np.uint8)
    if img.mode in ("RGB", "RGBA", "P", "LA", "CMYK", "YCbCr"):
        rgb = np.asarray(img.convert("RGB"), dtype=float)
        luma = np.floor(rgb @ LUMA + 0.5)
        return np.clip(luma, 0, 255).astype(np.uint8)
    raise BadImageError(source, f"unsupported pixel mode {img.mode} (expected 8-bit gray or color)")


def _decode(handle, source: Optional[str]) -> DropletImage:
    try:
        with Image.open(handle) as img:
            img.load()
            pixels = to_grayscale(img, source)
    except BadImageError:
        raise
    except (UnidentifiedImageError, OSError, SyntaxError, ValueError) as e:
        raise BadImageError(source, str(e) or type(e).__name__)

    try:
        return DropletImage(pixels)
    except ValueError as e:
        raise BadImageError(source, str(e))


def load_image(path: Union[str, Path]) -> DropletImage:
    """Read a PNG or PGM (P5) droplet image."""
    path = Path(path)
    if not path.is_file():
        raise BadImageError(str(path), "file does not exist")
    image = _decode(str(path), str(path))
    logger.debug(f"Loaded {path} ({image.width}x{image.height})")
    return image


def image_from_bytes(data: bytes, name: Optional[str] = None) -> DropletImage:
    """Decode an in-memory image (HTTP uploads)."""
    if not data:
        raise BadImageError(name, "empty upload")
    return _decode(io.BytesIO(data), name)


def save_image(image: DropletImage, path: Union[str, Path]) -> Path:
    """Write an image as PNG or PGM, chosen by suffix."""
    path = Path(path)
    fmt = SAVE_FORMATS.get(path.suffix.lower())
    if fmt is None:
        raise IoError(str(path), "image suffix must be .png or .pgm")

    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        Image.fromarray(np.asarray(image.pixels), mode="L").save(path, format=fmt)
    except OSError as e:
        raise IoError(str(path), e.strerror or str(e))
    return path
