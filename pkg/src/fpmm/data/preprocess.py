"""Frame preprocessing: grayscale, crop, resize, channel replication."""

from __future__ import annotations

import numpy as np
from PIL import Image

from fpmm.shared.errors import ShapeMismatchError

LUMA_WEIGHTS = (0.299, 0.587, 0.114)
DEFAULT_SIZE = 256

CropBox = tuple[int, int, int, int]  # left, top, right, bottom (right/bottom exclusive)


def to_grayscale(image: np.ndarray) -> np.ndarray:
    """H×W luma of an H×W, H×W×1 or H×W×3 image; equal channels pass through unchanged."""
    image = np.asarray(image, dtype=np.float64)
    if image.ndim == 2:
        return image
    if image.ndim != 3 or image.shape[-1] not in (1, 3):
        raise ShapeMismatchError(f"Expected H×W, H×W×1 or H×W×3 image, got {image.shape}")
    if image.shape[-1] == 1 or (np.array_equal(image[..., 0], image[..., 1]) and np.array_equal(image[..., 0], image[..., 2])):
        return image[..., 0]
    return image @ np.asarray(LUMA_WEIGHTS)


def resize(field: np.ndarray, size: tuple[int, int]) -> np.ndarray:
    """Bilinear resize of an H×W float field with Pillow; same-size input is returned as is."""
    if field.shape == tuple(size):
        return field
    height, width = size
    img = Image.fromarray(np.ascontiguousarray(field, dtype=np.float32))
    return np.asarray(img.resize((width, height), Image.Resampling.BILINEAR), dtype=np.float64)


def preprocess(
    image: np.ndarray,
    crop_box: CropBox | None = None,
    *,
    size: int | tuple[int, int] = DEFAULT_SIZE,
    channels: int = 3,
) -> np.ndarray:
    """Grayscale → crop → bilinear resize → replicate to a C×H×W frame in [0, 1].

    ``image`` is H×W×c (as read from disk) or an already preprocessed C×H×W
    frame with identical channels. ``crop_box`` defaults to the whole image.
    """
    image = np.asarray(image, dtype=np.float64)
    if image.ndim == 3 and image.shape[0] in (1, 3) and image.shape[-1] not in (1, 3):
        image = np.moveaxis(image, 0, -1)
    gray = to_grayscale(image)
    height, width = gray.shape
    left, top, right, bottom = crop_box if crop_box is not None else (0, 0, width, height)
    if not (0 <= left < right <= width and 0 <= top < bottom <= height):
        raise ValueError(f"Crop box {(left, top, right, bottom)} is empty or outside the {height}×{width} image")
    out_size = (size, size) if isinstance(size, int) else tuple(size)
    cropped = resize(gray[top:bottom, left:right], out_size)
    return np.repeat(np.clip(cropped, 0.0, 1.0)[None], channels, axis=0)
