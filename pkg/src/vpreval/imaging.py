"""Image container and the small set of raster operations the techniques need."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import DatasetError, ValidationError

IMAGE_EXTENSIONS = ("png", "jpg", "jpeg", "pgm", "bmp")

_LUMA = np.array([0.299, 0.587, 0.114])


@dataclass(frozen=True, eq=False)
class ImageGrid:
    """An H x W (gray) or H x W x 3 (RGB) raster with intensities in [0, 1].

    The array is copied to float64 and frozen on construction, so an ImageGrid
    can be shared between threads.
    """

    data: np.ndarray

    def __post_init__(self):
        arr = np.array(self.data, dtype=np.float64, copy=True)
        if arr.ndim == 3 and arr.shape[2] == 1:
            arr = arr[:, :, 0]
        if arr.ndim not in (2, 3) or (arr.ndim == 3 and arr.shape[2] != 3):
            raise ValidationError(f"image must be HxW or HxWx3, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValidationError(f"image has empty extent {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValidationError("image contains non-finite intensities")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ValidationError(
                f"intensities must lie in [0, 1], got [{arr.min():.6g}, {arr.max():.6g}]"
            )
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return 1 if self.data.ndim == 2 else 3

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def __eq__(self, other):
        if not isinstance(other, ImageGrid):
            return NotImplemented
        return self.data.shape == other.data.shape and np.array_equal(self.data, other.data)

    __hash__ = None

    def __repr__(self):
        return f"ImageGrid({self.height}x{self.width}x{self.channels})"


def to_gray(data: np.ndarray) -> np.ndarray:
    """Luma conversion (0.299 R + 0.587 G + 0.114 B); gray input passes through."""
    if data.ndim == 2:
        return np.asarray(data, dtype=np.float64)
    return np.asarray(data, dtype=np.float64) @ _LUMA


def _axis_weights(n_in: int, n_out: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    # half-pixel centre alignment, edge samples clamped
    scale = n_in / n_out
    src = (np.arange(n_out) + 0.5) * scale - 0.5
    src = np.clip(src, 0.0, n_in - 1)
    lo = np.floor(src).astype(np.intp)
    hi = np.minimum(lo + 1, n_in - 1)
    frac = src - lo
    return lo, hi, frac


def resize_bilinear(data: np.ndarray, height: int, width: int) -> np.ndarray:
    """Bilinear resize of a 2-D (or HxWxC) float array."""
    data = np.asarray(data, dtype=np.float64)
    h, w = data.shape[:2]
    if (h, w) == (height, width):
        return data.copy()
    r0, r1, fr = _axis_weights(h, height)
    c0, c1, fc = _axis_weights(w, width)
    if data.ndim == 3:
        fr = fr[:, None, None]
        fc_b = fc[None, :, None]
    else:
        fr = fr[:, None]
        fc_b = fc[None, :]
    rows = data[r0] * (1.0 - fr) + data[r1] * fr
    return rows[:, c0] * (1.0 - fc_b) + rows[:, c1] * fc_b


def load_image(path: str | Path) -> ImageGrid:
    """Read an image file and normalise its intensities to [0, 1]."""
    path = Path(path)
    try:
        with Image.open(path) as im:
            im.load()
            if im.mode in ("I;16", "I;16B", "I;16L", "I"):
                arr = np.asarray(im, dtype=np.float64) / 65535.0
            elif im.mode == "L":
                arr = np.asarray(im, dtype=np.float64) / 255.0
            else:
                arr = np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0
    except (OSError, ValueError) as exc:
        raise DatasetError(f"unreadable image {path}: {exc}") from exc
    return ImageGrid(np.clip(arr, 0.0, 1.0))


def save_image(img: ImageGrid, path: str | Path) -> None:
    """Write an 8-bit image; intensities are rounded to the nearest 1/255 step."""
    arr = np.rint(img.data * 255.0).astype(np.uint8)
    Image.fromarray(arr).save(Path(path))
