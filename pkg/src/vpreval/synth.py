"""Seeded synthetic places for desk-scale verification."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import Dataset, GroundTruth
from .errors import ValidationError
from .imaging import ImageGrid, resize_bilinear

# Rendered intensities occupy [LOW, HIGH] so that gains up to HIGH**-1 stay unclipped.
LOW = 0.1
HIGH = 0.6


@dataclass(frozen=True)
class SynthSpec:
    num_places: int = 20
    height: int = 128
    width: int = 128
    seed: int = 0
    viewpoint_shift_px: int = 0
    gain: float = 1.0
    directional_gain_span: float = 0.0

    def validate(self) -> None:
        if self.num_places < 2:
            raise ValidationError(f"num_places must be >= 2, got {self.num_places}")
        if self.height < 16 or self.width < 16:
            raise ValidationError(f"image size must be at least 16x16, got {self.height}x{self.width}")
        if not 0 <= self.viewpoint_shift_px < self.width // 2:
            raise ValidationError(
                f"viewpoint_shift_px must be in [0, {self.width // 2}), got {self.viewpoint_shift_px}"
            )
        if not self.gain > 0 or not np.isfinite(self.gain):
            raise ValidationError(f"gain must be positive, got {self.gain}")
        if not self.directional_gain_span >= 0:
            raise ValidationError(f"directional_gain_span must be >= 0, got {self.directional_gain_span}")


def quantize(arr: np.ndarray) -> np.ndarray:
    """Snap to the 8-bit grid k/255 so images survive a PNG round trip bit-exactly."""
    return np.rint(np.clip(arr, 0.0, 1.0) * 255.0) / 255.0


def render_place(rng: np.random.Generator, height: int, width: int) -> np.ndarray:
    """Render one textured place: smooth noise plus planted rectangles and a stripe patch.

    All pattern geometry is drawn as integers. Output is quantised to k/255 and
    lies in [LOW, HIGH].
    """
    coarse = rng.random((max(2, height // 8), max(2, width // 8)))
    img = 0.5 * resize_bilinear(coarse, height, width)

    for _ in range(3):
        rh = int(rng.integers(height // 8, height // 2))
        rw = int(rng.integers(width // 8, width // 2))
        top = int(rng.integers(0, height - rh))
        left = int(rng.integers(0, width - rw))
        img[top:top + rh, left:left + rw] += float(rng.integers(1, 6)) / 10.0

    period = int(rng.integers(4, 12))
    sh = int(rng.integers(height // 4, height // 2))
    sw = int(rng.integers(width // 4, width // 2))
    top = int(rng.integers(0, height - sh))
    left = int(rng.integers(0, width - sw))
    if rng.integers(0, 2):
        stripes = (np.arange(sw)[None, :] // period) % 2
    else:
        stripes = (np.arange(sh)[:, None] // period) % 2
    img[top:top + sh, left:left + sw] += 0.4 * stripes

    lo, hi = img.min(), img.max()
    img = (img - lo) / (hi - lo) if hi > lo else np.zeros_like(img)
    return quantize(LOW + (HIGH - LOW) * img)


def lateral_view(arr: np.ndarray, shift_px: int) -> np.ndarray:
    """Crop ``shift_px`` columns off the left edge and resize back to the full width."""
    if shift_px == 0:
        return arr.copy()
    h, w = arr.shape[:2]
    return resize_bilinear(arr[:, shift_px:], h, w)


def gain_ramp(width: int, gain: float, span: float) -> np.ndarray:
    """Per-column multiplicative gain: ``gain`` at the centre, +-span/2 at the edges."""
    if span == 0:
        return np.full(width, gain)
    x = np.arange(width) / max(width - 1, 1) - 0.5
    return gain * (1.0 + span * x)


def generate_synthetic_dataset(spec: SynthSpec) -> Dataset:
    """Canonical views as references, transformed views as queries, identity ground truth."""
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    refs, queries = [], []
    ramp = gain_ramp(spec.width, spec.gain, spec.directional_gain_span)
    identity = spec.viewpoint_shift_px == 0 and spec.gain == 1.0 and spec.directional_gain_span == 0
    for _ in range(spec.num_places):
        ref = render_place(rng, spec.height, spec.width)
        refs.append(ImageGrid(ref))
        if identity:
            queries.append(ImageGrid(ref))
            continue
        q = lateral_view(ref, spec.viewpoint_shift_px) * ramp[None, :]
        queries.append(ImageGrid(quantize(q)))
    return Dataset(
        name=f"synth-s{spec.seed}-n{spec.num_places}",
        queries=tuple(queries),
        references=tuple(refs),
        ground_truth=GroundTruth.identity(spec.num_places),
        frame_spacing_m=1.0,
        is_trajectory=True,
    )
