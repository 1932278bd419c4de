"""Invariance quantification over controlled viewpoint and illumination sweeps.

A sweep pairs a same-place curve (keyframe vs. progressively varied views of
the same place) with a different-place curve (keyframe vs. another place under
the same schedule). The area between them and the first index where the
same-place score drops to the level of any different-place score summarise how
much variation a technique tolerates.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ValidationError
from .imaging import ImageGrid, resize_bilinear
from .synth import gain_ramp, render_place
from .technique import VprTechnique

MODES = ("lateral", "zoom", "uniform-illum", "directional-illum")


@dataclass(frozen=True, eq=False)
class VariationSequence:
    mode: str
    keyframe: ImageGrid
    same_place: tuple[ImageGrid, ...]
    different_place: tuple[ImageGrid, ...]
    labels: tuple[float, ...]

    def __post_init__(self):
        n = len(self.same_place)
        if n < 1 or len(self.different_place) != n or len(self.labels) != n:
            raise ValidationError(
                f"sequence lengths differ: same={n}, different={len(self.different_place)}, labels={len(self.labels)}"
            )

    def __len__(self):
        return len(self.same_place)


def default_schedule(mode: str, n: int) -> list[float]:
    if mode == "lateral":
        return [2.0 * k for k in range(n)]
    if mode == "zoom":
        return [1.0 + 0.05 * k for k in range(n)]
    if mode == "uniform-illum":
        return list(np.linspace(1.0, 0.2, n)) if n > 1 else [1.0]
    if mode == "directional-illum":
        return list(np.linspace(0.0, 1.0, n)) if n > 1 else [0.0]
    raise ValidationError(f"unknown variation mode {mode!r}; choose from {MODES}")


def _apply(arr: np.ndarray, mode: str, mags: Sequence[float]) -> list[np.ndarray]:
    h, w = arr.shape[:2]
    out = []
    if mode == "lateral":
        shifts = [int(round(m)) for m in mags]
        if min(shifts) < 0:
            raise ValidationError("lateral shifts must be >= 0")
        crop_w = w - max(shifts)
        if crop_w < 2:
            raise ValidationError(f"shift {max(shifts)} px leaves no crop window in a {w} px wide image")
        for s in shifts:
            out.append(resize_bilinear(arr[:, s:s + crop_w], h, w))
    elif mode == "zoom":
        for f in mags:
            if f < 1.0:
                raise ValidationError(f"zoom factor {f} < 1 would crop outside the image")
            ch, cw = max(1, int(round(h / f))), max(1, int(round(w / f)))
            if ch < 2 or cw < 2:
                raise ValidationError(f"zoom factor {f} leaves a crop smaller than 2x2")
            top, left = (h - ch) // 2, (w - cw) // 2
            out.append(resize_bilinear(arr[top:top + ch, left:left + cw], h, w))
    elif mode == "uniform-illum":
        for g in mags:
            if g <= 0:
                raise ValidationError(f"gain must be positive, got {g}")
            out.append(np.clip(arr * g, 0.0, 1.0))
    elif mode == "directional-illum":
        for span in mags:
            if not 0 <= span < 2:
                raise ValidationError(f"ramp span must be in [0, 2), got {span}")
            ramp = gain_ramp(w, 1.0, span)
            ramp = ramp[None, :, None] if arr.ndim == 3 else ramp[None, :]
            out.append(np.clip(arr * ramp, 0.0, 1.0))
    else:
        raise ValidationError(f"unknown variation mode {mode!r}; choose from {MODES}")
    return out


def generate_variation_sequence(
    seed_image: ImageGrid,
    mode: str,
    n: int,
    magnitudes: Sequence[float] | None = None,
    other_image: ImageGrid | None = None,
    seed: int = 1,
) -> VariationSequence:
    """Build a same-place / different-place sweep of length *n*.

    Without *other_image*, the different place is rendered synthetically from
    *seed* at the size of *seed_image*. Illumination changes are applied in the
    float domain; values are only clipped when they leave [0, 1].
    """
    if n < 1:
        raise ValidationError(f"n must be >= 1, got {n}")
    mags = list(default_schedule(mode, n) if magnitudes is None else magnitudes)
    if len(mags) != n:
        raise ValidationError(f"schedule has {len(mags)} magnitudes, expected {n}")
    if other_image is None:
        rng = np.random.default_rng(seed)
        other = render_place(rng, seed_image.height, seed_image.width)
        if seed_image.channels == 3:
            other = np.repeat(other[:, :, None], 3, axis=2)
    else:
        if other_image.shape != seed_image.shape:
            raise ValidationError(
                f"other image shape {other_image.shape} differs from seed image shape {seed_image.shape}"
            )
        other = other_image.data
    same = tuple(ImageGrid(a) for a in _apply(seed_image.data, mode, mags))
    diff = tuple(ImageGrid(a) for a in _apply(other, mode, mags))
    return VariationSequence(mode, same[0], same, diff, tuple(float(m) for m in mags))


def area_between_curves(same: Sequence[float], diff: Sequence[float]) -> float:
    """Sum of ``same[i] - diff[i]`` at unit spacing; the ideal equals the curve length."""
    if len(same) != len(diff):
        raise ValidationError(f"curve lengths differ: {len(same)} vs {len(diff)}")
    if len(same) < 1:
        raise ValidationError("curves are empty")
    return float(sum(s - d for s, d in zip(same, diff)))


def invariance_limit(same: Sequence[float], diff: Sequence[float]) -> int | None:
    """First index whose same-place score is <= the highest different-place score."""
    if len(same) != len(diff):
        raise ValidationError(f"curve lengths differ: {len(same)} vs {len(diff)}")
    if len(same) < 1:
        raise ValidationError("curves are empty")
    ceiling = max(diff)
    for i, s in enumerate(same):
        if s <= ceiling:
            return i
    return None


@dataclass(frozen=True)
class VariationTrace:
    same_scores: tuple[float, ...]
    diff_scores: tuple[float, ...]
    abc: float
    limit_index: int | None
    labels: tuple[float, ...] = ()
    mode: str = ""

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("index,label,same_score,diff_score\n")
        labels = self.labels or tuple(float(i) for i in range(len(self.same_scores)))
        for i, (lab, s, d) in enumerate(zip(labels, self.same_scores, self.diff_scores)):
            buf.write(f"{i},{lab!r},{s!r},{d!r}\n")
        return buf.getvalue()

    def to_json(self) -> dict:
        return {"mode": self.mode, "n": len(self.same_scores), "abc": self.abc, "limit_index": self.limit_index}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1, sort_keys=True)


def trace_from_scores(same: Sequence[float], diff: Sequence[float], labels=(), mode: str = "") -> VariationTrace:
    return VariationTrace(
        tuple(float(s) for s in same),
        tuple(float(d) for d in diff),
        area_between_curves(same, diff),
        invariance_limit(same, diff),
        tuple(float(x) for x in labels),
        mode,
    )


def variation_trace(seq: VariationSequence, technique: VprTechnique) -> VariationTrace:
    key = technique.compute_query_desc(seq.keyframe)
    same = [technique.score(key, technique.compute_query_desc(img)) for img in seq.same_place]
    diff = [technique.score(key, technique.compute_query_desc(img)) for img in seq.different_place]
    return trace_from_scores(same, diff, seq.labels, seq.mode)
