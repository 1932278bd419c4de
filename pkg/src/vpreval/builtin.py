"""Handcrafted techniques shipped with the framework and their score functions."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, MatchingError
from .imaging import ImageGrid, resize_bilinear, to_gray
from .technique import Descriptor, DescriptorSet, MatchResult, VprTechnique

_NORM_FLOOR = 1e-12


def _check_pair(a: Descriptor, b: Descriptor) -> tuple[np.ndarray, np.ndarray]:
    if a.dims != b.dims:
        raise MatchingError(f"cannot compare descriptors with dims {a.dims} and {b.dims}")
    return a.flat(), b.flat()


def cosine_score(a: Descriptor, b: Descriptor) -> float:
    """Cosine similarity clamped to [0, 1]; 0 when either vector is (near) zero."""
    x, y = _check_pair(a, b)
    nx, ny = np.linalg.norm(x), np.linalg.norm(y)
    if nx < _NORM_FLOOR or ny < _NORM_FLOOR:
        return 0.0
    return float(min(1.0, max(0.0, np.dot(x, y) / (nx * ny))))


def l1_score(a: Descriptor, b: Descriptor) -> float:
    """``1 - |a-b|_1 / (|a|_1 + |b|_1)``, the L1 match mapped onto [0, 1]."""
    x, y = _check_pair(a, b)
    denom = max(np.abs(x).sum() + np.abs(y).sum(), _NORM_FLOOR)
    return float(min(1.0, max(0.0, 1.0 - np.abs(x - y).sum() / denom)))


def cosine_row(f_q: Descriptor, f_m: DescriptorSet) -> np.ndarray:
    """Cosine scores of one query against every map descriptor."""
    if f_q.size != f_m.matrix.shape[1]:
        raise MatchingError(f"query descriptor dims {f_q.dims} do not match map dims {f_m.dims}")
    q = f_q.flat()
    m = f_m.as_float64()
    nq = np.linalg.norm(q)
    nm = np.linalg.norm(m, axis=1)
    dots = m @ q
    denom = nq * nm
    ok = (nm >= _NORM_FLOOR) & (nq >= _NORM_FLOOR)
    row = np.zeros(len(f_m))
    row[ok] = dots[ok] / denom[ok]
    return np.clip(row, 0.0, 1.0)


def l1_row(f_q: Descriptor, f_m: DescriptorSet) -> np.ndarray:
    if f_q.size != f_m.matrix.shape[1]:
        raise MatchingError(f"query descriptor dims {f_q.dims} do not match map dims {f_m.dims}")
    q = f_q.flat()
    m = f_m.as_float64()
    dist = np.abs(m - q).sum(axis=1)
    denom = np.maximum(np.abs(q).sum() + np.abs(m).sum(axis=1), _NORM_FLOOR)
    return np.clip(1.0 - dist / denom, 0.0, 1.0)


MATCHERS = {
    "cosine": (cosine_score, cosine_row),
    "l1": (l1_score, l1_row),
}


@dataclass(frozen=True)
class HogConfig:
    image_side: int = 512
    cell: int = 16
    block_cells: int = 2
    bins: int = 9

    @property
    def cells_per_side(self) -> int:
        return self.image_side // self.cell

    @property
    def descriptor_length(self) -> int:
        blocks = self.cells_per_side - self.block_cells + 1
        return blocks * blocks * self.block_cells**2 * self.bins

    def validate(self) -> None:
        if self.cell < 1 or self.bins < 1 or self.block_cells < 1:
            raise ConfigurationError(f"invalid HOG parameters {self}")
        if self.image_side % self.cell:
            raise ConfigurationError(f"image_side {self.image_side} is not divisible by cell {self.cell}")
        if self.block_cells > self.cells_per_side:
            raise ConfigurationError(
                f"block of {self.block_cells} cells exceeds the {self.cells_per_side}-cell grid"
            )


def _gradients(gray: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # central differences, replicated borders
    p = np.pad(gray, 1, mode="edge")
    gx = p[1:-1, 2:] - p[1:-1, :-2]
    gy = p[2:, 1:-1] - p[:-2, 1:-1]
    return gx, gy


def hog_describe(img: ImageGrid, cfg: HogConfig = HogConfig()) -> Descriptor:
    """HOG descriptor: 9 unsigned bins, 2x2-cell blocks at 1-cell stride, per-block L2 norm.

    Orientation votes are magnitude weighted and split linearly between the two
    nearest bin centres (wrapping at 180 degrees); there is no spatial
    interpolation between cells.
    """
    cfg.validate()
    if min(img.height, img.width) < cfg.cell:
        raise ConfigurationError(
            f"{img.height}x{img.width} image is smaller than one {cfg.cell}x{cfg.cell} cell"
        )
    side = cfg.image_side
    gray = resize_bilinear(to_gray(img.data), side, side)
    gx, gy = _gradients(gray)
    mag = np.hypot(gx, gy)
    theta = np.mod(np.arctan2(gy, gx), np.pi)
    theta[theta >= np.pi] = 0.0

    pos = theta * (cfg.bins / np.pi) - 0.5
    lo = np.floor(pos)
    w_hi = pos - lo
    lo = lo.astype(np.intp) % cfg.bins
    hi = (lo + 1) % cfg.bins

    n = cfg.cells_per_side
    cell_idx = (np.arange(side) // cfg.cell)
    cell_of = (cell_idx[:, None] * n + cell_idx[None, :]) * cfg.bins
    hist = np.bincount((cell_of + lo).ravel(), weights=(mag * (1.0 - w_hi)).ravel(), minlength=n * n * cfg.bins)
    hist += np.bincount((cell_of + hi).ravel(), weights=(mag * w_hi).ravel(), minlength=n * n * cfg.bins)
    hist = hist.reshape(n, n, cfg.bins)

    b = cfg.block_cells
    nb = n - b + 1
    parts = [hist[i:i + nb, j:j + nb] for i in range(b) for j in range(b)]
    blocks = np.stack(parts, axis=2).reshape(nb, nb, b * b * cfg.bins)
    norms = np.sqrt((blocks**2).sum(axis=2, keepdims=True))
    blocks = blocks / np.maximum(norms, _NORM_FLOOR)
    return Descriptor(blocks.reshape(1, -1), "float32")


@dataclass(frozen=True)
class PatchNormConfig:
    down_side: int = 64
    patch: int = 8
    epsilon: float = 1e-8

    @property
    def descriptor_length(self) -> int:
        return self.down_side * self.down_side

    def validate(self) -> None:
        if self.patch < 1 or self.down_side < self.patch or self.down_side % self.patch:
            raise ConfigurationError(f"down_side {self.down_side} must be a positive multiple of patch {self.patch}")
        if not self.epsilon > 0:
            raise ConfigurationError(f"epsilon must be positive, got {self.epsilon}")


def patchnorm_describe(img: ImageGrid, cfg: PatchNormConfig = PatchNormConfig()) -> Descriptor:
    """Downsample, then normalise every patch to zero mean and unit standard deviation."""
    cfg.validate()
    if min(img.height, img.width) < cfg.patch:
        raise ConfigurationError(
            f"{img.height}x{img.width} image is smaller than one {cfg.patch}x{cfg.patch} patch"
        )
    s, p = cfg.down_side, cfg.patch
    small = resize_bilinear(to_gray(img.data), s, s)
    tiles = small.reshape(s // p, p, s // p, p)
    mean = tiles.mean(axis=(1, 3), keepdims=True)
    std = tiles.std(axis=(1, 3), keepdims=True)
    normed = (tiles - mean) / np.maximum(std, cfg.epsilon)
    return Descriptor(normed.reshape(1, s * s), "float32")


class DescriptorTechnique(VprTechnique):
    """A technique built from a describe function and one of the score functions."""

    def __init__(self, name: str, describe, matcher: str = "cosine"):
        if matcher not in MATCHERS:
            raise ConfigurationError(f"unknown matcher {matcher!r}; choose from {sorted(MATCHERS)}")
        self.name = name
        self.matcher = matcher
        self._describe = describe
        self._pair, self._row = MATCHERS[matcher]

    def compute_query_desc(self, img: ImageGrid) -> Descriptor:
        return self._describe(img)

    def perform_vpr(self, f_q: Descriptor, f_m: DescriptorSet) -> MatchResult:
        return MatchResult.from_row(self._row(f_q, f_m))

    def score(self, a: Descriptor, b: Descriptor) -> float:
        return self._pair(a, b)


class HogTechnique(DescriptorTechnique):
    def __init__(self, cfg: HogConfig = HogConfig(), matcher: str = "cosine", name: str | None = None):
        cfg.validate()
        self.cfg = cfg
        super().__init__(name or "hog", lambda img: hog_describe(img, cfg), matcher)


class PatchNormTechnique(DescriptorTechnique):
    def __init__(self, cfg: PatchNormConfig = PatchNormConfig(), matcher: str = "cosine", name: str | None = None):
        cfg.validate()
        self.cfg = cfg
        super().__init__(name or "patchnorm", lambda img: patchnorm_describe(img, cfg), matcher)
