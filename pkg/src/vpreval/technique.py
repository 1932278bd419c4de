"""The generic technique contract and the adapter for externally computed results.

Every technique exposes three steps: encode one query image, encode the whole
reference map, and score a query descriptor against the map. The evaluation
engine only talks to techniques through this surface.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigurationError, MatchingError, ValidationError
from .imaging import ImageGrid

ELEMENT_WIDTH = {"float32": 4, "float64": 8}


@dataclass(frozen=True, eq=False)
class Descriptor:
    values: np.ndarray
    element_kind: str = "float32"

    def __post_init__(self):
        if self.element_kind not in ELEMENT_WIDTH:
            raise ValidationError(f"unknown element kind {self.element_kind!r}")
        arr = np.array(self.values, dtype=self.element_kind, copy=True)
        if arr.ndim == 1:
            arr = arr[None, :]
        if not np.all(np.isfinite(arr)):
            raise ValidationError("descriptor contains non-finite values")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def dims(self) -> tuple[int, ...]:
        return self.values.shape

    @property
    def size(self) -> int:
        return self.values.size

    @property
    def byte_size(self) -> int:
        return self.values.size * ELEMENT_WIDTH[self.element_kind]

    def flat(self) -> np.ndarray:
        """Flattened float64 view used by the score functions."""
        return self.values.ravel().astype(np.float64)

    def __eq__(self, other):
        if not isinstance(other, Descriptor):
            return NotImplemented
        return (
            self.element_kind == other.element_kind
            and self.dims == other.dims
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None


class DescriptorSet:
    """The encoded reference map: one descriptor per reference image, order preserved."""

    def __init__(self, descriptors: Sequence[Descriptor]):
        descriptors = list(descriptors)
        if not descriptors:
            raise ValidationError("descriptor set is empty")
        first = descriptors[0]
        for i, d in enumerate(descriptors):
            if d.dims != first.dims or d.element_kind != first.element_kind:
                raise MatchingError(
                    f"descriptor {i} has dims {d.dims} ({d.element_kind}), expected {first.dims} ({first.element_kind})"
                )
        self.dims = first.dims
        self.element_kind = first.element_kind
        self.matrix = np.stack([d.values.ravel() for d in descriptors])
        self.matrix.setflags(write=False)
        self._f64 = None

    def __len__(self):
        return self.matrix.shape[0]

    def __getitem__(self, i: int) -> Descriptor:
        return Descriptor(self.matrix[i].reshape(self.dims), self.element_kind)

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    @property
    def per_descriptor_bytes(self) -> int:
        return self.matrix.shape[1] * ELEMENT_WIDTH[self.element_kind]

    @property
    def byte_size(self) -> int:
        return len(self) * self.per_descriptor_bytes

    def as_float64(self) -> np.ndarray:
        if self._f64 is None:
            f64 = self.matrix.astype(np.float64)
            f64.setflags(write=False)
            self._f64 = f64
        return self._f64


@dataclass(frozen=True, eq=False)
class MatchResult:
    best_index: int
    score: float
    row: np.ndarray = field(repr=False)

    @classmethod
    def from_row(cls, row: np.ndarray) -> "MatchResult":
        row = np.asarray(row, dtype=np.float64)
        best = int(np.argmax(row))  # first maximum, i.e. lowest index on ties
        return cls(best_index=best, score=float(row[best]), row=row)


class VprTechnique:
    """Base class for techniques.

    Subclasses implement :meth:`compute_query_desc` and :meth:`score`, and may
    override :meth:`perform_vpr` with a batched matcher. :meth:`encode_queries`
    exists so that a replayed technique can address queries by position; live
    techniques inherit the per-image default.
    """

    name: str = "technique"
    element_kind: str = "float32"

    def compute_query_desc(self, img: ImageGrid) -> Descriptor:
        raise NotImplementedError

    def compute_map_features(self, images: Sequence[ImageGrid]) -> DescriptorSet:
        if len(images) == 0:
            raise ValidationError("reference map is empty")
        descriptors = []
        for i, img in enumerate(images):
            try:
                descriptors.append(self.compute_query_desc(img))
            except ConfigurationError as exc:
                raise ConfigurationError(f"reference {i}: {exc}") from exc
        return DescriptorSet(descriptors)

    def encode_queries(self, images: Sequence[ImageGrid]) -> list[Descriptor]:
        out = []
        for i, img in enumerate(images):
            try:
                out.append(self.compute_query_desc(img))
            except ConfigurationError as exc:
                raise ConfigurationError(f"query {i}: {exc}") from exc
        return out

    def perform_vpr(self, f_q: Descriptor, f_m: DescriptorSet) -> MatchResult:
        # pairwise fallback; subclasses with a vectorised matcher override this
        return MatchResult.from_row(np.array([self.score(f_q, f) for f in f_m]))

    def score(self, a: Descriptor, b: Descriptor) -> float:
        """Similarity of a single descriptor pair, in [0, 1]."""
        raise NotImplementedError

    @property
    def timing_profile(self):
        """Stored timings for replayed techniques; ``None`` means measure live."""
        return None


class PrecomputedTechnique(VprTechnique):
    """Replays a score matrix produced by an external implementation.

    The "descriptor" of query ``q`` is row ``q`` of the stored matrix and the map
    features are placeholders, so :meth:`perform_vpr` simply hands the stored row
    back. Stored ``t_e`` / ``t_m`` are reported instead of live timings.
    """

    element_kind = "float64"

    def __init__(self, name: str, scores: np.ndarray, t_e: float, t_m: float, descriptor_bytes: int):
        scores = np.array(scores, dtype=np.float64)
        if scores.ndim != 2 or scores.size == 0:
            raise ValidationError(f"score matrix must be a non-empty 2-D table, got shape {scores.shape}")
        if not np.all(np.isfinite(scores)):
            raise ValidationError("score matrix contains non-finite values")
        bad = np.argwhere((scores < 0.0) | (scores > 1.0))
        if bad.size:
            q, r = bad[0]
            raise ValidationError(f"score {scores[q, r]!r} at (query {q}, reference {r}) is outside [0, 1]")
        for label, v in (("t_e_sec", t_e), ("t_m_sec", t_m)):
            if not (math.isfinite(v) and v >= 0):
                raise ValidationError(f"{label} must be a nonnegative number, got {v!r}")
        if int(descriptor_bytes) < 0:
            raise ValidationError(f"descriptor_bytes must be nonnegative, got {descriptor_bytes}")
        scores.setflags(write=False)
        self.name = name
        self.scores = scores
        self.t_e = float(t_e)
        self.t_m = float(t_m)
        self.descriptor_bytes = int(descriptor_bytes)

    @property
    def shape(self) -> tuple[int, int]:
        return self.scores.shape

    def check_shape(self, num_queries: int, num_refs: int) -> None:
        if self.scores.shape != (num_queries, num_refs):
            raise MatchingError(
                f"precomputed technique {self.name!r} holds a {self.scores.shape[0]}x{self.scores.shape[1]} "
                f"score matrix, dataset expects (T_Q, Z) = ({num_queries}, {num_refs})"
            )

    def compute_query_desc(self, img: ImageGrid) -> Descriptor:
        raise ConfigurationError(
            f"precomputed technique {self.name!r} replays rows by query position; use encode_queries"
        )

    def encode_queries(self, images: Sequence[ImageGrid]) -> list[Descriptor]:
        if len(images) != self.scores.shape[0]:
            self.check_shape(len(images), self.scores.shape[1])
        return [Descriptor(row, "float64") for row in self.scores]

    def compute_map_features(self, images: Sequence[ImageGrid]) -> DescriptorSet:
        if len(images) != self.scores.shape[1]:
            self.check_shape(self.scores.shape[0], len(images))
        return DescriptorSet([Descriptor([float(i)], "float64") for i in range(len(images))])

    def perform_vpr(self, f_q: Descriptor, f_m: DescriptorSet) -> MatchResult:
        if f_q.size != len(f_m):
            raise MatchingError(f"replayed row has {f_q.size} scores but the map holds {len(f_m)} references")
        return MatchResult.from_row(f_q.flat())

    def score(self, a: Descriptor, b: Descriptor) -> float:
        raise ConfigurationError(f"precomputed technique {self.name!r} cannot score arbitrary pairs")

    @property
    def timing_profile(self):
        from .engine import TimingProfile

        return TimingProfile(
            t_e=self.t_e,
            t_m=self.t_m,
            z=self.scores.shape[1],
            descriptor_bytes=self.descriptor_bytes,
            source="precomputed",
        )


def write_scores_csv(scores: np.ndarray, path: str | Path) -> None:
    """One row per query; floats written with ``repr`` so they read back bit-exactly."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        for row in np.asarray(scores, dtype=np.float64):
            writer.writerow([repr(float(x)) for x in row])


def read_scores_csv(path: str | Path) -> np.ndarray:
    rows = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row:
                continue
            try:
                rows.append([float(x) for x in row])
            except ValueError as exc:
                raise ValidationError(f"{path}:{lineno}: non-numeric score ({exc})") from exc
    if not rows:
        raise ValidationError(f"{path}: no scores")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise ValidationError(f"{path}: ragged score matrix (row widths {sorted(widths)})")
    return np.array(rows, dtype=np.float64)


def export_precomputed(
    out_dir: str | Path,
    name: str,
    scores: np.ndarray,
    t_e: float,
    t_m: float,
    descriptor_bytes: int,
) -> Path:
    """Write a ``results.json`` + ``scores.csv`` bundle readable by :func:`load_precomputed_results`."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_scores_csv(scores, out_dir / "scores.csv")
    meta = {
        "name": name,
        "t_e_sec": t_e,
        "t_m_sec": t_m,
        "descriptor_bytes": int(descriptor_bytes),
        "scores_csv": "scores.csv",
    }
    (out_dir / "results.json").write_text(json.dumps(meta, indent=1) + "\n")
    return out_dir / "results.json"


def load_precomputed_results(path: str | Path) -> PrecomputedTechnique:
    """Load a bundle from a ``results.json`` file or the directory holding it."""
    path = Path(path)
    if path.is_dir():
        path = path / "results.json"
    if not path.is_file():
        raise ValidationError(f"missing precomputed bundle: {path}")
    try:
        meta = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc})") from exc
    missing = [k for k in ("name", "t_e_sec", "t_m_sec", "descriptor_bytes", "scores_csv") if k not in meta]
    if missing:
        raise ValidationError(f"{path}: missing keys {missing}")
    scores = read_scores_csv(path.parent / meta["scores_csv"])
    return PrecomputedTechnique(
        name=str(meta["name"]),
        scores=scores,
        t_e=float(meta["t_e_sec"]),
        t_m=float(meta["t_m_sec"]),
        descriptor_bytes=int(meta["descriptor_bytes"]),
    )
