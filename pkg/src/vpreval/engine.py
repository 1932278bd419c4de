"""Confusion-matrix assembly and computational timing."""

from __future__ import annotations

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .dataset import Dataset
from .errors import ValidationError, VprError
from .technique import Descriptor, PrecomputedTechnique, VprTechnique, export_precomputed

log = logging.getLogger(__name__)

MAX_TIMED_PAIRS = 100_000


class ConfusionMatrix:
    """T_Q x Z matching scores with cached per-query best match and best score."""

    def __init__(self, scores: np.ndarray):
        scores = np.array(scores, dtype=np.float64)
        if scores.ndim != 2 or 0 in scores.shape:
            raise ValidationError(f"confusion matrix must be non-empty 2-D, got shape {scores.shape}")
        if not np.all(np.isfinite(scores)) or scores.min() < 0.0 or scores.max() > 1.0:
            raise ValidationError("confusion matrix entries must lie in [0, 1]")
        scores.setflags(write=False)
        self.scores = scores
        self.best_index = np.argmax(scores, axis=1)
        self.best_score = scores[np.arange(scores.shape[0]), self.best_index]
        self.best_index.setflags(write=False)
        self.best_score.setflags(write=False)

    @property
    def shape(self) -> tuple[int, int]:
        return self.scores.shape

    def __eq__(self, other):
        if not isinstance(other, ConfusionMatrix):
            return NotImplemented
        return np.array_equal(self.scores, other.scores)

    __hash__ = None

    def correct(self, gt) -> np.ndarray:
        """Whether each query's best match is listed in its ground truth."""
        return np.array([int(p) in set(refs) for p, refs in zip(self.best_index, gt)], dtype=bool)


@dataclass(frozen=True)
class TimingProfile:
    t_e: float
    t_m: float
    z: int
    descriptor_bytes: int
    t_e_std: float = 0.0
    repetitions: int = 1
    pairs_timed: int = 0
    source: str = "measured"

    def __post_init__(self):
        if min(self.t_e, self.t_m, self.t_e_std) < 0 or self.descriptor_bytes < 0:
            raise ValidationError(f"timing values must be nonnegative: {self}")
        if self.z < 1:
            raise ValidationError(f"map size must be >= 1, got {self.z}")

    def to_json(self) -> dict:
        out = asdict(self)
        out["threading"] = "serial"
        out["pair_cap"] = MAX_TIMED_PAIRS
        return out


def _encode_parallel(technique: VprTechnique, images, workers: int) -> list[Descriptor]:
    def one(i):
        try:
            return technique.compute_query_desc(images[i])
        except VprError as exc:
            raise type(exc)(f"query {i}: {exc}") from exc

    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(one, range(len(images))))


def build_confusion_matrix(technique: VprTechnique, d: Dataset, workers: int = 1) -> ConfusionMatrix:
    """Encode the map once, then score every query against it.

    ``workers > 1`` spreads query encoding and row scoring over a thread pool.
    Rows are computed independently and placed by index, so the result is
    bitwise identical to the serial path.
    """
    if isinstance(technique, PrecomputedTechnique):
        technique.check_shape(d.num_queries, d.num_references)
    f_m = technique.compute_map_features(d.references)
    if workers > 1 and not isinstance(technique, PrecomputedTechnique):
        f_q = _encode_parallel(technique, d.queries, workers)
    else:
        f_q = technique.encode_queries(d.queries)

    def row(i):
        try:
            return technique.perform_vpr(f_q[i], f_m).row
        except VprError as exc:
            raise type(exc)(f"query {i}: {exc}") from exc

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(row, range(d.num_queries)))
    else:
        rows = [row(i) for i in range(d.num_queries)]
    return ConfusionMatrix(np.vstack(rows))


def measure_timings(
    technique: VprTechnique,
    d: Dataset,
    repetitions: int = 1,
    max_pairs: int = MAX_TIMED_PAIRS,
    seed: int = 0,
) -> TimingProfile:
    """Serial wall-clock timing of encoding (per image) and matching (per descriptor pair).

    One untimed warm-up encode precedes the measurement. ``t_e`` is the mean over
    all queries, averaged over repetitions; ``t_e_std`` is the spread of the
    per-repetition means. ``t_m`` is averaged over all (query, reference) pairs,
    or over ``max_pairs`` pairs drawn with ``seed`` when there are more.
    """
    stored = technique.timing_profile
    if stored is not None:
        return stored
    if repetitions < 1:
        raise ValidationError(f"repetitions must be >= 1, got {repetitions}")

    technique.compute_query_desc(d.queries[0])  # warm-up
    rep_means = []
    f_q: list[Descriptor] = []
    for _ in range(repetitions):
        f_q = []
        elapsed = 0.0
        for img in d.queries:
            t0 = time.perf_counter()
            f_q.append(technique.compute_query_desc(img))
            elapsed += time.perf_counter() - t0
        rep_means.append(elapsed / d.num_queries)

    f_m = technique.compute_map_features(d.references)
    refs = list(f_m)
    total = d.num_queries * d.num_references
    if total <= max_pairs:
        pairs = [(q, r) for q in range(d.num_queries) for r in range(d.num_references)]
    else:
        rng = np.random.default_rng(seed)
        flat = rng.choice(total, size=max_pairs, replace=False)
        pairs = [(int(i) // d.num_references, int(i) % d.num_references) for i in flat]
    score = technique.score
    t0 = time.perf_counter()
    for q, r in pairs:
        score(f_q[q], refs[r])
    t_m = (time.perf_counter() - t0) / len(pairs)

    return TimingProfile(
        t_e=float(np.mean(rep_means)),
        t_m=t_m,
        z=d.num_references,
        descriptor_bytes=f_q[0].byte_size,
        t_e_std=float(np.std(rep_means)),
        repetitions=repetitions,
        pairs_timed=len(pairs),
    )


def export_confusion_matrix(
    cm: ConfusionMatrix,
    out_dir,
    name: str,
    timing: TimingProfile | None = None,
):
    """Write *cm* as a precomputed bundle (``results.json`` + ``scores.csv``)."""
    return export_precomputed(
        out_dir,
        name,
        cm.scores,
        t_e=timing.t_e if timing else 0.0,
        t_m=timing.t_m if timing else 0.0,
        descriptor_bytes=timing.descriptor_bytes if timing else 0,
    )
