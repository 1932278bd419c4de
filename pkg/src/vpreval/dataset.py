"""Datasets, ground truth, and the ground-truth manipulations used by the meta-analyses."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Sequence

from .errors import DatasetError, ValidationError
from .imaging import IMAGE_EXTENSIONS, ImageGrid, load_image, save_image


class GroundTruth:
    """Per-query lists of correct reference indices.

    Lists are normalised to sorted, duplicate-free tuples. An empty list marks a
    query with no correct reference (a "new place" / true-negative query).
    """

    __slots__ = ("_entries",)

    def __init__(self, entries: Iterable[Iterable[int]]):
        normalised = []
        for q, refs in enumerate(entries):
            refs = [int(r) for r in refs]
            if any(r < 0 for r in refs):
                raise ValidationError(f"query {q}: negative reference index in {refs}")
            normalised.append(tuple(sorted(set(refs))))
        self._entries = tuple(normalised)

    @classmethod
    def identity(cls, n: int) -> "GroundTruth":
        return cls([q] for q in range(n))

    def __len__(self):
        return len(self._entries)

    def __getitem__(self, q: int) -> tuple[int, ...]:
        return self._entries[q]

    def __iter__(self):
        return iter(self._entries)

    def __eq__(self, other):
        if not isinstance(other, GroundTruth):
            return NotImplemented
        return self._entries == other._entries

    def __hash__(self):
        return hash(self._entries)

    def __repr__(self):
        return f"GroundTruth({[list(e) for e in self._entries]})"

    @property
    def num_pairs(self) -> int:
        return sum(len(e) for e in self._entries)

    def positives(self) -> list[bool]:
        """True for each query that has at least one correct reference."""
        return [bool(e) for e in self._entries]

    def validate(self, num_refs: int) -> None:
        for q, refs in enumerate(self._entries):
            for r in refs:
                if r >= num_refs:
                    raise ValidationError(
                        f"ground truth for query {q} names reference {r}, but only {num_refs} references exist"
                    )

    def to_json(self) -> dict:
        return {"queries": [{"q": q, "refs": list(refs)} for q, refs in enumerate(self._entries)]}

    @classmethod
    def from_json(cls, obj: dict, num_queries: int) -> "GroundTruth":
        """Parse the ``{"queries": [{"q": .., "refs": [..]}, ...]}`` layout.

        Every query index in ``[0, num_queries)`` must appear exactly once.
        """
        try:
            rows = obj["queries"]
        except (KeyError, TypeError) as exc:
            raise ValidationError("ground truth JSON must hold a 'queries' list") from exc
        table: dict[int, list[int]] = {}
        for row in rows:
            try:
                q = int(row["q"])
                refs = list(row["refs"])
            except (KeyError, TypeError, ValueError) as exc:
                raise ValidationError(f"malformed ground-truth row {row!r}") from exc
            if q in table:
                raise ValidationError(f"ground truth lists query {q} twice")
            if not 0 <= q < num_queries:
                raise ValidationError(f"ground truth names query {q}, but only {num_queries} queries exist")
            table[q] = refs
        missing = [q for q in range(num_queries) if q not in table]
        if missing:
            raise ValidationError(f"ground truth has no entry for query {missing[0]}")
        return cls(table[q] for q in range(num_queries))


@dataclass(frozen=True, eq=False)
class Dataset:
    name: str
    queries: tuple[ImageGrid, ...]
    references: tuple[ImageGrid, ...]
    ground_truth: GroundTruth
    frame_spacing_m: float = 1.0
    is_trajectory: bool = True

    def __post_init__(self):
        object.__setattr__(self, "queries", tuple(self.queries))
        object.__setattr__(self, "references", tuple(self.references))
        if not self.queries:
            raise ValidationError(f"dataset {self.name!r} has no queries")
        if not self.references:
            raise ValidationError(f"dataset {self.name!r} has no references")
        if len(self.ground_truth) != len(self.queries):
            raise ValidationError(
                f"ground truth covers {len(self.ground_truth)} queries, dataset has {len(self.queries)}"
            )
        self.ground_truth.validate(len(self.references))
        if not self.frame_spacing_m > 0:
            raise ValidationError(f"frame_spacing_m must be positive, got {self.frame_spacing_m}")

    @property
    def num_queries(self) -> int:
        return len(self.queries)

    @property
    def num_references(self) -> int:
        return len(self.references)


_INT_NAME = re.compile(r"^(\d+)\.([A-Za-z]+)$")


def _scan_folder(folder: Path, label: str) -> list[Path]:
    if not folder.is_dir():
        raise DatasetError(f"missing folder: {folder}")
    found: dict[int, Path] = {}
    for entry in folder.iterdir():
        m = _INT_NAME.match(entry.name)
        if not m or m.group(2).lower() not in IMAGE_EXTENSIONS:
            continue
        idx = int(m.group(1))
        if idx in found:
            raise DatasetError(f"duplicate {label} index {idx}: {found[idx].name} and {entry.name}")
        found[idx] = entry
    if not found:
        raise DatasetError(f"no images found in {folder}")
    for i in range(max(found) + 1):
        if i not in found:
            raise DatasetError(f"missing {label} index {i} in {folder}")
    return [found[i] for i in range(len(found))]


def load_dataset(root: str | Path) -> Dataset:
    """Load ``query/``, ``ref/``, ``ground_truth.json`` and optional ``meta.json`` from *root*."""
    root = Path(root)
    if not root.is_dir():
        raise DatasetError(f"missing folder: {root}")
    query_paths = _scan_folder(root / "query", "query")
    ref_paths = _scan_folder(root / "ref", "reference")
    gt_path = root / "ground_truth.json"
    if not gt_path.is_file():
        raise DatasetError(f"missing file: {gt_path}")
    try:
        gt_obj = json.loads(gt_path.read_text())
    except json.JSONDecodeError as exc:
        raise DatasetError(f"unreadable ground truth {gt_path}: {exc}") from exc
    ground_truth = GroundTruth.from_json(gt_obj, len(query_paths))
    ground_truth.validate(len(ref_paths))

    meta = {}
    meta_path = root / "meta.json"
    if meta_path.is_file():
        meta = json.loads(meta_path.read_text())

    return Dataset(
        name=meta.get("name", root.name),
        queries=tuple(load_image(p) for p in query_paths),
        references=tuple(load_image(p) for p in ref_paths),
        ground_truth=ground_truth,
        frame_spacing_m=float(meta.get("frame_spacing_m", 1.0)),
        is_trajectory=bool(meta.get("is_trajectory", True)),
    )


def save_dataset(d: Dataset, root: str | Path, ext: str = "png") -> Path:
    """Write *d* in the on-disk layout read by :func:`load_dataset`."""
    root = Path(root)
    (root / "query").mkdir(parents=True, exist_ok=True)
    (root / "ref").mkdir(parents=True, exist_ok=True)
    for i, img in enumerate(d.queries):
        save_image(img, root / "query" / f"{i}.{ext}")
    for i, img in enumerate(d.references):
        save_image(img, root / "ref" / f"{i}.{ext}")
    (root / "ground_truth.json").write_text(json.dumps(d.ground_truth.to_json(), indent=1) + "\n")
    meta = {"name": d.name, "frame_spacing_m": d.frame_spacing_m, "is_trajectory": d.is_trajectory}
    (root / "meta.json").write_text(json.dumps(meta, indent=1) + "\n")
    return root


def interchange_query_reference(d: Dataset) -> Dataset:
    """Swap the query and reference sets and invert the ground-truth mapping."""
    inverted: list[list[int]] = [[] for _ in range(d.num_references)]
    for q, refs in enumerate(d.ground_truth):
        for r in refs:
            inverted[r].append(q)
    return replace(
        d,
        name=f"{d.name}-interchanged",
        queries=d.references,
        references=d.queries,
        ground_truth=GroundTruth(inverted),
    )


def widen_ground_truth(d: Dataset, radius: int) -> Dataset:
    """Accept every reference within *radius* frames of any listed match."""
    if radius < 0:
        raise ValidationError(f"radius must be >= 0, got {radius}")
    if not d.is_trajectory:
        raise ValidationError(
            f"dataset {d.name!r} is not a trajectory; a frame radius has no meaning for it"
        )
    if radius == 0:
        return d
    z = d.num_references
    widened = []
    for refs in d.ground_truth:
        window = set()
        for m in refs:
            window.update(range(max(0, m - radius), min(z, m + radius + 1)))
        widened.append(window)
    return replace(d, ground_truth=GroundTruth(widened))


def inject_true_negatives(d: Dataset, negatives: Sequence[ImageGrid]) -> Dataset:
    """Append *negatives* as queries with no correct reference.

    The result is no longer a traversal, so ``is_trajectory`` is cleared.
    """
    negatives = tuple(negatives)
    if not negatives:
        raise ValidationError("no negatives supplied")
    gt = GroundTruth(list(d.ground_truth) + [[] for _ in negatives])
    return replace(
        d,
        queries=d.queries + negatives,
        ground_truth=gt,
        is_trajectory=False,
    )
