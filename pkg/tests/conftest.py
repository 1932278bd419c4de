import numpy as np
import pytest

from vpreval.dataset import Dataset, GroundTruth
from vpreval.engine import ConfusionMatrix
from vpreval.imaging import ImageGrid
from vpreval.synth import SynthSpec, generate_synthetic_dataset

_ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line per acceptance criterion, then assert it."""

    def check(number, text, ok, detail=""):
        status = "PASS" if ok else "FAIL"
        line = f"[{status}] criterion {number}: {text}" + (f" ({detail})" if detail else "")
        _ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line

    return check


def cm_from_best(scores, correct):
    """Two-reference confusion matrix whose best matches have the given scores and correctness."""
    rows, gt = [], []
    for s, ok in zip(scores, correct):
        row = [s, s / 2.0]
        rows.append(row)
        best = int(np.argmax(row))
        gt.append([best] if ok else [1 - best])
    return ConfusionMatrix(np.array(rows)), GroundTruth(gt)


def tiny_dataset(gt, num_refs, is_trajectory=True, name="tiny"):
    img = ImageGrid(np.zeros((1, 1)))
    return Dataset(
        name=name,
        queries=tuple(img for _ in range(len(gt))),
        references=tuple(img for _ in range(num_refs)),
        ground_truth=gt if isinstance(gt, GroundTruth) else GroundTruth(gt),
        is_trajectory=is_trajectory,
    )


@pytest.fixture(scope="session")
def synth_identity():
    return generate_synthetic_dataset(SynthSpec(num_places=6, height=64, width=64, seed=3))


@pytest.fixture(scope="session")
def synth_shifted():
    return generate_synthetic_dataset(
        SynthSpec(num_places=8, height=64, width=64, seed=5, viewpoint_shift_px=12, directional_gain_span=0.4)
    )
