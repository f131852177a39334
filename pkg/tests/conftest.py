import sys

import numpy as np
import pytest

from fingergeo.dataset import HandParams, synth_hand
from fingergeo.imaging import segment_hand


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running end-to-end checks")


@pytest.fixture(scope="session")
def default_hand():
    return synth_hand(HandParams(), seed=3)


@pytest.fixture(scope="session")
def default_segmentation(default_hand):
    return segment_hand(default_hand, keep_stages=True)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def disc(radius, pad=3):
    n = 2 * radius + 1 + 2 * pad
    yy, xx = np.mgrid[0:n, 0:n]
    c = n // 2
    return (yy - c) ** 2 + (xx - c) ** 2 <= radius ** 2


def random_blob(rng, size=40, n_pixels=200):
    """Connected random blob grown from the center by random 4-neighbor steps."""
    mask = np.zeros((size, size), dtype=bool)
    r = c = size // 2
    mask[r, c] = True
    while mask.sum() < n_pixels:
        dr, dc = [(0, 1), (1, 0), (0, -1), (-1, 0)][rng.integers(4)]
        r = int(np.clip(r + dr, 1, size - 2))
        c = int(np.clip(c + dc, 1, size - 2))
        mask[r, c] = True
    return mask


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance") or sys.modules.get("tests.test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for criterion, status, detail in results:
        terminalreporter.write_line(f"[{status}] {criterion}: {detail}")
