from __future__ import annotations

import numpy as np
import pytest
from scipy import ndimage

from exctop.excursion import BinaryImage


def brute_euler(bits: np.ndarray) -> int:
    """components(4) - holes(8) of a bounded mask, straight from scipy labels."""
    four = ndimage.generate_binary_structure(2, 1)
    eight = ndimage.generate_binary_structure(2, 2)
    _, comps = ndimage.label(bits, structure=four)
    bg = np.pad(~bits.astype(bool), 1, constant_values=True)
    _, bgs = ndimage.label(bg, structure=eight)
    return comps - (bgs - 1)


def img(rows, **kw) -> BinaryImage:
    return BinaryImage.from_rows(rows, **kw)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
