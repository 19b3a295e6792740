"""Gauss digitization of excursion sets.

A ``BinaryImage`` marks the lattice points of a sublevel set; the set it
represents is the union of half-open eps-pixels centred on those points.
Storage follows ``FieldSample``: ``bits[iy, ix]`` with row 0 at the bottom.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import WindowOutOfRange
from .synthesis import BOUNDARY_MODES, FieldSample
from .window import Window


@dataclass(frozen=True, eq=False)
class BinaryImage:
    bits: np.ndarray
    eps: float = 1.0
    boundary_mode: str = "bounded"
    origin: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        bits = np.asarray(self.bits)
        if bits.ndim != 2:
            raise ValueError("bits must be a 2-D array")
        if self.boundary_mode not in BOUNDARY_MODES:
            raise ValueError(f"boundary_mode must be one of {BOUNDARY_MODES}")
        bits = bits.astype(bool, copy=True)
        bits.setflags(write=False)
        object.__setattr__(self, "bits", bits)

    @classmethod
    def from_rows(cls, rows, **kw) -> "BinaryImage":
        """Build from picture rows listed top row first (strings of 0/1 or nested lists)."""
        arr = np.array([[int(c) for c in (r.replace(" ", "") if isinstance(r, str) else r)] for r in rows])
        return cls(arr[::-1].astype(bool), **kw)

    def to_rows(self) -> list[str]:
        return ["".join("1" if b else "0" for b in row) for row in self.bits[::-1]]

    @property
    def dims(self) -> tuple[int, int]:
        return self.bits.shape

    @property
    def extent(self) -> tuple[float, float, float, float]:
        ny, nx = self.dims
        x0, y0 = self.origin
        h = 0.5 * self.eps
        return (x0 - h, x0 + (nx - 0.5) * self.eps, y0 - h, y0 + (ny - 0.5) * self.eps)

    def with_bits(self, bits) -> "BinaryImage":
        return BinaryImage(bits, self.eps, self.boundary_mode, self.origin)

    def __eq__(self, other):
        if not isinstance(other, BinaryImage):
            return NotImplemented
        return (self.eps == other.eps and self.boundary_mode == other.boundary_mode
                and tuple(self.origin) == tuple(other.origin)
                and self.bits.shape == other.bits.shape and bool(np.all(self.bits == other.bits)))

    __hash__ = None


def digitize(field: FieldSample, level: float) -> BinaryImage:
    """Mark lattice points with ``f(x) <= level``; ties belong to the set."""
    return BinaryImage(field.values <= level, field.eps, field.boundary_mode, field.origin)


def complement(img: BinaryImage) -> BinaryImage:
    return img.with_bits(~img.bits)


def clip_to_window(img: BinaryImage, w: Window) -> BinaryImage:
    """Force pixels whose centre lies outside the closed window to background."""
    if img.boundary_mode != "bounded":
        raise ValueError("clip_to_window requires a bounded-mode image")
    xmin, xmax, ymin, ymax = img.extent
    wx0, wx1, wy0, wy1 = w.bbox
    tol = 1e-9 * img.eps
    if wx0 < xmin - tol or wx1 > xmax + tol or wy0 < ymin - tol or wy1 > ymax + tol:
        raise WindowOutOfRange(
            f"window bbox {(wx0, wx1, wy0, wy1)} is not inside the image extent {img.extent}"
        )
    ny, nx = img.dims
    x = img.origin[0] + img.eps * np.arange(nx)
    y = img.origin[1] + img.eps * np.arange(ny)
    inside = w.contains(x[None, :], y[:, None], tol=tol)
    return img.with_bits(img.bits & inside)
