"""Polyrectangle observation windows and their deterministic functionals.

A window is a finite union of closed axis-aligned rectangles, stored
explicitly. Functionals are evaluated on the union: the rectangles are
cut along every distinct x and y break into an irregular grid of
elementary cells, each of which is either inside the union or not.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np

from .errors import WindowError

Rect = tuple[float, float, float, float]  # (x0, x1, y0, y1)


def _corners(r: Rect) -> set[tuple[float, float]]:
    x0, x1, y0, y1 = r
    return {(x0, y0), (x0, y1), (x1, y0), (x1, y1)}


@dataclass(frozen=True)
class Window:
    """Union of closed rectangles ``[x0, x1] x [y0, y1]``.

    Distinct rectangles may overlap but must not share a corner point.
    """

    rects: tuple[Rect, ...]

    def __post_init__(self):
        rects = tuple(tuple(float(v) for v in r) for r in self.rects)
        if not rects:
            raise WindowError("window needs at least one rectangle")
        for r in rects:
            if len(r) != 4:
                raise WindowError(f"rectangle {r} is not an [x0, x1, y0, y1] quadruple")
            x0, x1, y0, y1 = r
            if not all(math.isfinite(v) for v in r):
                raise WindowError(f"rectangle {r} has non-finite bounds")
            if not (x1 > x0 and y1 > y0):
                raise WindowError(f"rectangle {r} is empty")
        for i in range(len(rects)):
            for j in range(i + 1, len(rects)):
                shared = _corners(rects[i]) & _corners(rects[j])
                if shared:
                    raise WindowError(
                        f"rectangles {rects[i]} and {rects[j]} share corner(s) {sorted(shared)}"
                    )
        object.__setattr__(self, "rects", rects)

    @classmethod
    def rectangle(cls, x0, x1, y0, y1) -> "Window":
        return cls(((x0, x1, y0, y1),))

    @classmethod
    def from_quads(cls, quads: Iterable[Sequence[float]]) -> "Window":
        return cls(tuple(tuple(q) for q in quads))

    def to_quads(self) -> list[list[float]]:
        return [list(r) for r in self.rects]

    @property
    def bbox(self) -> Rect:
        a = np.array(self.rects)
        return (a[:, 0].min(), a[:, 1].max(), a[:, 2].min(), a[:, 3].max())

    def translate(self, dx: float, dy: float) -> "Window":
        return Window(tuple((x0 + dx, x1 + dx, y0 + dy, y1 + dy) for x0, x1, y0, y1 in self.rects))

    def rotate90(self) -> "Window":
        """Counter-clockwise quarter turn about the origin, (x, y) -> (-y, x)."""
        return Window(tuple((-y1, -y0, x0, x1) for x0, x1, y0, y1 in self.rects))

    def contains(self, x, y, tol: float = 0.0):
        """Vectorized closed membership test."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        out = np.zeros(np.broadcast(x, y).shape, dtype=bool)
        for x0, x1, y0, y1 in self.rects:
            out |= (x >= x0 - tol) & (x <= x1 + tol) & (y >= y0 - tol) & (y <= y1 + tol)
        return out

    @cached_property
    def _cells(self):
        xs = np.unique(np.array([[r[0], r[1]] for r in self.rects]))
        ys = np.unique(np.array([[r[2], r[3]] for r in self.rects]))
        cx = 0.5 * (xs[:-1] + xs[1:])
        cy = 0.5 * (ys[:-1] + ys[1:])
        covered = self.contains(cx[None, :], cy[:, None])
        return xs, ys, covered


def vol(w: Window) -> float:
    xs, ys, covered = w._cells
    return float(np.sum(covered * np.outer(np.diff(ys), np.diff(xs))))


def per_u(w: Window, i: int) -> float:
    """Variational perimeter in direction u_i (i = 1 for x, 2 for y)."""
    xs, ys, covered = w._cells
    padded = np.pad(covered, 1)
    if i == 1:
        flips = padded[1:-1, 1:] != padded[1:-1, :-1]
        return float(np.sum(flips * np.diff(ys)[:, None]))
    if i == 2:
        flips = padded[1:, 1:-1] != padded[:-1, 1:-1]
        return float(np.sum(flips * np.diff(xs)[None, :]))
    raise ValueError(f"direction index must be 1 or 2, got {i}")


def per_inf(w: Window) -> float:
    return per_u(w, 1) + per_u(w, 2)


def euler(w: Window) -> int:
    """Euler characteristic of the closed union, as V - E + F of its cell complex."""
    _, _, covered = w._cells
    c = np.pad(covered, 1)
    faces = int(c.sum())
    # vertex (j, i) touches cells c[j:j+2, i:i+2]
    verts = c[:-1, :-1] | c[:-1, 1:] | c[1:, :-1] | c[1:, 1:]
    h_edges = c[:-1, 1:-1] | c[1:, 1:-1]
    v_edges = c[1:-1, :-1] | c[1:-1, 1:]
    return int(verts.sum()) - int(h_edges.sum()) - int(v_edges.sum()) + faces


def corner_count(w: Window) -> int:
    _, _, covered = w._cells
    c = np.pad(covered, 1).astype(np.int8)
    n = c[:-1, :-1] + c[:-1, 1:] + c[1:, :-1] + c[1:, 1:]
    diagonal = (n == 2) & (c[:-1, :-1] == c[1:, 1:])
    return int(np.sum((n == 1) | (n == 3)) + 2 * np.sum(diagonal))
