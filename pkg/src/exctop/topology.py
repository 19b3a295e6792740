"""Digital functionals of binary images.

Conventions (``bits[iy, ix]``, row 0 at the bottom): ``u1`` is one pixel
to the right (+ix) and ``u2`` one pixel up (+iy). Bounded images are
surrounded by an implicit background; torus images wrap around.

The three-point Euler characteristic counts

    N+ = #{x : x in F, x+u1 not in F, x+u2 not in F}
    N- = #{x : x not in F, x-u1 in F, x-u2 in F}

and returns ``N+ - N-``. Expanding both sums over 2x2 cells shows that
this equals the 4-adjacency complex characteristic minus the number of
cells whose only set pixels are top-left and bottom-right: such a pair
is glued by the formula, while the mirror pair (bottom-left/top-right)
is kept apart.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields

import numpy as np
from scipy import ndimage

from .excursion import BinaryImage

_STRUCT = {4: ndimage.generate_binary_structure(2, 1), 8: ndimage.generate_binary_structure(2, 2)}


class DisjointSet:
    """Union-find over integer labels with path halving and union by size."""

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n
        self.count = n

    def find(self, a: int) -> int:
        parent = self.parent
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def union(self, a: int, b: int) -> bool:
        a, b = self.find(a), self.find(b)
        if a == b:
            return False
        if self.size[a] < self.size[b]:
            a, b = b, a
        self.parent[b] = a
        self.size[a] += self.size[b]
        self.count -= 1
        return True


def _shift(bits: np.ndarray, dy: int, dx: int, torus: bool) -> np.ndarray:
    """``out[iy, ix] = bits[iy + dy, ix + dx]`` with background (or wrap) outside."""
    if torus:
        return np.roll(bits, (-dy, -dx), axis=(0, 1))
    ny, nx = bits.shape
    out = np.zeros_like(bits)
    ys = slice(max(0, -dy), min(ny, ny - dy))
    xs = slice(max(0, -dx), min(nx, nx - dx))
    ys_src = slice(max(0, dy), min(ny, ny + dy))
    xs_src = slice(max(0, dx), min(nx, nx + dx))
    out[ys, xs] = bits[ys_src, xs_src]
    return out


def _scan(img: BinaryImage, pad: int = 1) -> tuple[np.ndarray, bool]:
    torus = img.boundary_mode == "torus"
    bits = img.bits if torus else np.pad(img.bits, pad)
    return bits, torus


def config_counts(img: BinaryImage) -> tuple[int, int]:
    """Raw tallies (N+, N-) of the two three-point configurations."""
    b, torus = _scan(img)
    right, up = _shift(b, 0, 1, torus), _shift(b, 1, 0, torus)
    left, down = _shift(b, 0, -1, torus), _shift(b, -1, 0, torus)
    n_plus = int(np.count_nonzero(b & ~right & ~up))
    n_minus = int(np.count_nonzero(~b & left & down))
    return n_plus, n_minus


def chi_bicov(img: BinaryImage) -> int:
    n_plus, n_minus = config_counts(img)
    return n_plus - n_minus


def complex_counts(img: BinaryImage) -> tuple[int, int, int]:
    """(V, E, S) of the 4-adjacency pixel complex."""
    b, torus = _scan(img)
    right, up = _shift(b, 0, 1, torus), _shift(b, 1, 0, torus)
    diag = _shift(b, 1, 1, torus)
    v = int(np.count_nonzero(b))
    e = int(np.count_nonzero(b & right)) + int(np.count_nonzero(b & up))
    s = int(np.count_nonzero(b & right & up & diag))
    return v, e, s


def chi_complex(img: BinaryImage) -> int:
    v, e, s = complex_counts(img)
    return v - e + s


def checkerboard_cells(img: BinaryImage) -> tuple[int, int]:
    """(anti_count, main_count): 2x2 cells set exactly on TL+BR, resp. BL+TR."""
    b, torus = _scan(img)
    bl = b
    br = _shift(b, 0, 1, torus)
    tl = _shift(b, 1, 0, torus)
    tr = _shift(b, 1, 1, torus)
    anti = int(np.count_nonzero(tl & br & ~bl & ~tr))
    main = int(np.count_nonzero(bl & tr & ~tl & ~br))
    return anti, main


def _label(bits: np.ndarray, adjacency: int, torus: bool) -> int:
    labels, n = ndimage.label(bits, structure=_STRUCT[adjacency])
    if not torus or n == 0:
        return n
    offsets = [(0, 1), (1, 0)] + ([(1, 1), (1, -1)] if adjacency == 8 else [])
    ds = DisjointSet(n + 1)
    for dy, dx in offsets:
        other = _shift(labels, dy, dx, True)
        mask = (labels > 0) & (other > 0) & (labels != other)
        if mask.any():
            pairs = np.unique(np.stack([labels[mask], other[mask]], axis=1), axis=0)
            for a, c in pairs:
                ds.union(int(a), int(c))
    return ds.count - 1


def components(img: BinaryImage, adjacency: int = 4) -> int:
    if adjacency not in (4, 8):
        raise ValueError("adjacency must be 4 or 8")
    return _label(img.bits, adjacency, img.boundary_mode == "torus")


def holes(img: BinaryImage) -> int:
    """Background 8-components not reaching the outside.

    On a torus there is no outside; the count is the number of background
    components minus one when any background exists.
    """
    if img.boundary_mode == "torus":
        n = _label(~img.bits, 8, True)
        return max(n - 1, 0)
    bg = np.pad(~img.bits, 1, constant_values=True)
    _, n = ndimage.label(bg, structure=_STRUCT[8])
    return n - 1


def perimeter_inf(img: BinaryImage) -> tuple[float, float, float]:
    """(per_u1, per_u2, per_inf): eps times the number of flips along each axis."""
    b, torus = _scan(img)
    flips1 = np.count_nonzero(b != _shift(b, 0, 1, torus))
    flips2 = np.count_nonzero(b != _shift(b, 1, 0, torus))
    p1, p2 = img.eps * flips1, img.eps * flips2
    return p1, p2, p1 + p2


def area(img: BinaryImage) -> float:
    return img.eps ** 2 * np.count_nonzero(img.bits)


def polyvariogram(img: BinaryImage, in_shifts, out_shifts=()) -> float:
    """eps^2 #{x : x - s in F for s in in_shifts, x - t not in F for t in out_shifts}.

    Shifts are integer lattice vectors ``(dx, dy)``.
    """
    in_shifts = [tuple(int(v) for v in s) for s in in_shifts]
    out_shifts = [tuple(int(v) for v in t) for t in out_shifts]
    if not in_shifts:
        raise ValueError("at least one in-shift is required for a finite polyvariogram")
    reach = max(abs(v) for s in in_shifts + out_shifts for v in s)
    b, torus = _scan(img, pad=reach + 1)
    acc = np.ones_like(b)
    for dx, dy in in_shifts:
        acc &= _shift(b, -dy, -dx, torus)
    for dx, dy in out_shifts:
        acc &= ~_shift(b, -dy, -dx, torus)
    return img.eps ** 2 * np.count_nonzero(acc)


@dataclass
class TopologyReport:
    chi_bicov: int
    chi_complex: int
    components_4: int
    holes_8: int
    per_u1: float
    per_u2: float
    per_inf: float
    area: float
    checkerboard_anti: int
    checkerboard_main: int
    n_plus: int
    n_minus: int
    eps: float
    boundary_mode: str
    torus_semantics: bool

    @property
    def checkerboard_cells(self) -> tuple[int, int]:
        return self.checkerboard_anti, self.checkerboard_main

    @property
    def config_counts(self) -> tuple[int, int]:
        return self.n_plus, self.n_minus

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def csv_header(cls) -> str:
        return ",".join(f.name for f in fields(cls))

    def csv_row(self) -> str:
        return ",".join(repr(v) if isinstance(v, float) else str(v) for v in asdict(self).values())


def analyze(img: BinaryImage) -> TopologyReport:
    n_plus, n_minus = config_counts(img)
    p1, p2, pinf = perimeter_inf(img)
    anti, main = checkerboard_cells(img)
    return TopologyReport(
        chi_bicov=n_plus - n_minus,
        chi_complex=chi_complex(img),
        components_4=components(img, 4),
        holes_8=holes(img),
        per_u1=float(p1),
        per_u2=float(p2),
        per_inf=float(pinf),
        area=float(area(img)),
        checkerboard_anti=anti,
        checkerboard_main=main,
        n_plus=n_plus,
        n_minus=n_minus,
        eps=float(img.eps),
        boundary_mode=img.boundary_mode,
        torus_semantics=img.boundary_mode == "torus",
    )
