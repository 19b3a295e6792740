"""Stationary isotropic unit-variance Gaussian fields on a regular lattice.

Randomness: every sample draws from ``numpy.random.Philox`` (a
counter-based 4x64 generator) keyed by ``SeedSequence([seed, stream])``.
Replicate ``r`` of a run with base seed ``s`` uses stream ``r``, so
replicates are independent and can be generated in any order.

Lattice convention: ``values[iy, ix]`` is the field at world point
``(x0 + ix * eps, y0 + iy * eps)`` where ``origin = (x0, y0)``. Row 0 is
the *bottom* row (y increases with the row index); file writers flip to
the top-row-first order of netpbm.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np
import scipy.fft
import scipy.linalg
from scipy.optimize import brentq

from .errors import EmbeddingError, FactorizationError, RegularityError

KINDS = ("squared-exponential", "matern-5/2", "matern-3/2")
_ALIASES = {"se": "squared-exponential", "gaussian": "squared-exponential",
            "matern52": "matern-5/2", "matern32": "matern-3/2"}

BOUNDARY_MODES = ("torus", "bounded")
SPECTRUM_TOL = 1e-9
DENSE_JITTER = 1e-10
MAX_DENSE_DIMS = (32, 32)


@dataclass(frozen=True)
class CovarianceModel:
    kind: str
    length_scale: float

    def __post_init__(self):
        kind = _ALIASES.get(self.kind.lower(), self.kind.lower())
        if kind not in KINDS:
            raise ValueError(f"unknown covariance kind {self.kind!r}; expected one of {KINDS}")
        if not (self.length_scale > 0 and math.isfinite(self.length_scale)):
            raise ValueError(f"length_scale must be positive, got {self.length_scale}")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "length_scale", float(self.length_scale))

    @property
    def regularity_violated(self) -> bool:
        # Matern-3/2 paths are C^1 but their gradient is not Lipschitz.
        return self.kind == "matern-3/2"

    def to_dict(self) -> dict:
        return {"kind": self.kind, "length_scale": self.length_scale}


@dataclass(frozen=True, eq=False)
class FieldSample:
    values: np.ndarray
    eps: float
    boundary_mode: str = "bounded"
    seed: Optional[int] = None
    stream: Optional[int] = None
    model: Optional[CovarianceModel] = None
    origin: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.boundary_mode not in BOUNDARY_MODES:
            raise ValueError(f"boundary_mode must be one of {BOUNDARY_MODES}")
        if self.values.ndim != 2:
            raise ValueError("field values must be a 2-D array")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field values must be finite")

    @property
    def dims(self) -> tuple[int, int]:
        return self.values.shape

    @property
    def extent(self) -> tuple[float, float, float, float]:
        """World extent (xmin, xmax, ymin, ymax) covered by the pixels."""
        ny, nx = self.dims
        x0, y0 = self.origin
        h = 0.5 * self.eps
        return (x0 - h, x0 + (nx - 0.5) * self.eps, y0 - h, y0 + (ny - 0.5) * self.eps)

    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        ny, nx = self.dims
        return (self.origin[0] + self.eps * np.arange(nx), self.origin[1] + self.eps * np.arange(ny))

    def subsample(self, stride: int) -> "FieldSample":
        """Every ``stride``-th lattice value, i.e. the same realization at spacing ``stride * eps``."""
        ny, nx = self.dims
        if stride < 1 or ny % stride or nx % stride:
            raise ValueError(f"stride {stride} must divide the grid dims {self.dims}")
        return FieldSample(self.values[::stride, ::stride].copy(), self.eps * stride,
                           self.boundary_mode, self.seed, self.stream, self.model, self.origin)


def reduced_cov(model: CovarianceModel, r):
    """sigma(r) = E f(0) f(r u) for the unit-variance model; vectorized in r."""
    s = np.abs(np.asarray(r, dtype=float)) / model.length_scale
    if model.kind == "squared-exponential":
        out = np.exp(-0.5 * s * s)
    elif model.kind == "matern-5/2":
        t = math.sqrt(5.0) * s
        out = (1.0 + t + t * t / 3.0) * np.exp(-t)
    else:
        t = math.sqrt(3.0) * s
        out = (1.0 + t) * np.exp(-t)
    return out if out.ndim else float(out)


def spectral_moment(model: CovarianceModel, allow_irregular: bool = False) -> float:
    """mu = E (d_1 f(0))^2 = -sigma''(0), in 1/length^2."""
    if model.regularity_violated and not allow_irregular:
        raise RegularityError(
            f"{model.kind} fields are not C^{{1,1}}; pass allow_irregular=True to get -sigma''(0) anyway"
        )
    ell2 = model.length_scale ** 2
    return {"squared-exponential": 1.0, "matern-5/2": 5.0 / 3.0, "matern-3/2": 3.0}[model.kind] / ell2


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(stream)])))


def _cutoff(model: CovarianceModel, tiny: float = 1e-17) -> float:
    """Distance beyond which sigma < tiny."""
    ell = model.length_scale
    return brentq(lambda r: reduced_cov(model, r) - tiny, 0.0, 200.0 * ell)


def _wrapped_cov(model: CovarianceModel, n: int, m: int, eps: float, periodized: bool) -> np.ndarray:
    """First row of the block-circulant covariance on an n x m torus of spacing eps."""
    ky = np.arange(n) * eps
    kx = np.arange(m) * eps
    if not periodized:
        dy = np.minimum(ky, n * eps - ky)
        dx = np.minimum(kx, m * eps - kx)
        return reduced_cov(model, np.hypot(dy[:, None], dx[None, :]))
    ly, lx = n * eps, m * eps
    cut = _cutoff(model)
    my = int(math.ceil(cut / ly)) + 1
    mx = int(math.ceil(cut / lx)) + 1
    c = np.zeros((n, m))
    for a in range(-my, my + 1):
        dy = ky + a * ly
        if np.min(np.abs(dy)) > cut:
            continue
        for b in range(-mx, mx + 1):
            dx = kx + b * lx
            if np.min(np.abs(dx)) > cut:
                continue
            c += reduced_cov(model, np.hypot(dy[:, None], dx[None, :]))
    return c


@lru_cache(maxsize=16)
def _sqrt_spectrum(model: CovarianceModel, n: int, m: int, eps: float, periodized: bool) -> np.ndarray:
    c = _wrapped_cov(model, n, m, eps, periodized)
    lam = scipy.fft.rfft2(c).real
    top = lam.max()
    if lam.min() < -SPECTRUM_TOL * top:
        raise EmbeddingError(
            f"circulant spectrum has entries down to {lam.min():.3e} (max {top:.3e}) on a "
            f"{n}x{m} torus with eps={eps}; the domain is too small for length scale "
            f"{model.length_scale}, enlarge the padding"
        )
    out = np.sqrt(np.clip(lam, 0.0, None))
    out.setflags(write=False)
    return out


def default_pad(model: CovarianceModel, eps: float) -> float:
    return max(3.0 * model.length_scale, 10.0 * eps)


def torus_shape(model: CovarianceModel, dims, eps: float, boundary_mode: str,
                pad: Optional[float] = None) -> tuple[int, int]:
    """Shape of the torus actually sampled for the requested dims."""
    ny, nx = dims
    if boundary_mode == "torus":
        return ny, nx
    pad = default_pad(model, eps) if pad is None else pad
    extra = int(math.ceil(2.0 * pad / eps - 1e-9))  # pad on both sides of each axis
    return scipy.fft.next_fast_len(ny + extra, real=True), scipy.fft.next_fast_len(nx + extra, real=True)


MAX_PAD_DOUBLINGS = 6


def _embedding(model: CovarianceModel, dims, eps: float, boundary_mode: str, pad: Optional[float]):
    """(n, m, sqrt spectrum) of the sampling torus.

    An explicit ``pad`` is used as given. With the default pad, small
    domains whose minimum-image spectrum goes negative are retried with
    the pad doubled, up to ``MAX_PAD_DOUBLINGS`` times.
    """
    periodized = boundary_mode == "torus"
    tries = 0 if (pad is not None or periodized) else MAX_PAD_DOUBLINGS
    pad = default_pad(model, eps) if pad is None else pad
    while True:
        n, m = torus_shape(model, dims, eps, boundary_mode, pad)
        try:
            return n, m, _sqrt_spectrum(model, n, m, eps, periodized)
        except EmbeddingError:
            if tries == 0:
                raise
            tries -= 1
            pad *= 2.0


def sample_field(model: CovarianceModel, dims, eps: float, seed: int,
                 boundary_mode: str = "torus", *, stream: int = 0,
                 origin=(0.0, 0.0), pad: Optional[float] = None) -> FieldSample:
    """Exact-in-law sample by circulant (spectral) synthesis.

    Torus mode samples the field whose covariance is sigma periodized over
    the torus lattice. Bounded mode samples a torus enlarged by ``pad``
    (default ``max(3 ell, 10 eps)``, doubled while the spectrum is invalid)
    on every side with the minimum-image covariance and crops the
    requested block, whose law is then exactly that of sigma.
    """
    ny, nx = (int(d) for d in dims)
    if ny < 8 or nx < 8:
        raise ValueError(f"dims must be at least 8x8, got {dims}")
    if not eps > 0:
        raise ValueError("eps must be positive")
    if boundary_mode not in BOUNDARY_MODES:
        raise ValueError(f"boundary_mode must be one of {BOUNDARY_MODES}")
    n, m, root = _embedding(model, (ny, nx), float(eps), boundary_mode, pad)
    noise = make_rng(seed, stream).standard_normal((n, m))
    f = scipy.fft.irfft2(root * scipy.fft.rfft2(noise), s=(n, m))
    values = np.ascontiguousarray(f[:ny, :nx])
    return FieldSample(values, float(eps), boundary_mode, int(seed), int(stream), model,
                       (float(origin[0]), float(origin[1])))


def dense_covariance(model: CovarianceModel, dims, eps: float, boundary_mode: str = "bounded") -> np.ndarray:
    """Covariance matrix of the row-major flattened lattice values."""
    ny, nx = dims
    iy, ix = np.divmod(np.arange(ny * nx), nx)
    dy = np.abs(iy[:, None] - iy[None, :]).astype(float)
    dx = np.abs(ix[:, None] - ix[None, :]).astype(float)
    if boundary_mode == "torus":
        wrapped = _wrapped_cov(model, ny, nx, eps, periodized=True)
        return wrapped[dy.astype(int), dx.astype(int)]
    return reduced_cov(model, eps * np.hypot(dy, dx))


def sample_field_dense(model: CovarianceModel, dims, eps: float, seed: int,
                       boundary_mode: str = "bounded", *, stream: int = 0,
                       origin=(0.0, 0.0)) -> FieldSample:
    """Reference sampler via Cholesky of the full covariance matrix (small grids only)."""
    ny, nx = (int(d) for d in dims)
    if ny > MAX_DENSE_DIMS[0] or nx > MAX_DENSE_DIMS[1] or ny < 1 or nx < 1:
        raise ValueError(f"dense sampling is limited to {MAX_DENSE_DIMS}, got {dims}")
    cov = dense_covariance(model, (ny, nx), eps, boundary_mode)
    cov[np.diag_indices_from(cov)] += DENSE_JITTER
    try:
        chol = scipy.linalg.cholesky(cov, lower=True)
    except np.linalg.LinAlgError as exc:
        raise FactorizationError(f"covariance matrix is not numerically PSD: {exc}") from exc
    z = make_rng(seed, stream).standard_normal(ny * nx)
    values = (chol @ z).reshape(ny, nx)
    return FieldSample(values, float(eps), boundary_mode, int(seed), int(stream), model,
                       (float(origin[0]), float(origin[1])))


def field_from_function(func, dims, eps: float, origin=(0.0, 0.0), boundary_mode: str = "bounded") -> FieldSample:
    """Evaluate a deterministic ``func(x, y)`` on the lattice."""
    ny, nx = dims
    x = origin[0] + eps * np.arange(nx)
    y = origin[1] + eps * np.arange(ny)
    values = np.asarray(func(x[None, :], y[:, None]), dtype=float)
    values = np.broadcast_to(values, (ny, nx)).copy()
    return FieldSample(values, float(eps), boundary_mode, origin=(float(origin[0]), float(origin[1])))
