"""Mean functionals of excursions {f <= level} of stationary isotropic
unit-variance Gaussian fields, and their window decomposition.

Two normalizations of the volume fraction are carried side by side:

* ``"cdf"``: P(f(0) <= level), the standard normal CDF (default);
* ``"centered"``: (2 pi)^-1/2 * int_0^level exp(-t^2/2) dt, i.e. CDF - 1/2,
  with the Euler-characteristic window term scaled by a further
  (2 pi)^-1/2.

Only the first is consistent with the stationary decomposition; the
second is kept so that Monte Carlo output can show the difference.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from scipy.special import ndtr

from .errors import DomainError
from .window import Window, euler, per_inf, per_u, vol

PHI_VARIANTS = ("cdf", "centered")
_SQRT_2PI = math.sqrt(2.0 * math.pi)


def _check_mu(mu: float) -> None:
    if not (mu > 0 and math.isfinite(mu)):
        raise DomainError(f"second spectral moment must be positive and finite, got {mu}")


def _gauss_kernel(level: float) -> float:
    return 0.0 if math.isinf(level) else math.exp(-0.5 * level * level)


def ec_density(mu: float, level: float) -> float:
    """Euler characteristic per unit area: -mu * level * exp(-level^2/2) / (2 pi)^(3/2)."""
    _check_mu(mu)
    if math.isinf(level):
        return 0.0
    return -mu * level * _gauss_kernel(level) / (2.0 * math.pi) ** 1.5


def per_densities(mu: float, level: float) -> tuple[float, float]:
    """(per-direction perimeter density, L-infinity perimeter density)."""
    _check_mu(mu)
    pu = math.sqrt(mu) / math.pi * _gauss_kernel(level)
    return pu, 2.0 * pu


def vol_density(level: float, phi: str = "cdf") -> float:
    if phi == "cdf":
        return float(ndtr(level))
    if phi == "centered":
        return float(ndtr(level)) - 0.5
    raise ValueError(f"phi must be one of {PHI_VARIANTS}")


@dataclass(frozen=True)
class GaussianDensities:
    level: float
    mu: float
    ec_density: float
    per_u_density: float
    per_inf_density: float
    vol_density: float
    phi: str = "cdf"

    def to_dict(self) -> dict:
        return asdict(self)


def densities(mu: float, level: float, phi: str = "cdf") -> GaussianDensities:
    pu, pinf = per_densities(mu, level)
    return GaussianDensities(level, mu, ec_density(mu, level), pu, pinf, vol_density(level, phi), phi)


@dataclass(frozen=True)
class ExpectedFunctionals:
    vol: float
    per_inf: float
    chi: float
    phi: str = "cdf"

    def to_dict(self) -> dict:
        return asdict(self)


def expected_functionals(w: Window, mu: float, level: float, phi: str = "cdf") -> ExpectedFunctionals:
    """E Vol, E Per_inf and E chi of the excursion restricted to the window."""
    d = densities(mu, level, phi)
    area, p1, p2 = vol(w), per_u(w, 1), per_u(w, 2)
    e_vol = area * d.vol_density
    e_per = area * d.per_inf_density + per_inf(w) * d.vol_density
    boundary = 0.25 * (p2 * d.per_u_density + p1 * d.per_u_density)
    corner = euler(w) * d.vol_density
    if phi == "centered":
        corner /= _SQRT_2PI
    return ExpectedFunctionals(e_vol, e_per, area * d.ec_density + boundary + corner, phi)
