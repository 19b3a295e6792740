"""Monte Carlo harness: replicate, measure, aggregate, compare.

Replicate ``r`` samples its field from stream ``r`` of the base seed, so a
run is a pure function of its config. Per-replicate measurements are
collected in replicate order and summed with ``math.fsum`` (correctly
rounded, hence independent of order and of the worker count).
"""
from __future__ import annotations

import hashlib
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from typing import Optional, Sequence

import numpy as np

from . import closed_form, topology
from .errors import ConfigError
from .excursion import BinaryImage, clip_to_window, digitize
from .synthesis import BOUNDARY_MODES, CovarianceModel, FieldSample, sample_field, spectral_moment
from .window import Window

FUNCTIONALS = ("chi", "per_inf", "vol")
CSV_COLUMNS = ("lambda", "functional", "mean", "sd", "se", "predicted", "z")


@dataclass
class ExperimentConfig:
    model: CovarianceModel
    levels: tuple[float, ...]
    dims: tuple[int, int]
    eps: float
    replicates: int
    seed: int
    boundary_mode: str = "torus"
    origin: tuple[float, float] = (0.0, 0.0)
    window: Optional[Window] = None
    windows: tuple[Window, ...] = ()
    sweep_eps: tuple[float, ...] = ()
    workers: Optional[int] = None
    allow_irregular: bool = False
    pad: Optional[float] = None

    def __post_init__(self):
        self.levels = tuple(float(v) for v in self.levels)
        self.dims = tuple(int(d) for d in self.dims)
        self.origin = tuple(float(v) for v in self.origin)
        self.windows = tuple(self.windows)
        self.sweep_eps = tuple(float(v) for v in self.sweep_eps)

    def problems(self) -> list[str]:
        out = []
        if self.replicates < 2:
            out.append(f"replicates: need at least 2, got {self.replicates}")
        if not self.levels:
            out.append("levels: need at least one level")
        if not all(math.isfinite(v) for v in self.levels):
            out.append("levels: must be finite")
        if len(self.dims) != 2 or min(self.dims) < 8:
            out.append(f"dims: need two sizes >= 8, got {self.dims}")
        if not self.eps > 0:
            out.append(f"eps: must be positive, got {self.eps}")
        if self.boundary_mode not in BOUNDARY_MODES:
            out.append(f"boundary_mode: must be one of {BOUNDARY_MODES}, got {self.boundary_mode!r}")
        if self.workers is not None and self.workers < 1:
            out.append(f"workers: must be >= 1, got {self.workers}")
        if (self.window is not None or self.windows) and self.boundary_mode != "bounded":
            out.append("window/windows: only allowed in bounded mode")
        if self.eps > 0 and len(self.dims) == 2:
            extent = self.extent
            for name, w in [("window", self.window)] + [(f"windows[{i}]", w) for i, w in enumerate(self.windows)]:
                if w is not None and not _inside(w, extent, 0.0, self.eps):
                    out.append(f"{name}: {w.to_quads()} is not inside the field extent {extent}")
        for e in self.sweep_eps:
            ratio = e / self.eps if self.eps > 0 else float("nan")
            k = round(ratio) if math.isfinite(ratio) else 0
            if k < 1 or abs(ratio - k) > 1e-9 * max(1, k):
                out.append(f"sweep_eps: {e} is not an integer multiple of eps={self.eps}")
            elif any(d % k for d in self.dims):
                out.append(f"sweep_eps: stride {k} for {e} does not divide dims {self.dims}")
        return out

    def validate(self) -> "ExperimentConfig":
        problems = self.problems()
        if problems:
            raise ConfigError(problems)
        return self

    @property
    def extent(self) -> tuple[float, float, float, float]:
        ny, nx = self.dims
        x0, y0 = self.origin
        h = 0.5 * self.eps
        return (x0 - h, x0 + (nx - 0.5) * self.eps, y0 - h, y0 + (ny - 0.5) * self.eps)

    @property
    def strides(self) -> list[int]:
        eps_list = self.sweep_eps or (self.eps,)
        return [int(round(e / self.eps)) for e in eps_list]

    @property
    def mu(self) -> float:
        return spectral_moment(self.model, allow_irregular=self.allow_irregular)

    def to_dict(self) -> dict:
        return {
            "model": self.model.to_dict(),
            "levels": list(self.levels),
            "dims": list(self.dims),
            "eps": self.eps,
            "replicates": self.replicates,
            "seed": self.seed,
            "boundary_mode": self.boundary_mode,
            "origin": list(self.origin),
            "window": self.window.to_quads() if self.window else None,
            "windows": [w.to_quads() for w in self.windows],
            "sweep_eps": list(self.sweep_eps),
            "allow_irregular": self.allow_irregular,
            "pad": self.pad,
        }

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


def _inside(w: Window, extent, margin: float, eps: float) -> bool:
    xmin, xmax, ymin, ymax = extent
    wx0, wx1, wy0, wy1 = w.bbox
    tol = 1e-9 * eps
    return (wx0 - margin >= xmin - tol and wx1 + margin <= xmax + tol
            and wy0 - margin >= ymin - tol and wy1 + margin <= ymax + tol)


def frame_for_windows(windows: Sequence[Window], eps: float, margin: float):
    """(dims, origin) of a lattice aligned on multiples of eps covering the windows plus margin."""
    boxes = np.array([w.bbox for w in windows])
    xmin, xmax = boxes[:, 0].min() - margin, boxes[:, 1].max() + margin
    ymin, ymax = boxes[:, 2].min() - margin, boxes[:, 3].max() + margin
    i0, j0 = math.floor(xmin / eps + 1e-9), math.floor(ymin / eps + 1e-9)
    i1, j1 = math.ceil(xmax / eps - 1e-9), math.ceil(ymax / eps - 1e-9)
    return (j1 - j0 + 1, i1 - i0 + 1), (i0 * eps, j0 * eps)


def worker_count(config: ExperimentConfig) -> int:
    """Requested workers (default 1), capped by ``EXCTOP_THREADS`` when set.

    With no explicit request the cap itself is used.
    """
    env = os.environ.get("EXCTOP_THREADS")
    cap = max(1, int(env)) if env else None
    if config.workers is None:
        return cap or 1
    return min(config.workers, cap) if cap else config.workers


def _map(fn, indices, workers: int):
    indices = list(indices)
    if workers <= 1 or len(indices) < 2:
        return [fn(i) for i in indices]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, indices, chunksize=max(1, len(indices) // (4 * workers))))


def replicate_field(config: ExperimentConfig, r: int) -> FieldSample:
    return sample_field(config.model, config.dims, config.eps, config.seed, config.boundary_mode,
                        stream=r, origin=config.origin, pad=config.pad)


def measure(img: BinaryImage) -> tuple[int, float, float]:
    """(chi, per_inf, area) of one digitized excursion."""
    return topology.chi_bicov(img), topology.perimeter_inf(img)[2], topology.area(img)


def _measure_replicate(config: ExperimentConfig, windows, r: int) -> np.ndarray:
    fld = replicate_field(config, r)
    out = np.empty((len(windows), len(config.levels), 3))
    for j, level in enumerate(config.levels):
        img = digitize(fld, level)
        for k, w in enumerate(windows):
            out[k, j] = measure(img if w is None else clip_to_window(img, w))
    if config.boundary_mode == "torus":
        ny, nx = config.dims
        out /= ny * nx * config.eps ** 2
    return out


@dataclass
class StatRow:
    level: float
    functional: str
    mean: float
    sd: float
    se: float
    predicted: float
    z: float
    n: int

    def csv(self) -> str:
        vals = (self.level, self.functional, self.mean, self.sd, self.se, self.predicted, self.z)
        return ",".join(v if isinstance(v, str) else repr(float(v)) for v in vals)


def describe(samples) -> tuple[float, float, float]:
    """(mean, sample SD, standard error) with correctly rounded sums."""
    xs = [float(v) for v in np.ravel(samples)]
    n = len(xs)
    mean = math.fsum(xs) / n
    sd = math.sqrt(math.fsum((x - mean) ** 2 for x in xs) / (n - 1)) if n > 1 else 0.0
    return mean, sd, sd / math.sqrt(n)


def z_score(mean: float, se: float, predicted: float) -> float:
    if se > 0:
        return (mean - predicted) / se
    # degenerate: every replicate gave the same value
    return 0.0 if math.isclose(mean, predicted, rel_tol=1e-9, abs_tol=1e-9) else math.copysign(math.inf, mean - predicted)


def stat_row(level, functional, samples, predicted) -> StatRow:
    mean, sd, se = describe(samples)
    return StatRow(float(level), functional, mean, sd, se, float(predicted), z_score(mean, se, predicted), len(samples))


@dataclass
class SummaryStats:
    rows: list[StatRow]
    config: ExperimentConfig
    samples: dict = field(default_factory=dict, repr=False)
    alternatives: list[dict] = field(default_factory=list)

    def get(self, level: float, functional: str) -> StatRow:
        for row in self.rows:
            if row.functional == functional and row.level == float(level):
                return row
        raise KeyError((level, functional))

    def to_csv(self) -> str:
        lines = [",".join(CSV_COLUMNS)] + [r.csv() for r in self.rows]
        return "\n".join(lines) + "\n"

    def adjudication(self) -> dict:
        """Which normalization each alternative prediction is consistent with."""
        out = {}
        for alt in self.alternatives:
            key = f"{alt['functional']}@{alt['level']!r}"
            out.setdefault(key, {})[alt["variant"]] = {"predicted": alt["predicted"], "z": alt["z"]}
        return out


def _predictions(config: ExperimentConfig, mu: float, level: float, window: Optional[Window], phi="cdf"):
    if config.boundary_mode == "torus":
        d = closed_form.densities(mu, level, phi)
        return {"chi": d.ec_density, "per_inf": d.per_inf_density, "vol": d.vol_density}
    e = closed_form.expected_functionals(window, mu, level, phi)
    return {"chi": e.chi, "per_inf": e.per_inf, "vol": e.vol}


def run(config: ExperimentConfig, phi: str = "cdf") -> SummaryStats:
    """Replicated measurement of (chi, Per_inf, Vol) against the Gaussian closed forms.

    Torus mode reports densities (per unit torus area); bounded mode
    reports totals over ``config.window`` (default: the full field extent).
    ``phi`` picks the volume normalization of the ``predicted`` column; both
    normalizations are always scored in ``alternatives``.
    """
    config.validate()
    mu = config.mu
    window = config.window
    if config.boundary_mode == "bounded" and window is None:
        window = Window.rectangle(*config.extent)
    fn = partial(_measure_replicate, config, [config.window])
    data = np.stack(_map(fn, range(config.replicates), worker_count(config)))[:, 0]

    rows, alternatives = [], []
    for j, level in enumerate(config.levels):
        cdf = _predictions(config, mu, level, window)
        centered = _predictions(config, mu, level, window, phi="centered")
        pred = centered if phi == "centered" else cdf
        for k, name in enumerate(FUNCTIONALS):
            rows.append(stat_row(level, name, data[:, j, k], pred[name]))
        mean_per, _, se_per = describe(data[:, j, 1])
        mean_vol, _, se_vol = describe(data[:, j, 2])
        if config.boundary_mode == "torus":
            one_sided = cdf["per_inf"] / 2.0
            alternatives += [
                {"level": level, "functional": "per_inf", "variant": "two-sided", "predicted": cdf["per_inf"],
                 "z": z_score(mean_per, se_per, cdf["per_inf"])},
                {"level": level, "functional": "per_inf", "variant": "one-sided", "predicted": one_sided,
                 "z": z_score(mean_per, se_per, one_sided)},
            ]
        alternatives += [
            {"level": level, "functional": "vol", "variant": "cdf", "predicted": cdf["vol"],
             "z": z_score(mean_vol, se_vol, cdf["vol"])},
            {"level": level, "functional": "vol", "variant": "centered", "predicted": centered["vol"],
             "z": z_score(mean_vol, se_vol, centered["vol"])},
        ]
        if config.boundary_mode == "bounded":
            mean_chi, _, se_chi = describe(data[:, j, 0])
            alternatives += [
                {"level": level, "functional": "chi", "variant": v, "predicted": p,
                 "z": z_score(mean_chi, se_chi, p)}
                for v, p in (("cdf", cdf["chi"]), ("centered", centered["chi"]))
            ]
    return SummaryStats(rows, config, {"data": data}, alternatives)


def window_term_experiment(config: ExperimentConfig, margin: Optional[float] = None,
                           phi: str = "cdf") -> SummaryStats:
    """Measure several windows on the same bounded-mode realizations.

    Rows ``chi[wK]`` etc. compare each window against its expected
    functional; rows ``chi[wK-w0]`` compare paired per-replicate
    differences against the predicted difference.
    """
    config.validate()
    windows = list(config.windows)
    if len(windows) < 2:
        raise ConfigError(["windows: need at least two windows"])
    margin = 3.0 * config.model.length_scale if margin is None else margin
    bad = [f"windows[{i}]: needs a margin of {margin} from the field edge"
           for i, w in enumerate(windows) if not _inside(w, config.extent, margin, config.eps)]
    if bad:
        raise ConfigError(bad)
    mu = config.mu
    fn = partial(_measure_replicate, config, windows)
    data = np.stack(_map(fn, range(config.replicates), worker_count(config)))

    rows = []
    for j, level in enumerate(config.levels):
        preds = [_predictions(config, mu, level, w, phi) for w in windows]
        for i in range(len(windows)):
            for k, name in enumerate(FUNCTIONALS):
                rows.append(stat_row(level, f"{name}[w{i}]", data[:, i, j, k], preds[i][name]))
        for i in range(1, len(windows)):
            for k, name in enumerate(FUNCTIONALS):
                diff = data[:, i, j, k] - data[:, 0, j, k]
                rows.append(stat_row(level, f"{name}[w{i}-w0]", diff, preds[i][name] - preds[0][name]))
    return SummaryStats(rows, config, {"data": data})


def sweep_field(fld: FieldSample, levels: Sequence[float], strides: Sequence[int]) -> list[dict]:
    """Digital functionals of one realization re-observed at coarser spacings."""
    out = []
    for s in strides:
        sub = fld.subsample(s)
        npix = sub.dims[0] * sub.dims[1]
        for level in levels:
            img = digitize(sub, level)
            anti, main = topology.checkerboard_cells(img)
            out.append({
                "level": float(level), "stride": int(s), "eps": sub.eps,
                "chi_bicov": topology.chi_bicov(img),
                "chi_complex": topology.chi_complex(img),
                "components_4": topology.components(img, 4),
                "holes_8": topology.holes(img),
                "checkerboard_anti": anti, "checkerboard_main": main,
                "checkerboard_per_pixel": (anti + main) / npix,
            })
    return out


SWEEP_COLUMNS = ("lambda", "eps", "stride", "mean_chi", "se_chi", "mean_checkerboard_per_pixel",
                 "se_checkerboard_per_pixel", "mean_components_4", "se_components_4")


@dataclass
class SweepTable:
    rows: list[dict]
    config: Optional[ExperimentConfig] = None

    def to_csv(self) -> str:
        lines = [",".join(SWEEP_COLUMNS)]
        for r in self.rows:
            lines.append(",".join(str(r[c]) if c == "stride" else repr(float(r[c])) for c in SWEEP_COLUMNS))
        return "\n".join(lines) + "\n"

    def series(self, column: str, level: Optional[float] = None) -> tuple[np.ndarray, np.ndarray]:
        """(eps, values) averaged over levels (or for one level), sorted by decreasing eps."""
        eps = sorted({r["eps"] for r in self.rows}, reverse=True)
        vals = []
        for e in eps:
            sel = [r[column] for r in self.rows if r["eps"] == e and (level is None or r["lambda"] == level)]
            vals.append(math.fsum(sel) / len(sel))
        return np.array(eps), np.array(vals)

    def resolution_slope(self, column: str = "mean_checkerboard_per_pixel", level=None) -> float:
        """Least-squares slope of ``column`` against log2(1/eps); negative means decay under refinement."""
        eps, vals = self.series(column, level)
        return float(np.polyfit(-np.log2(eps), vals, 1)[0])

    def decay_exponent(self, column: str = "mean_checkerboard_per_pixel", level=None) -> float:
        """Slope of log(value) against log(eps) over the positive entries."""
        eps, vals = self.series(column, level)
        keep = vals > 0
        if keep.sum() < 2:
            return float("nan")
        return float(np.polyfit(np.log(eps[keep]), np.log(vals[keep]), 1)[0])


def _sweep_replicate(config: ExperimentConfig, r: int) -> list[dict]:
    return sweep_field(replicate_field(config, r), config.levels, config.strides)


def convergence_sweep(config: ExperimentConfig) -> SweepTable:
    """Per (level, eps): mean chi, checkerboard cells per pixel and 4-components over replicates."""
    config.validate()
    per_rep = _map(partial(_sweep_replicate, config), range(config.replicates), worker_count(config))
    rows = []
    for idx, first in enumerate(per_rep[0]):
        chi = [rep[idx]["chi_bicov"] for rep in per_rep]
        chk = [rep[idx]["checkerboard_per_pixel"] for rep in per_rep]
        comp = [rep[idx]["components_4"] for rep in per_rep]
        m_chi, _, se_chi = describe(chi)
        m_chk, _, se_chk = describe(chk)
        m_comp, _, se_comp = describe(comp)
        rows.append({"lambda": first["level"], "eps": first["eps"], "stride": first["stride"],
                     "mean_chi": m_chi, "se_chi": se_chi,
                     "mean_checkerboard_per_pixel": m_chk, "se_checkerboard_per_pixel": se_chk,
                     "mean_components_4": m_comp, "se_components_4": se_comp})
    return SweepTable(rows, config)
