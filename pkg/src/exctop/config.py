"""Experiment config files: flat TOML key/value pairs.

Example::

    model = "squared-exponential"
    length_scale = 0.1
    levels = [-1.0, 0.0, 1.0]
    dims = [512, 512]
    eps = 0.001953125
    replicates = 200
    seed = 20240601
    boundary_mode = "torus"        # or "bounded"
    # optional
    origin = [0.0, 0.0]
    window = [[0.0, 0.5, 0.0, 0.5]]                       # [x0, x1, y0, y1] rectangles
    windows = [[[0.0, 0.5, 0.0, 0.5]], [[0.0, 1.0, 0.0, 0.25]]]
    sweep_eps = [0.001953125, 0.00390625]
    workers = 4
    allow_irregular = false
    pad = 0.3
"""
from __future__ import annotations

import sys
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigError, WindowError
from .experiment import ExperimentConfig
from .synthesis import CovarianceModel
from .window import Window

REQUIRED = ("model", "length_scale", "levels", "dims", "eps", "replicates", "seed")
OPTIONAL = ("boundary_mode", "origin", "window", "windows", "sweep_eps", "workers", "allow_irregular", "pad")

_NUM = (int, float)


def _is_num(v):
    return isinstance(v, _NUM) and not isinstance(v, bool)


def _num_list(v, n=None):
    return isinstance(v, list) and all(_is_num(x) for x in v) and (n is None or len(v) == n)


def config_from_dict(raw: dict) -> ExperimentConfig:
    """Build and validate a config, reporting every problem at once."""
    problems = []
    for key in REQUIRED:
        if key not in raw:
            problems.append(f"{key}: missing")
    for key in raw:
        if key not in REQUIRED + OPTIONAL:
            problems.append(f"{key}: unknown key")

    def check(key, ok, msg):
        if key in raw and not ok(raw[key]):
            problems.append(f"{key}: {msg}, got {raw[key]!r}")

    check("model", lambda v: isinstance(v, str), "must be a string")
    check("length_scale", lambda v: _is_num(v) and v > 0, "must be a positive number")
    check("levels", lambda v: _num_list(v) and len(v) > 0, "must be a nonempty list of numbers")
    check("dims", lambda v: isinstance(v, list) and len(v) == 2 and all(isinstance(x, int) for x in v),
          "must be two integers")
    check("eps", lambda v: _is_num(v) and v > 0, "must be a positive number")
    check("replicates", lambda v: isinstance(v, int) and not isinstance(v, bool), "must be an integer")
    check("seed", lambda v: isinstance(v, int) and not isinstance(v, bool) and 0 <= v < 2 ** 64,
          "must be an integer in [0, 2^64)")
    check("boundary_mode", lambda v: v in ("torus", "bounded"), "must be 'torus' or 'bounded'")
    check("origin", lambda v: _num_list(v, 2), "must be two numbers")
    check("window", lambda v: isinstance(v, list) and all(_num_list(q, 4) for q in v),
          "must be a list of [x0, x1, y0, y1]")
    check("windows", lambda v: isinstance(v, list) and all(
        isinstance(w, list) and all(_num_list(q, 4) for q in w) for w in v),
          "must be a list of windows")
    check("sweep_eps", _num_list, "must be a list of numbers")
    check("workers", lambda v: isinstance(v, int) and v >= 1, "must be a positive integer")
    check("allow_irregular", lambda v: isinstance(v, bool), "must be a boolean")
    check("pad", lambda v: _is_num(v) and v > 0, "must be a positive number")

    model = window = None
    windows = ()
    if not any(p.startswith(("model", "length_scale")) for p in problems):
        try:
            model = CovarianceModel(raw["model"], raw["length_scale"])
        except ValueError as exc:
            problems.append(f"model: {exc}")
    if "window" in raw and not any(p.startswith("window:") for p in problems):
        try:
            window = Window.from_quads(raw["window"])
        except WindowError as exc:
            problems.append(f"window: {exc}")
    if "windows" in raw and not any(p.startswith("windows:") for p in problems):
        try:
            windows = tuple(Window.from_quads(w) for w in raw["windows"])
        except WindowError as exc:
            problems.append(f"windows: {exc}")
    if problems:
        raise ConfigError(problems)
    cfg = ExperimentConfig(
        model=model, levels=raw["levels"], dims=raw["dims"], eps=float(raw["eps"]),
        replicates=raw["replicates"], seed=raw["seed"],
        boundary_mode=raw.get("boundary_mode", "torus"), origin=raw.get("origin", (0.0, 0.0)),
        window=window, windows=windows, sweep_eps=raw.get("sweep_eps", ()),
        workers=raw.get("workers"), allow_irregular=raw.get("allow_irregular", False),
        pad=raw.get("pad"),
    )
    return cfg.validate()


def load_config(path) -> ExperimentConfig:
    text = Path(path).read_text()
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError([f"{path}: {exc}"]) from exc
    return config_from_dict(raw)
