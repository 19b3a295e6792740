"""Euler characteristic, perimeter and area of excursion sets of 2-D fields."""

__version__ = "0.1.0"

from .closed_form import densities, ec_density, expected_functionals, per_densities, vol_density
from .excursion import BinaryImage, clip_to_window, complement, digitize
from .experiment import ExperimentConfig, convergence_sweep, run, window_term_experiment
from .synthesis import CovarianceModel, FieldSample, sample_field, sample_field_dense, spectral_moment
from .topology import TopologyReport, analyze, chi_bicov, chi_complex
from .window import Window, corner_count, euler, per_inf, per_u, vol
