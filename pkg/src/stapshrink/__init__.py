"""Shrinkage covariance estimation and adaptive matched filter analysis."""

from .core import EigenSystem, InputError, NumericalError, UnsupportedRegimeError, hermitian_eig, reconstruct
from .datagen import Scenario, SpikedSpectrum, derive_rng, spiked_covariance
from .detection import DetectionReport, SinrMetrics, detect, nsinr, q_function, sinr_metrics, xi
from .harness import EstimatorSpec, ExperimentConfig, SweepTable, TrialRecord, run_trial, sweep
from .shrinkage import ShrinkageResult, anderson, fml, lw_linear, lwd_shrink, oracle_shrinker, pav, scm

__version__ = "0.1.0"
