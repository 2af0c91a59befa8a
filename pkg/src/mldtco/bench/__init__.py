"""Benchmark circuits, accuracy metrics and the figure-analog drivers."""

from .circuits import (
    ButterflyResult,
    DevicePair,
    NandTiming,
    glitch_amplitude,
    reference_pair,
    run_butterfly,
    run_inverter_vtc,
    run_nand_transient,
    run_ncurve,
    surrogate_pair,
)
from .figures import FIGURES, BenchConfig, ModelSet, run_figures
from .metrics import mean_rel_error, r_squared, snm_extract, zero_crossings
from .studies import MetricReport, device_report, learning_curve, transfer_curve_compare

__all__ = [
    "FIGURES",
    "BenchConfig",
    "ButterflyResult",
    "DevicePair",
    "MetricReport",
    "ModelSet",
    "NandTiming",
    "device_report",
    "glitch_amplitude",
    "learning_curve",
    "mean_rel_error",
    "r_squared",
    "reference_pair",
    "run_butterfly",
    "run_figures",
    "run_inverter_vtc",
    "run_nand_transient",
    "run_ncurve",
    "snm_extract",
    "surrogate_pair",
    "transfer_curve_compare",
    "zero_crossings",
]
