"""ODMR thermometry: lineshapes, scan synthesis, shift fitting, sensitivity
bounds, Allan analysis, and temperature calibration."""

from .allan import allan_deviation, allan_sensitivity
from .kappa import (
    DEFAULT_KAPPA_KHZ_PER_C,
    KappaCalibration,
    PosteriorResult,
    TemperatureSeries,
    calibrate_kappa,
    kappa_shift_posterior,
    shift_series_to_temperature,
    shift_to_temperature,
)
from .lineshape import (
    DEFAULT_CENTER_HZ,
    DEFAULT_CONTRASTS,
    DEFAULT_HWHM_HZ,
    DEFAULT_N_POINTS,
    DEFAULT_SPAN_HZ,
    DEFAULT_SPLITTING_HZ,
    Lineshape,
    default_grid,
    default_lineshape,
)
from .scan import (
    FitShiftResult,
    OdmrScan,
    average_shifts,
    build_interpolation,
    fit_shift,
    scans_from_csv,
    scans_to_csv,
    synthesize_scan,
)
from .sensitivity import (
    DEFAULT_PHOTON_BUDGET,
    BoundComparison,
    CrbResult,
    ScanTiming,
    ShiftSeries,
    crb,
    crb_temperature_sensitivity,
    lineshape_bound_comparison,
    shift_bound_per_scan,
    simulate_shift_series,
)

__all__ = [
    "allan_deviation",
    "allan_sensitivity",
    "DEFAULT_KAPPA_KHZ_PER_C",
    "KappaCalibration",
    "PosteriorResult",
    "TemperatureSeries",
    "calibrate_kappa",
    "kappa_shift_posterior",
    "shift_series_to_temperature",
    "shift_to_temperature",
    "DEFAULT_CENTER_HZ",
    "DEFAULT_CONTRASTS",
    "DEFAULT_HWHM_HZ",
    "DEFAULT_N_POINTS",
    "DEFAULT_SPAN_HZ",
    "DEFAULT_SPLITTING_HZ",
    "Lineshape",
    "default_grid",
    "default_lineshape",
    "FitShiftResult",
    "OdmrScan",
    "average_shifts",
    "build_interpolation",
    "fit_shift",
    "scans_from_csv",
    "scans_to_csv",
    "synthesize_scan",
    "DEFAULT_PHOTON_BUDGET",
    "BoundComparison",
    "CrbResult",
    "ScanTiming",
    "ShiftSeries",
    "crb",
    "crb_temperature_sensitivity",
    "lineshape_bound_comparison",
    "shift_bound_per_scan",
    "simulate_shift_series",
]
