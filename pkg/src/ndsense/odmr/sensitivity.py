"""Photon-budget sensitivity analysis: Fisher information bounds and the
synthetic thermometry pipeline (scan stream -> shift fits -> temperature).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import curve_fit

from ..seeding import as_generator
from .lineshape import Lineshape, default_grid
from .scan import fit_shift, synthesize_scan

__all__ = [
    "ScanTiming",
    "CrbResult",
    "BoundComparison",
    "ShiftSeries",
    "DEFAULT_PHOTON_BUDGET",
    "crb",
    "crb_temperature_sensitivity",
    "lineshape_bound_comparison",
    "shift_bound_per_scan",
    "simulate_shift_series",
]

DEFAULT_PHOTON_BUDGET = 10.0  # counts per 10 us sample, both detectors summed


@dataclass(frozen=True)
class ScanTiming:
    """Timing of the gated scan stream.

    One sweep covers n_points samples; sweeps run only while the
    microwave gate is open (mw_on_s out of every period_s).
    """

    sample_s: float = 1e-5
    n_points: int = 200
    period_s: float = 0.2
    mw_on_s: float = 0.16

    def __post_init__(self):
        if min(self.sample_s, self.period_s, self.mw_on_s) <= 0 or self.n_points < 2:
            raise ValueError("timing parameters must be positive")
        if self.mw_on_s > self.period_s:
            raise ValueError("gate open time cannot exceed the period")

    @property
    def scan_s(self) -> float:
        return self.sample_s * self.n_points

    @property
    def scans_per_second(self) -> float:
        return int(self.mw_on_s / self.scan_s) / self.period_s

    @property
    def duty(self) -> float:
        return self.mw_on_s / self.period_s


@dataclass(frozen=True)
class CrbResult:
    params: tuple
    matrix: np.ndarray  # covariance lower bound for one scan

    def sigma(self, name: str) -> float:
        i = self.params.index(name)
        return float(np.sqrt(self.matrix[i, i]))


def _perturbed(shape: Lineshape, name: str, value: float) -> Lineshape:
    if name.startswith("center"):
        i = int(name[-1]) - 1
        centers = list(shape.centers)
        centers[i] = value
        return replace(shape, centers=tuple(centers))
    if name.startswith("contrast"):
        i = int(name[-1]) - 1 if name[-1].isdigit() else 0
        contrasts = list(shape.contrasts)
        contrasts[i] = value
        return replace(shape, contrasts=tuple(contrasts))
    if name.startswith("hwhm"):
        i = int(name[-1]) - 1 if name[-1].isdigit() else 0
        hwhms = list(shape.hwhms)
        hwhms[i] = value
        return replace(shape, hwhms=tuple(hwhms))
    raise ValueError(f"unknown parameter: {name}")


def _param_value(shape: Lineshape, name: str) -> float:
    if name.startswith("center"):
        return shape.centers[int(name[-1]) - 1]
    if name.startswith("contrast"):
        return shape.contrasts[int(name[-1]) - 1 if name[-1].isdigit() else 0]
    if name.startswith("hwhm"):
        return shape.hwhms[int(name[-1]) - 1 if name[-1].isdigit() else 0]
    raise ValueError(f"unknown parameter: {name}")


def crb(shape: Lineshape, lam0: float, freqs=None,
        params=("lam0", "delta_f")) -> CrbResult:
    """Cramer-Rao covariance lower bound for one Poisson scan.

    The Fisher matrix is F_jk = sum_i (dmu_i/dtheta_j)(dmu_i/dtheta_k)/mu_i
    for mu_i = lam0 * L(f_i); lam0 and delta_f derivatives are analytic,
    shape parameters use central differences.
    """
    if lam0 <= 0:
        raise ValueError("lam0 must be positive")
    if freqs is None:
        freqs = default_grid()
    freqs = np.asarray(freqs, dtype=float)
    mu = lam0 * shape.value(freqs)
    cols = []
    for name in params:
        if name == "lam0":
            cols.append(shape.value(freqs))
        elif name == "delta_f":
            cols.append(-lam0 * shape.derivative(freqs))
        else:
            v = _param_value(shape, name)
            h = 1e-4 * abs(v) if v else 1e-4
            up = lam0 * _perturbed(shape, name, v + h).value(freqs)
            dn = lam0 * _perturbed(shape, name, v - h).value(freqs)
            cols.append((up - dn) / (2.0 * h))
    jac = np.column_stack(cols)
    fisher = jac.T @ (jac / mu[:, None])
    fisher = 0.5 * (fisher + fisher.T)
    # parameters carry wildly different units (counts vs Hz), so test
    # degeneracy on the diagonal-scaled matrix, not on raw eigenvalues
    diag = np.sqrt(np.diag(fisher))
    if (diag <= 0).any() or not np.isfinite(diag).all():
        raise np.linalg.LinAlgError("parameter carries no Fisher information")
    scaled = fisher / np.outer(diag, diag)
    eigvals = np.linalg.eigvalsh(scaled)
    if eigvals.min() <= 1e-6:
        raise np.linalg.LinAlgError(
            "singular Fisher information for the selected parameters")
    cov = np.linalg.inv(scaled) / np.outer(diag, diag)
    return CrbResult(params=tuple(params), matrix=cov)


def shift_bound_per_scan(shape: Lineshape, lam0: float, freqs=None) -> float:
    """Shift-only standard deviation bound (Hz) for one scan:
    sigma^2 >= (1/lam0) [sum_i L'^2(f_i)/L(f_i)]^-1.
    """
    if freqs is None:
        freqs = default_grid()
    freqs = np.asarray(freqs, dtype=float)
    lp = shape.derivative(freqs)
    lv = shape.value(freqs)
    info = float(np.sum(lp * lp / lv))
    if info <= 0:
        raise np.linalg.LinAlgError("flat lineshape carries no shift information")
    return float(np.sqrt(1.0 / (lam0 * info)))


def crb_temperature_sensitivity(shape: Lineshape, lam0: float,
                                kappa_khz_per_C: float,
                                timing: ScanTiming = ScanTiming(),
                                freqs=None) -> float:
    """Shot-noise-limited thermometry sensitivity, degrees C per sqrt(Hz).

    The per-scan shift bound is averaged over the scans completed per
    wall-clock second, which folds in the gating duty cycle.
    """
    if kappa_khz_per_C == 0:
        raise ValueError("kappa must be nonzero")
    sigma_scan = shift_bound_per_scan(shape, lam0, freqs)
    sigma_1s = sigma_scan / np.sqrt(timing.scans_per_second)
    return float(sigma_1s / abs(kappa_khz_per_C * 1e3))


@dataclass(frozen=True)
class BoundComparison:
    """Shift bounds of three lineshape models describing the same spectrum."""

    interpolation: float
    double_lorentzian: float
    single_lorentzian: float
    double_shape: Lineshape = field(repr=False, default=None)
    single_shape: Lineshape = field(repr=False, default=None)


def _fit_lorentzians(freqs, levels, n_dips: int):
    f0 = float(freqs.mean())
    scale = 1e6
    # parameters in MHz relative to grid center for conditioning
    x = (freqs - f0) / scale

    if n_dips == 2:
        def model(xx, m1, m2, c1, c2, g1, g2):
            return (1.0 - c1 * g1 * g1 / ((xx - m1) ** 2 + g1 * g1)
                    - c2 * g2 * g2 / ((xx - m2) ** 2 + g2 * g2))
        p0 = (-3.0, 3.0, 0.15, 0.12, 6.0, 6.0)
        popt, _ = curve_fit(model, x, levels, p0=p0, maxfev=20000)
        m1, m2, c1, c2, g1, g2 = popt
        if m1 > m2:
            m1, m2, c1, c2, g1, g2 = m2, m1, c2, c1, g2, g1
        return Lineshape(kind="double_lorentzian",
                         centers=(f0 + m1 * scale, f0 + m2 * scale),
                         contrasts=(abs(c1), abs(c2)),
                         hwhms=(abs(g1) * scale, abs(g2) * scale))

    def model1(xx, m, c, g):
        return 1.0 - c * g * g / ((xx - m) ** 2 + g * g)
    popt, _ = curve_fit(model1, x, levels, p0=(0.0, 0.2, 7.0), maxfev=20000)
    m, c, g = popt
    return Lineshape(kind="single_lorentzian", centers=(f0 + m * scale,),
                     contrasts=(abs(c),), hwhms=(abs(g) * scale,))


def lineshape_bound_comparison(table: Lineshape, lam0: float,
                               kappa_khz_per_C: float,
                               timing: ScanTiming = ScanTiming(),
                               freqs=None) -> BoundComparison:
    """Thermometry bounds for interpolation-table, double- and
    single-Lorentzian descriptions of one measured spectrum.

    The Lorentzian models are least squares fitted to the table levels,
    then each model's shift-only bound is converted to a sensitivity.
    """
    if table.kind != "interpolation":
        raise ValueError("comparison expects an interpolation-table lineshape")
    if freqs is None:
        freqs = table.table_f
    freqs = np.asarray(freqs, dtype=float)
    dl = _fit_lorentzians(table.table_f, table.table_L, 2)
    sl = _fit_lorentzians(table.table_f, table.table_L, 1)
    args = (lam0, kappa_khz_per_C, timing, freqs)

    def sens(shape):
        return crb_temperature_sensitivity(shape, args[0], args[1],
                                           timing=args[2], freqs=args[3])
    return BoundComparison(interpolation=sens(table),
                           double_lorentzian=sens(dl),
                           single_lorentzian=sens(sl),
                           double_shape=dl, single_shape=sl)


@dataclass
class ShiftSeries:
    """Binned shift-fit stream from the synthetic thermometry pipeline."""

    times: np.ndarray     # s, bin start times (wall clock)
    delta_f: np.ndarray   # Hz
    sigma: np.ndarray     # Hz
    lam0: np.ndarray      # fitted amplitude per bin
    bin_s: float
    n_excluded: int
    meta: dict = field(default_factory=dict)


def simulate_shift_series(shape: Lineshape, lam0: float, duration_s: float,
                          seed, delta_f_of_t=None, bin_s: float = 0.4,
                          timing: ScanTiming = ScanTiming(), freqs=None,
                          fit_shape: Lineshape | None = None) -> ShiftSeries:
    """Synthesize a gated scan stream and fit per-bin frequency shifts.

    Each bin accumulates the scans completed during `bin_s` of wall time.
    `delta_f_of_t` maps bin start time to the true shift (default 0).
    When `fit_shape` is None the interpolation table is built from the
    accumulated data itself, mirroring the self-calibrated pipeline.
    """
    if freqs is None:
        freqs = default_grid(n_points=timing.n_points)
    freqs = np.asarray(freqs, dtype=float)
    rng = as_generator(seed)
    scans_per_bin = int(round(bin_s * timing.scans_per_second))
    if scans_per_bin < 1:
        raise ValueError("bin shorter than one scan")
    n_bins = int(duration_s / bin_s)
    if n_bins < 1:
        raise ValueError("duration shorter than one bin")

    times = bin_s * np.arange(n_bins)
    truth = np.zeros(n_bins) if delta_f_of_t is None else \
        np.asarray([float(delta_f_of_t(t)) for t in times])
    scans = [synthesize_scan(shape, lam0, truth[k], rng, freqs=freqs,
                             n_scans=scans_per_bin) for k in range(n_bins)]
    if fit_shape is None:
        from .scan import build_interpolation
        fit_shape = build_interpolation(scans)
    fits = [fit_shift(s, fit_shape) for s in scans]
    ok = np.array([f.converged for f in fits])
    return ShiftSeries(
        times=times,
        delta_f=np.array([f.delta_f for f in fits]),
        sigma=np.array([f.sigma_delta_f for f in fits]),
        lam0=np.array([f.lam0 for f in fits]),
        bin_s=bin_s,
        n_excluded=int((~ok).sum()),
        meta={"scans_per_bin": scans_per_bin, "truth": truth},
    )
