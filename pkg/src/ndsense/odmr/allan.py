"""Overlapping Allan deviation and white-noise sensitivity extraction."""

from __future__ import annotations

import numpy as np

__all__ = ["allan_deviation", "allan_sensitivity"]


def allan_deviation(values, sample_s: float, taus=None):
    """Overlapping Allan deviation of a uniformly sampled series.

    Parameters
    ----------
    values : array
        Samples, each an average over one `sample_s` interval.
    sample_s : float
        Sample period, s.
    taus : array, optional
        Averaging times, s; must be integer multiples of `sample_s`.
        Defaults to a log-spaced grid. Values beyond a third of the
        record length are dropped.

    Returns
    -------
    (taus_s, adev) arrays.
    """
    y = np.asarray(values, dtype=float)
    if y.ndim != 1 or y.size < 3:
        raise ValueError("need a 1-D series of at least 3 samples")
    if sample_s <= 0:
        raise ValueError("sample period must be positive")
    n = y.size
    m_max = n // 3
    if taus is None:
        ms = np.unique(np.round(np.logspace(0, np.log10(max(m_max, 1)), 40))
                       .astype(int))
    else:
        taus = np.asarray(taus, dtype=float)
        ms = np.round(taus / sample_s).astype(int)
        if (np.abs(taus - ms * sample_s) > 1e-6 * sample_s).any():
            raise ValueError("taus must be integer multiples of the sample period")
    ms = ms[(ms >= 1) & (ms <= m_max)]
    if ms.size == 0:
        raise ValueError("no valid averaging times below a third of the record")

    c = np.concatenate([[0.0], np.cumsum(y)])
    out = np.empty(ms.size)
    for j, m in enumerate(ms):
        # overlapping cluster means via the cumulative sum
        s = c[m:] - c[:-m]
        d = s[m:] - s[:-m]
        out[j] = np.sqrt(0.5 * np.mean((d / m) ** 2))
    return ms * sample_s, out


def allan_sensitivity(taus, adev, fit_range=None) -> float:
    """White-noise sensitivity S from sigma_A(tau) = S/sqrt(tau).

    Geometric mean of adev*sqrt(tau) over the fit range, which is the
    log-domain least squares estimate with the slope fixed at -1/2.
    """
    taus = np.asarray(taus, dtype=float)
    adev = np.asarray(adev, dtype=float)
    mask = adev > 0
    if fit_range is not None:
        lo, hi = fit_range
        mask &= (taus >= lo) & (taus <= hi)
    if mask.sum() < 1:
        raise ValueError("fit range selects no points")
    return float(np.exp(np.mean(np.log(adev[mask] * np.sqrt(taus[mask])))))
