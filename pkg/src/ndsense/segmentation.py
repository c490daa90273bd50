"""Directed-motion detection via the directionality ratio.

A window of N steps is scored by gamma = displacement/path-length; under
Brownian motion gamma has an analytic null derived from a non-central t
distribution, and windows beyond its critical value mark candidate
directed transport. Surviving segments are classified and their
anomalous exponents summarized per motion class.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import gamma as _gamma_fn
from scipy.stats import nct as _nct

from . import rheology
from .trajectory import Trajectory

__all__ = [
    "GammaNull",
    "SegmentLabel",
    "ClassStats",
    "ClassExponents",
    "gamma_null",
    "directionality_ratio",
    "segment",
    "class_exponents",
    "labels_to_csv",
    "labels_from_csv",
]

DEFAULT_WINDOW_STEPS = 75
DEFAULT_MIN_LENGTH_NM = 500.0


@dataclass
class GammaNull:
    """Analytic null of the directionality ratio for Brownian windows."""

    N: int                    # steps per window
    M: int                    # dimensions
    confidence: float
    mu_chi: float             # mean of the chi(M) step length
    sigma_chi: float          # sd of the chi(M) step length
    gammas: np.ndarray        # tabulation grid on (0, 1]
    pdf: np.ndarray           # f_gamma on the grid
    critical_gamma: float

    def pdf_at(self, g):
        return np.interp(g, self.gammas, self.pdf, left=0.0, right=0.0)


def gamma_null(N: int, M: int = 2, confidence: float = 0.95,
               n_grid: int = 2048) -> GammaNull:
    """Null distribution of gamma over N-step Brownian windows in M dims.

    The inverse ratio eta = sqrt(M)/(sigma*gamma) follows a non-central t
    with M degrees of freedom and non-centrality sqrt(N)*mu/sigma, where
    mu and sigma are the chi(M) step-length moments; the pdf of gamma
    follows by change of variables and the critical value from the upper
    tail at the requested confidence.
    """
    if N < 2:
        raise ValueError("need at least 2 steps per window")
    if M not in (1, 2, 3):
        raise ValueError("M must be 1, 2 or 3")
    if not 0 < confidence < 1:
        raise ValueError("confidence must lie in (0, 1)")
    mu = np.sqrt(2.0) * _gamma_fn(0.5 * (M + 1)) / _gamma_fn(0.5 * M)
    sigma = np.sqrt(M - mu * mu)
    nc = np.sqrt(N) * mu / sigma
    dist = _nct(df=M, nc=nc)

    # large gamma corresponds to the lower tail of eta
    eta_c = float(dist.ppf(1.0 - confidence))
    crit = float(np.sqrt(M) / (sigma * eta_c))

    gammas = np.linspace(1.0 / n_grid, 1.0, n_grid)
    eta = np.sqrt(M) / (sigma * gammas)
    pdf = np.sqrt(M) / (sigma * gammas ** 2) * dist.pdf(eta)
    norm = float(np.trapezoid(pdf, gammas))
    if not 0.9 < norm < 1.1:
        raise RuntimeError(f"gamma null failed to normalize: integral {norm:.4f}")
    return GammaNull(N=N, M=M, confidence=confidence, mu_chi=float(mu),
                     sigma_chi=float(sigma), gammas=gammas, pdf=pdf,
                     critical_gamma=crit)


def directionality_ratio(window: np.ndarray) -> float:
    """gamma = |end - start| / total path length for one position window.

    Returns NaN when the path length is zero (undefined ratio).
    """
    w = np.asarray(window, dtype=float)
    if w.ndim != 2 or w.shape[0] < 2:
        raise ValueError("window must be (n_positions >= 2, n_dims)")
    steps = np.diff(w, axis=0)
    path = float(np.linalg.norm(steps, axis=1).sum())
    if path == 0.0:
        return float("nan")
    return float(np.linalg.norm(w[-1] - w[0]) / path)


@dataclass
class SegmentLabel:
    """One labeled index span of a trajectory (positions start..end inclusive)."""

    start_idx: int
    end_idx: int
    gamma: float          # max window gamma inside the span (NaN if undefined)
    cls: str              # "directed" or "non-directed"
    displacement_nm: float
    alpha: float | None = None

    @property
    def n_steps(self) -> int:
        return self.end_idx - self.start_idx


def segment(traj: Trajectory, null: GammaNull, axes: str = "xy",
            min_length_nm: float = DEFAULT_MIN_LENGTH_NM) -> list:
    """Label directed and non-directed spans of a trajectory.

    Stride-1 windows of `null.N` steps are tested against the null's
    critical value; overlapping supra-threshold windows merge into one
    candidate, which must also move at least `min_length_nm` end to end
    to count as directed. The remaining spans are labeled non-directed.
    """
    pos = traj.axis(axes)
    if pos.shape[1] != null.M:
        raise ValueError(f"axes select {pos.shape[1]} dims but the null has M={null.M}")
    n_pos = pos.shape[0]
    n_w = null.N
    if n_pos < n_w + 1:
        raise ValueError("trajectory shorter than one window")

    n_windows = n_pos - n_w
    gammas = np.empty(n_windows)
    for i in range(n_windows):
        gammas[i] = directionality_ratio(pos[i:i + n_w + 1])
    supra = gammas > null.critical_gamma  # NaN compares False

    # merge supra windows whose index spans overlap
    candidates = []
    i = 0
    while i < n_windows:
        if not supra[i]:
            i += 1
            continue
        start = i
        end = i + n_w  # inclusive position index
        j = i + 1
        while j < n_windows and j <= end:
            if supra[j]:
                end = j + n_w
            j += 1
        candidates.append((start, end))
        i = end + 1

    def span_label(s, e, cls, g):
        disp = float(np.linalg.norm(pos[e] - pos[s]))
        return SegmentLabel(start_idx=s, end_idx=e, gamma=g, cls=cls,
                            displacement_nm=disp)

    directed = []
    for s, e in candidates:
        disp = float(np.linalg.norm(pos[e] - pos[s]))
        g = float(np.nanmax(gammas[s:min(e - n_w, n_windows - 1) + 1]))
        if disp >= min_length_nm:
            directed.append(span_label(s, e, "directed", g))

    labels = []
    cursor = 0
    for seg_label in directed:
        if seg_label.start_idx > cursor:
            sub = gammas[cursor:max(seg_label.start_idx - n_w, cursor) + 1]
            g = float(np.nanmax(sub)) if np.isfinite(sub).any() else float("nan")
            labels.append(span_label(cursor, seg_label.start_idx, "non-directed", g))
        labels.append(seg_label)
        cursor = seg_label.end_idx
    if cursor < n_pos - 1:
        sub = gammas[min(cursor, n_windows - 1):]
        g = float(np.nanmax(sub)) if np.isfinite(sub).any() else float("nan")
        labels.append(span_label(cursor, n_pos - 1, "non-directed", g))
    return labels


@dataclass
class ClassStats:
    """Exponent statistics of one motion class."""

    alphas: np.ndarray
    mean: float
    sd: float
    degenerate: bool          # single segment: sd pinned to 0
    ensemble_taus: np.ndarray
    ensemble_msd: np.ndarray
    n_segments: int


@dataclass
class ClassExponents:
    classes: dict = field(default_factory=dict)
    notices: list = field(default_factory=list)


def class_exponents(traj: Trajectory, labels, axes: str = "xy",
                    min_points: int = 8) -> ClassExponents:
    """Per-class anomalous exponents and ensemble MSDs from labeled spans.

    Each segment of at least `min_points` positions is fitted over lags
    from 2*dt spanning one decade, capped at a quarter of the segment
    duration; classes without usable segments are omitted with a notice.
    """
    out = ClassExponents()
    by_class: dict = {}
    for lab in labels:
        by_class.setdefault(lab.cls, []).append(lab)

    for cls, labs in sorted(by_class.items()):
        alphas = []
        curves = []
        for lab in labs:
            n_seg = lab.end_idx - lab.start_idx + 1
            if n_seg < min_points:
                continue
            sub = traj.slice(lab.start_idx, lab.end_idx + 1)
            max_lag = max(n_seg // 4, 2)
            lags = np.arange(1, max_lag + 1)
            curve = rheology.msd(sub, axes=axes, lags=lags, variance="none",
                                 noise_floor_nm2=0.0)
            lo = 2.0 * traj.dt
            hi = min(10.0 * lo, curve.taus[-1])
            sel = (curve.taus >= lo) & (curve.taus <= hi)
            if sel.sum() < 4:
                sel = np.ones(curve.taus.size, dtype=bool)
            try:
                fit = rheology.anomalous_exponent(
                    curve, fit_range=(curve.taus[sel][0], curve.taus[sel][-1]))
            except ValueError:
                continue
            lab.alpha = fit.alpha
            alphas.append(fit.alpha)
            curves.append(curve)
        if not alphas:
            out.notices.append(f"class '{cls}': no segment with >= {min_points} points")
            continue
        alphas = np.asarray(alphas)
        degenerate = alphas.size == 1
        # common lag grid: intersect by truncation to the shortest curve
        n_common = min(c.taus.size for c in curves)
        taus = curves[0].taus[:n_common]
        ens = np.mean([c.msd[:n_common] for c in curves], axis=0)
        out.classes[cls] = ClassStats(
            alphas=alphas,
            mean=float(alphas.mean()),
            sd=0.0 if degenerate else float(alphas.std(ddof=1)),
            degenerate=degenerate,
            ensemble_taus=taus,
            ensemble_msd=ens,
            n_segments=int(alphas.size),
        )
    return out


def labels_to_csv(labels, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("start_idx,end_idx,gamma,class,displacement_nm,alpha\n")
        for lab in labels:
            alpha = "" if lab.alpha is None else f"{lab.alpha:.6f}"
            fh.write(f"{lab.start_idx},{lab.end_idx},{lab.gamma:.6f},"
                     f"{lab.cls},{lab.displacement_nm:.6f},{alpha}\n")


def labels_from_csv(path) -> list:
    labels = []
    with open(path) as fh:
        header = fh.readline().strip()
        if header != "start_idx,end_idx,gamma,class,displacement_nm,alpha":
            raise ValueError(f"unexpected labels header: {header}")
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 6:
                raise ValueError(f"bad labels row at line {lineno}: {line}")
            labels.append(SegmentLabel(
                start_idx=int(parts[0]), end_idx=int(parts[1]),
                gamma=float(parts[2]), cls=parts[3],
                displacement_nm=float(parts[4]),
                alpha=None if parts[5] == "" else float(parts[5])))
    return labels
