import math
import logging
from dataclasses import dataclass

import numpy as np
from scipy import signal, stats

from src.core.errors import DomainError, FitError, SeriesSizeError

logger = logging.getLogger("consentaneous_sim")

DEFAULT_BINS_PER_DECADE = 10
MIN_PDF_SAMPLES = 10
MIN_BIN_COUNT = 5
MIN_FIT_BINS = 4


@dataclass(frozen=True)
class LogBinnedPdf:
    """Histogram on geometric bins, normalized to a probability density."""
    bin_edges: np.ndarray
    bin_centers: np.ndarray
    density: np.ndarray
    counts: np.ndarray
    n_total: int

    @property
    def bin_widths(self):
        return np.diff(self.bin_edges)

    def integral(self):
        return float(np.sum(self.density * self.bin_widths))


@dataclass(frozen=True)
class Spectrum:
    """One-sided power spectral density, frequencies in 1/day."""
    frequencies: np.ndarray
    power: np.ndarray
    n_segments: int
    segment_length: int

    def log_binned(self, bins_per_decade=DEFAULT_BINS_PER_DECADE):
        """Averages power over geometric frequency bins (empty bins dropped)."""
        edges = geometric_edges(self.frequencies[0], self.frequencies[-1], bins_per_decade)
        idx = np.clip(np.searchsorted(edges, self.frequencies, side="right") - 1, 0, len(edges) - 2)
        counts = np.bincount(idx, minlength=len(edges) - 1)
        sums = np.bincount(idx, weights=self.power, minlength=len(edges) - 1)
        f_sums = np.bincount(idx, weights=np.log(self.frequencies), minlength=len(edges) - 1)
        keep = counts > 0
        return Spectrum(
            frequencies=np.exp(f_sums[keep] / counts[keep]),
            power=sums[keep] / counts[keep],
            n_segments=self.n_segments,
            segment_length=self.segment_length,
        )


@dataclass(frozen=True)
class PowerLawFit:
    """|slope| of an OLS line through log-log points, with its standard error."""
    exponent: float
    stderr: float
    fit_range: tuple
    n_bins_used: int
    intercept: float = 0.0


def geometric_edges(lower, upper, bins_per_decade):
    """Edges lower·r^k, r = 10^(1/bins_per_decade), with the last edge >= upper."""
    ratio = 10.0 ** (1.0 / bins_per_decade)
    n_bins = max(1, int(math.ceil(math.log10(upper / lower) * bins_per_decade - 1e-9)))
    edges = lower * ratio ** np.arange(n_bins + 1)
    if edges[-1] < upper:
        edges = np.append(edges, edges[-1] * ratio)
    return edges


def log_binned_pdf(samples, bins_per_decade=DEFAULT_BINS_PER_DECADE):
    """
    Log-binned density of positive samples.

    Bins are geometric, start at min(samples) and cover max(samples);
    density[i] = counts[i] / (n_total·width[i]), so the density integrates
    to 1 over the bins.
    """
    x = np.asarray(samples, dtype=float)
    if bins_per_decade < 2:
        raise DomainError(f"bins_per_decade must be >= 2, got {bins_per_decade}")
    if len(x) < MIN_PDF_SAMPLES:
        raise SeriesSizeError("Too few samples for a log-binned PDF", MIN_PDF_SAMPLES, len(x))
    if np.any(x <= 0) or not np.all(np.isfinite(x)):
        raise DomainError("log_binned_pdf() needs finite samples > 0")

    x = np.sort(x)
    lower, upper = x[0], x[-1]
    if upper == lower:
        edges = np.array([lower, lower * 10.0 ** (1.0 / bins_per_decade)])
    else:
        edges = geometric_edges(lower, upper, bins_per_decade)

    counts, _ = np.histogram(x, bins=edges)
    n_total = len(x)
    density = counts / (n_total * np.diff(edges))

    return LogBinnedPdf(
        bin_edges=edges,
        bin_centers=np.sqrt(edges[:-1] * edges[1:]),
        density=density,
        counts=counts,
        n_total=n_total,
    )


def psd(series, segment_length):
    """
    Averaged periodogram over non-overlapping, mean-removed segments
    (boxcar window), one-sided, frequencies k/(L·δ) in 1/day. Normalized so
    that sum(power)·Δf equals the mean segment variance. The DC bin is dropped.
    """
    values = np.asarray(series.values, dtype=float)
    L = int(segment_length)
    if L < 4 or L & (L - 1):
        raise DomainError(f"segment_length must be a power of two >= 4, got {segment_length}")
    if len(values) < L:
        raise SeriesSizeError("Series shorter than one PSD segment", L, len(values))

    n_segments = len(values) // L
    freqs, power = signal.welch(
        values[: n_segments * L],
        fs=1.0 / series.delta,
        window="boxcar",
        nperseg=L,
        noverlap=0,
        detrend="constant",
        scaling="density",
        return_onesided=True,
        average="mean",
    )
    return Spectrum(frequencies=freqs[1:], power=power[1:], n_segments=n_segments, segment_length=L)


def _fit_points(target, fit_range, min_count):
    lo, hi = fit_range
    if isinstance(target, LogBinnedPdf):
        x, y = target.bin_centers, target.density
        usable = (target.counts >= min_count) & (y > 0)
    elif isinstance(target, Spectrum):
        x, y = target.frequencies, target.power
        usable = y > 0
    else:
        raise DomainError(f"Cannot fit a power law to {type(target).__name__}")
    usable &= (x >= lo) & (x <= hi)
    return x[usable], y[usable]


def fit_powerlaw(target, fit_range, min_count=MIN_BIN_COUNT):
    """
    OLS on (log x, log y) over the usable bins inside fit_range.
    PDF bins need at least `min_count` samples; spectra are used as given
    (pass spectrum.log_binned() for evenly weighted decades).
    """
    x, y = _fit_points(target, fit_range, min_count)
    if len(x) < MIN_FIT_BINS:
        raise FitError(f"Need at least {MIN_FIT_BINS} usable bins in range {fit_range}", len(x))

    result = stats.linregress(np.log(x), np.log(y))
    return PowerLawFit(
        exponent=float(-result.slope),
        stderr=float(result.stderr),
        fit_range=(float(fit_range[0]), float(fit_range[1])),
        n_bins_used=int(len(x)),
        intercept=float(result.intercept),
    )


def hurst_from_beta(beta):
    """H from the PSD exponent via β = 2H + 1."""
    return (beta - 1.0) / 2.0


def fbm_duration_exponent(hurst):
    """First-passage duration exponent 2 - H expected for correlated-increment (fBm) signals."""
    return 2.0 - hurst


@dataclass(frozen=True)
class CutoffCheck:
    """
    How far a duration PDF falls below an anchored power law in a tail range.

    `ratio` is math.inf when no bin of the tail range is occupied: the
    density there is zero. `last_occupied` is the longest occupied bin
    center, which then locates the end of the measured distribution.
    """
    ratio: float
    tail_range: tuple
    n_tail_bins: int
    last_occupied: float

    @property
    def tail_empty(self):
        return self.n_tail_bins == 0

    def to_dict(self):
        return {
            "ratio": None if self.tail_empty else self.ratio,
            "tail_range": list(self.tail_range),
            "tail_empty": self.tail_empty,
            "last_occupied": self.last_occupied,
        }


def cutoff_ratio(pdf, exponent, anchor_range, tail_range, min_count=1):
    """
    Anchors C·x^(-exponent) on the occupied bins of anchor_range and returns a
    CutoffCheck holding the largest factor by which the measured density
    falls below that line on the occupied bins of tail_range.
    """
    xa, ya = _fit_points(pdf, anchor_range, min_count)
    if len(xa) == 0:
        raise FitError(f"No occupied bins in anchor range {anchor_range}", 0)
    log_c = np.mean(np.log(ya) + exponent * np.log(xa))

    occupied = pdf.bin_centers[pdf.counts >= min_count]
    last_occupied = float(occupied[-1]) if len(occupied) else 0.0

    xp, yp = _fit_points(pdf, tail_range, min_count)
    if len(xp) == 0:
        ratio = math.inf
    else:
        line = np.exp(log_c - exponent * np.log(xp))
        ratio = float(np.max(line / yp))
    return CutoffCheck(ratio=ratio, tail_range=(float(tail_range[0]), float(tail_range[1])),
                       n_tail_bins=int(len(xp)), last_occupied=last_occupied)
