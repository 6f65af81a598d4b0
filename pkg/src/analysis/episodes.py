import logging
from dataclasses import dataclass

import numpy as np

from src.core.errors import ConfigurationError, DegenerateSeriesError, SeriesSizeError

logger = logging.getLogger("consentaneous_sim")

# Threshold set used throughout the study, in standard deviations
CANONICAL_THRESHOLDS = (0.3, 0.5, 0.8, 1.3, 2.0, 3.0)


@dataclass(frozen=True)
class ThresholdSpec:
    """Threshold q (in series std units) and the level it resolves to."""
    q: float
    absolute_level: float

    @classmethod
    def resolve(cls, q, series):
        if not q > 0:
            raise ConfigurationError(f"Threshold q must be > 0, got {q}")
        return cls(q=float(q), absolute_level=float(q) * series_std(series))


@dataclass(frozen=True)
class EpisodeSet:
    """
    Burst (T, above threshold) and inter-burst (θ, below) durations.
    Durations are stored as run lengths in samples, so they stay exact
    multiples of the series step `delta`.
    """
    q: float
    delta: float
    burst_steps: np.ndarray
    inter_burst_steps: np.ndarray
    n_samples_analyzed: int
    n_crossings: int = 0

    @property
    def bursts(self):
        return self.burst_steps * self.delta

    @property
    def inter_bursts(self):
        return self.inter_burst_steps * self.delta

    @property
    def is_empty(self):
        return len(self.burst_steps) == 0 and len(self.inter_burst_steps) == 0

    def durations(self, kind):
        """kind is 'T' or 'theta'."""
        if kind == "T":
            return self.bursts
        if kind == "theta":
            return self.inter_bursts
        raise ConfigurationError(f"Episode kind must be 'T' or 'theta', got '{kind}'")


def series_std(series):
    """Population standard deviation of the whole analyzed series."""
    values = np.asarray(series.values if hasattr(series, "values") else series, dtype=float)
    if len(values) < 2:
        raise SeriesSizeError("Series too short for a standard deviation", 2, len(values))
    if np.ptp(values) == 0:
        raise DegenerateSeriesError("Constant series has zero standard deviation; cannot place thresholds")
    return float(np.std(values))


def run_lengths(mask):
    """
    Run-length encoding of a boolean mask.
    Returns (lengths, kinds) where kinds[i] is the mask value of run i.
    """
    mask = np.asarray(mask, dtype=bool)
    if len(mask) == 0:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=bool)
    change = np.flatnonzero(mask[1:] != mask[:-1]) + 1
    starts = np.concatenate(([0], change))
    ends = np.concatenate((change, [len(mask)]))
    return (ends - starts).astype(np.int64), mask[starts]


def extract_episodes(series, spec):
    """
    Splits the series into maximal runs above (value > level) and not above
    the threshold. The first and last runs are censored by the series ends
    and are dropped.

    Example (level 1, δ = 1):
        values  0 | 2 2 | 0 | 2 | 0 0
        runs    - |  T  | θ | T |  -      -> bursts {2, 1}, inter-bursts {1}
    """
    n = len(series)
    if n < 2:
        raise SeriesSizeError("Series too short for episode extraction", 2, n)

    above = np.asarray(series.values) > spec.absolute_level
    lengths, kinds = run_lengths(above)
    n_crossings = max(len(lengths) - 1, 0)

    interior_lengths = lengths[1:-1]
    interior_kinds = kinds[1:-1]

    if n_crossings == 0:
        logger.debug(f"No threshold crossings at q={spec.q} (level {spec.absolute_level:.6g})")

    return EpisodeSet(
        q=spec.q,
        delta=series.delta,
        burst_steps=interior_lengths[interior_kinds],
        inter_burst_steps=interior_lengths[~interior_kinds],
        n_samples_analyzed=n,
        n_crossings=n_crossings,
    )


def merge_episode_sets(sets):
    """
    Multiset union of EpisodeSets with the same q and δ.
    Durations come back sorted, so the result does not depend on the order
    realizations finished in.
    """
    sets = list(sets)
    if not sets:
        raise ConfigurationError("Nothing to merge")
    q, delta = sets[0].q, sets[0].delta
    for es in sets[1:]:
        if es.q != q or not np.isclose(es.delta, delta, rtol=1e-12):
            raise ConfigurationError(f"Cannot merge episode sets with different q/δ ({es.q}, {es.delta}) vs ({q}, {delta})")

    return EpisodeSet(
        q=q,
        delta=delta,
        burst_steps=np.sort(np.concatenate([es.burst_steps for es in sets])),
        inter_burst_steps=np.sort(np.concatenate([es.inter_burst_steps for es in sets])),
        n_samples_analyzed=sum(es.n_samples_analyzed for es in sets),
        n_crossings=sum(es.n_crossings for es in sets),
    )


def episode_summary(es):
    """Count, mean, rms and total duration (days) for T and θ."""
    summary = {"q": es.q, "n_samples_analyzed": es.n_samples_analyzed, "n_crossings": es.n_crossings}
    for kind in ("T", "theta"):
        d = es.durations(kind)
        summary[f"{kind}_count"] = int(len(d))
        summary[f"{kind}_mean"] = float(np.mean(d)) if len(d) else 0.0
        summary[f"{kind}_rms"] = float(np.sqrt(np.mean(d ** 2))) if len(d) else 0.0
        summary[f"{kind}_total"] = float(np.sum(d))
    return summary
