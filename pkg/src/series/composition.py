import math
import logging
from dataclasses import dataclass, field, asdict
from typing import Optional

import numpy as np
import pandas as pd
from numpy.lib.stride_tricks import sliding_window_view

from src.core.errors import ConfigurationError, SeriesSizeError
from src.core.seeding import make_rng, STREAM_OMEGA, STREAM_WIENER

logger = logging.getLogger("consentaneous_sim")

# Standard deviation filter window (10 x δ)
DEFAULT_FILTER_WINDOW = 10

# Rows per chunk when filtering, bounds the window-view temporaries
FILTER_CHUNK = 1 << 20


@dataclass(frozen=True)
class CompositionSpec:
    """
    Which model components enter the return series.

    -----------------------------------------------------------
    | xi | b0 | ω | series                                    |
    |----|----|---|-------------------------------------------|
    | F  | F  | F | r = y                                     |
    | T  | F  | F | r = |yξ|                                  |
    | T  | T  | F | r = b₀(1 + a₀|yξ|)                        |
    | F  | F  | T | r = (1 + a₀y)·ω                           |
    | T  | F  | T | r = (1 + a₀|yξ|)·ω                        |
    | T  | T  | T | r = b₀(1 + a₀|yξ|)·ω   (full model)       |
    -----------------------------------------------------------
    """
    use_xi: bool = True
    use_seasonality: bool = True
    use_omega: bool = True

    @property
    def label(self):
        return "".join("T" if flag else "F" for flag in (self.use_xi, self.use_seasonality, self.use_omega))

    @classmethod
    def from_label(cls, label):
        """'TTF' -> CompositionSpec(True, True, False)."""
        label = label.strip().upper()
        if len(label) != 3 or set(label) - {"T", "F"}:
            raise ConfigurationError(f"Composition label must be three T/F letters, got '{label}'")
        return cls(*(c == "T" for c in label))

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        unknown = set(data) - {"use_xi", "use_seasonality", "use_omega"}
        if unknown:
            raise ConfigurationError(f"Unknown composition flags: {sorted(unknown)}")
        return cls(**{k: bool(v) for k, v in data.items()})


@dataclass(frozen=True)
class ReturnSeries:
    """
    Uniformly sampled series, time in days.

    `composition` is None for reference series that do not come from the
    model (the Wiener oracle). `filter_window` is set once the standard
    deviation filter has been applied.
    """
    delta: float
    values: np.ndarray
    composition: Optional[CompositionSpec]
    seed: int
    t0: float = 0.0
    filter_window: Optional[int] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.delta > 0:
            raise ConfigurationError(f"Series step must be > 0, got {self.delta}")
        if not np.all(np.isfinite(self.values)):
            raise ConfigurationError("Return series has non-finite values")

    def __len__(self):
        return len(self.values)

    @property
    def times(self):
        return self.t0 + np.arange(len(self.values)) * self.delta

    def to_frame(self):
        return pd.DataFrame({"t_days": self.times, "r": self.values}, columns=["t_days", "r"])

    @classmethod
    def read_csv(cls, path, seed=0, composition=None):
        df = pd.read_csv(path)
        if list(df.columns[:2]) != ["t_days", "r"]:
            raise ConfigurationError(f"{path}: expected columns t_days,r")
        t = df["t_days"].to_numpy(dtype=float)
        if len(t) < 2:
            raise ConfigurationError(f"{path}: need at least two rows")
        steps = np.diff(t)
        delta = float(np.median(steps))
        if not np.allclose(steps, delta, rtol=1e-6, atol=1e-12):
            raise ConfigurationError(f"{path}: t_days is not on a uniform grid")
        return cls(delta=delta, values=df["r"].to_numpy(dtype=float),
                   composition=composition, seed=int(seed), t0=float(t[0]))


def seasonality(t, w):
    """Intraday pattern b₀(t) = exp(-({t mod 1} - 0.5)²/w²) + 0.5, range (0.5, 1.5]."""
    frac = np.mod(t, 1.0)
    b0 = np.exp(-((frac - 0.5) ** 2) / (w * w)) + 0.5
    return float(b0) if np.ndim(b0) == 0 else b0


def volatility(t, y, xi, params, comp):
    """
    Endogenous volatility σ = b̂₀(t)·(1 + a₀|y·ξ̂|), with b̂₀ = 1 when seasonality
    is off and ξ̂ = 1 when the mood factor is off. Works on scalars and arrays.
    """
    xi_hat = xi if comp.use_xi else 1.0
    b0_hat = seasonality(t, params.w) if comp.use_seasonality else 1.0
    sigma = b0_hat * (1.0 + params.a0 * np.abs(np.multiply(y, xi_hat)))
    return float(sigma) if np.ndim(sigma) == 0 else sigma


def _resample_factor(grid_step, delta):
    """Integer m with grid_step·m == delta, or None."""
    ratio = delta / grid_step
    m = int(round(ratio))
    if m >= 1 and math.isclose(ratio, m, rel_tol=1e-9):
        return m
    return None


def generate_returns(traj, params, comp, seed=None):
    """
    Composes the return series from a trajectory.

    ω-free compositions give the magnitude series (y, |yξ| or b₀(1 + a₀|yξ|)).
    With ω on, the series is σ(t)·ω(t), ω i.i.d. N(0,1) per sample from a
    stream independent of the trajectory's.

    Grid: the trajectory step must divide δ; finer trajectories are sampled
    every δ. ω-free compositions may also run on a coarser grid of their own.
    """
    seed = traj.seed if seed is None else seed

    if comp.use_xi and not traj.has_mood:
        raise ConfigurationError(f"Composition {comp.label} needs ξ, but the trajectory comes from '{traj.source}'")

    m = _resample_factor(traj.grid_step, params.delta)
    if m is not None:
        step = params.delta
        idx = slice(None, None, m)
    elif comp.use_omega:
        raise ConfigurationError(
            f"Trajectory grid step {traj.grid_step} does not divide δ={params.delta}; "
            f"ω compositions need the δ grid")
    else:
        step = traj.grid_step
        idx = slice(None)

    y = traj.y[idx]
    xi = traj.xi[idx]
    t = traj.t0 + np.arange(len(y)) * step

    xi_hat = xi if comp.use_xi else 1.0

    if comp.use_omega:
        sigma = volatility(t, y, xi, params, comp)
        omega = make_rng(seed, STREAM_OMEGA).standard_normal(len(y))
        values = sigma * omega
    elif comp.use_seasonality:
        values = seasonality(t, params.w) * (1.0 + params.a0 * np.abs(y * xi_hat))
    else:
        values = np.abs(y * xi_hat)

    logger.debug(f"Composed {comp.label} series: {len(values)} samples, step {step:.6g} d")

    return ReturnSeries(delta=step, values=np.asarray(values, dtype=float), composition=comp,
                        seed=int(seed), t0=traj.t0)


def rolling_std_filter(series, window=DEFAULT_FILTER_WINDOW):
    """
    Standard deviation filter: output[i] is the population std of the
    trailing `window` raw samples ending at i + window - 1.
    Output has len - window + 1 samples and starts (window-1)·δ later.
    """
    if window < 2:
        raise ConfigurationError(f"Filter window must be >= 2, got {window}")
    n = len(series)
    if n < window:
        raise SeriesSizeError("Series shorter than the filter window", window, n)

    views = sliding_window_view(series.values, window)
    out = np.empty(len(views))
    for start in range(0, len(views), FILTER_CHUNK):
        out[start:start + FILTER_CHUNK] = views[start:start + FILTER_CHUNK].std(axis=1)

    return ReturnSeries(
        delta=series.delta,
        values=out,
        composition=series.composition,
        seed=series.seed,
        t0=series.t0 + (window - 1) * series.delta,
        filter_window=window,
        meta=dict(series.meta),
    )


def wiener_series(n, delta, seed, sigma=1.0):
    """Discretized Brownian motion W(kδ) with W(0) = 0, the first-passage reference signal."""
    if n < 2:
        raise SeriesSizeError("Wiener series too short", 2, n)
    steps = make_rng(seed, STREAM_WIENER).standard_normal(n - 1) * sigma * math.sqrt(delta)
    values = np.concatenate(([0.0], np.cumsum(steps)))
    return ReturnSeries(delta=delta, values=values, composition=None, seed=int(seed),
                        meta={"source": "wiener"})
