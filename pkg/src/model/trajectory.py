import logging
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from src.core.errors import ConfigurationError

logger = logging.getLogger("consentaneous_sim")

TRAJECTORY_COLUMNS = ["t_days", "n_f", "xi", "y"]


@dataclass(frozen=True)
class Trajectory:
    """
    Model state sampled on a uniform grid of `grid_step` days.

    `source` is "agent" (n_f and ξ integrated, y derived) or "y-sde"
    (y integrated directly, n_f = 1/(1+y), no mood process: xi is 1).
    """
    grid_step: float
    n_f: np.ndarray
    xi: np.ndarray
    y: np.ndarray
    seed: int
    t0: float = 0.0
    source: str = "agent"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.grid_step > 0:
            raise ConfigurationError(f"grid_step must be > 0, got {self.grid_step}")
        n = len(self.y)
        if n < 1:
            raise ConfigurationError("Trajectory must hold at least one sample")
        if len(self.n_f) != n or len(self.xi) != n:
            raise ConfigurationError("Trajectory columns have different lengths")
        for name in ("n_f", "xi", "y"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ConfigurationError(f"Trajectory column '{name}' has non-finite values")

    def __len__(self):
        return len(self.y)

    @property
    def has_mood(self):
        return self.source == "agent"

    @property
    def times(self):
        return self.t0 + np.arange(len(self.y)) * self.grid_step

    def to_frame(self):
        return pd.DataFrame({
            "t_days": self.times,
            "n_f": self.n_f,
            "xi": self.xi,
            "y": self.y,
        }, columns=TRAJECTORY_COLUMNS)

    @classmethod
    def from_frame(cls, df, seed=0, source="agent"):
        """Rebuilds a Trajectory from a `t_days,n_f,xi,y` table."""
        missing = [c for c in TRAJECTORY_COLUMNS if c not in df.columns]
        if missing:
            raise ConfigurationError(f"Trajectory table is missing columns {missing}")
        t = df["t_days"].to_numpy(dtype=float)
        if len(t) < 2:
            raise ConfigurationError("Need at least two rows to recover the grid step")
        steps = np.diff(t)
        grid_step = float(np.median(steps))
        if not np.allclose(steps, grid_step, rtol=1e-6, atol=1e-12):
            raise ConfigurationError("Trajectory table is not on a uniform grid")
        return cls(
            grid_step=grid_step,
            n_f=df["n_f"].to_numpy(dtype=float),
            xi=df["xi"].to_numpy(dtype=float),
            y=df["y"].to_numpy(dtype=float),
            seed=int(seed),
            t0=float(t[0]),
            source=source,
        )

    @classmethod
    def read_csv(cls, path, seed=0, source="agent"):
        return cls.from_frame(pd.read_csv(path), seed=seed, source=source)
