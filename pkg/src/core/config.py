import os
import logging
from dataclasses import dataclass, field, fields, asdict, replace
from typing import Optional

import yaml

from src.analysis.episodes import CANONICAL_THRESHOLDS
from src.core.errors import ConfigurationError, PresetError
from src.model.params import ModelParams, DEFAULT_DELTA
from src.series.composition import CompositionSpec, DEFAULT_FILTER_WINDOW

logger = logging.getLogger("consentaneous_sim")

PROCESSES = ("agent", "y-sde")

DAYS_PER_YEAR = 365.0


@dataclass(frozen=True)
class ExperimentConfig:
    """
    Fully resolved experiment configuration.

    `apply_filter` None means "filter exactly when ω is on".
    `grid_step` None means the δ grid. `burn_in` is in scaled time units.
    Fit ranges are (low, high) in days (durations) or 1/day (spectra).
    """
    params: ModelParams = field(default_factory=ModelParams)
    composition: CompositionSpec = field(default_factory=CompositionSpec)
    total_days: float = 20 * DAYS_PER_YEAR
    grid_step: Optional[float] = None
    n_realizations: int = 50
    base_seed: int = 20170101
    thresholds: tuple = CANONICAL_THRESHOLDS
    filter_window: int = DEFAULT_FILTER_WINDOW
    apply_filter: Optional[bool] = None
    burn_in: float = 0.1
    kappa: float = 0.1
    process: str = "agent"
    duration_fit_range: tuple = (10 * DEFAULT_DELTA, 10.0)
    beta1_range: tuple = (1e-2, 1.0)
    beta2_range: tuple = (10.0, 100.0)
    cutoff_anchor_range: Optional[tuple] = None
    cutoff_tail_range: Optional[tuple] = None
    bins_per_decade: int = 10
    psd_segment_length: int = 1 << 18
    output_dir: str = "./data_output/experiment"
    workers: int = 1
    dump_series: bool = False
    plots: bool = False
    name: str = "custom"

    def __post_init__(self):
        if self.n_realizations < 1:
            raise ConfigurationError(f"n_realizations must be >= 1, got {self.n_realizations}")
        if not self.thresholds or any(q <= 0 for q in self.thresholds):
            raise ConfigurationError(f"thresholds must be non-empty and positive, got {list(self.thresholds)}")
        if self.total_days < 100 * self.params.delta:
            raise ConfigurationError(f"total_days must be >= 100·δ = {100 * self.params.delta:.6g}, got {self.total_days}")
        if self.grid_step is not None and not self.grid_step > 0:
            raise ConfigurationError(f"grid_step must be > 0, got {self.grid_step}")
        if self.filter_window < 2:
            raise ConfigurationError(f"filter_window must be >= 2, got {self.filter_window}")
        if self.burn_in < 0:
            raise ConfigurationError(f"burn_in must be >= 0, got {self.burn_in}")
        if not 0 < self.kappa <= 0.5:
            raise ConfigurationError(f"kappa must be in (0, 0.5], got {self.kappa}")
        if self.process not in PROCESSES:
            raise ConfigurationError(f"process must be one of {PROCESSES}, got '{self.process}'")
        if self.process == "y-sde" and self.composition.use_xi:
            raise ConfigurationError("The y-sde process has no mood factor; use_xi must be false")
        if self.workers < 1:
            raise ConfigurationError(f"workers must be >= 1, got {self.workers}")
        for name in ("duration_fit_range", "beta1_range", "beta2_range",
                     "cutoff_anchor_range", "cutoff_tail_range"):
            if getattr(self, name) is None:
                continue
            lo, hi = getattr(self, name)
            if not 0 < lo < hi:
                raise ConfigurationError(f"{name} must satisfy 0 < low < high, got ({lo}, {hi})")

    @property
    def filter_enabled(self):
        return self.composition.use_omega if self.apply_filter is None else self.apply_filter

    @property
    def resolved_grid_step(self):
        return self.params.delta if self.grid_step is None else self.grid_step

    def with_overrides(self, **overrides):
        """Copy with top-level fields replaced; None values are ignored."""
        overrides = {k: v for k, v in overrides.items() if v is not None}
        return replace(self, **overrides)

    def to_dict(self):
        data = asdict(self)
        for name in ("thresholds", "duration_fit_range", "beta1_range", "beta2_range",
                     "cutoff_anchor_range", "cutoff_tail_range"):
            if data[name] is not None:
                data[name] = list(data[name])
        return data

    @classmethod
    def from_dict(cls, data, base=None):
        """
        Builds a config from a (possibly partial) dict layered over `base`.
        A run manifest is accepted too: its `config` entry is used.
        """
        if "config" in data and isinstance(data["config"], dict):
            data = data["config"]
        base = base or cls()
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(f"Unknown configuration keys: {sorted(unknown)}")

        values = {}
        for key, value in data.items():
            if key == "params":
                merged = {**base.params.to_dict(), **(value or {})}
                values[key] = ModelParams.from_dict(merged)
            elif key == "composition":
                if isinstance(value, str):
                    values[key] = CompositionSpec.from_label(value)
                else:
                    merged = {**base.composition.to_dict(), **(value or {})}
                    values[key] = CompositionSpec.from_dict(merged)
            elif key == "thresholds":
                values[key] = tuple(float(q) for q in value)
            elif key in ("duration_fit_range", "beta1_range", "beta2_range",
                         "cutoff_anchor_range", "cutoff_tail_range"):
                values[key] = None if value is None else tuple(float(v) for v in value)
            elif key in ("n_realizations", "base_seed", "filter_window", "bins_per_decade",
                         "psd_segment_length", "workers"):
                values[key] = int(value)
            elif key in ("total_days", "burn_in", "kappa"):
                values[key] = float(value)
            elif key == "grid_step":
                values[key] = None if value is None else float(value)
            else:
                values[key] = value
        try:
            return replace(base, **values)
        except TypeError as e:
            raise ConfigurationError(f"Invalid configuration: {e}")


def load_config(config_path="config.yaml"):
    """Loads a YAML (or JSON) configuration document."""
    if not os.path.exists(config_path):
        raise FileNotFoundError(f"Config file not found at {config_path}")

    with open(config_path, "r") as f:
        try:
            data = yaml.safe_load(f) or {}
        except yaml.YAMLError as e:
            raise ConfigurationError(f"Cannot parse {config_path}: {e}")
    if not isinstance(data, dict):
        raise ConfigurationError(f"{config_path} must hold a key/value document")
    return data


def save_config(config, path):
    with open(path, "w", newline="\n") as f:
        yaml.safe_dump(config.to_dict(), f, sort_keys=True)


# --- PRESETS ---
# Model curves of the study figures. fig1/fig2 show T/θ of the full model;
# fig3/fig4 decompose the model without ω; fig5/fig6 with ω and the filter.
_NO_OMEGA = {
    "red": CompositionSpec(use_xi=False, use_seasonality=False, use_omega=False),
    "green": CompositionSpec(use_xi=True, use_seasonality=False, use_omega=False),
    "blue": CompositionSpec(use_xi=True, use_seasonality=True, use_omega=False),
}
_WITH_OMEGA = {
    "red": CompositionSpec(use_xi=False, use_seasonality=False, use_omega=True),
    "green": CompositionSpec(use_xi=True, use_seasonality=False, use_omega=True),
    "blue": CompositionSpec(use_xi=True, use_seasonality=True, use_omega=True),
}


def _preset_table():
    table = {
        "fig1:model": dict(composition=CompositionSpec(), apply_filter=True),
        "fig2:model": dict(composition=CompositionSpec(), apply_filter=True),
    }
    for fig in ("fig3", "fig4"):
        for curve, comp in _NO_OMEGA.items():
            table[f"{fig}:{curve}"] = dict(composition=comp, apply_filter=False)
    for fig in ("fig5", "fig6"):
        for curve, comp in _WITH_OMEGA.items():
            table[f"{fig}:{curve}"] = dict(composition=comp, apply_filter=True)

    # Aliases and the long-duration cutoff study (coarse grid, y only). n_f does
    # not depend on ξ, so h_cc = 1 there only lifts the ξ-driven step limit.
    table["full"] = dict(table["fig1:model"])
    table["y-only"] = dict(table["fig3:red"])
    table["y-cutoff"] = dict(table["fig3:red"], params=ModelParams(h_cc=1.0), grid_step=0.1,
                              total_days=1e5, n_realizations=30,
                              duration_fit_range=(1.0, 30.0), cutoff_anchor_range=(1.0, 30.0),
                              cutoff_tail_range=(10 ** 2.5, 10 ** 3.5))
    return table


PRESETS = _preset_table()


def preset(name):
    """Returns the ExperimentConfig of a named model curve, e.g. 'fig3:red'."""
    key = name.strip().lower()
    if key not in PRESETS:
        raise PresetError(name, sorted(PRESETS))
    return ExperimentConfig(name=key, output_dir=f"./data_output/{key.replace(':', '_')}", **PRESETS[key])
