import math
import logging

import numpy as np

from src.core.errors import ConfigurationError, IntegrationError
from src.core.seeding import make_rng, STREAM_TRAJECTORY
from src.model.agent_sde import NormalStream, reflect
from src.model.params import (
    DEFAULT_DELTA, DEFAULT_HERDING_RATE, SECONDS_PER_DAY, y_drift_diffusion, y_drift_slope,
)
from src.model.trajectory import Trajectory

logger = logging.getLogger("consentaneous_sim")


def y_step_size(y, drift, diffusion, slope, kappa):
    """
    Largest Δt_s with relative-change control:
        |drift|·Δt_s <= κ·y,  diffusion·√Δt_s <= κ·y,  |d drift/dy|·Δt_s <= κ
    The last bound keeps the deterministic relaxation monotone near y*.
    Returns math.inf when no bound applies (noise off at the fixed point).
    """
    dt = math.inf
    if drift != 0.0:
        dt = min(dt, kappa * y / abs(drift))
    if diffusion > 0.0:
        dt = min(dt, (kappa * y / diffusion) ** 2)
    if slope != 0.0:
        dt = min(dt, kappa / abs(slope))
    return dt


def integrate_y_sde(p, y0=None, total_days=1.0, grid_step=DEFAULT_DELTA, seed=0, kappa=0.1,
                    h=DEFAULT_HERDING_RATE, burn_in=0.0, noise_scale=1.0):
    """
    Adaptive Euler-Maruyama for the standalone y SDE, reflecting at y_min/y_max.

    Time runs in scaled units t_s = h·t with h in 1/s; the output grid is in
    days. Sampling works as in integrate_agent_sde. The returned trajectory has
    n_f = 1/(1+y) and no mood process (xi = 1).
    """
    y0 = p.fixed_point if y0 is None else y0

    # --- PART 1: VALIDATION ---
    if not p.y_min <= y0 <= p.y_max:
        raise ConfigurationError(f"y0={y0} outside [{p.y_min}, {p.y_max}]")
    if not total_days > 0:
        raise ConfigurationError(f"total_days must be > 0, got {total_days}")
    if not grid_step > 0:
        raise ConfigurationError(f"grid_step must be > 0, got {grid_step}")
    if not 0 < kappa <= 0.5:
        raise ConfigurationError(f"kappa must be in (0, 0.5], got {kappa}")
    if not h > 0:
        raise ConfigurationError(f"h must be > 0, got {h}")

    n_samples = int(math.floor(total_days / grid_step + 1e-9))
    if n_samples < 1:
        raise ConfigurationError(f"total_days={total_days} is shorter than one grid step {grid_step}")

    # --- PART 2: SETUP ---
    ds_grid = grid_step * h * SECONDS_PER_DAY
    normals = NormalStream(make_rng(seed, STREAM_TRAJECTORY))
    y_lo, y_hi = p.y_min, p.y_max
    y = float(y0)
    step_index = 0

    def advance(y, span, step_index):
        elapsed = 0.0
        while elapsed < span:
            drift, diffusion = y_drift_diffusion(y, p)
            diffusion *= noise_scale
            dt = y_step_size(y, drift, diffusion, y_drift_slope(y, p), kappa)
            remaining = span - elapsed
            if dt >= remaining:
                dt = remaining
                elapsed = span
            else:
                elapsed += dt

            y = y + drift * dt + diffusion * math.sqrt(dt) * normals.next()
            step_index += 1

            if not math.isfinite(y):
                raise IntegrationError("Non-finite y state", step_index)
            y = reflect(y, y_lo, y_hi)
        return y, step_index

    # --- PART 3: BURN-IN ---
    if burn_in > 0:
        y, step_index = advance(y, burn_in, step_index)

    # --- PART 4: SAMPLED RUN ---
    y_out = np.empty(n_samples)
    y_out[0] = y
    for k in range(1, n_samples):
        y, step_index = advance(y, ds_grid, step_index)
        y_out[k] = y

    logger.debug(f"y SDE: {n_samples} samples, {step_index} internal steps (seed {seed})")

    return Trajectory(
        grid_step=grid_step,
        n_f=1.0 / (1.0 + y_out),
        xi=np.ones(n_samples),
        y=y_out,
        seed=int(seed),
        source="y-sde",
        meta={"kappa": kappa, "burn_in": burn_in, "internal_steps": step_index},
    )
