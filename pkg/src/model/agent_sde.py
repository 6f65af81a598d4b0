import math
import logging

import numpy as np

from src.core.errors import ConfigurationError, IntegrationError
from src.core.seeding import make_rng, STREAM_TRAJECTORY
from src.model.params import AgentState, agent_coefficients, days_to_scaled
from src.model.trajectory import Trajectory

logger = logging.getLogger("consentaneous_sim")

# Normals are drawn from the generator in blocks of this many pairs
NORMAL_BLOCK = 8192


class NormalStream:
    """Hands out standard normals one at a time from block draws of a Generator."""

    def __init__(self, rng, block=NORMAL_BLOCK):
        self.rng = rng
        self.block = block
        self._buf = []
        self._pos = 0

    def next(self):
        if self._pos >= len(self._buf):
            # tolist() gives Python floats, much faster in the scalar loop
            self._buf = self.rng.standard_normal(self.block).tolist()
            self._pos = 0
        z = self._buf[self._pos]
        self._pos += 1
        return z


def reflect(x, lo, hi):
    """Reflects x back into [lo, hi]; clamps if a single reflection is not enough."""
    if x < lo:
        x = 2.0 * lo - x
    elif x > hi:
        x = 2.0 * hi - x
    if x < lo:
        return lo
    if x > hi:
        return hi
    return x


def integrate_agent_sde(params, initial=None, total_days=1.0, grid_step=None, seed=0,
                        kappa=0.1, n_min=1e-6, xi_min=1e-6, burn_in=0.0, noise_scale=1.0):
    """
    Euler-Maruyama integration of the n_f and ξ SDEs in scaled time t_s = h·t.

    Internal step:
        Δs = κ²·τ(n_f) / max(1, h_cc)
    Both coefficients carry 1/τ and the ξ equation runs h_cc times faster, so
    every per-step increment stays O(κ). Steps are clipped to land exactly on
    each output grid time and the sample is the state at that time.

    Args:
        params: ModelParams
        initial: AgentState (default: drift roots n_f = ε_cf/(ε_cf+ε_fc), ξ = 0)
        total_days: length of the sampled run, days
        grid_step: output grid spacing, days (default params.delta)
        seed: 64-bit realization seed
        kappa: step control in (0, 0.5]
        n_min, xi_min: reflecting margins of the state space
        burn_in: scaled time integrated and discarded before the first sample
        noise_scale: multiplies both diffusions; 0 gives the deterministic flow

    Returns:
        Trajectory with floor(total_days/grid_step) samples at t = k·grid_step.
        meta["final_state"] is the AgentState at the last sample with t_scaled
        counted from initial.t_scaled, so it can seed a continuation run.
    """
    grid_step = params.delta if grid_step is None else grid_step

    # --- PART 1: VALIDATION ---
    if not total_days > 0:
        raise ConfigurationError(f"total_days must be > 0, got {total_days}")
    if not grid_step > 0:
        raise ConfigurationError(f"grid_step must be > 0, got {grid_step}")
    if not 0 < kappa <= 0.5:
        raise ConfigurationError(f"kappa must be in (0, 0.5], got {kappa}")
    if not burn_in >= 0:
        raise ConfigurationError(f"burn_in must be >= 0, got {burn_in}")

    n_samples = int(math.floor(total_days / grid_step + 1e-9))
    if n_samples < 1:
        raise ConfigurationError(f"total_days={total_days} is shorter than one grid step {grid_step}")

    state = (initial or AgentState.at_drift_roots(params)).check(n_min, xi_min)

    # --- PART 2: SETUP ---
    ds_grid = days_to_scaled(grid_step, params)
    step_scale = kappa * kappa / max(1.0, params.h_cc)
    normals = NormalStream(make_rng(seed, STREAM_TRAJECTORY))

    n_lo, n_hi = n_min, 1.0 - n_min
    xi_lo, xi_hi = -1.0 + xi_min, 1.0 - xi_min

    n_f, xi = state.n_f, state.xi
    step_index = 0

    def advance(n_f, xi, span, step_index):
        """Integrates over `span` scaled time units, landing exactly on its end."""
        elapsed = 0.0
        while elapsed < span:
            tau_v, drift_nf, diff_nf, drift_xi, diff_xi = agent_coefficients(n_f, xi, params)
            ds = step_scale * tau_v
            remaining = span - elapsed
            if ds >= remaining:
                ds = remaining
                elapsed = span
            else:
                elapsed += ds
            sq = math.sqrt(ds)

            z_n = normals.next()
            z_xi = normals.next()

            n_f = n_f + drift_nf * ds + noise_scale * diff_nf * sq * z_n
            xi = xi + drift_xi * ds + noise_scale * diff_xi * sq * z_xi
            step_index += 1

            if not (math.isfinite(n_f) and math.isfinite(xi)):
                raise IntegrationError("Non-finite agent state", step_index)

            n_f = reflect(n_f, n_lo, n_hi)
            xi = reflect(xi, xi_lo, xi_hi)
        return n_f, xi, step_index

    # --- PART 3: BURN-IN ---
    if burn_in > 0:
        n_f, xi, step_index = advance(n_f, xi, burn_in, step_index)
        logger.debug(f"Agent SDE burn-in done after {step_index} steps (seed {seed})")
    t_first = state.t_scaled + burn_in

    # --- PART 4: SAMPLED RUN ---
    n_out = np.empty(n_samples)
    xi_out = np.empty(n_samples)
    n_out[0], xi_out[0] = n_f, xi
    for k in range(1, n_samples):
        n_f, xi, step_index = advance(n_f, xi, ds_grid, step_index)
        n_out[k] = n_f
        xi_out[k] = xi

    final = AgentState(n_f=n_f, xi=xi, t_scaled=t_first + (n_samples - 1) * ds_grid)
    logger.debug(f"Agent SDE: {n_samples} samples, {step_index} internal steps, "
                 f"t_s {t_first:.6g} -> {final.t_scaled:.6g} (seed {seed})")

    return Trajectory(
        grid_step=grid_step,
        n_f=n_out,
        xi=xi_out,
        y=(1.0 - n_out) / n_out,
        seed=int(seed),
        source="agent",
        meta={"kappa": kappa, "burn_in": burn_in, "internal_steps": step_index,
              "t_scaled_first": t_first, "final_state": final},
    )
