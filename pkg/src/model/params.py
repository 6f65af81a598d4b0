import math
import logging
from dataclasses import dataclass, asdict, fields

import numpy as np
from scipy import integrate, stats

from src.core.errors import ConfigurationError, DomainError

logger = logging.getLogger("consentaneous_sim")

# --- CONSTANTS ---
SECONDS_PER_DAY = 86400.0

# Return time step of the FOREX series: 1/390 day (~221 s)
DEFAULT_DELTA = 1.0 / 390.0

# Herding rate h, per second
DEFAULT_HERDING_RATE = 0.3e-8


@dataclass(frozen=True)
class ModelParams:
    """
    Parameters of the consentaneous model. Defaults are the canonical set.

    ---------------------------------------------------------------
    | Field  | Symbol | Unit       | Meaning                       |
    |--------|--------|------------|-------------------------------|
    | eps_cf | ε_cf   | -          | chartist -> fundamentalist    |
    | eps_fc | ε_fc   | -          | fundamentalist -> chartist    |
    | eps_cc | ε_cc   | -          | optimist <-> pessimist        |
    | h_cc   | h_cc   | -          | speed of ξ relative to n_f    |
    | a0     | a₀     | -          | agent impact on volatility    |
    | a_tau  | a_τ    | -          | trading activity amplitude    |
    | alpha  | α      | -          | activity exponent             |
    | h      | h      | 1/s        | herding rate (slow time scale)|
    | w      | w      | day        | intraday pattern width        |
    | delta  | δ      | day        | return time step              |
    ---------------------------------------------------------------
    """
    eps_cf: float = 1.1
    eps_fc: float = 3.0
    eps_cc: float = 3.0
    h_cc: float = 1000.0
    a0: float = 1.0
    a_tau: float = 0.7
    alpha: float = 2.0
    h: float = DEFAULT_HERDING_RATE
    w: float = 0.25
    delta: float = DEFAULT_DELTA

    def __post_init__(self):
        for name in ("eps_cf", "eps_fc", "eps_cc", "h_cc", "h", "delta", "w"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise ConfigurationError(f"ModelParams.{name} must be > 0, got {value}")
        for name in ("alpha", "a0", "a_tau"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise ConfigurationError(f"ModelParams.{name} must be >= 0, got {value}")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(f"Unknown model parameters: {sorted(unknown)}")
        return cls(**{k: float(v) for k, v in data.items()})


@dataclass(frozen=True)
class AgentState:
    """Fraction of fundamentalists, chartist mood and elapsed scaled time."""
    n_f: float
    xi: float
    t_scaled: float = 0.0

    def check(self, n_min=1e-6, xi_min=1e-6):
        if not (n_min <= self.n_f <= 1.0 - n_min):
            raise DomainError(f"n_f={self.n_f} outside [{n_min}, {1.0 - n_min}]")
        if not (-1.0 + xi_min <= self.xi <= 1.0 - xi_min):
            raise DomainError(f"xi={self.xi} outside [{-1.0 + xi_min}, {1.0 - xi_min}]")
        return self

    @classmethod
    def at_drift_roots(cls, params):
        """Starting point n_f = ε_cf/(ε_cf+ε_fc), ξ = 0."""
        return cls(n_f=params.eps_cf / (params.eps_cf + params.eps_fc), xi=0.0)


@dataclass(frozen=True)
class YProcessParams:
    """Parameters of the standalone nonlinear SDE for y = (1-n_f)/n_f."""
    eps1: float = 1.1
    eps2: float = 3.0
    alpha: float = 2.0
    y_min: float = 1e-3
    y_max: float = 1e3

    def __post_init__(self):
        if not self.eps1 > 0:
            raise ConfigurationError(f"YProcessParams.eps1 must be > 0, got {self.eps1}")
        # eps2 > 2 gives the drift a finite root
        if not self.eps2 > 2:
            raise ConfigurationError(f"YProcessParams.eps2 must be > 2, got {self.eps2}")
        if not self.alpha >= 0:
            raise ConfigurationError(f"YProcessParams.alpha must be >= 0, got {self.alpha}")
        if not (0 < self.y_min < self.y_max):
            raise ConfigurationError(f"Need 0 < y_min < y_max, got {self.y_min}, {self.y_max}")

    @property
    def fixed_point(self):
        return self.eps1 / (self.eps2 - 2.0)

    @classmethod
    def from_model(cls, params, y_min=1e-3, y_max=1e3):
        """Binds ε₁ = ε_cf, ε₂ = ε_fc and α from the agent model."""
        return cls(eps1=params.eps_cf, eps2=params.eps_fc, alpha=params.alpha,
                   y_min=y_min, y_max=y_max)

    def to_dict(self):
        return asdict(self)


# --- TIME CONVERSION ---

def herding_rate_per_day(params):
    """h converted from 1/s to 1/day (0.3e-8 -> 2.592e-4)."""
    return params.h * SECONDS_PER_DAY


def days_to_scaled(days, params):
    return days * herding_rate_per_day(params)


def scaled_to_days(t_scaled, params):
    return t_scaled / herding_rate_per_day(params)


# --- AGENT DYNAMICS ---

def tau(n_f, params):
    """
    Inter-trade time τ(n_f) = (1 + a_τ·(1-n_f)/n_f)^(-α).
    Lies in (0, 1]; equals 1 when there are no chartists.
    """
    if not (0.0 < n_f <= 1.0):
        raise DomainError(f"tau() needs 0 < n_f <= 1, got {n_f}")
    y = (1.0 - n_f) / n_f
    return (1.0 + params.a_tau * y) ** (-params.alpha)


def agent_coefficients(n_f, xi, params):
    """
    Scalar coefficients of the n_f and ξ SDEs at (n_f, ξ).

    Returns (tau, drift_nf, diff_nf, drift_xi, diff_xi). The integrator calls
    this once per step; tau is handed back because it also sets the step size.
    """
    tau_v = tau(n_f, params)
    inv_tau = 1.0 / tau_v

    drift_nf = ((1.0 - n_f) * params.eps_cf - n_f * params.eps_fc) * inv_tau
    diff_nf = math.sqrt(max(2.0 * n_f * (1.0 - n_f) * inv_tau, 0.0))
    drift_xi = -2.0 * params.h_cc * params.eps_cc * xi * inv_tau
    diff_xi = math.sqrt(max(2.0 * params.h_cc * (1.0 - xi * xi) * inv_tau, 0.0))
    return tau_v, drift_nf, diff_nf, drift_xi, diff_xi


def agent_drift_diffusion(state, params):
    """
    Drift and diffusion coefficients of the n_f and ξ SDEs.

    Returns (drift_nf, diff_nf, drift_xi, diff_xi). Diffusions are the
    square roots of the variance rates, so they can be used directly as
    the dW multipliers.
    """
    return agent_coefficients(state.n_f, state.xi, params)[1:]


def relaxation_time_days(n_f, params):
    """
    Linear relaxation time of n_f around the level n_f, in days:
    τ(n_f) / ((ε_cf + ε_fc)·h). Bursts of y much longer than this are
    exponentially rare.
    """
    return scaled_to_days(tau(n_f, params) / (params.eps_cf + params.eps_fc), params)


def y_drift_diffusion(y, p):
    """Drift and diffusion of dy = (ε₁y^-α + (2-ε₂)y^(1-α))(y+1)^(2α+1) dt + √(2y^(1-α))(y+1)^(α+1) dW."""
    if not y > 0:
        raise DomainError(f"y_drift_diffusion() needs y > 0, got {y}")
    a = p.alpha
    drift = (p.eps1 * y ** (-a) + (2.0 - p.eps2) * y ** (1.0 - a)) * (y + 1.0) ** (2.0 * a + 1.0)
    diffusion = math.sqrt(2.0 * y ** (1.0 - a)) * (y + 1.0) ** (a + 1.0)
    return drift, diffusion


def y_drift_slope(y, p):
    """d(drift)/dy, the local relaxation rate used for step control."""
    a = p.alpha
    g = p.eps1 * y ** (-a) + (2.0 - p.eps2) * y ** (1.0 - a)
    dg = -a * p.eps1 * y ** (-a - 1.0) + (2.0 - p.eps2) * (1.0 - a) * y ** (-a)
    u = (y + 1.0) ** (2.0 * a + 1.0)
    du = (2.0 * a + 1.0) * (y + 1.0) ** (2.0 * a)
    return dg * u + g * du


# --- STATIONARY DENSITIES ---
# Zero-flux Fokker-Planck solutions (Itô), normalized by quadrature.

def _nf_kernel(n_f, params):
    n_f = np.asarray(n_f, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        tau_v = (1.0 + params.a_tau * (1.0 - n_f) / n_f) ** (-params.alpha)
        k = tau_v * n_f ** (params.eps_cf - 1.0) * (1.0 - n_f) ** (params.eps_fc - 1.0)
    return np.where((n_f > 0) & (n_f < 1), k, 0.0)


def _xi_kernel(xi, params):
    xi = np.asarray(xi, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        k = (1.0 - xi * xi) ** (params.eps_cc - 1.0)
    return np.where(np.abs(xi) < 1, k, 0.0)


def nf_stationary_pdf(n_f, params):
    """p(n_f) ∝ τ(n_f)·n_f^(ε_cf-1)·(1-n_f)^(ε_fc-1)."""
    norm, _ = integrate.quad(lambda x: float(_nf_kernel(x, params)), 0.0, 1.0, limit=200)
    return _nf_kernel(n_f, params) / norm


def xi_stationary_pdf(xi, params):
    """p(ξ) ∝ (1-ξ²)^(ε_cc-1); τ(n_f) cancels."""
    norm, _ = integrate.quad(lambda x: float(_xi_kernel(x, params)), -1.0, 1.0, limit=200)
    return _xi_kernel(xi, params) / norm


def y_stationary_law(p):
    """
    Stationary law of the standalone y SDE as a frozen scipy distribution:
    p(y) ∝ y^(ε₁+α-1)·(1+y)^(-ε₁-ε₂-2α), i.e. beta-prime(ε₁+α, ε₂+α).
    The reflecting bounds cut off a negligible mass and are ignored.
    """
    return stats.betaprime(p.eps1 + p.alpha, p.eps2 + p.alpha)


def agent_y_cdf(y, params):
    """CDF of y = (1-n_f)/n_f under the stationary n_f density of the agent SDE."""
    nf_cdf = stationary_cdf(lambda x: nf_stationary_pdf(x, params), 0.0, 1.0)
    return 1.0 - nf_cdf(1.0 / (1.0 + np.asarray(y, dtype=float)))


def stationary_cdf(pdf, lower, upper, n_points=20001):
    """
    Tabulates the CDF of `pdf` on [lower, upper] and returns it as a callable
    (linear interpolation), suitable for scipy.stats.kstest.
    """
    grid = np.linspace(lower, upper, n_points)
    cdf = integrate.cumulative_trapezoid(pdf(grid), grid, initial=0.0)
    cdf /= cdf[-1]
    return lambda x: np.interp(x, grid, cdf)


def stationarity_ks(traj, params):
    """
    KS distances of a trajectory against its stationary densities: n_f and ξ
    for the agent route, y for the standalone y SDE.
    Samples are autocorrelated, so only the distance is meaningful, not a p-value.
    """
    if not traj.has_mood:
        law = y_stationary_law(YProcessParams.from_model(params))
        return {"y": float(stats.kstest(traj.y, law.cdf).statistic)}

    nf_cdf = stationary_cdf(lambda x: nf_stationary_pdf(x, params), 0.0, 1.0)
    xi_cdf = stationary_cdf(lambda x: xi_stationary_pdf(x, params), -1.0, 1.0)
    return {
        "n_f": float(stats.kstest(traj.n_f, nf_cdf).statistic),
        "xi": float(stats.kstest(traj.xi, xi_cdf).statistic),
        # equals the n_f distance (monotone map); kept so both routes report y
        "y": float(stats.kstest(traj.y, lambda v: agent_y_cdf(v, params)).statistic),
    }
