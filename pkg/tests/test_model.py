import math

import numpy as np
import pytest
from scipy import integrate, stats

from src.core.errors import ConfigurationError, DomainError
from src.model import agent_sde
from src.model.agent_sde import integrate_agent_sde, reflect
from src.model.params import (
    AgentState, ModelParams, YProcessParams, agent_coefficients, agent_drift_diffusion, agent_y_cdf,
    days_to_scaled, herding_rate_per_day, nf_stationary_pdf, relaxation_time_days, scaled_to_days,
    stationarity_ks, tau, xi_stationary_pdf, y_drift_diffusion, y_stationary_law,
)
from src.model.trajectory import Trajectory
from src.model.y_sde import integrate_y_sde


# --- tau / drift / diffusion ---

@pytest.mark.parametrize("a_tau,alpha", [(0.7, 2.0), (3.0, 1.0), (0.0, 5.0)])
def test_tau_is_one_without_chartists(a_tau, alpha):
    assert tau(1.0, ModelParams(a_tau=a_tau, alpha=alpha)) == 1.0


def test_tau_direct_values(params):
    assert tau(0.5, params) == pytest.approx(1.0 / 1.7 ** 2, rel=1e-12)
    assert tau(1.0 / 3.0, params) == pytest.approx(1.0 / 2.4 ** 2, rel=1e-12)


@pytest.mark.parametrize("n_f", [0.0, -0.1, 1.5])
def test_tau_rejects_outside_domain(params, n_f):
    with pytest.raises(DomainError):
        tau(n_f, params)


def test_drift_roots(params):
    root = AgentState.at_drift_roots(params)
    assert root.n_f == pytest.approx(1.1 / 4.1)
    drift_nf, _, drift_xi, _ = agent_drift_diffusion(root, params)
    assert drift_nf == pytest.approx(0.0, abs=1e-12)
    assert drift_xi == 0.0


@pytest.mark.parametrize("xi", [1.0, -1.0])
def test_mood_diffusion_vanishes_at_boundary(params, xi):
    *_, diff_xi = agent_drift_diffusion(AgentState(n_f=0.4, xi=xi), params)
    assert diff_xi == 0.0


def test_agent_coefficients_match_formulas(params):
    state = AgentState(n_f=0.5, xi=0.3)
    drift_nf, diff_nf, drift_xi, diff_xi = agent_drift_diffusion(state, params)
    t = tau(0.5, params)
    assert drift_nf == pytest.approx((0.5 * 1.1 - 0.5 * 3.0) / t)
    assert diff_nf ** 2 == pytest.approx(2 * 0.25 / t)
    assert drift_xi == pytest.approx(-2 * 1000 * 3.0 * 0.3 / t)
    assert diff_xi ** 2 == pytest.approx(2 * 1000 * (1 - 0.09) / t)


def test_y_drift_diffusion_examples():
    p = YProcessParams()
    drift, diffusion = y_drift_diffusion(1.0, p)
    assert drift == pytest.approx(3.2)
    assert diffusion ** 2 == pytest.approx(128.0)

    drift, _ = y_drift_diffusion(1.1, p)
    assert drift == pytest.approx(0.0, abs=1e-9)
    assert p.fixed_point == pytest.approx(1.1)

    drift, _ = y_drift_diffusion(100.0, p)
    assert drift < 0


def test_y_drift_rejects_nonpositive_y():
    with pytest.raises(DomainError):
        y_drift_diffusion(0.0, YProcessParams())


def test_y_params_validation():
    with pytest.raises(ConfigurationError):
        YProcessParams(eps2=2.0)
    with pytest.raises(ConfigurationError):
        YProcessParams(y_min=2.0, y_max=1.0)


def test_y_params_from_model():
    p = YProcessParams.from_model(ModelParams(eps_cf=0.8, eps_fc=4.0, alpha=1.5))
    assert (p.eps1, p.eps2, p.alpha) == (0.8, 4.0, 1.5)


def test_model_params_validation():
    with pytest.raises(ConfigurationError):
        ModelParams(delta=0.0)
    with pytest.raises(ConfigurationError):
        ModelParams(a0=-1.0)
    with pytest.raises(ConfigurationError):
        ModelParams.from_dict({"eps_cf": 1.0, "bogus": 2.0})


def test_time_conversion(params):
    assert herding_rate_per_day(params) == pytest.approx(2.592e-4)
    assert scaled_to_days(days_to_scaled(123.0, params), params) == pytest.approx(123.0)


# --- stationary densities ---

def test_stationary_densities_are_normalized(params):
    nf_mass, _ = integrate.quad(lambda x: float(nf_stationary_pdf(x, params)), 0.0, 1.0, limit=200)
    xi_mass, _ = integrate.quad(lambda x: float(xi_stationary_pdf(x, params)), -1.0, 1.0)
    assert nf_mass == pytest.approx(1.0, rel=1e-6)
    assert xi_mass == pytest.approx(1.0, rel=1e-6)


def test_nf_density_is_beta_without_activity_feedback():
    params = ModelParams(a_tau=0.0)
    x = np.linspace(0.05, 0.95, 19)
    np.testing.assert_allclose(nf_stationary_pdf(x, params), stats.beta(1.1, 3.0).pdf(x), rtol=1e-6)


def test_densities_vanish_outside_support(params):
    assert np.all(nf_stationary_pdf(np.array([-0.5, 0.0, 1.0, 1.5]), params) == 0.0)
    assert np.all(xi_stationary_pdf(np.array([-1.0, 1.0, 2.0]), params) == 0.0)


# --- integrators ---

def test_reflect():
    assert reflect(-0.1, 0.0, 1.0) == pytest.approx(0.1)
    assert reflect(1.2, 0.0, 1.0) == pytest.approx(0.8)
    assert reflect(5.0, 0.0, 1.0) == 0.0
    assert reflect(0.5, 0.0, 1.0) == 0.5


def test_agent_sde_grid_and_shape(params):
    traj = integrate_agent_sde(params, total_days=2.0, seed=1)
    assert len(traj) == 780
    assert traj.grid_step == params.delta
    np.testing.assert_allclose(traj.y, (1 - traj.n_f) / traj.n_f)
    assert traj.times[1] == pytest.approx(params.delta)


def test_agent_sde_is_deterministic(params):
    a = integrate_agent_sde(params, total_days=2.0, seed=42)
    b = integrate_agent_sde(params, total_days=2.0, seed=42)
    c = integrate_agent_sde(params, total_days=2.0, seed=43)
    assert np.array_equal(a.n_f, b.n_f) and np.array_equal(a.xi, b.xi)
    assert not np.array_equal(a.xi, c.xi)


def test_agent_sde_deterministic_flow_reaches_drift_roots():
    params = ModelParams(h_cc=1.0)
    unit = scaled_to_days(1.0, params)
    traj = integrate_agent_sde(params, initial=AgentState(n_f=0.8, xi=0.5), total_days=20 * unit,
                               grid_step=unit, noise_scale=0.0)
    assert traj.n_f[-1] == pytest.approx(1.1 / 4.1, abs=1e-6)
    assert traj.xi[-1] == pytest.approx(0.0, abs=1e-6)


def test_agent_sde_stays_inside_bounds(params):
    n_min = xi_min = 1e-6
    traj = integrate_agent_sde(params, total_days=20.0, seed=5, burn_in=0.01)
    assert np.all((traj.n_f >= n_min) & (traj.n_f <= 1 - n_min))
    assert np.all((traj.xi >= -1 + xi_min) & (traj.xi <= 1 - xi_min))
    near_bound = (traj.n_f < 11 * n_min) | (traj.n_f > 1 - 11 * n_min) | (np.abs(traj.xi) > 1 - 11 * xi_min)
    assert near_bound.mean() < 0.01


@pytest.mark.parametrize("kwargs", [
    dict(total_days=0.0),
    dict(grid_step=-1.0),
    dict(kappa=0.0),
    dict(kappa=0.6),
    dict(burn_in=-1.0),
])
def test_agent_sde_rejects_bad_arguments(params, kwargs):
    with pytest.raises(ConfigurationError):
        integrate_agent_sde(params, **{"total_days": 1.0, **kwargs})


def test_agent_state_check():
    with pytest.raises(DomainError):
        AgentState(n_f=0.0, xi=0.0).check()
    with pytest.raises(DomainError):
        AgentState(n_f=0.5, xi=1.0).check()


@pytest.mark.slow
def test_agent_sde_matches_stationary_densities():
    # a_τ = 0 makes the n_f density exactly Beta(1.1, 3); one sample per scaled unit
    params = ModelParams(h_cc=1.0, a_tau=0.0)
    unit = scaled_to_days(1.0, params)
    traj = integrate_agent_sde(params, total_days=30000 * unit, grid_step=unit, seed=2024,
                               kappa=0.1, burn_in=10.0)
    ks = stationarity_ks(traj, params)
    assert ks["n_f"] < 0.02
    assert ks["xi"] < 0.02
    assert stats.kstest(traj.n_f, stats.beta(1.1, 3.0).cdf).statistic < 0.02


def test_y_sde_deterministic_relaxation_is_monotone():
    p = YProcessParams()
    params = ModelParams()
    unit = scaled_to_days(1.0, params)
    traj = integrate_y_sde(p, y0=5.0, total_days=20 * unit, grid_step=unit, noise_scale=0.0)
    assert np.all(np.diff(traj.y) <= 1e-12)
    assert traj.y[-1] == pytest.approx(1.1, abs=1e-6)


def test_y_sde_trajectory_has_no_mood():
    traj = integrate_y_sde(YProcessParams(), total_days=1.0, seed=3)
    assert traj.source == "y-sde" and not traj.has_mood
    assert np.all(traj.xi == 1.0)
    np.testing.assert_allclose(traj.n_f, 1.0 / (1.0 + traj.y))
    assert np.all((traj.y >= 1e-3) & (traj.y <= 1e3))


def test_y_sde_is_deterministic():
    a = integrate_y_sde(YProcessParams(), total_days=1.0, seed=9)
    b = integrate_y_sde(YProcessParams(), total_days=1.0, seed=9)
    assert np.array_equal(a.y, b.y)


def test_y_sde_rejects_start_outside_bounds():
    with pytest.raises(ConfigurationError):
        integrate_y_sde(YProcessParams(), y0=1e4)


# --- trajectory table ---

def test_trajectory_frame_round_trip(params, tmp_path):
    traj = integrate_agent_sde(params, total_days=1.0, seed=4)
    path = tmp_path / "trajectory.csv"
    traj.to_frame().to_csv(path, index=False, float_format=lambda x: repr(float(x)))
    back = Trajectory.read_csv(path, seed=4)
    assert back.grid_step == pytest.approx(traj.grid_step, rel=1e-9)
    assert np.array_equal(back.y, traj.y)
    assert math.isclose(back.t0, 0.0)


def test_trajectory_rejects_ragged_columns():
    with pytest.raises(ConfigurationError):
        Trajectory(grid_step=1.0, n_f=np.ones(3), xi=np.ones(2), y=np.ones(3), seed=0)


# --- shared coefficients and time scales ---

def test_agent_coefficients_carry_tau(params):
    tau_v, *coeffs = agent_coefficients(0.3, -0.2, params)
    assert tau_v == tau(0.3, params)
    assert tuple(coeffs) == agent_drift_diffusion(AgentState(n_f=0.3, xi=-0.2), params)


def test_integrator_steps_through_shared_coefficients(params, monkeypatch):
    calls = []

    def counting(n_f, xi, p):
        calls.append(n_f)
        return agent_coefficients(n_f, xi, p)

    monkeypatch.setattr(agent_sde, "agent_coefficients", counting)
    traj = integrate_agent_sde(params, total_days=0.5, seed=3)
    assert len(calls) == traj.meta["internal_steps"] > 0


def test_relaxation_time_at_rest(params):
    root = AgentState.at_drift_roots(params).n_f
    expected = tau(root, params) / 4.1 / 2.592e-4
    assert relaxation_time_days(root, params) == pytest.approx(expected)
    assert relaxation_time_days(root, params) == pytest.approx(111.2, rel=1e-3)
    # without the activity feedback the slow time scale is 1/((ε_cf+ε_fc)·h)
    assert relaxation_time_days(root, ModelParams(a_tau=0.0)) == pytest.approx(941.0, rel=1e-3)


def test_final_state_tracks_scaled_time(params):
    traj = integrate_agent_sde(params, total_days=2.0, seed=1, burn_in=1e-3)
    final = traj.meta["final_state"]
    assert traj.meta["t_scaled_first"] == pytest.approx(1e-3)
    assert final.t_scaled == pytest.approx(1e-3 + days_to_scaled(779 * params.delta, params))
    assert (final.n_f, final.xi) == (traj.n_f[-1], traj.xi[-1])

    more = integrate_agent_sde(params, initial=final, total_days=1.0, seed=2)
    assert more.n_f[0] == final.n_f
    assert more.meta["t_scaled_first"] == pytest.approx(final.t_scaled)
    assert scaled_to_days(more.meta["final_state"].t_scaled, params) == pytest.approx(
        scaled_to_days(1e-3, params) + 779 * params.delta + 389 * params.delta)


def test_y_sde_default_grid_is_delta():
    traj = integrate_y_sde(YProcessParams(), total_days=1.0, seed=3)
    assert traj.grid_step == ModelParams().delta
    assert len(traj) == 390


def test_y_stationary_law_has_zero_probability_flux():
    # Itô zero-flux condition: a·p = ½·d(b²p)/dy
    p = YProcessParams()
    law = y_stationary_law(p)
    for y in (0.3, 0.6, 4.0):
        drift, diffusion = y_drift_diffusion(y, p)
        h = 1e-5 * y
        d_b2p = ((y_drift_diffusion(y + h, p)[1] ** 2 * law.pdf(y + h))
                 - (y_drift_diffusion(y - h, p)[1] ** 2 * law.pdf(y - h))) / (2 * h)
        assert drift * law.pdf(y) == pytest.approx(0.5 * d_b2p, rel=1e-5)


# --- long-run oracles ---

@pytest.mark.slow
def test_agent_sde_matches_activity_weighted_density():
    params = ModelParams(h_cc=1.0)
    unit = scaled_to_days(1.0, params)
    traj = integrate_agent_sde(params, total_days=10000 * unit, grid_step=0.1 * unit, seed=77,
                               kappa=0.1, burn_in=10.0)
    ks = stationarity_ks(traj, params)
    assert ks["n_f"] < 0.02
    assert ks["xi"] < 0.02


@pytest.mark.slow
def test_halving_kappa_stays_within_noise_floor():
    params = ModelParams(h_cc=1.0, a_tau=0.0)
    unit = scaled_to_days(1.0, params)

    def distances(kappa):
        out = []
        for seed in range(4):
            traj = integrate_agent_sde(params, total_days=5000 * unit, grid_step=unit, seed=seed,
                                       kappa=kappa, burn_in=10.0)
            out.append(stationarity_ks(traj, params)["n_f"])
        return np.array(out)

    coarse, fine = distances(0.1), distances(0.05)
    noise = max(coarse.std(ddof=1), fine.std(ddof=1))
    assert abs(coarse.mean() - fine.mean()) < 3 * noise + 0.005


@pytest.mark.slow
def test_y_sde_matches_its_stationary_law():
    params = ModelParams()
    unit = scaled_to_days(1.0, params)
    traj = integrate_y_sde(YProcessParams.from_model(params), total_days=1000 * unit,
                           grid_step=0.01 * unit, seed=5, burn_in=1.0)
    assert stationarity_ks(traj, params)["y"] < 0.03


@pytest.mark.slow
def test_y_routes_differ_by_the_predicted_distance():
    # the standalone SDE stands for a symmetric activity law, so the two routes
    # only agree approximately; the sampled gap must match the exact one
    params = ModelParams(h_cc=1.0)
    unit = scaled_to_days(1.0, params)
    agent = integrate_agent_sde(params, total_days=1000 * unit, grid_step=0.01 * unit, seed=6,
                                burn_in=1.0)
    direct = integrate_y_sde(YProcessParams.from_model(params), total_days=1000 * unit,
                             grid_step=0.01 * unit, seed=6, burn_in=1.0)

    grid = np.logspace(-3, 3, 6001)
    exact = np.max(np.abs(agent_y_cdf(grid, params)
                          - y_stationary_law(YProcessParams.from_model(params)).cdf(grid)))
    sampled = stats.ks_2samp(agent.y, direct.y).statistic
    assert sampled == pytest.approx(exact, abs=0.04)
