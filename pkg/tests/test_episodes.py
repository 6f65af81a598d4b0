import math

import numpy as np
import pytest

from src.analysis.episodes import (
    ThresholdSpec, episode_summary, extract_episodes, merge_episode_sets, run_lengths, series_std,
)
from src.analysis.stats import fit_powerlaw, log_binned_pdf
from src.core.errors import ConfigurationError, DegenerateSeriesError, SeriesSizeError
from src.series.composition import wiener_series
from tests.conftest import make_series


def test_hand_enumerated_episodes():
    series = make_series([0, 2, 2, 0, 2, 0, 0])
    es = extract_episodes(series, ThresholdSpec(q=1.0, absolute_level=1.0))
    assert sorted(es.bursts.tolist()) == [1.0, 2.0]
    assert es.inter_bursts.tolist() == [1.0]
    assert es.n_crossings == 4
    assert es.n_samples_analyzed == 7


def test_durations_are_multiples_of_delta():
    series = make_series([0, 2, 2, 0, 2, 0, 0], delta=0.25)
    es = extract_episodes(series, ThresholdSpec(q=1.0, absolute_level=1.0))
    assert sorted(es.durations("T").tolist()) == [0.25, 0.5]
    with pytest.raises(ConfigurationError):
        es.durations("X")


def test_ties_count_as_below():
    series = make_series([0, 1, 2, 1, 0])
    es = extract_episodes(series, ThresholdSpec(q=1.0, absolute_level=1.0))
    assert es.burst_steps.tolist() == [1]
    assert es.n_crossings == 2


def test_level_above_maximum_gives_empty_set():
    series = make_series([0.1, 0.5, 0.2, 0.9])
    es = extract_episodes(series, ThresholdSpec(q=5.0, absolute_level=10.0))
    assert es.is_empty
    assert es.n_crossings == 0


def test_series_std_examples():
    assert series_std(make_series(np.tile([1.0, -1.0], 10))) == pytest.approx(1.0)
    assert series_std(make_series([0, 0, 0, 4])) == pytest.approx(math.sqrt(3.0))
    with pytest.raises(DegenerateSeriesError):
        series_std(make_series(np.full(10, 3.0)))
    with pytest.raises(SeriesSizeError):
        series_std(make_series([1.0]))


def test_threshold_resolution():
    series = make_series([0, 0, 0, 4])
    spec = ThresholdSpec.resolve(2.0, series)
    assert spec.absolute_level == pytest.approx(2 * math.sqrt(3.0))
    with pytest.raises(ConfigurationError):
        ThresholdSpec.resolve(0.0, series)


def test_run_lengths():
    lengths, kinds = run_lengths([True, True, False, True, False, False])
    assert lengths.tolist() == [2, 1, 1, 2]
    assert kinds.tolist() == [True, False, True, False]
    assert len(run_lengths([])[0]) == 0


def test_episodes_are_scale_invariant():
    values = np.abs(np.random.default_rng(1).normal(size=5000))
    for q in (0.5, 2.0):
        a = extract_episodes(make_series(values), ThresholdSpec.resolve(q, make_series(values)))
        scaled = make_series(values * 37.5)
        b = extract_episodes(scaled, ThresholdSpec.resolve(q, scaled))
        assert np.array_equal(a.burst_steps, b.burst_steps)
        assert np.array_equal(a.inter_burst_steps, b.inter_burst_steps)


def test_episodes_alternate_and_cover_the_interior():
    values = np.random.default_rng(2).normal(size=3000).cumsum()
    series = make_series(values)
    spec = ThresholdSpec.resolve(0.3, series)
    above = values > spec.absolute_level
    lengths, kinds = run_lengths(above)
    es = extract_episodes(series, spec)

    interior = lengths[1:-1]
    assert es.burst_steps.sum() + es.inter_burst_steps.sum() == interior.sum()
    # interior runs alternate, so burst and inter-burst counts differ by at most one
    assert abs(len(es.burst_steps) - len(es.inter_burst_steps)) <= 1
    rebuilt = np.concatenate([np.full(n, k) for n, k in zip(interior, kinds[1:-1])])
    assert np.array_equal(rebuilt, above[lengths[0]:len(above) - lengths[-1]])


def test_time_above_is_non_increasing_in_q():
    series = make_series(np.abs(np.random.default_rng(3).normal(size=20000)))
    totals = [episode_summary(extract_episodes(series, ThresholdSpec.resolve(q, series)))["T_total"]
              for q in (0.3, 0.5, 0.8, 1.3, 2.0, 3.0)]
    assert all(a >= b for a, b in zip(totals, totals[1:]))


def test_merge_is_order_independent():
    sets = []
    for seed in range(4):
        s = make_series(np.random.default_rng(seed).normal(size=2000))
        sets.append(extract_episodes(s, ThresholdSpec.resolve(0.5, s)))
    forward = merge_episode_sets(sets)
    backward = merge_episode_sets(reversed(sets))
    assert np.array_equal(forward.burst_steps, backward.burst_steps)
    assert np.array_equal(forward.inter_burst_steps, backward.inter_burst_steps)
    assert forward.n_samples_analyzed == 8000
    assert len(forward.burst_steps) == sum(len(es.burst_steps) for es in sets)


def test_merge_rejects_mixed_thresholds():
    s = make_series(np.random.default_rng(0).normal(size=500))
    a = extract_episodes(s, ThresholdSpec.resolve(0.5, s))
    b = extract_episodes(s, ThresholdSpec.resolve(1.3, s))
    with pytest.raises(ConfigurationError):
        merge_episode_sets([a, b])
    with pytest.raises(ConfigurationError):
        merge_episode_sets([])


def test_episode_summary():
    es = extract_episodes(make_series([0, 2, 2, 0, 2, 0, 0]), ThresholdSpec(q=1.0, absolute_level=1.0))
    summary = episode_summary(es)
    assert summary["T_count"] == 2
    assert summary["T_mean"] == pytest.approx(1.5)
    assert summary["T_rms"] == pytest.approx(math.sqrt(2.5))
    assert summary["theta_total"] == pytest.approx(1.0)


@pytest.mark.slow
def test_brownian_first_passage_slope():
    sets = []
    for seed in range(200):
        w = wiener_series(100_000, 1.0, seed=seed)
        sets.append(extract_episodes(w, ThresholdSpec.resolve(0.5, w)))
    merged = merge_episode_sets(sets)
    for kind in ("T", "theta"):
        fit = fit_powerlaw(log_binned_pdf(merged.durations(kind), 10), (20.0, 2000.0))
        assert fit.exponent == pytest.approx(1.5, abs=0.1)
