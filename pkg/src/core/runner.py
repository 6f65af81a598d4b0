import time
import logging
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from tqdm import tqdm

from src.analysis.episodes import ThresholdSpec, extract_episodes, merge_episode_sets
from src.analysis.stats import Spectrum, psd
from src.core.errors import SimulationError
from src.core.seeding import realization_seed
from src.model.agent_sde import integrate_agent_sde
from src.model.params import YProcessParams
from src.model.y_sde import integrate_y_sde
from src.series.composition import ReturnSeries, generate_returns, rolling_std_filter

logger = logging.getLogger("consentaneous_sim")


@dataclass
class RealizationResult:
    """Everything one realization contributes to the merged statistics."""
    index: int
    seed: int
    episodes: dict                       # q -> EpisodeSet
    spectrum: Optional[Spectrum]
    timings: dict
    n_samples: int
    series_frame: object = None          # pandas DataFrame when series dumps are on
    warnings: list = field(default_factory=list)


def simulate_trajectory(config, seed):
    if config.process == "y-sde":
        return integrate_y_sde(
            YProcessParams.from_model(config.params),
            total_days=config.total_days,
            grid_step=config.resolved_grid_step,
            seed=seed,
            kappa=config.kappa,
            h=config.params.h,
            burn_in=config.burn_in,
        )
    return integrate_agent_sde(
        config.params,
        total_days=config.total_days,
        grid_step=config.resolved_grid_step,
        seed=seed,
        kappa=config.kappa,
        burn_in=config.burn_in,
    )


def _largest_power_of_two(n):
    return 1 << (int(n).bit_length() - 1)


def run_realization(config, index):
    """
    One realization: integrate -> compose -> (filter) -> episodes per q -> PSD.
    Module-level so it can be shipped to worker processes.
    """
    seed = realization_seed(config.base_seed, index)
    timings = {}
    warnings = []

    t = time.perf_counter()
    traj = simulate_trajectory(config, seed)
    timings["integrate"] = time.perf_counter() - t

    t = time.perf_counter()
    raw = generate_returns(traj, config.params, config.composition, seed=seed)
    timings["compose"] = time.perf_counter() - t

    analyzed = raw
    if config.filter_enabled:
        t = time.perf_counter()
        analyzed = rolling_std_filter(raw, config.filter_window)
        timings["filter"] = time.perf_counter() - t

    # --- EPISODES PER THRESHOLD ---
    t = time.perf_counter()
    episodes = {}
    for q in config.thresholds:
        spec = ThresholdSpec.resolve(q, analyzed)
        es = extract_episodes(analyzed, spec)
        if es.is_empty:
            warnings.append(f"no threshold crossings at q={q:g}")
        episodes[q] = es
    timings["episodes"] = time.perf_counter() - t

    # --- PSD of the absolute (unfiltered) series ---
    t = time.perf_counter()
    segment = min(config.psd_segment_length, _largest_power_of_two(len(raw)))
    if segment != config.psd_segment_length:
        warnings.append(f"PSD segment shortened to {segment} samples")
    magnitude = raw
    if config.composition.use_omega:
        magnitude = ReturnSeries(delta=raw.delta, values=np.abs(raw.values), composition=raw.composition,
                                 seed=raw.seed, t0=raw.t0)
    spectrum = psd(magnitude, segment) if segment >= 4 else None
    timings["psd"] = time.perf_counter() - t

    return RealizationResult(
        index=index,
        seed=seed,
        episodes=episodes,
        spectrum=spectrum,
        timings=timings,
        n_samples=len(analyzed),
        series_frame=raw.to_frame() if config.dump_series else None,
        warnings=warnings,
    )


def merge_spectra(spectra):
    """Segment-weighted mean of spectra that share a frequency axis."""
    spectra = [s for s in spectra if s is not None]
    if not spectra:
        return None
    ref = spectra[0]
    same = [s for s in spectra if s.segment_length == ref.segment_length]
    if len(same) != len(spectra):
        logger.warning(f"Dropped {len(spectra) - len(same)} spectra with a different segment length")
    total = sum(s.n_segments for s in same)
    power = sum(s.power * s.n_segments for s in same) / total
    return Spectrum(frequencies=ref.frequencies, power=power, n_segments=total,
                    segment_length=ref.segment_length)


def run_realizations(config, on_result=None):
    """
    Runs every realization, serially or on `config.workers` processes.

    Returns (results sorted by index, stats) where stats records successes,
    failures and their reasons. Failed realizations are logged and skipped.
    """
    stats = {"total": config.n_realizations, "success": 0, "failed": 0, "errors": []}
    results = []

    def collect(index, fn):
        try:
            result = fn()
        except SimulationError as e:
            stats["failed"] += 1
            stats["errors"].append({"realization": index, "reason": str(e)})
            logger.error(f"Realization {index} failed: {e}")
            return
        stats["success"] += 1
        for w in result.warnings:
            logger.warning(f"Realization {index}: {w}")
        if on_result:
            on_result(result)
        # Large per-realization series are written by the callback, not kept
        result.series_frame = None
        results.append(result)

    indices = range(config.n_realizations)
    desc = f"Realizations ({config.name})"

    if config.workers == 1:
        for index in tqdm(indices, desc=desc, unit="run"):
            collect(index, lambda: run_realization(config, index))
    else:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            futures = {pool.submit(run_realization, config, index): index for index in indices}
            for future in tqdm(as_completed(futures), total=len(futures), desc=desc, unit="run"):
                collect(futures[future], future.result)

    results.sort(key=lambda r: r.index)
    if not results:
        raise SimulationError(f"All {config.n_realizations} realizations failed")
    return results, stats


def merge_results(config, results):
    """Merged EpisodeSet per q and the averaged spectrum."""
    merged = {q: merge_episode_sets(r.episodes[q] for r in results) for q in config.thresholds}
    return merged, merge_spectra(r.spectrum for r in results)
