import time
import logging
from dataclasses import dataclass, field, asdict
from datetime import datetime

from src import __version__, ARTIFACT_NAME
from src.analysis.episodes import episode_summary
from src.analysis.stats import (
    MIN_PDF_SAMPLES, cutoff_ratio, fbm_duration_exponent, fit_powerlaw, hurst_from_beta, log_binned_pdf,
)
from src.core.errors import FitError
from src.core.finisher import OutputFinisher, q_tag
from src.core.runner import merge_results, run_realizations
from src.core.seeding import realization_seed
from src.model.params import (
    AgentState, YProcessParams, relaxation_time_days, scaled_to_days, y_drift_slope,
)

logger = logging.getLogger("consentaneous_sim")


@dataclass
class RunManifest:
    """What a run used and produced; enough to reproduce every output file."""
    config: dict
    artifact: dict
    seeds: list
    realizations: list
    stage_seconds: dict
    outputs: dict
    stats: dict = field(default_factory=dict)
    created: str = ""

    def to_dict(self):
        return asdict(self)


def _fit_row(target, fit):
    return {"target": target, "range_lo": fit.fit_range[0], "range_hi": fit.fit_range[1],
            "exponent": fit.exponent, "stderr": fit.stderr}


def analyze_durations(config, merged, finisher):
    """Writes the T/θ PDFs per q and returns (fit rows, summaries, cutoffs)."""
    rows, summaries, cutoffs = [], [], {}
    for q in config.thresholds:
        es = merged[q]
        summaries.append(episode_summary(es))
        for kind in ("T", "theta"):
            durations = es.durations(kind)
            if len(durations) < MIN_PDF_SAMPLES:
                logger.warning(f"q={q_tag(q)} {kind}: only {len(durations)} episodes, PDF skipped")
                continue
            pdf = log_binned_pdf(durations, config.bins_per_decade)
            finisher.save_pdf(pdf, kind, q)
            try:
                fit = fit_powerlaw(pdf, config.duration_fit_range)
                rows.append(_fit_row(f"{kind}_q{q_tag(q)}", fit))
            except FitError as e:
                logger.warning(f"q={q_tag(q)} {kind}: {e}")

            if kind == "T" and config.cutoff_anchor_range and config.cutoff_tail_range:
                try:
                    check = cutoff_ratio(pdf, 1.5, config.cutoff_anchor_range, config.cutoff_tail_range)
                except FitError as e:
                    logger.warning(f"q={q_tag(q)} cutoff check: {e}")
                    continue
                if check.tail_empty:
                    logger.info(f"q={q_tag(q)}: no bursts in the tail range, longest bin at "
                                f"{check.last_occupied:.4g} d")
                cutoffs[q_tag(q)] = check
    return rows, summaries, cutoffs


def relaxation_days(config):
    """Linear relaxation time of the slow process at its resting point, in days."""
    params = config.params
    if config.process == "y-sde":
        p = YProcessParams.from_model(params)
        return scaled_to_days(1.0 / abs(y_drift_slope(p.fixed_point, p)), params)
    return relaxation_time_days(AgentState.at_drift_roots(params).n_f, params)


def analyze_spectrum(config, spectrum, finisher):
    """Writes psd.csv and returns the β₁/β₂ fit rows plus the derived Hurst rows."""
    rows = []
    if spectrum is None:
        logger.warning("No spectrum available")
        return rows
    finisher.save_psd(spectrum)
    binned = spectrum.log_binned(config.bins_per_decade)
    for target, fit_range in (("psd_beta1", config.beta1_range), ("psd_beta2", config.beta2_range)):
        try:
            fit = fit_powerlaw(binned, fit_range)
        except FitError as e:
            logger.warning(f"{target}: {e}")
            continue
        rows.append(_fit_row(target, fit))
        if target == "psd_beta1":
            hurst = hurst_from_beta(fit.exponent)
            rows.append({"target": "hurst_beta1", "range_lo": fit_range[0], "range_hi": fit_range[1],
                         "exponent": hurst, "stderr": fit.stderr / 2.0})
            rows.append({"target": "fbm_duration_expected", "range_lo": fit_range[0], "range_hi": fit_range[1],
                         "exponent": fbm_duration_exponent(hurst), "stderr": fit.stderr / 2.0})
    return rows


def generate_summary(config, stats, summaries, fit_rows, cutoffs):
    """Plain-text run report, one block per section."""
    lines = []
    lines.append("=" * 48)
    lines.append("CONSENTANEOUS MODEL - BURST DURATION EXPERIMENT")
    lines.append(f"Preset/config: {config.name}")
    lines.append(f"Composition (xi, b0, omega): {config.composition.label}   filter: {config.filter_enabled}")
    lines.append(f"Process: {config.process}   relaxation time at rest: {relaxation_days(config):.4g} d")
    lines.append("=" * 48)
    lines.append(f"Realizations requested: {stats['total']}")
    lines.append(f"Realizations succeeded: {stats['success']}")
    lines.append(f"Realizations failed:    {stats['failed']}")
    lines.append("-" * 48)
    for s in summaries:
        lines.append(f"q={q_tag(s['q'])}: {s['T_count']} bursts (mean {s['T_mean']:.4g} d), "
                     f"{s['theta_count']} inter-bursts (mean {s['theta_mean']:.4g} d)")
    lines.append("-" * 48)
    for row in fit_rows:
        lines.append(f"{row['target']:<24} [{row['range_lo']:.3g}, {row['range_hi']:.3g}]  "
                     f"{row['exponent']:.3f} +/- {row['stderr']:.3f}")
    if cutoffs:
        lines.append("-" * 48)
        for q, check in cutoffs.items():
            lo, hi = check.tail_range
            if check.tail_empty:
                lines.append(f"q={q}: no bursts in [{lo:.3g}, {hi:.3g}] d, PDF ends at {check.last_occupied:.3g} d")
            else:
                lines.append(f"q={q}: burst PDF falls {check.ratio:.3g}x below the 3/2 line in [{lo:.3g}, {hi:.3g}] d")
    if stats["errors"]:
        lines.append("-" * 48)
        lines.append("FAILED REALIZATIONS:")
        for err in stats["errors"]:
            lines.append(f"  [X] #{err['realization']} -> {err['reason']}")
    lines.append("=" * 48)
    return "\n".join(lines) + "\n"


def run_experiment(config):
    """
    integrate -> compose -> (filter) -> episodes per q, for every realization;
    then merge, estimate PDFs/PSD/fits and write everything plus the manifest.
    """
    start = time.perf_counter()
    finisher = OutputFinisher(config.output_dir)
    logger.info(f"Experiment '{config.name}': {config.n_realizations} x {config.total_days:g} days, "
                f"composition {config.composition.label}, filter {config.filter_enabled}, "
                f"{config.workers} worker(s)")

    def dump_series(result):
        if result.series_frame is not None:
            finisher.save_frame(result.series_frame, f"series/r{result.index:04d}.csv")

    # --- PART 1: REALIZATIONS ---
    results, stats = run_realizations(config, on_result=dump_series)

    # --- PART 2: MERGE AND ESTIMATE ---
    t = time.perf_counter()
    merged, spectrum = merge_results(config, results)
    fit_rows, summaries, cutoffs = analyze_durations(config, merged, finisher)
    fit_rows += analyze_spectrum(config, spectrum, finisher)
    finisher.save_fits(fit_rows)
    if config.plots:
        finisher.save_duration_plot("T", config.thresholds)
        finisher.save_duration_plot("theta", config.thresholds)
        if spectrum is not None:
            finisher.save_psd_plot()
    report = generate_summary(config, stats, summaries, fit_rows, cutoffs)
    finisher.save_text(report, "report.txt")
    analysis_seconds = time.perf_counter() - t

    for line in report.rstrip("\n").split("\n"):
        logger.info(line)

    # --- PART 3: MANIFEST ---
    stage_seconds = {}
    for r in results:
        for stage, seconds in r.timings.items():
            stage_seconds[stage] = stage_seconds.get(stage, 0.0) + seconds
    stage_seconds["analysis"] = analysis_seconds
    stage_seconds["total"] = time.perf_counter() - start

    manifest = RunManifest(
        config=config.to_dict(),
        artifact={"name": ARTIFACT_NAME, "version": __version__},
        seeds=[realization_seed(config.base_seed, i) for i in range(config.n_realizations)],
        realizations=[{"index": r.index, "seed": r.seed, "n_samples": r.n_samples, "timings": r.timings}
                      for r in results],
        stage_seconds=stage_seconds,
        outputs=dict(sorted(finisher.written.items())),
        stats={"success": stats["success"], "failed": stats["failed"], "errors": stats["errors"],
               "cutoff_ratios": {q: check.to_dict() for q, check in cutoffs.items()},
               "relaxation_days": relaxation_days(config)},
        created=datetime.now().isoformat(timespec="seconds"),
    )
    finisher.save_manifest(manifest.to_dict())
    return manifest
