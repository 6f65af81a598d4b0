import os
import sys
import argparse
import logging

import pandas as pd

from src.analysis.episodes import (
    CANONICAL_THRESHOLDS, ThresholdSpec, extract_episodes,
)
from src.analysis.stats import (
    DEFAULT_BINS_PER_DECADE, MIN_PDF_SAMPLES, fit_powerlaw, hurst_from_beta, log_binned_pdf, psd,
)
from src.core.config import ExperimentConfig, PRESETS, load_config, preset
from src.core.errors import FitError, PresetError, SimulationError
from src.core.experiment import run_experiment
from src.core.finisher import OutputFinisher, q_tag
from src.core.logger import setup_logger, LOGGER_NAME
from src.model.agent_sde import integrate_agent_sde
from src.model.params import DEFAULT_DELTA, ModelParams, YProcessParams, stationarity_ks
from src.model.trajectory import Trajectory
from src.model.y_sde import integrate_y_sde
from src.series.composition import (
    CompositionSpec, DEFAULT_FILTER_WINDOW, ReturnSeries, generate_returns, rolling_std_filter,
)

logger = logging.getLogger(LOGGER_NAME)

DEFAULT_CONFIG = "config.yaml"


def load_settings(config_path=DEFAULT_CONFIG):
    """Global settings (log level/folder, default experiment) from config.yaml, if present."""
    if not os.path.exists(config_path):
        return {}
    return load_config(config_path)


def _experiment_section(doc):
    return doc.get("experiment", doc) if isinstance(doc, dict) else {}


def resolve_experiment_config(args, settings):
    """defaults < preset < config file < CLI flags."""
    config = preset(args.preset) if args.preset else ExperimentConfig()

    if args.config:
        config = ExperimentConfig.from_dict(_experiment_section(load_config(args.config)), base=config)
    elif not args.preset and "experiment" in settings:
        config = ExperimentConfig.from_dict(settings["experiment"], base=config)

    return config.with_overrides(
        base_seed=args.seed,
        total_days=args.days,
        n_realizations=args.realizations,
        output_dir=args.out,
        workers=args.workers,
        plots=True if args.plots else None,
        dump_series=True if args.dump_series else None,
    )


# --- SUBCOMMANDS ---

def cmd_simulate(args, settings):
    params = ModelParams()
    seed = 0 if args.seed is None else args.seed
    days = 100.0 if args.days is None else args.days
    grid_step = args.grid_step or params.delta

    if args.process == "y-sde":
        traj = integrate_y_sde(YProcessParams.from_model(params), total_days=days, grid_step=grid_step,
                               seed=seed, kappa=args.kappa, h=params.h, burn_in=args.burn_in)
    else:
        traj = integrate_agent_sde(params, total_days=days, grid_step=grid_step, seed=seed,
                                   kappa=args.kappa, burn_in=args.burn_in)

    finisher = OutputFinisher(args.out or "./data_output/simulate")
    path = finisher.save_trajectory(traj)
    logger.info(f"Saved trajectory ({len(traj)} samples, {traj.meta['internal_steps']} steps): {path}")

    if args.check:
        ks = stationarity_ks(traj, params)
        logger.info("KS distance to stationary density: " + ", ".join(f"{k} {v:.4f}" for k, v in ks.items()))
    return 0


def cmd_compose(args, settings):
    params = ModelParams()
    seed = 0 if args.seed is None else args.seed
    traj = Trajectory.read_csv(args.trajectory, seed=seed, source=args.source)
    comp = CompositionSpec.from_label(args.composition)

    series = generate_returns(traj, params, comp, seed=seed)
    apply_filter = comp.use_omega if args.filter is None else args.filter
    if apply_filter:
        series = rolling_std_filter(series, args.window)

    finisher = OutputFinisher(args.out or "./data_output/compose")
    path = finisher.save_series(series)
    logger.info(f"Saved {comp.label} series ({len(series)} samples, filter {apply_filter}): {path}")
    return 0


def cmd_episodes(args, settings):
    series = ReturnSeries.read_csv(args.series)
    sets = []
    for q in args.q:
        es = extract_episodes(series, ThresholdSpec.resolve(q, series))
        logger.info(f"q={q_tag(q)}: {len(es.burst_steps)} bursts, {len(es.inter_burst_steps)} inter-bursts, "
                    f"{es.n_crossings} crossings")
        sets.append(es)

    finisher = OutputFinisher(args.out or "./data_output/episodes")
    path = finisher.save_episodes(sets)
    logger.info(f"Saved episodes: {path}")
    return 0


def cmd_pdf(args, settings):
    df = pd.read_csv(args.episodes)
    finisher = OutputFinisher(args.out or "./data_output/pdf")
    rows = []
    for (kind, q), group in df.groupby(["kind", "q"], sort=True):
        if len(group) < MIN_PDF_SAMPLES:
            logger.warning(f"{kind} q={q_tag(q)}: only {len(group)} episodes, PDF skipped")
            continue
        pdf = log_binned_pdf(group["duration_days"].to_numpy(), args.bins_per_decade)
        finisher.save_pdf(pdf, kind, q)
        try:
            fit = fit_powerlaw(pdf, tuple(args.fit_range))
        except FitError as e:
            logger.warning(f"{kind} q={q_tag(q)}: {e}")
            continue
        rows.append({"target": f"{kind}_q{q_tag(q)}", "range_lo": fit.fit_range[0], "range_hi": fit.fit_range[1],
                     "exponent": fit.exponent, "stderr": fit.stderr})
        logger.info(f"{kind} q={q_tag(q)}: exponent {fit.exponent:.3f} +/- {fit.stderr:.3f}")
    finisher.save_fits(rows)
    return 0


def cmd_psd(args, settings):
    series = ReturnSeries.read_csv(args.series)
    spectrum = psd(series, args.segment_length)
    finisher = OutputFinisher(args.out or "./data_output/psd")
    finisher.save_psd(spectrum)

    rows = []
    binned = spectrum.log_binned(DEFAULT_BINS_PER_DECADE)
    for target, fit_range in (("psd_beta1", args.beta1_range), ("psd_beta2", args.beta2_range)):
        try:
            fit = fit_powerlaw(binned, tuple(fit_range))
        except FitError as e:
            logger.warning(f"{target}: {e}")
            continue
        rows.append({"target": target, "range_lo": fit.fit_range[0], "range_hi": fit.fit_range[1],
                     "exponent": fit.exponent, "stderr": fit.stderr})
        logger.info(f"{target}: {fit.exponent:.3f} +/- {fit.stderr:.3f} (H = {hurst_from_beta(fit.exponent):.3f})")
    finisher.save_fits(rows)
    return 0


def cmd_experiment(args, settings):
    if args.list_presets:
        for name in sorted(PRESETS):
            print(name)
        return 0
    config = resolve_experiment_config(args, settings)
    manifest = run_experiment(config)
    logger.info(f"Experiment complete: {len(manifest.outputs)} files in {config.output_dir}")
    return 0


# --- PARSER ---

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, help="Base seed (64-bit)")
    common.add_argument("--days", type=float, help="Simulated days per realization")
    common.add_argument("--realizations", type=int, help="Number of realizations")
    common.add_argument("--out", help="Output directory")
    common.add_argument("--workers", type=int, help="Worker processes for realizations")
    common.add_argument("--log-level", help="DEBUG, INFO, WARNING, ERROR")

    parser = argparse.ArgumentParser(
        prog="consentaneous-bursts",
        description="Consentaneous market model simulator and burst-duration statistics.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="Integrate the model SDEs to trajectory.csv")
    p.add_argument("--process", choices=("agent", "y-sde"), default="agent")
    p.add_argument("--grid-step", type=float, help=f"Output grid, days (default δ={DEFAULT_DELTA:.6g})")
    p.add_argument("--kappa", type=float, default=0.1, help="Step control (default 0.1)")
    p.add_argument("--burn-in", type=float, default=0.0, help="Burn-in, scaled time units")
    p.add_argument("--check", action="store_true", help="Report KS distance to the stationary densities")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("compose", parents=[common], help="Compose a return series from trajectory.csv")
    p.add_argument("--trajectory", required=True, help="Trajectory CSV (t_days,n_f,xi,y)")
    p.add_argument("--source", choices=("agent", "y-sde"), default="agent")
    p.add_argument("--composition", default="TTT", help="Flags for ξ, b₀, ω, e.g. FFF, TTF, TTT")
    p.add_argument("--filter", dest="filter", action="store_true", default=None, help="Force the std filter on")
    p.add_argument("--no-filter", dest="filter", action="store_false", help="Force the std filter off")
    p.add_argument("--window", type=int, default=DEFAULT_FILTER_WINDOW)
    p.set_defaults(func=cmd_compose)

    p = sub.add_parser("episodes", parents=[common], help="Extract burst/inter-burst durations")
    p.add_argument("--series", required=True, help="Series CSV (t_days,r)")
    p.add_argument("--q", type=float, nargs="+", default=list(CANONICAL_THRESHOLDS))
    p.set_defaults(func=cmd_episodes)

    p = sub.add_parser("pdf", parents=[common], help="Log-binned PDFs and power-law fits of durations")
    p.add_argument("--episodes", required=True, help="Episodes CSV (kind,q,duration_days)")
    p.add_argument("--bins-per-decade", type=int, default=DEFAULT_BINS_PER_DECADE)
    p.add_argument("--fit-range", type=float, nargs=2, default=[10 * DEFAULT_DELTA, 10.0])
    p.set_defaults(func=cmd_pdf)

    p = sub.add_parser("psd", parents=[common], help="Power spectral density and β fits")
    p.add_argument("--series", required=True, help="Series CSV (t_days,r)")
    p.add_argument("--segment-length", type=int, default=1 << 16)
    p.add_argument("--beta1-range", type=float, nargs=2, default=[1e-2, 1.0])
    p.add_argument("--beta2-range", type=float, nargs=2, default=[10.0, 100.0])
    p.set_defaults(func=cmd_psd)

    p = sub.add_parser("experiment", parents=[common], help="Run a full multi-realization experiment")
    source = p.add_mutually_exclusive_group()
    source.add_argument("--preset", help="Named model curve, e.g. fig3:red, fig1:model")
    source.add_argument("--list-presets", action="store_true")
    p.add_argument("--config", help="YAML/JSON experiment config or a previous manifest.json")
    p.add_argument("--plots", action="store_true", help="Emit gnuplot scripts")
    p.add_argument("--dump-series", action="store_true", help="Write every realization's series")
    p.set_defaults(func=cmd_experiment)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)

    try:
        settings = load_settings()
    except (OSError, SimulationError, ValueError) as e:
        print(f"error: cannot read {DEFAULT_CONFIG}: {e}", file=sys.stderr)
        return 1

    setup_logger(LOGGER_NAME, log_dir=settings.get("log_folder", "./logs"),
                 level=args.log_level or settings.get("log_level", "INFO"), run_tag=args.command)

    try:
        return args.func(args, settings)
    except PresetError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 2
    except (SimulationError, OSError) as e:
        logger.debug("Failure details", exc_info=True)
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
