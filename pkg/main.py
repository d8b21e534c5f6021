#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Galloping Prediction - Command line front end
=============================================

Generates synthetic line/weather datasets, trains and evaluates the
Gaussian-kernel SVM, and runs the experiment families:

    gen, train, eval, search-features, sweep-balance, grid, compare-sampling, separation

Results go to files; standard output carries a one-line summary and logs go
to standard error. Exit status: 0 on success, 1 on a domain error, 2 on a
usage error.
"""

import os
import sys
import argparse
import logging
from typing import List, Optional

import pandas as pd

# Add the src directory to the path
sys.path.insert(0, os.path.join(os.path.dirname(os.path.abspath(__file__)), 'src'))

from gal_config_manager import get_config, get_config_manager, set_config
from gal_log_manager import get_log_manager, setup_logging
from gal_data import (FeatureMask, SplitSpec, apply_standardization, load_csv, project, standardize,
                      write_csv, derive_seed)
from gal_errors import GallopingError
from gal_metrics import class_separation, evaluate, format_metric, report_header, report_to_row
from gal_sampling import SamplingStrategy, apply as apply_sampling
from gal_svm import KernelParams, TrainConfig, load_model, save_model, train, tune_hyperparameters
from gal_synth import SynthConfig, generate, read_synth_config, write_synth_config
from gal_experiments import (DEFAULT_MAJORITY_COUNTS, DEFAULT_RATIOS, DEFAULT_SIZES, SweepSpec,
                             balance_sweep, default_strategies, feature_search, sampling_comparison,
                             substitute_table, volume_grid, write_results_csv)

logger = logging.getLogger('galloping_prediction')


def _int_list(text: str) -> List[int]:
    try:
        return [int(part) for part in text.split(',') if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got '{text}'") from None


def _float_list(text: str) -> List[float]:
    try:
        return [float(part) for part in text.split(',') if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got '{text}'") from None


def _feature_mask(text: str) -> FeatureMask:
    try:
        return FeatureMask.from_names(text.split(','))
    except ValueError as e:
        raise argparse.ArgumentTypeError(str(e)) from None


def _seed(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be an integer, got '{text}'") from None
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError(f"seed must be in [0, 2^64), got {value}")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='galloping-prediction',
        description='Conductor galloping prediction with a Gaussian-kernel SVM')
    parser.add_argument('--log-level', help='DEBUG, INFO, WARNING or ERROR (default from configuration)')
    parser.add_argument('--config-file', help='YAML parameter file (default config_params.yaml)')
    parser.add_argument('--log-file', action='store_true', help='also write a dated log file')
    parser.add_argument('--workers', type=int, help='parallel experiment cells')
    commands = parser.add_subparsers(dest='command', required=True, metavar='command')

    gen = commands.add_parser('gen', help='generate a synthetic dataset')
    gen.add_argument('--n', type=int, help='number of samples (default 20000)')
    gen.add_argument('--galloping-fraction', type=float)
    gen.add_argument('--noise', type=float, help='label noise probability')
    gen.add_argument('--seed', type=_seed, required=True)
    gen.add_argument('--out', required=True, help='output CSV')
    gen.add_argument('--config', help='flat key=value generator config')
    gen.add_argument('--write-config', help='write the effective generator config here')

    train_cmd = commands.add_parser('train', help='train a model on a whole data file')
    train_cmd.add_argument('--data', required=True)
    train_cmd.add_argument('--features', type=_feature_mask, default=FeatureMask.ALL,
                           help='comma-separated feature names (default all seven)')
    train_cmd.add_argument('--c', type=float)
    train_cmd.add_argument('--gamma', type=float, help='default 1/number of features')
    train_cmd.add_argument('--seed', type=_seed, required=True)
    train_cmd.add_argument('--model', required=True, help='output model file')
    train_cmd.add_argument('--sampling', choices=['none', 'under', 'smote'], default='none')
    train_cmd.add_argument('--smote-k', type=int)
    train_cmd.add_argument('--target-ratio', type=float, default=1.0)
    train_cmd.add_argument('--grid-search', action='store_true',
                           help='select C and gamma on an inner validation split')

    eval_cmd = commands.add_parser('eval', help='evaluate a saved model on a data file')
    eval_cmd.add_argument('--data', required=True)
    eval_cmd.add_argument('--model', required=True)
    eval_cmd.add_argument('--out', help='write the metrics row as CSV')
    eval_cmd.add_argument('--seed', type=_seed, help='accepted for uniformity; evaluation is deterministic')

    def experiment(name: str, help_text: str, default_out: str) -> argparse.ArgumentParser:
        sub = commands.add_parser(name, help=help_text)
        sub.add_argument('--data', required=True)
        sub.add_argument('--seed', type=_seed, required=True)
        sub.add_argument('--out', default=default_out)
        sub.add_argument('--c', type=float)
        sub.add_argument('--gamma', type=float)
        sub.add_argument('--timings', action='store_true', help='add a runtime_seconds column')
        return sub

    search = experiment('search-features', 'score all 127 feature subsets', 'feature_search.csv')
    search.add_argument('--max-train', type=int, help='training pool cap (default from configuration)')
    search.add_argument('--substitutes-out',
                        help='substitute-feature table (default substitute_features.csv next to --out)')

    sweep = experiment('sweep-balance', 'fixed galloping count vs increasing normal counts', 'balance_sweep.csv')
    sweep.add_argument('--minority', type=int, default=2000)
    sweep.add_argument('--counts', type=_int_list, default=list(DEFAULT_MAJORITY_COUNTS))
    sweep.add_argument('--reps', type=int)
    sweep.add_argument('--features', type=_feature_mask, default=FeatureMask.WEATHER_TRIO)

    grid = experiment('grid', 'training size x galloping ratio grid', 'volume_grid.csv')
    grid.add_argument('--sizes', type=_int_list, default=list(DEFAULT_SIZES))
    grid.add_argument('--ratios', type=_float_list, default=list(DEFAULT_RATIOS))
    grid.add_argument('--features', type=_feature_mask, default=FeatureMask.WEATHER_TRIO)

    compare = experiment('compare-sampling', 'none vs under-sampling vs SMOTE', 'sampling_comparison.csv')
    compare.add_argument('--smote-k', type=int)
    compare.add_argument('--reps', type=int, default=1,
                         help='repetitions with fresh splits; above 1 adds per-repetition rows and a mean')
    compare.add_argument('--features', type=_feature_mask, default=FeatureMask.WEATHER_TRIO)

    separation = commands.add_parser('separation', help='per-feature KL divergence between classes')
    separation.add_argument('--data', required=True)
    separation.add_argument('--bins', type=int)
    separation.add_argument('--out', default='class_separation.csv')
    separation.add_argument('--seed', type=_seed, help='accepted for uniformity; the table is deterministic')

    return parser


def _train_config(args: argparse.Namespace) -> TrainConfig:
    kernel = KernelParams(args.gamma) if args.gamma is not None else None
    return TrainConfig.from_config(c=args.c, kernel=kernel, seed=derive_seed(args.seed, 'train'))


def cmd_gen(args: argparse.Namespace) -> str:
    config = read_synth_config(args.config) if args.config else SynthConfig()
    overrides = {'seed': args.seed}
    if args.n is not None:
        overrides['n_total'] = args.n
    if args.galloping_fraction is not None:
        overrides['galloping_fraction'] = args.galloping_fraction
    if args.noise is not None:
        overrides['label_noise'] = args.noise
    config = config.replace(**overrides)

    dataset = generate(config)
    write_csv(dataset, args.out)
    if args.write_config:
        write_synth_config(config, args.write_config)
    galloping, normal = dataset.class_counts
    return f"generated {len(dataset)} samples ({galloping} galloping, {normal} normal) -> {args.out}"


def cmd_train(args: argparse.Namespace) -> str:
    dataset = standardize(project(load_csv(args.data), args.features))
    strategy = SamplingStrategy.from_cli(args.sampling, args.smote_k or get_config('smote_k', 5),
                                         args.target_ratio, derive_seed(args.seed, 'sampling'))
    dataset = apply_sampling(dataset, strategy)

    config = _train_config(args)
    if args.grid_search:
        config, _ = tune_hyperparameters(dataset, config)
    model = train(dataset, config)
    save_model(model, args.model)
    return (f"trained on {len(dataset)} samples ({args.features}): {model.n_support} support vectors, "
            f"C={model.c!r}, gamma={model.kernel.gamma!r} -> {args.model}")


def cmd_eval(args: argparse.Namespace) -> str:
    model = load_model(args.model)
    dataset = project(load_csv(args.data), model.features)
    if model.standardization is not None:
        dataset = apply_standardization(dataset, model.standardization)
    report = evaluate(model, dataset)
    if args.out:
        try:
            pd.DataFrame([report_to_row(report)], columns=report_header()) \
                .to_csv(args.out, index=False, lineterminator='\n')
        except OSError as e:
            raise GallopingError(f"Cannot write {args.out}: {e}") from e
    return (f"f1={format_metric(report.f1)} precision={format_metric(report.precision)} "
            f"recall={format_metric(report.recall)}")


def _experiment_summary(results, out: str) -> str:
    best = max((r for r in results if r.f1 is not None), key=lambda r: r.f1, default=None)
    if best is None:
        return f"{len(results)} rows, no defined F1 -> {out}"
    key = ' '.join(f"{k}={v}" for k, v in best.descriptor.items())
    return f"{len(results)} rows, best f1={best.f1:.4f} at {key} -> {out}"


def cmd_search_features(args: argparse.Namespace) -> str:
    results = feature_search(load_csv(args.data), _train_config(args),
                             SplitSpec(seed=derive_seed(args.seed, 'split')), max_train=args.max_train)
    write_results_csv(results, args.out, timings=args.timings)
    substitutes_out = args.substitutes_out or os.path.join(os.path.dirname(args.out), 'substitute_features.csv')
    write_results_csv(substitute_table(results), substitutes_out, timings=args.timings)
    return _experiment_summary(results, args.out)


def cmd_sweep_balance(args: argparse.Namespace) -> str:
    spec = SweepSpec(fixed_minority=args.minority, majority_counts=tuple(args.counts),
                     repetitions=args.reps or get_config('sweep_repetitions', 5),
                     seed=derive_seed(args.seed, 'balance'))
    results = balance_sweep(load_csv(args.data), spec, _train_config(args),
                            SplitSpec(seed=derive_seed(args.seed, 'split')), mask=args.features)
    write_results_csv(results, args.out, timings=args.timings)
    return _experiment_summary(results, args.out)


def cmd_grid(args: argparse.Namespace) -> str:
    results = volume_grid(load_csv(args.data), args.sizes, args.ratios, _train_config(args),
                          SplitSpec(seed=derive_seed(args.seed, 'split')), mask=args.features)
    write_results_csv(results, args.out, timings=args.timings)
    return _experiment_summary(results, args.out)


def cmd_compare_sampling(args: argparse.Namespace) -> str:
    results = sampling_comparison(load_csv(args.data), default_strategies(args.seed, args.smote_k),
                                  _train_config(args), SplitSpec(seed=derive_seed(args.seed, 'split')),
                                  mask=args.features, repetitions=args.reps)
    write_results_csv(results, args.out, timings=args.timings)
    return _experiment_summary(results, args.out)


def cmd_separation(args: argparse.Namespace) -> str:
    table = class_separation(load_csv(args.data), args.bins or get_config('kl_bins', 20))
    try:
        table.to_csv(args.out, index=False, lineterminator='\n')
    except OSError as e:
        raise GallopingError(f"Cannot write {args.out}: {e}") from e
    top = table.iloc[0]
    return f"most separated feature: {top['feature']} (kl={top['kl_divergence']:.4f}) -> {args.out}"


COMMANDS = {
    'gen': cmd_gen,
    'train': cmd_train,
    'eval': cmd_eval,
    'search-features': cmd_search_features,
    'sweep-balance': cmd_sweep_balance,
    'grid': cmd_grid,
    'compare-sampling': cmd_compare_sampling,
    'separation': cmd_separation,
}


def run(argv: Optional[List[str]] = None) -> int:
    """
    Parse argv, run the command and return the exit status.
    """
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 2

    try:
        get_config_manager(args.config_file)
        if args.workers is not None:
            if args.workers < 1:
                raise ValueError(f"--workers must be positive, got {args.workers}")
            set_config('max_workers', args.workers)
        setup_logging(console=True,
                      file=args.log_file or get_config('log_to_file', False),
                      level=args.log_level or get_config('log_level', 'INFO'),
                      log_directory=get_config('log_directory', 'logs'))
    except GallopingError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2

    execution_id = get_log_manager().get_execution_id()
    logger.debug(f"Command {args.command} (execution {execution_id})")
    try:
        summary = COMMANDS[args.command](args)
    except GallopingError as e:
        logger.error(f"{args.command} failed: {e}")
        print(f"error: {e}", file=sys.stderr)
        return 1
    except ValueError as e:
        logger.error(f"{args.command}: invalid argument: {e}")
        print(f"error: invalid argument: {e}", file=sys.stderr)
        return 2

    print(summary)
    return 0


def main():
    """Program entry point."""
    sys.exit(run())


if __name__ == "__main__":
    main()
