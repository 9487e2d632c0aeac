# Copyright (C) 2025 Cody Messick
#
# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at https://mozilla.org/MPL/2.0/.
#
# SPDX-License-Identifier: MPL-2.0

"""Command-line entry point: run, sweep, boxplot and tables."""

import argparse
import json
import logging
import os
import sys

import pandas as pd

import knnstream_report as report
from knnstream_data import (DRIFT_PRESETS, SEA_FEATURES, RangeSchedule,
                            SeaConfig, generate_sea, impute_missing,
                            load_dataset)
from knnstream_distance import (DEFAULT_P, TABLE_ORDER, DistanceKind,
                                DistanceSpec)
from knnstream_harness import (DEFAULT_BATCH_SIZE, DEFAULT_TRIALS, RetrainMode,
                               RunConfig, grid_configs, run_experiment, sweep)
from knnstream_knn import DEFAULT_K
from knnstream_scaling import POLICY_ORDER, NormalizationPolicy

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
SERIES_COLUMNS = ['trial', 'batch_index', 'accuracy']
BOX_COLUMNS = ['feature', 'batch_index', 'median', 'q1', 'q3', 'whisker_low',
               'whisker_high', 'outliers']
FLOAT_FORMAT = '%.17g'


def _csv(frame):
    return frame.to_csv(index=False, float_format=FLOAT_FORMAT,
                        lineterminator='\n')


def emit_csv(run_result):
    """Per-batch accuracies, one row per scored batch; trials numbered from
    1."""
    rows = []
    if run_result is not None:
        rows = [(trial_number, index, accuracy)
                for trial_number, trial in enumerate(run_result.trials, 1)
                for index, accuracy in trial.per_batch_accuracy]
    return _csv(pd.DataFrame(rows, columns=SERIES_COLUMNS))


def output_record(run_result):
    return {
        'schema_version': SCHEMA_VERSION,
        'config': run_result.config.to_dict(),
        'grand_mean': run_result.grand_mean,
        'grand_std': run_result.grand_std,
        'leakage_flag': run_result.leakage_flag,
        'trials': [{'seed': trial.seed,
                    'mean_accuracy': trial.mean_accuracy,
                    'leakage_flag': trial.leakage_flag,
                    'per_batch_accuracy': [list(pair) for pair in
                                           trial.per_batch_accuracy]}
                   for trial in run_result.trials],
    }


def _json(payload):
    return json.dumps(payload, indent=2, sort_keys=True) + '\n'


def emit_json(run_result):
    if isinstance(run_result, (list, tuple)):
        return _json([output_record(result) for result in run_result])
    return _json(output_record(run_result))


def emit_grid_csv(results):
    """Long-format accuracy grid (dataset, distance, policy, accuracy)."""
    rows = [(result.config.source_name, result.config.spec.kind.value,
             result.config.policy.value, result.grand_mean)
            for result in results]
    return _csv(pd.DataFrame(rows, columns=report.RECORD_COLUMNS))


def emit_tables(grids, fmt='text'):
    """Accuracy grids, both victory tables and the per-distance averages."""
    grids = list(grids)
    by_normalization = report.victories_by_normalization(grids)
    by_distance = report.victories_by_distance(grids)
    averages = report.mean_by_distance_table(grids)
    if fmt == 'json':
        return _json({
            'schema_version': SCHEMA_VERSION,
            'grids': {grid.dataset_name: grid.cells.to_dict(orient='index')
                      for grid in grids},
            'victories_by_normalization': {
                k: int(v) for k, v in by_normalization.items()},
            'victories_by_distance': {
                k: int(v) for k, v in by_distance.items()},
            'mean_by_distance': averages.to_dict(),
        })
    blocks = [report.format_grid(grid) for grid in grids]
    blocks.append(report.format_counts(by_normalization, 'Normalization'))
    blocks.append(report.format_counts(by_distance, 'Distance Function'))
    blocks.append(report.format_mean_table(averages))
    return '\n\n'.join(blocks) + '\n'


def emit_boxplot(stats, feature_index, fmt='csv'):
    if fmt == 'json':
        return _json({'feature': feature_index,
                      'chunks': [box.to_dict() for box in stats]})
    rows = [(feature_index, box.batch_index, box.median, box.q1, box.q3,
             box.whisker_low, box.whisker_high,
             ';'.join(repr(v) for v in box.outliers)) for box in stats]
    return _csv(pd.DataFrame(rows, columns=BOX_COLUMNS))


def parse_schedule(tokens):
    """Build a RangeSchedule from ``feat:start:end:mult`` tokens."""
    features = set()
    segments = []
    for token in tokens:
        parts = token.split(':')
        if len(parts) != 4:
            raise ValueError(f'--schedule {token!r} is not '
                             'feat:start:end:mult')
        feature, start, end, multiplier = parts
        if not (feature.startswith('f') and feature[1:].isdigit() and
                1 <= int(feature[1:]) <= SEA_FEATURES):
            raise ValueError(f'--schedule feature {feature!r} must be one of '
                             f'f1..f{SEA_FEATURES}')
        try:
            segments.append((int(start), int(end), float(multiplier)))
        except ValueError:
            raise ValueError(f'--schedule {token!r} has a non-numeric '
                             'field') from None
        features.add(int(feature[1:]) - 1)
    if len(features) != 1:
        named = sorted(f"f{i + 1}" for i in features)
        raise ValueError('--schedule repeats must all address the same '
                         f'feature, got {named}')
    return RangeSchedule(features.pop(), tuple(sorted(segments)))


def _label_column(token):
    return int(token) if token.lstrip('-').isdigit() else token


def _add_source_arguments(parser):
    source = parser.add_mutually_exclusive_group(required=True)
    source.add_argument('--gen', choices=['sea'],
                        help='Generate a synthetic stream')
    source.add_argument('--data', help='CSV or ARFF dataset, read in file '
                                       'order')
    parser.add_argument('--label-col', default='-1', type=_label_column,
                        help='Label column index or header name '
                             '(default: last column)')
    parser.add_argument('--header', action='store_true',
                        help='The CSV file starts with a header row')
    parser.add_argument('--instances', default=SeaConfig.n_instances,
                        type=int, help='Length of a generated stream '
                                       '(default: 40000)')
    parser.add_argument('--vary', choices=sorted(DRIFT_PRESETS),
                        help='Range drift preset for generated streams')
    parser.add_argument('--schedule', action='append', default=[],
                        help='Range drift segment feat:start:end:mult, '
                             'repeatable')
    parser.add_argument('--seed', default=0, type=int,
                        help='Seed of the first trial (default: 0)')


def _add_run_arguments(parser):
    parser.add_argument('--batch-size', default=DEFAULT_BATCH_SIZE, type=int,
                        help='Instances per batch (default: 1000)')
    parser.add_argument('--k', default=DEFAULT_K, type=int,
                        help='Number of neighbours (default: 3)')
    parser.add_argument('--p', default=DEFAULT_P, type=float,
                        help='Minkowski order, at least 1 (default: 1.5)')
    parser.add_argument('--mode', choices=[m.value for m in RetrainMode],
                        default=RetrainMode.NEVER.value,
                        help='Train once on batch 1 or retrain on every '
                             'previous batch (default: first-train)')
    parser.add_argument('--trials', default=DEFAULT_TRIALS, type=int,
                        help='Trials per configuration (default: 30)')
    parser.add_argument('--jobs', default=1, type=int,
                        help='Parallel workers, -1 for all cores '
                             '(default: 1)')


def _add_output_arguments(parser, formats, default):
    parser.add_argument('--out', '-o', help='Write here instead of stdout')
    parser.add_argument('--format', choices=formats, default=default,
                        help=f'Output format (default: {default})')
    parser.add_argument('--verbose', '-v', action='count', default=0,
                        help='-v for progress, -vv for per-batch detail')


def build_parser():
    parser = argparse.ArgumentParser(
        prog='knnstream',
        description='Benchmark distance functions for kNN on batch streams')
    commands = parser.add_subparsers(dest='command', required=True)

    run = commands.add_parser('run', help='Run one configuration')
    _add_source_arguments(run)
    _add_run_arguments(run)
    run.add_argument('--distance', choices=[k.value for k in DistanceKind],
                     default=DistanceKind.EUCLIDEAN.value,
                     help='Distance function (default: euclidean)')
    run.add_argument('--norm', choices=[p.value for p in POLICY_ORDER],
                     default=NormalizationPolicy.ORIGINAL.value,
                     help='Normalization policy (default: none)')
    _add_output_arguments(run, ['csv', 'json'], 'json')

    grid = commands.add_parser('sweep', help='Run distances x policies')
    _add_source_arguments(grid)
    _add_run_arguments(grid)
    grid.add_argument('--distances', nargs='+',
                      choices=[k.value for k in DistanceKind],
                      default=[k.value for k in TABLE_ORDER],
                      help='Distances to sweep (default: all eight)')
    grid.add_argument('--norms', nargs='+',
                      choices=[p.value for p in POLICY_ORDER],
                      default=[p.value for p in POLICY_ORDER],
                      help='Policies to sweep (default: all four)')
    _add_output_arguments(grid, ['csv', 'json'], 'json')

    box = commands.add_parser('boxplot',
                              help='Per-chunk box statistics of a feature')
    _add_source_arguments(box)
    box.add_argument('--feature', type=int,
                     help='Feature index (default: highest standard '
                          'deviation)')
    box.add_argument('--chunks', default=10, type=int,
                     help='Number of contiguous chunks (default: 10)')
    _add_output_arguments(box, ['csv', 'json'], 'csv')

    tables = commands.add_parser('tables',
                                 help='Aggregate accuracy grids')
    tables.add_argument('--grids', required=True,
                        help='Long-format CSV with dataset, distance, '
                             'policy and accuracy columns')
    _add_output_arguments(tables, ['text', 'json'], 'text')
    return parser


def _check_arguments(parser, args):
    """Range-check every numeric flag before any work starts."""
    def positive(name, value):
        if value is not None and value < 1:
            parser.error(f'--{name} must be at least 1, got {value}')

    for name in ('batch_size', 'k', 'trials', 'instances', 'chunks'):
        positive(name.replace('_', '-'), getattr(args, name, None))
    if getattr(args, 'p', None) is not None and not args.p >= 1:
        parser.error(f'--p must be at least 1, got {args.p}')
    if getattr(args, 'jobs', 1) == 0:
        parser.error('--jobs must not be 0')
    if getattr(args, 'batch_size', None) is not None and \
            args.batch_size < args.k:
        parser.error(f'--batch-size {args.batch_size} is smaller than '
                     f'--k {args.k}')
    if getattr(args, 'feature', None) is not None and args.feature < 0:
        parser.error(f'--feature must not be negative, got {args.feature}')

    if args.command == 'tables':
        if not os.path.isfile(args.grids):
            parser.error(f'--grids {args.grids}: no such file')
        return
    if args.data is not None:
        if not os.path.isfile(args.data):
            parser.error(f'--data {args.data}: no such file')
        if args.vary or args.schedule:
            parser.error('--vary and --schedule only apply to --gen')
    if args.vary and args.schedule:
        parser.error('--vary and --schedule are mutually exclusive')
    if args.gen is not None:
        _check_generated_bounds(parser, args)


def _check_generated_bounds(parser, args):
    # a generated stream's shape is known before it exists
    if args.command == 'boxplot':
        if args.feature is not None and args.feature >= SEA_FEATURES:
            parser.error(f'--feature {args.feature} is out of range, SEA has '
                         f'{SEA_FEATURES} features')
        if args.chunks > args.instances:
            parser.error(f'--chunks {args.chunks} exceeds --instances '
                         f'{args.instances}')
    elif args.instances < 2 * args.batch_size:
        parser.error(f'--instances {args.instances} gives fewer than 2 '
                     f'batches of --batch-size {args.batch_size}')


def _source(parser, args):
    if args.data is not None:
        return args.data
    schedule = None
    try:
        if args.vary:
            schedule = RangeSchedule.preset(args.vary)
        elif args.schedule:
            schedule = parse_schedule(args.schedule)
        return SeaConfig(n_instances=args.instances, schedule=schedule)
    except ValueError as exc:
        parser.error(str(exc))


def _base_config(parser, args, source):
    try:
        return RunConfig(source=source, batch_size=args.batch_size, k=args.k,
                         spec=DistanceSpec(getattr(args, 'distance',
                                                   DistanceKind.EUCLIDEAN),
                                           args.p),
                         policy=getattr(args, 'norm',
                                        NormalizationPolicy.ORIGINAL),
                         retrain=args.mode, trials=args.trials,
                         base_seed=args.seed, label_column=args.label_col,
                         has_header=args.header)
    except ValueError as exc:
        parser.error(str(exc))


def _write(text, out):
    if out is None:
        sys.stdout.write(text)
        return
    with open(out, 'w') as fo:
        fo.write(text)
    logger.info('wrote %s', out)


def _configure_logging(verbosity):
    level = {0: logging.WARNING, 1: logging.INFO}.get(verbosity,
                                                       logging.DEBUG)
    logging.basicConfig(level=level, stream=sys.stderr,
                        format='%(levelname)s %(name)s: %(message)s')
    logging.getLogger().setLevel(level)


def _run(parser, args):
    config = _base_config(parser, args, _source(parser, args))
    result = run_experiment(config, n_jobs=args.jobs)
    return emit_csv(result) if args.format == 'csv' else emit_json(result)


def _sweep(parser, args):
    base = _base_config(parser, args, _source(parser, args))
    specs = [DistanceSpec(kind, args.p) for kind in dict.fromkeys(
        args.distances)]
    configs = grid_configs(base, specs, list(dict.fromkeys(args.norms)))
    logger.info('sweeping %d configurations', len(configs))
    results = sweep(configs, n_jobs=args.jobs)
    if args.format == 'csv':
        return emit_grid_csv(results)
    return emit_json(results)


def _boxplot(parser, args):
    source = _source(parser, args)
    if isinstance(source, SeaConfig):
        dataset = generate_sea(SeaConfig(source.n_instances, args.seed,
                                         schedule=source.schedule))
    else:
        dataset = impute_missing(load_dataset(
            source, label_column=args.label_col, has_header=args.header))
    feature = args.feature
    if feature is None:
        feature = report.top_std_feature(dataset)
        logger.info('feature %d has the highest standard deviation', feature)
    stats = report.boxplot_stats(dataset, feature, args.chunks)
    return emit_boxplot(stats, feature, args.format)


def _tables(parser, args):
    return emit_tables(report.load_grids(args.grids), args.format)


COMMANDS = {'run': _run, 'sweep': _sweep, 'boxplot': _boxplot,
            'tables': _tables}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        _configure_logging(args.verbose)
        _check_arguments(parser, args)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2

    try:
        text = COMMANDS[args.command](parser, args)
        _write(text, args.out)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    except (ValueError, OSError) as exc:
        logger.error('%s', exc)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
