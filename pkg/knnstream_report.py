# Copyright (C) 2025 Cody Messick
#
# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at https://mozilla.org/MPL/2.0/.
#
# SPDX-License-Identifier: MPL-2.0

"""Accuracy grids, the tables aggregated from them, and per-chunk feature
statistics for box plots."""

import logging
from dataclasses import dataclass
from decimal import ROUND_HALF_EVEN, Decimal
from typing import Tuple

import numpy as np
import pandas as pd
from matplotlib import cbook

from knnstream_data import as_arrays
from knnstream_distance import TABLE_ORDER, DistanceKind
from knnstream_scaling import POLICY_ORDER, NormalizationPolicy

logger = logging.getLogger(__name__)

RECORD_COLUMNS = ['dataset', 'distance', 'policy', 'accuracy']
# Two aggregates closer than this are treated as a tie
TIE_TOLERANCE = 1e-12
WHISKER_REACH = 1.5


class GridValidationError(ValueError):
    """Raised for accuracy grids that are incomplete or hold values outside
    [0, 1]."""


def _ordered(tokens, order, enum_type, what):
    try:
        members = {enum_type(token) for token in tokens}
    except ValueError as exc:
        raise GridValidationError(f'unknown {what}: {exc}') from None
    return [member.value for member in order if member in members]


@dataclass(frozen=True, eq=False)
class AccuracyGrid:
    """Grand-mean accuracies of one dataset.

    ``cells`` is indexed by distance kind values (table row order) with one
    column per normalization policy value.
    """
    cells: pd.DataFrame
    dataset_name: str = 'dataset'

    def __post_init__(self):
        cells = self.cells
        rows = _ordered(cells.index, TABLE_ORDER, DistanceKind, 'distance')
        columns = _ordered(cells.columns, POLICY_ORDER, NormalizationPolicy,
                           'normalization policy')
        if len(rows) != len(cells.index) or \
                len(columns) != len(cells.columns):
            raise GridValidationError(f'{self.dataset_name}: duplicated '
                                      'rows or columns')
        cells = cells.loc[rows, columns].astype(float)
        if cells.empty:
            raise GridValidationError(f'{self.dataset_name}: empty grid')
        if cells.isna().any().any():
            raise GridValidationError(f'{self.dataset_name}: grid has '
                                      'missing cells')
        outside = (cells < 0) | (cells > 1)
        if outside.any().any():
            row, column = np.argwhere(outside.to_numpy())[0]
            distance, policy = cells.index[row], cells.columns[column]
            raise GridValidationError(
                f'{self.dataset_name}: accuracy {cells.loc[distance, policy]}'
                f' for {distance}/{policy} is outside [0, 1]')
        object.__setattr__(self, 'cells', cells)

    @property
    def distances(self):
        return [DistanceKind(value) for value in self.cells.index]

    @property
    def policies(self):
        return [NormalizationPolicy(value) for value in self.cells.columns]

    def scored_columns(self):
        """Cells without the leaking full-stream column."""
        return self.cells.drop(columns=NormalizationPolicy.FULL_STREAM.value,
                               errors='ignore')

    @classmethod
    def from_results(cls, results, dataset_name='dataset'):
        records = pd.DataFrame(
            [(dataset_name, result.config.spec.kind.value,
              result.config.policy.value, result.grand_mean)
             for result in results], columns=RECORD_COLUMNS)
        grids = cls.from_records(records)
        if not grids:
            raise GridValidationError('no results to tabulate')
        return grids[0]

    @classmethod
    def from_records(cls, frame):
        """One grid per dataset of a long-format frame, in order of first
        appearance."""
        missing = set(RECORD_COLUMNS) - set(frame.columns)
        if missing:
            raise GridValidationError(f'records lack columns '
                                      f'{sorted(missing)}')
        duplicated = frame.duplicated(subset=RECORD_COLUMNS[:3])
        if duplicated.any():
            row = frame[duplicated].iloc[0]
            raise GridValidationError(
                f'{row.dataset}: more than one accuracy for '
                f'{row.distance}/{row.policy}')
        grids = []
        for name in pd.unique(frame['dataset']):
            subset = frame[frame['dataset'] == name]
            cells = subset.pivot_table(index='distance', columns='policy',
                                       values='accuracy', aggfunc='first')
            grids.append(cls(cells, str(name)))
        return grids


def load_grids(path):
    return AccuracyGrid.from_records(pd.read_csv(path))


def grids_to_records(grids):
    frames = []
    for grid in grids:
        long = grid.cells.reset_index(names='distance').melt(
            id_vars='distance', var_name='policy', value_name='accuracy')
        long.insert(0, 'dataset', grid.dataset_name)
        frames.append(long)
    if not frames:
        return pd.DataFrame(columns=RECORD_COLUMNS)
    return pd.concat(frames, ignore_index=True)


def column_means(grid):
    """The Average row: mean accuracy of every column over the distances."""
    return grid.cells.mean(axis=0)


def _winners(values):
    return values.index[np.isclose(values.to_numpy(), values.max(),
                                   rtol=0, atol=TIE_TOLERANCE)]


def _require(grids):
    grids = list(grids)
    if not grids:
        raise GridValidationError('no accuracy grids given')
    return grids


def victories_by_normalization(grids):
    """Per dataset, credit the non-leaking policy with the best column
    average; tied policies are all credited."""
    grids = _require(grids)
    counted = [policy.value for policy in POLICY_ORDER if not policy.leaks]
    counts = pd.Series(0, index=counted, dtype=int)
    for grid in grids:
        averages = column_means(grid).drop(
            NormalizationPolicy.FULL_STREAM.value, errors='ignore')
        if averages.empty:
            continue
        for policy in _winners(averages):
            counts[policy] += 1
    counts.index.name = 'policy'
    return counts


def victories_by_distance(grids):
    """Credit every distance reaching the maximum of a (dataset, policy)
    column, full-stream columns excluded."""
    grids = _require(grids)
    counts = pd.Series(0, index=[kind.value for kind in TABLE_ORDER],
                       dtype=int)
    for grid in grids:
        for _, column in grid.scored_columns().items():
            for distance in _winners(column):
                counts[distance] += 1
    present = set().union(*(grid.cells.index for grid in grids))
    counts = counts[[value for value in counts.index if value in present]]
    counts.index.name = 'distance'
    return counts


def mean_by_distance(grid):
    """Average accuracy of every distance over the non-leaking policies."""
    scored = grid.scored_columns()
    if scored.columns.empty:
        raise GridValidationError(f'{grid.dataset_name}: only the full-stream '
                                  'column is present')
    return scored.mean(axis=1)


def mean_by_distance_table(grids):
    grids = _require(grids)
    table = pd.concat({grid.dataset_name: mean_by_distance(grid)
                       for grid in grids}, axis=1)
    order = [kind.value for kind in TABLE_ORDER if kind.value in table.index]
    return table.loc[order]


def round3(value):
    """Round for display to three decimals, ties to even."""
    return float(Decimal(repr(float(value))).quantize(
        Decimal('0.001'), rounding=ROUND_HALF_EVEN))


def _fmt(value):
    return f"{round3(value):.3f}"


def _display(frame):
    return frame.rename(index=lambda v: DistanceKind(v).label,
                        columns=lambda v: NormalizationPolicy(v).label)


def format_grid(grid):
    table = grid.cells.copy()
    table = _display(table)
    table.loc['Average'] = column_means(grid).to_numpy()
    return f"{grid.dataset_name}\n" + table.to_string(float_format=_fmt)


def format_counts(counts, title):
    """Two-column victory table."""
    if counts.index.name == 'policy':
        labels = [NormalizationPolicy(v).label for v in counts.index]
    else:
        labels = [DistanceKind(v).label for v in counts.index]
    width = max([len(title)] + [len(label) for label in labels])
    lines = [f'{title:<{width}}  Victories']
    lines += [f'{label:<{width}}  {count:>9d}'
              for label, count in zip(labels, counts.to_numpy())]
    return '\n'.join(lines)


def format_mean_table(table):
    shown = table.rename(index=lambda v: DistanceKind(v).label)
    return shown.to_string(float_format=_fmt)


@dataclass(frozen=True)
class BoxStats:
    batch_index: int
    median: float
    q1: float
    q3: float
    whisker_low: float
    whisker_high: float
    outliers: Tuple[float, ...]

    def to_dict(self):
        return {
            'batch_index': self.batch_index,
            'median': self.median,
            'q1': self.q1,
            'q3': self.q3,
            'whisker_low': self.whisker_low,
            'whisker_high': self.whisker_high,
            'outliers': list(self.outliers),
        }


def chunk_bounds(n_rows, n_chunks):
    """Equal contiguous chunks; the last one takes the remainder."""
    size = n_rows // n_chunks
    starts = [i * size for i in range(n_chunks)]
    ends = starts[1:] + [n_rows]
    return list(zip(starts, ends))


def boxplot_stats(dataset, feature_index, n_chunks=10):
    r'''Tukey box-plot statistics of one feature, chunk by chunk.

    Parameters
    ----------
    dataset : Dataset or array
        The stream, in arrival order.
    feature_index : int
        Column to summarise.
    n_chunks : int
        Number of contiguous chunks, numbered from 1.

    Returns
    -------
    list of BoxStats
        Quartiles are linearly interpolated; whiskers stop at the most
        extreme values within 1.5 IQR of the quartiles, anything beyond is
        an outlier.
    '''
    X, _ = as_arrays(dataset)
    if X.shape[0] == 0:
        raise ValueError('cannot summarise an empty dataset')
    if n_chunks < 1:
        raise ValueError(f'n_chunks must be at least 1, got {n_chunks}')
    if X.shape[0] < n_chunks:
        raise ValueError(f'{X.shape[0]} instances cannot fill {n_chunks} '
                         'chunks')
    if not 0 <= feature_index < X.shape[1]:
        raise ValueError(f'feature index {feature_index} outside '
                         f'0..{X.shape[1] - 1}')

    column = X[:, feature_index]
    stats = []
    for index, (start, end) in enumerate(chunk_bounds(len(column), n_chunks),
                                         start=1):
        chunk = column[start:end]
        chunk = chunk[~np.isnan(chunk)]
        summary = cbook.boxplot_stats(chunk, whis=WHISKER_REACH)[0]
        stats.append(BoxStats(index, float(summary['med']),
                              float(summary['q1']), float(summary['q3']),
                              float(summary['whislo']),
                              float(summary['whishi']),
                              tuple(sorted(float(v)
                                           for v in summary['fliers']))))
    logger.debug('box statistics for feature %d over %d chunks',
                 feature_index, n_chunks)
    return stats


def top_std_feature(dataset):
    """Feature with the largest sample standard deviation, lowest index on
    ties."""
    X, _ = as_arrays(dataset)
    if X.shape[0] == 0:
        raise ValueError('cannot rank the features of an empty dataset')
    if X.shape[0] < 2:
        return 0
    stds = np.nan_to_num(np.nanstd(X, axis=0, ddof=1))
    return int(np.argmax(stds))
