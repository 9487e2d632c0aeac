# Copyright (C) 2025 Cody Messick
#
# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at https://mozilla.org/MPL/2.0/.
#
# SPDX-License-Identifier: MPL-2.0

"""Datasets, the SEA generator with range drift, CSV/ARFF ingestion,
whole-dataset mean imputation and batching."""

import logging
import os
import re
import warnings
from dataclasses import dataclass
from typing import NamedTuple, Optional, Tuple

import numpy as np
import pandas as pd
from scipy.io import arff

logger = logging.getLogger(__name__)

MISSING_TOKENS = ('', '?')
SEA_CLASSES = ('negative', 'positive')
SEA_FEATURES = 3

# Range drift used in the synthetic experiments: untouched for the first
# 10,000 instances, then x10, x100 and x1000 for each following 10,000.
DRIFT_SEGMENTS = (
    (10001, 20000, 10.0),
    (20001, 30000, 100.0),
    (30001, 40000, 1000.0),
)
DRIFT_PRESETS = {'f1': 0, 'f3': 2}


class DatasetFormatError(ValueError):
    """Raised when an input file cannot be turned into a Dataset."""


class Instance(NamedTuple):
    features: np.ndarray
    label: int


def _frozen_array(values, dtype):
    array = np.array(values, dtype=dtype, copy=True)
    array.setflags(write=False)
    return array


@dataclass(frozen=True, eq=False)
class Dataset:
    """An ordered stream of labelled instances.

    ``X`` holds one row per instance (NaN marks a missing cell until
    :func:`impute_missing` runs) and ``y`` holds dense class ids indexing
    into ``classes``. Row order is arrival order.
    """
    X: np.ndarray
    y: np.ndarray
    classes: Tuple[str, ...]
    name: str = 'dataset'

    def __post_init__(self):
        X = _frozen_array(self.X, np.float64)
        y = _frozen_array(self.y, np.int64)
        if X.ndim != 2:
            raise ValueError(f'features must be a 2-D matrix, got shape '
                             f'{X.shape}')
        if y.shape != (X.shape[0],):
            raise ValueError(f'{y.shape[0] if y.ndim else 0} labels for '
                             f'{X.shape[0]} instances')
        classes = tuple(str(c) for c in self.classes)
        if len(classes) == 0:
            raise ValueError('a dataset needs at least one class')
        if len(y) and (y.min() < 0 or y.max() >= len(classes)):
            raise ValueError(f'label ids must lie in [0, {len(classes)})')
        object.__setattr__(self, 'X', X)
        object.__setattr__(self, 'y', y)
        object.__setattr__(self, 'classes', classes)

    def __len__(self):
        return self.X.shape[0]

    def __iter__(self):
        for features, label in zip(self.X, self.y):
            yield Instance(features, int(label))

    @property
    def feature_count(self):
        return self.X.shape[1]

    @property
    def class_count(self):
        return len(self.classes)

    @property
    def instances(self):
        return list(self)

    @property
    def has_missing(self):
        return bool(np.isnan(self.X).any())

    def class_names(self, ids):
        return [self.classes[int(i)] for i in ids]


@dataclass(frozen=True, eq=False)
class Batch:
    """A contiguous slice of a stream; ``index`` is 1-based."""
    index: int
    X: np.ndarray
    y: np.ndarray

    def __len__(self):
        return self.X.shape[0]

    @property
    def instances(self):
        return [Instance(features, int(label))
                for features, label in zip(self.X, self.y)]

    def with_features(self, X):
        return Batch(self.index, X, self.y)


class RangeSegment(NamedTuple):
    start: int
    end: int
    multiplier: float


@dataclass(frozen=True)
class RangeSchedule:
    """Multiplies one feature over ranges of 1-based instance positions."""
    feature_index: int
    segments: Tuple[RangeSegment, ...] = ()

    def __post_init__(self):
        segments = tuple(RangeSegment(int(s), int(e), float(m))
                         for s, e, m in self.segments)
        if self.feature_index < 0:
            raise ValueError(f'feature index {self.feature_index} is '
                             'negative')
        previous_end = 0
        for segment in segments:
            if segment.start < 1 or segment.end < segment.start:
                raise ValueError(f'invalid segment bounds {segment.start}..'
                                 f'{segment.end}')
            if segment.start <= previous_end:
                raise ValueError('segments must be sorted and disjoint, '
                                 f'{segment.start} overlaps {previous_end}')
            if not np.isfinite(segment.multiplier) or \
                    segment.multiplier <= 0:
                raise ValueError(f'multiplier {segment.multiplier} must be '
                                 'strictly positive')
            previous_end = segment.end
        object.__setattr__(self, 'segments', segments)

    @classmethod
    def preset(cls, name):
        if name not in DRIFT_PRESETS:
            raise ValueError(f'unknown drift preset {name!r}, expected one '
                             f'of {sorted(DRIFT_PRESETS)}')
        return cls(DRIFT_PRESETS[name], DRIFT_SEGMENTS)

    def multipliers(self, n_instances):
        factors = np.ones(n_instances)
        for start, end, multiplier in self.segments:
            factors[start - 1:min(end, n_instances)] = multiplier
        return factors


@dataclass(frozen=True)
class SeaConfig:
    n_instances: int = 40000
    seed: int = 0
    threshold: float = 8.0
    feature_range: Tuple[float, float] = (0.0, 10.0)
    schedule: Optional[RangeSchedule] = None

    def __post_init__(self):
        low, high = self.feature_range
        if not low < high:
            raise ValueError(f'feature range low {low} must be below high '
                             f'{high}')
        if self.n_instances <= 0:
            raise ValueError(f'n_instances must be positive, got '
                             f'{self.n_instances}')
        if (self.schedule is not None and
                self.schedule.feature_index >= SEA_FEATURES):
            raise ValueError(f'SEA has {SEA_FEATURES} features, schedule '
                             f'targets index {self.schedule.feature_index}')
        object.__setattr__(self, 'feature_range', (float(low), float(high)))

    @property
    def name(self):
        if self.schedule is None:
            return 'sea'
        return f'sea-f{self.schedule.feature_index + 1}'


def generate_sea(config):
    r'''Generate a SEA concepts stream.

    Parameters
    ----------
    config : SeaConfig
        Stream length, seed, threshold, feature range and optional range
        drift schedule.

    Labels are decided on the raw draws (positive when f1 + f2 <= threshold)
    and only afterwards does the schedule rescale the designated feature, so
    drift never changes the concept.
    '''
    rng = np.random.default_rng(config.seed)
    low, high = config.feature_range
    X = rng.uniform(low, high, size=(config.n_instances, SEA_FEATURES))
    y = (X[:, 0] + X[:, 1] <= config.threshold).astype(np.int64)
    if config.schedule is not None:
        column = config.schedule.feature_index
        X[:, column] *= config.schedule.multipliers(config.n_instances)
    return Dataset(X, y, SEA_CLASSES, name=config.name)


def _intern_labels(labels):
    codes, uniques = pd.factorize(pd.Series(labels, dtype=object),
                                  sort=False)
    return codes.astype(np.int64), tuple(str(u) for u in uniques)


def _resolve_label_column(label_column, columns, has_header=False):
    # a header name wins over the same text read as an index
    if has_header and str(label_column) in list(columns):
        return list(columns).index(str(label_column))
    if isinstance(label_column, str) and not label_column.lstrip(
            '-').isdigit():
        if label_column not in columns:
            raise DatasetFormatError(f'label column {label_column!r} not in '
                                     f'header {list(columns)}')
        return list(columns).index(label_column)
    index = int(label_column)
    width = len(columns)
    if not -width <= index < width:
        raise DatasetFormatError(f'label column {index} out of range for '
                                 f'{width} columns')
    return index % width


def load_csv(path, label_column=-1, has_header=False, name=None):
    """
    Read a comma separated file into a Dataset.

    Args:
        path: CSV file path
        label_column: column index (negative counts from the end) or, with
            a header, the column name
        has_header: first line holds column names
        name: dataset name, defaults to the file stem

    Empty cells and "?" become missing markers (NaN). Row and column numbers
    in error messages are 0-based data rows and file columns.
    """
    try:
        frame = pd.read_csv(path, header=0 if has_header else None,
                            dtype=str, keep_default_na=False,
                            skipinitialspace=True)
    except pd.errors.EmptyDataError as exc:
        raise DatasetFormatError(f'{path}: no data') from exc
    except pd.errors.ParserError as exc:
        raise DatasetFormatError(f'{path}: ragged rows ({exc})') from exc
    except UnicodeDecodeError as exc:
        raise DatasetFormatError(f'{path}: not valid UTF-8 ({exc})') from exc
    if frame.empty:
        raise DatasetFormatError(f'{path}: no data rows')

    # keep_default_na=False keeps empty cells as '', so NaN only appears
    # where a row was short
    short_rows = frame.isna().any(axis=1).to_numpy()
    if short_rows.any():
        row = int(np.flatnonzero(short_rows)[0])
        raise DatasetFormatError(f'{path}: ragged row {row}, expected '
                                 f'{frame.shape[1]} fields')

    label_index = _resolve_label_column(label_column, frame.columns,
                                        has_header)
    cells = frame.apply(lambda column: column.str.strip())
    labels = cells.iloc[:, label_index]
    if (labels == '').any():
        row = int(np.flatnonzero((labels == '').to_numpy())[0])
        raise DatasetFormatError(f'{path}: missing label at row {row}')

    feature_columns = [i for i in range(cells.shape[1]) if i != label_index]
    X = np.empty((len(cells), len(feature_columns)))
    for j, column in enumerate(feature_columns):
        raw = cells.iloc[:, column]
        missing = raw.isin(MISSING_TOKENS).to_numpy()
        values = pd.to_numeric(raw.where(~raw.isin(MISSING_TOKENS)),
                               errors='coerce').to_numpy(dtype=np.float64)
        bad = ~missing & ~np.isfinite(values)
        if bad.any():
            row = int(np.flatnonzero(bad)[0])
            raise DatasetFormatError(
                f'{path}: cannot parse {raw.iloc[row]!r} as a number at row '
                f'{row}, column {column}')
        X[:, j] = np.where(missing, np.nan, values)

    y, classes = _intern_labels(labels.tolist())
    if name is None:
        name = os.path.splitext(os.path.basename(str(path)))[0]
    logger.info('loaded %s: %d instances, %d features, %d classes', name,
                len(y), X.shape[1], len(classes))
    return Dataset(X, y, classes, name=name)


_DATA_MARKER = re.compile(r'^\s*@data\b', re.IGNORECASE)


def _check_dense_arff(path):
    try:
        with open(path, 'r', encoding='utf-8') as fo:
            in_data = False
            for line in fo:
                stripped = line.strip()
                if not stripped or stripped.startswith('%'):
                    continue
                if in_data:
                    if stripped.startswith('{'):
                        raise DatasetFormatError(
                            f'{path}: sparse ARFF data is not supported')
                    return
                in_data = bool(_DATA_MARKER.match(stripped))
    except UnicodeDecodeError as exc:
        raise DatasetFormatError(f'{path}: not valid UTF-8 ({exc})') from exc


def _decode(value):
    return value.decode() if isinstance(value, bytes) else str(value)


def load_arff(path, name=None):
    """Read a dense ARFF file with numeric features and one nominal class.

    The class is the attribute named "class" (any case) when present,
    otherwise the last attribute. "?" marks a missing value.
    """
    _check_dense_arff(path)
    try:
        data, meta = arff.loadarff(path)
    except (arff.ArffError, ValueError, NotImplementedError) as exc:
        raise DatasetFormatError(f'{path}: {exc}') from exc

    names = list(meta.names())
    types = list(meta.types())
    for attribute, kind in zip(names, types):
        if kind not in ('numeric', 'nominal'):
            raise DatasetFormatError(f'{path}: attribute {attribute!r} has '
                                     f'unsupported type {kind!r}')
    lowered = [n.lower() for n in names]
    label_index = lowered.index('class') if 'class' in lowered else \
        len(names) - 1

    columns = []
    for index, (attribute, kind) in enumerate(zip(names, types)):
        if index == label_index:
            continue
        if kind != 'numeric':
            raise DatasetFormatError(f'{path}: nominal feature '
                                     f'{attribute!r} is not supported')
        columns.append(np.asarray(data[attribute], dtype=np.float64))
    X = np.column_stack(columns) if columns else np.empty((len(data), 0))

    raw_labels = [_decode(v) for v in data[names[label_index]]]
    if types[label_index] == 'numeric':
        raw_labels = ['?' if np.isnan(float(v)) else f'{float(v):g}'
                      for v in raw_labels]
    if '?' in raw_labels:
        raise DatasetFormatError(f'{path}: missing label at row '
                                 f'{raw_labels.index("?")}')
    if not raw_labels:
        raise DatasetFormatError(f'{path}: no data rows')
    y, classes = _intern_labels(raw_labels)
    name = name or meta.name or os.path.splitext(os.path.basename(path))[0]
    logger.info('loaded %s: %d instances, %d features, %d classes', name,
                len(y), X.shape[1], len(classes))
    return Dataset(X, y, classes, name=name)


def load_dataset(path, label_column=-1, has_header=False):
    if str(path).lower().endswith('.arff'):
        return load_arff(path)
    return load_csv(path, label_column=label_column, has_header=has_header)


def impute_missing(dataset):
    """Replace every missing cell by the mean of its feature over the whole
    dataset; a feature with no present value becomes 0."""
    if not dataset.has_missing:
        return dataset
    X = np.array(dataset.X)
    with warnings.catch_warnings():
        warnings.simplefilter('ignore', category=RuntimeWarning)
        means = np.nanmean(X, axis=0)
    means = np.where(np.isnan(means), 0.0, means)
    rows, cols = np.nonzero(np.isnan(X))
    X[rows, cols] = means[cols]
    logger.info('imputed %d missing cells in %s', len(rows), dataset.name)
    return Dataset(X, dataset.y, dataset.classes, name=dataset.name)


def batchify(dataset, batch_size):
    if batch_size < 1:
        raise ValueError(f'batch size must be at least 1, got {batch_size}')
    if len(dataset) == 0:
        raise ValueError(f'dataset {dataset.name!r} is empty')
    return [Batch(i + 1, dataset.X[start:start + batch_size],
                  dataset.y[start:start + batch_size])
            for i, start in enumerate(range(0, len(dataset), batch_size))]


def as_arrays(training):
    """Return ``(X, y)`` for a Dataset, a Batch or a sequence of Instance."""
    if isinstance(training, (Dataset, Batch)):
        return training.X, training.y
    if isinstance(training, np.ndarray):
        return np.atleast_2d(training), None
    instances = list(training)
    if not instances:
        return np.empty((0, 0)), np.empty(0, dtype=np.int64)
    X = np.vstack([np.asarray(i.features, dtype=np.float64)
                   for i in instances])
    y = np.asarray([i.label for i in instances])
    return X, y
