# Copyright (C) 2025 Cody Messick
#
# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at https://mozilla.org/MPL/2.0/.
#
# SPDX-License-Identifier: MPL-2.0

"""Min-max scaling and the four policies deciding which data fits it."""

import enum
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from knnstream_data import Batch, as_arrays
from knnstream_distance import DimensionMismatchError


class NormalizationPolicy(str, enum.Enum):
    ORIGINAL = 'none'
    FIRST_BATCH = 'first'
    PREVIOUS_BATCH = 'previous'
    FULL_STREAM = 'full'

    @property
    def label(self):
        return _LABELS[self]

    @property
    def leaks(self):
        return self is NormalizationPolicy.FULL_STREAM


_LABELS = {
    NormalizationPolicy.ORIGINAL: 'Original',
    NormalizationPolicy.FIRST_BATCH: 'First Batch',
    NormalizationPolicy.PREVIOUS_BATCH: 'Previous Batch',
    NormalizationPolicy.FULL_STREAM: 'Full',
}
POLICY_ORDER = tuple(_LABELS)


@dataclass(frozen=True, eq=False)
class ScalerModel:
    """Per-feature minima and maxima plus where they came from.

    ``fitted_on`` is one of ``first_batch``, ``previous_batch``,
    ``full_stream`` or ``instances``; ``batch_index`` names the batch for
    the batch-fitted ones.
    """
    mins: np.ndarray
    maxs: np.ndarray
    fitted_on: str = 'instances'
    batch_index: Optional[int] = None

    @property
    def feature_count(self):
        return self.mins.shape[0]


class ScaledViews(NamedTuple):
    train: Batch
    test: Batch
    scaler: Optional[ScalerModel]
    leakage: bool


def fit_minmax(instances, fitted_on='instances', batch_index=None):
    X, _ = as_arrays(instances)
    if X.shape[0] == 0:
        raise ValueError('cannot fit a min-max scaler on no instances')
    mins = X.min(axis=0)
    maxs = X.max(axis=0)
    mins.setflags(write=False)
    maxs.setflags(write=False)
    return ScalerModel(mins, maxs, fitted_on, batch_index)


def transform(model, instances):
    """Map each feature through (x - min) / (max - min).

    Values outside the fitted range land outside [0, 1]; they are not
    clamped. A constant feature (max == min) maps to 0.
    """
    X = instances if isinstance(instances, np.ndarray) else \
        as_arrays(instances)[0]
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if X.shape[1] != model.feature_count:
        raise DimensionMismatchError(f'scaler fitted on '
                                     f'{model.feature_count} features, got '
                                     f'{X.shape[1]}')
    span = model.maxs - model.mins
    return np.divide(X - model.mins, span, out=np.zeros_like(X),
                     where=span != 0)


def transform_batch(model, batch):
    if model is None:
        return batch
    return batch.with_features(transform(model, batch.X))


class StreamNormalizer:
    """Builds the normalised training and test views of a batch stream.

    Scalers fitted on a fixed part of the stream (first batch, full stream)
    are fitted once and reused for every step.
    """

    def __init__(self, policy, batches):
        self.policy = NormalizationPolicy(policy)
        self.batches = list(batches)
        if not self.batches:
            raise ValueError('cannot normalise an empty stream')
        self._fixed_scaler = None
        if self.policy is NormalizationPolicy.FIRST_BATCH:
            self._fixed_scaler = fit_minmax(self.batches[0], 'first_batch',
                                            self.batches[0].index)
        elif self.policy is NormalizationPolicy.FULL_STREAM:
            X = np.vstack([batch.X for batch in self.batches])
            self._fixed_scaler = fit_minmax(X, 'full_stream')

    def scaler_for(self, t):
        if self.policy is NormalizationPolicy.PREVIOUS_BATCH:
            previous = self.batches[t - 2]
            return fit_minmax(previous, 'previous_batch', previous.index)
        return self._fixed_scaler

    def views(self, t):
        if not 2 <= t <= len(self.batches):
            raise ValueError(f'step {t} outside 2..{len(self.batches)}')
        scaler = self.scaler_for(t)
        return ScaledViews(transform_batch(scaler, self.batches[t - 2]),
                           transform_batch(scaler, self.batches[t - 1]),
                           scaler, self.policy.leaks)


def prepare_views(policy, batches, t):
    return StreamNormalizer(policy, batches).views(t)
