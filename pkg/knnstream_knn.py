# Copyright (C) 2025 Cody Messick
#
# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at https://mozilla.org/MPL/2.0/.
#
# SPDX-License-Identifier: MPL-2.0

"""k-nearest-neighbour classifier over a stored training batch."""

from dataclasses import dataclass

import numpy as np

from knnstream_data import Instance, as_arrays
from knnstream_distance import (DimensionMismatchError, DistanceModel,
                                DistanceSpec, fit_distance_model, pairwise)

DEFAULT_K = 3
# Queries scored per distance matrix
QUERY_CHUNK = 2048


@dataclass(frozen=True, eq=False)
class KnnModel:
    X: np.ndarray
    y: np.ndarray
    k: int
    spec: DistanceSpec
    dist_model: DistanceModel

    @property
    def training(self):
        return [Instance(features, label)
                for features, label in zip(self.X, self.y)]

    def __len__(self):
        return self.X.shape[0]


def fit(training, k=DEFAULT_K, spec=DistanceSpec()):
    """Store the training instances and fit the distance model on them."""
    X, y = as_arrays(training)
    if y is None:
        raise ValueError('training instances need labels')
    if k < 1:
        raise ValueError(f'k must be at least 1, got {k}')
    if X.shape[0] < k:
        raise ValueError(f'{X.shape[0]} training instances are fewer than '
                         f'k={k}')
    X = np.array(X, dtype=np.float64)
    y = np.array(y)
    X.setflags(write=False)
    y.setflags(write=False)
    return KnnModel(X, y, k, spec, fit_distance_model(spec, X))


def _queries(model, queries):
    Q = np.asarray(queries, dtype=np.float64)
    if Q.ndim == 1:
        Q = Q.reshape(1, -1)
    if Q.shape[1] != model.X.shape[1]:
        raise DimensionMismatchError(f'model trained on {model.X.shape[1]} '
                                     f'features, query has {Q.shape[1]}')
    return Q


def _nearest(D, k):
    # k smallest per row ordered by (distance, training index)
    candidates = np.argpartition(D, k - 1, axis=1)[:, :k]
    candidate_d = np.take_along_axis(D, candidates, axis=1)
    kth = candidate_d.max(axis=1)
    order = np.lexsort((candidates, candidate_d), axis=1)
    nearest = np.take_along_axis(candidates, order, axis=1)

    # ties straddling the k-th distance may have been resolved towards a
    # higher index by argpartition
    ambiguous = np.flatnonzero((D <= kth[:, None]).sum(axis=1) > k)
    if ambiguous.size:
        nearest[ambiguous] = np.argsort(D[ambiguous], axis=1,
                                        kind='stable')[:, :k]
    return nearest


def neighbors(model, queries):
    """Indices of the ``k`` nearest training rows for every query row."""
    Q = _queries(model, queries)
    k = model.k
    if Q.shape[0] == 0:
        return np.empty((0, k), dtype=np.intp)
    return np.vstack([_nearest(pairwise(model.dist_model,
                                        Q[start:start + QUERY_CHUNK],
                                        model.X), k)
                      for start in range(0, Q.shape[0], QUERY_CHUNK)])


def _vote(neighbor_labels, k):
    # majority vote; a tied vote goes to the tied label met first in
    # neighbour order
    classes, codes = np.unique(neighbor_labels, return_inverse=True)
    codes = codes.reshape(neighbor_labels.shape)
    hits = codes[:, :, None] == np.arange(len(classes))[None, None, :]
    counts = hits.sum(axis=1)
    first_seen = np.where(hits.any(axis=1), hits.argmax(axis=1), k)
    score = counts * (k + 1) + (k - first_seen)
    return classes[score.argmax(axis=1)]


def predict_batch(model, batch):
    if hasattr(batch, 'X'):
        X = batch.X
    elif len(batch) and isinstance(batch[0], Instance):
        X = as_arrays(batch)[0]
    else:
        X = batch
    Q = _queries(model, X) if len(X) else np.empty((0, model.X.shape[1]))
    if Q.shape[0] == 0:
        return model.y[:0].copy()
    return _vote(model.y[neighbors(model, Q)], model.k)


def predict(model, x):
    return predict_batch(model, np.atleast_2d(x))[0]


def accuracy(predicted, actual):
    predicted = np.asarray(predicted)
    actual = np.asarray(actual)
    if predicted.shape != actual.shape:
        raise DimensionMismatchError(f'{predicted.size} predictions for '
                                     f'{actual.size} labels')
    if actual.size == 0:
        raise ValueError('accuracy of an empty batch is undefined')
    return float(np.mean(predicted == actual))
