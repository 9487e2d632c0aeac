# Copyright (C) 2025 Cody Messick
#
# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at https://mozilla.org/MPL/2.0/.
#
# SPDX-License-Identifier: MPL-2.0

"""The eight distance kernels and the statistics Mahalanobis and
Standardized Euclidean need."""

import enum
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import linalg
from scipy.spatial.distance import cdist

from knnstream_data import as_arrays

logger = logging.getLogger(__name__)

DEFAULT_P = 1.5
VARIANCE_FLOOR = 1e-12
RIDGE_FACTOR = 1e-6


class DimensionMismatchError(ValueError):
    """Raised when two operands disagree on the number of features."""


class DistanceKind(str, enum.Enum):
    EUCLIDEAN = 'euclidean'
    MANHATTAN = 'manhattan'
    CHEBYSHEV = 'chebyshev'
    MINKOWSKI = 'minkowski'
    COSINE = 'cosine'
    MAHALANOBIS = 'mahalanobis'
    STD_EUCLIDEAN = 'stdeuclidean'
    CANBERRA = 'canberra'

    @property
    def label(self):
        return _LABELS[self]

    @property
    def needs_fit(self):
        return self in (DistanceKind.MAHALANOBIS, DistanceKind.STD_EUCLIDEAN)


# Row order and names of the published accuracy tables
_LABELS = {
    DistanceKind.EUCLIDEAN: 'Euclidean',
    DistanceKind.MANHATTAN: 'Manhattan',
    DistanceKind.COSINE: 'Cosine',
    DistanceKind.CHEBYSHEV: 'Chebyshev',
    DistanceKind.MAHALANOBIS: 'Mahalanobis',
    DistanceKind.STD_EUCLIDEAN: 'Std. Eucl.',
    DistanceKind.MINKOWSKI: 'Minkowski',
    DistanceKind.CANBERRA: 'Canberra',
}
TABLE_ORDER = tuple(_LABELS)


@dataclass(frozen=True)
class DistanceSpec:
    kind: DistanceKind = DistanceKind.EUCLIDEAN
    p: float = DEFAULT_P

    def __post_init__(self):
        object.__setattr__(self, 'kind', DistanceKind(self.kind))
        if not np.isfinite(self.p) or self.p <= 0:
            raise ValueError(f'p must be a positive real, got {self.p}')
        if self.kind is DistanceKind.MINKOWSKI and self.p < 1:
            raise ValueError(f'Minkowski needs p >= 1, got {self.p}')

    def describe(self):
        if self.kind is DistanceKind.MINKOWSKI:
            return f'{self.kind.value}(p={self.p:g})'
        return self.kind.value


@dataclass(frozen=True, eq=False)
class DistanceModel:
    """A DistanceSpec plus whatever it was fitted to.

    ``whitener`` is a factor ``L`` of ``inv_covariance = L @ L.T`` so that
    Mahalanobis distances between rows reduce to Euclidean distances between
    ``rows @ L``.
    """
    spec: DistanceSpec
    inv_covariance: Optional[np.ndarray] = None
    variances: Optional[np.ndarray] = None
    whitener: Optional[np.ndarray] = None

    @property
    def kind(self):
        return self.spec.kind

    @classmethod
    def for_mahalanobis(cls, inv_covariance):
        inv = np.array(inv_covariance, dtype=np.float64)
        if inv.ndim != 2 or inv.shape[0] != inv.shape[1]:
            raise DimensionMismatchError(
                f'inverse covariance must be square, got shape {inv.shape}')
        inv = (inv + inv.T) / 2
        try:
            whitener = linalg.cholesky(inv, lower=True)
        except linalg.LinAlgError:
            logger.warning('inverse covariance is not positive definite, '
                           'falling back to the identity')
            inv = np.eye(inv.shape[0])
            whitener = np.eye(inv.shape[0])
        inv.setflags(write=False)
        whitener.setflags(write=False)
        return cls(DistanceSpec(DistanceKind.MAHALANOBIS), inv_covariance=inv,
                   whitener=whitener)

    @classmethod
    def for_std_euclidean(cls, variances):
        variances = np.maximum(np.array(variances, dtype=np.float64),
                               VARIANCE_FLOOR)
        variances.setflags(write=False)
        return cls(DistanceSpec(DistanceKind.STD_EUCLIDEAN),
                   variances=variances)


def _pair(x, y):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise DimensionMismatchError(f'cannot compare vectors of shape '
                                     f'{x.shape} and {y.shape}')
    return x, y


def _check_model(model, kind, n):
    if model.kind is not kind:
        raise ValueError(f'{kind.value} needs a {kind.value} model, got '
                         f'{model.kind.value}')
    stats = model.inv_covariance if kind is DistanceKind.MAHALANOBIS else \
        model.variances
    if stats.shape[0] != n:
        raise DimensionMismatchError(f'model fitted on {stats.shape[0]} '
                                     f'features, vectors have {n}')


def euclidean(x, y):
    x, y = _pair(x, y)
    return float(np.sqrt(np.sum((x - y) ** 2)))


def manhattan(x, y):
    x, y = _pair(x, y)
    return float(np.sum(np.abs(x - y)))


def chebyshev(x, y):
    x, y = _pair(x, y)
    if x.size == 0:
        return 0.0
    return float(np.max(np.abs(x - y)))


def minkowski(x, y, p=DEFAULT_P):
    if p < 1:
        raise ValueError(f'Minkowski needs p >= 1, got {p}')
    x, y = _pair(x, y)
    diff = np.abs(x - y)
    largest = diff.max() if diff.size else 0.0
    if largest == 0:
        return 0.0
    # scaled by the largest term so large p cannot overflow
    return float(largest * np.sum((diff / largest) ** p) ** (1.0 / p))


def cosine_distance(x, y):
    """1 - cosine similarity; 1 when either vector has zero norm."""
    x, y = _pair(x, y)
    norms = np.linalg.norm(x) * np.linalg.norm(y)
    if norms == 0:
        return 1.0
    similarity = np.clip(np.dot(x, y) / norms, -1.0, 1.0)
    return float(1.0 - similarity)


def mahalanobis(x, y, model):
    x, y = _pair(x, y)
    _check_model(model, DistanceKind.MAHALANOBIS, x.size)
    delta = x - y
    return float(np.sqrt(max(delta @ model.inv_covariance @ delta, 0.0)))


def standardized_euclidean(x, y, model):
    x, y = _pair(x, y)
    _check_model(model, DistanceKind.STD_EUCLIDEAN, x.size)
    return float(np.sqrt(np.sum((x - y) ** 2 / model.variances)))


def canberra(x, y):
    x, y = _pair(x, y)
    denominator = np.abs(x) + np.abs(y)
    numerator = np.abs(x - y)
    terms = np.divide(numerator, denominator,
                      out=np.zeros_like(numerator), where=denominator != 0)
    return float(np.sum(terms))


def _inverse_covariance(X):
    n_rows, n_features = X.shape
    if n_rows < 2:
        return np.eye(n_features)
    covariance = np.atleast_2d(np.cov(X, rowvar=False, ddof=1))
    trace = np.trace(covariance)
    ridge = RIDGE_FACTOR * trace / n_features if trace > 0 else RIDGE_FACTOR
    regularized = covariance + ridge * np.eye(n_features)
    try:
        factor = linalg.cho_factor(regularized, lower=True)
        return linalg.cho_solve(factor, np.eye(n_features))
    except linalg.LinAlgError:
        logger.warning('covariance of %d rows could not be inverted, '
                       'Mahalanobis falls back to Euclidean', n_rows)
        return np.eye(n_features)


def fit_distance_model(spec, training):
    """Fit the statistics ``spec`` needs on the training instances.

    Mahalanobis gets the inverse of the ridge-regularised sample covariance
    (identity for a single instance), Standardized Euclidean the floored
    per-feature sample variance; every other kind is stateless.
    """
    X, _ = as_arrays(training)
    if X.shape[0] == 0:
        raise ValueError('cannot fit a distance model on no instances')
    if spec.kind is DistanceKind.MAHALANOBIS:
        return DistanceModel.for_mahalanobis(_inverse_covariance(X))
    if spec.kind is DistanceKind.STD_EUCLIDEAN:
        if X.shape[0] < 2:
            variances = np.ones(X.shape[1])
        else:
            variances = np.var(X, axis=0, ddof=1)
        return DistanceModel.for_std_euclidean(variances)
    return DistanceModel(spec)


_STATELESS = {
    DistanceKind.EUCLIDEAN: euclidean,
    DistanceKind.MANHATTAN: manhattan,
    DistanceKind.CHEBYSHEV: chebyshev,
    DistanceKind.COSINE: cosine_distance,
    DistanceKind.CANBERRA: canberra,
}


def _as_model(spec_or_model):
    if isinstance(spec_or_model, DistanceModel):
        return spec_or_model
    if spec_or_model.kind.needs_fit:
        raise ValueError(f'{spec_or_model.kind.value} needs a fitted '
                         'DistanceModel, see fit_distance_model')
    return DistanceModel(spec_or_model)


def distance(spec_or_model, x, y):
    model = _as_model(spec_or_model)
    kind = model.kind
    if kind is DistanceKind.MINKOWSKI:
        return minkowski(x, y, model.spec.p)
    if kind is DistanceKind.MAHALANOBIS:
        return mahalanobis(x, y, model)
    if kind is DistanceKind.STD_EUCLIDEAN:
        return standardized_euclidean(x, y, model)
    return _STATELESS[kind](x, y)


def _pairwise_cosine(A, B):
    norms_a = np.linalg.norm(A, axis=1)
    norms_b = np.linalg.norm(B, axis=1)
    denominator = np.outer(norms_a, norms_b)
    similarity = np.divide(A @ B.T, denominator,
                           out=np.zeros((A.shape[0], B.shape[0])),
                           where=denominator != 0)
    return np.where(denominator == 0, 1.0,
                    1.0 - np.clip(similarity, -1.0, 1.0))


def pairwise(spec_or_model, A, B):
    """Distance matrix with ``A`` rows against ``B`` rows."""
    model = _as_model(spec_or_model)
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    B = np.atleast_2d(np.asarray(B, dtype=np.float64))
    if A.shape[1] != B.shape[1]:
        raise DimensionMismatchError(f'cannot compare {A.shape[1]} features '
                                     f'with {B.shape[1]}')
    kind = model.kind
    if kind is DistanceKind.EUCLIDEAN:
        return cdist(A, B, 'euclidean')
    if kind is DistanceKind.MANHATTAN:
        return cdist(A, B, 'cityblock')
    if kind is DistanceKind.CHEBYSHEV:
        return cdist(A, B, 'chebyshev')
    if kind is DistanceKind.MINKOWSKI:
        return cdist(A, B, 'minkowski', p=model.spec.p)
    if kind is DistanceKind.COSINE:
        return _pairwise_cosine(A, B)
    if kind is DistanceKind.MAHALANOBIS:
        _check_model(model, kind, A.shape[1])
        return cdist(A @ model.whitener, B @ model.whitener, 'euclidean')
    if kind is DistanceKind.STD_EUCLIDEAN:
        _check_model(model, kind, A.shape[1])
        return cdist(A, B, 'seuclidean', V=model.variances)
    return cdist(A, B, 'canberra')
