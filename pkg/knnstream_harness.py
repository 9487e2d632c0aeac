# Copyright (C) 2025 Cody Messick
#
# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at https://mozilla.org/MPL/2.0/.
#
# SPDX-License-Identifier: MPL-2.0

"""Batch-stream evaluation: predict the current batch, then learn from it.

At step t the classifier scores batch t with a model and scaler built only
from batches 1..t-1; batch 1 is never scored.
"""

import dataclasses
import enum
import itertools
import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Tuple, Union

import numpy as np
from joblib import Parallel, delayed

import knnstream_knn as knn
from knnstream_data import (SeaConfig, batchify, generate_sea,
                            impute_missing, load_dataset)
from knnstream_distance import DistanceSpec
from knnstream_scaling import NormalizationPolicy, StreamNormalizer

logger = logging.getLogger(__name__)

DEFAULT_BATCH_SIZE = 1000
DEFAULT_TRIALS = 30


class RetrainMode(str, enum.Enum):
    NEVER = 'first-train'
    PREVIOUS_BATCH = 'retrain'


@dataclass(frozen=True)
class RunConfig:
    """Everything needed to reproduce one experiment cell."""
    source: Union[SeaConfig, str] = SeaConfig()
    batch_size: int = DEFAULT_BATCH_SIZE
    k: int = knn.DEFAULT_K
    spec: DistanceSpec = DistanceSpec()
    policy: NormalizationPolicy = NormalizationPolicy.ORIGINAL
    retrain: RetrainMode = RetrainMode.NEVER
    trials: int = DEFAULT_TRIALS
    base_seed: int = 0
    label_column: Union[int, str] = -1
    has_header: bool = False

    def __post_init__(self):
        object.__setattr__(self, 'policy', NormalizationPolicy(self.policy))
        object.__setattr__(self, 'retrain', RetrainMode(self.retrain))
        if self.trials < 1:
            raise ValueError(f'trials must be at least 1, got {self.trials}')
        if self.k < 1:
            raise ValueError(f'k must be at least 1, got {self.k}')
        if self.batch_size < self.k:
            raise ValueError(f'batch size {self.batch_size} is smaller than '
                             f'k={self.k}')

    @property
    def synthetic(self):
        return isinstance(self.source, SeaConfig)

    @property
    def leakage(self):
        return self.policy.leaks

    @property
    def source_name(self):
        if self.synthetic:
            return self.source.name
        return str(self.source)

    def seeds(self):
        trials = self.trials if self.synthetic else 1
        return [self.base_seed + i for i in range(trials)]

    def to_dict(self):
        if self.synthetic:
            schedule = self.source.schedule
            source = {
                'generator': 'sea',
                'n_instances': self.source.n_instances,
                'threshold': self.source.threshold,
                'feature_range': list(self.source.feature_range),
                'schedule': None if schedule is None else {
                    'feature_index': schedule.feature_index,
                    'segments': [list(s) for s in schedule.segments],
                },
            }
        else:
            source = {'path': str(self.source),
                      'label_column': self.label_column,
                      'has_header': self.has_header}
        return {
            'source': source,
            'batch_size': self.batch_size,
            'k': self.k,
            'distance': self.spec.kind.value,
            'p': self.spec.p,
            'policy': self.policy.value,
            'retrain': self.retrain.value,
            'trials': self.trials,
            'base_seed': self.base_seed,
        }


@dataclass(frozen=True)
class TrialResult:
    per_batch_accuracy: Tuple[Tuple[int, float], ...]
    mean_accuracy: float
    leakage_flag: bool
    seed: int


@dataclass(frozen=True)
class RunResult:
    config: RunConfig
    trials: Tuple[TrialResult, ...]
    grand_mean: float
    grand_std: float

    @property
    def leakage_flag(self):
        return self.config.leakage


@lru_cache(maxsize=16)
def load_stream(source, seed=0, label_column=-1, has_header=False):
    """Materialise the stream a configuration reads.

    SEA streams are regenerated for every seed; files are loaded, mean
    imputed, and identical for every seed.
    """
    if isinstance(source, SeaConfig):
        return generate_sea(dataclasses.replace(source, seed=seed))
    return impute_missing(load_dataset(source, label_column=label_column,
                                       has_header=has_header))


def _stream_key(config, seed):
    return (config.source, seed if config.synthetic else 0,
            config.label_column, config.has_header)


def _stream_for(config, seed):
    return load_stream(*_stream_key(config, seed))


def run_trial(config, seed, dataset=None):
    """Run the batch protocol once.

    Parameters
    ----------
    config : RunConfig
    seed : int
        Seed of the generated stream; ignored for file sources.
    dataset : Dataset, optional
        Pre-built stream, used by sweeps so every cell reads the same data.
    """
    if dataset is None:
        dataset = _stream_for(config, seed)
    batches = batchify(dataset, config.batch_size)
    if len(batches) < 2:
        raise ValueError(f'{dataset.name} yields {len(batches)} batch of '
                         f'{config.batch_size}, the protocol needs at least 2')

    normalizer = StreamNormalizer(config.policy, batches)
    model = None
    if config.retrain is RetrainMode.NEVER:
        model = knn.fit(normalizer.views(2).train, config.k, config.spec)

    scores = []
    for t in range(2, len(batches) + 1):
        views = normalizer.views(t)
        if config.retrain is RetrainMode.PREVIOUS_BATCH:
            model = knn.fit(views.train, config.k, config.spec)
        predicted = knn.predict_batch(model, views.test)
        score = knn.accuracy(predicted, views.test.y)
        logger.debug('seed %d batch %d accuracy %.4f', seed, t, score)
        scores.append((t, score))

    mean = float(np.mean([score for _, score in scores]))
    logger.info('%s %s/%s/%s seed %d: mean accuracy %.4f',
                config.source_name, config.spec.describe(),
                config.policy.value, config.retrain.value, seed, mean)
    return TrialResult(tuple(scores), mean, config.leakage, seed)


def _summarise(config, trials):
    means = np.array([trial.mean_accuracy for trial in trials])
    grand_std = float(np.std(means, ddof=1)) if len(means) > 1 else 0.0
    return RunResult(config, tuple(trials), float(np.mean(means)), grand_std)


def _warn_fixed_stream(config):
    if not config.synthetic and config.trials > 1:
        logger.warning('%s is a fixed stream, running 1 trial instead of %d',
                       config.source_name, config.trials)


def run_experiment(config, n_jobs=1):
    """Run every trial of ``config`` (seeds base_seed, base_seed + 1, ...)."""
    _warn_fixed_stream(config)
    seeds = config.seeds()
    trials = Parallel(n_jobs=n_jobs)(
        delayed(run_trial)(config, seed) for seed in seeds)
    return _summarise(config, trials)


def grid_configs(base, specs, policies):
    """Cartesian product of distances and policies over ``base``."""
    return [dataclasses.replace(base, spec=spec,
                                policy=NormalizationPolicy(policy))
            for spec, policy in itertools.product(specs, policies)]


def sweep(configs, n_jobs=1):
    """Run many configurations; cells sharing a source and seed read the
    very same materialised stream."""
    configs = list(configs)
    for config in configs:
        _warn_fixed_stream(config)
    tasks = [(index, seed) for index, config in enumerate(configs)
             for seed in config.seeds()]
    keys = [_stream_key(configs[index], seed) for index, seed in tasks]
    streams = {}
    for (index, seed), key in zip(tasks, keys):
        if key not in streams:
            streams[key] = _stream_for(configs[index], seed)

    trials = Parallel(n_jobs=n_jobs)(
        delayed(run_trial)(configs[index], seed, streams[key])
        for (index, seed), key in zip(tasks, keys))

    grouped = [[] for _ in configs]
    for (index, _), trial in zip(tasks, trials):
        grouped[index].append(trial)
    return [_summarise(config, group)
            for config, group in zip(configs, grouped)]
