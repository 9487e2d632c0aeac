# Copyright (C) 2025 Cody Messick
#
# This Source Code Form is subject to the terms of the Mozilla Public
# License, v. 2.0. If a copy of the MPL was not distributed with this
# file, You can obtain one at https://mozilla.org/MPL/2.0/.
#
# SPDX-License-Identifier: MPL-2.0

"""
Tests for stream construction: SEA generation with range drift, CSV and
ARFF ingestion, mean imputation and batching.
"""

import dataclasses

import numpy as np
import pytest

import knnstream_data as data
from knnstream_data import (Batch, Dataset, DatasetFormatError, Instance,
                            RangeSchedule, SeaConfig)
from test_shared_utilities import random_dataset, rng, write_text  # noqa: F401


class TestSeaGeneration:
    """Test cases for the SEA concepts generator."""

    def test_labels_follow_threshold(self):
        dataset = data.generate_sea(SeaConfig(n_instances=5000, seed=3))
        raw_positive = dataset.X[:, 0] + dataset.X[:, 1] <= 8.0
        assert np.array_equal(dataset.y == 1, raw_positive)
        assert dataset.classes == ('negative', 'positive')
        assert dataset.feature_count == 3

    def test_features_within_range(self):
        dataset = data.generate_sea(SeaConfig(n_instances=2000, seed=1))
        assert dataset.X.min() >= 0.0
        assert dataset.X.max() <= 10.0

    def test_positive_rate(self):
        dataset = data.generate_sea(SeaConfig(n_instances=20000, seed=11))
        rate = dataset.y.mean()
        assert abs(rate - 0.32) <= 0.02, f"positive rate {rate}"

    def test_deterministic_for_fixed_seed(self):
        config = SeaConfig(n_instances=1000, seed=42)
        first = data.generate_sea(config)
        second = data.generate_sea(config)
        assert np.array_equal(first.X, second.X)
        assert np.array_equal(first.y, second.y)

    def test_seeds_differ(self):
        first = data.generate_sea(SeaConfig(n_instances=100, seed=0))
        second = data.generate_sea(SeaConfig(n_instances=100, seed=1))
        assert not np.array_equal(first.X, second.X)

    def test_schedule_scales_feature_but_not_labels(self):
        config = SeaConfig(n_instances=40000, seed=5)
        plain = data.generate_sea(config)
        drifted = data.generate_sea(dataclasses.replace(
            config, schedule=RangeSchedule.preset('f1')))

        assert np.array_equal(plain.y, drifted.y)
        # instance #15000 (1-based) sits in the x10 segment
        assert drifted.X[14999, 0] == pytest.approx(10 * plain.X[14999, 0])
        assert drifted.X[9999, 0] == plain.X[9999, 0]
        assert drifted.X[39999, 0] == pytest.approx(
            1000 * plain.X[39999, 0])
        assert np.array_equal(drifted.X[:, 1:], plain.X[:, 1:])
        assert drifted.name == 'sea-f1'

    def test_f3_preset_targets_noise_feature(self):
        schedule = RangeSchedule.preset('f3')
        assert schedule.feature_index == 2
        factors = schedule.multipliers(40000)
        assert factors[0] == 1 and factors[10000] == 10
        assert factors[20000] == 100 and factors[30000] == 1000

    def test_multipliers_truncate_to_stream(self):
        schedule = RangeSchedule(0, ((3, 10, 2.0),))
        assert list(schedule.multipliers(5)) == [1, 1, 2, 2, 2]

    @pytest.mark.parametrize("segments", [
        ((5, 10, 2.0), (8, 12, 3.0)),   # overlapping
        ((10, 20, 2.0), (1, 5, 3.0)),   # unsorted
        ((1, 5, 0.0),),                 # non-positive multiplier
        ((0, 5, 2.0),),                 # positions are 1-based
    ])
    def test_invalid_schedules(self, segments):
        with pytest.raises(ValueError):
            RangeSchedule(0, segments)

    def test_unknown_preset(self):
        with pytest.raises(ValueError, match="f2"):
            RangeSchedule.preset('f2')

    @pytest.mark.parametrize("kwargs", [
        {'n_instances': 0},
        {'feature_range': (5.0, 5.0)},
        {'schedule': RangeSchedule(3, ())},
    ])
    def test_invalid_config(self, kwargs):
        with pytest.raises(ValueError):
            SeaConfig(**kwargs)


class TestCsvLoading:
    """Test cases for CSV ingestion."""

    def test_basic_file(self, tmp_path):
        path = write_text(tmp_path / "tiny.csv", "1,2,A\n3,4,B\n5,6,A\n")
        dataset = data.load_csv(path, label_column=2)
        assert dataset.feature_count == 2
        assert dataset.classes == ('A', 'B')
        assert list(dataset.y) == [0, 1, 0]
        assert np.array_equal(dataset.X, [[1, 2], [3, 4], [5, 6]])
        assert dataset.name == 'tiny'

    def test_header_and_named_label(self, tmp_path):
        path = write_text(tmp_path / "named.csv",
                          "label,a,b\nyes,1,2\nno,3,4\n")
        dataset = data.load_csv(path, label_column='label', has_header=True)
        assert dataset.classes == ('yes', 'no')
        assert np.array_equal(dataset.X, [[1, 2], [3, 4]])

    @pytest.mark.parametrize("token", ["", "?"])
    def test_missing_markers(self, tmp_path, token):
        path = write_text(tmp_path / "gap.csv", f"1,{token},A\n3,4,B\n")
        dataset = data.load_csv(path)
        assert np.isnan(dataset.X[0, 1])
        assert dataset.has_missing

    def test_non_numeric_cell_names_row_and_column(self, tmp_path):
        path = write_text(tmp_path / "bad.csv", "1,x,A\n3,4,B\n")
        with pytest.raises(DatasetFormatError, match=r"row 0, column 1"):
            data.load_csv(path)

    @pytest.mark.parametrize("text", [
        "1,2,A\n3,B\n",
        "1,2,A\n3,4,5,B\n",
    ])
    def test_ragged_rows(self, tmp_path, text):
        path = write_text(tmp_path / "ragged.csv", text)
        with pytest.raises(DatasetFormatError, match="ragged"):
            data.load_csv(path)

    def test_empty_file(self, tmp_path):
        path = write_text(tmp_path / "empty.csv", "")
        with pytest.raises(DatasetFormatError):
            data.load_csv(path)

    def test_label_column_out_of_range(self, tmp_path):
        path = write_text(tmp_path / "tiny.csv", "1,2,A\n")
        with pytest.raises(DatasetFormatError, match="out of range"):
            data.load_csv(path, label_column=7)

    @pytest.mark.parametrize("label_column", ['2', 2])
    def test_digit_header_name_preferred(self, tmp_path, label_column):
        path = write_text(tmp_path / "digits.csv",
                          "a,2,b\n1,yes,3\n4,no,6\n")
        dataset = data.load_csv(path, label_column=label_column,
                                has_header=True)
        assert dataset.classes == ('yes', 'no')
        assert np.array_equal(dataset.X, [[1, 3], [4, 6]])

    def test_index_with_header(self, tmp_path):
        path = write_text(tmp_path / "indexed.csv", "a,b,c\n1,2,A\n3,4,B\n")
        dataset = data.load_csv(path, label_column=2, has_header=True)
        assert dataset.classes == ('A', 'B')

    def test_invalid_utf8_names_file(self, tmp_path):
        path = tmp_path / "latin.csv"
        path.write_bytes(b"1,2,caf\xe9\n3,4,B\n")
        with pytest.raises(DatasetFormatError, match="latin.csv"):
            data.load_csv(str(path))

    def test_dispatch_on_extension(self, tmp_path):
        path = write_text(tmp_path / "plain.data", "1,2,A\n3,4,B\n")
        assert len(data.load_dataset(path)) == 2


ARFF_TEXT = """% a tiny relation
@RELATION tiny

@ATTRIBUTE f1 NUMERIC
@attribute f2 real
@ATTRIBUTE class {a,b}

@DATA
1.5,?,a
2.0,3.0,b
"""


class TestArffLoading:
    """Test cases for ARFF ingestion."""

    def test_minimal_file(self, tmp_path):
        path = write_text(tmp_path / "tiny.arff", ARFF_TEXT)
        dataset = data.load_arff(path)
        assert len(dataset) == 2
        assert dataset.class_count == 2
        assert dataset.classes == ('a', 'b')
        assert np.isnan(dataset.X[0, 1])
        assert dataset.X[1, 1] == 3.0

    def test_class_attribute_anywhere(self, tmp_path):
        text = ("@relation r\n@attribute class {x,y}\n"
                "@attribute f1 numeric\n@data\ny,1\nx,2\n")
        dataset = data.load_arff(write_text(tmp_path / "first.arff", text))
        assert dataset.classes == ('y', 'x')
        assert np.array_equal(dataset.X[:, 0], [1, 2])

    def test_string_attribute_rejected(self, tmp_path):
        text = ("@relation r\n@attribute f1 string\n"
                "@attribute class {a,b}\n@data\n'hello',a\n")
        with pytest.raises(DatasetFormatError):
            data.load_arff(write_text(tmp_path / "string.arff", text))

    def test_sparse_rejected(self, tmp_path):
        text = ("@relation r\n@attribute f1 numeric\n"
                "@attribute class {a,b}\n@data\n{0 1.0, 1 a}\n")
        with pytest.raises(DatasetFormatError, match="sparse"):
            data.load_arff(write_text(tmp_path / "sparse.arff", text))

    def test_invalid_utf8_names_file(self, tmp_path):
        path = tmp_path / "latin.arff"
        path.write_bytes(b"@relation caf\xe9\n@attribute f1 numeric\n"
                         b"@attribute class {a,b}\n@data\n1,a\n")
        with pytest.raises(DatasetFormatError, match="latin.arff"):
            data.load_arff(str(path))

    def test_dispatch_on_extension(self, tmp_path):
        path = write_text(tmp_path / "TINY.ARFF", ARFF_TEXT)
        assert data.load_dataset(path).feature_count == 2


class TestImputation:
    """Test cases for whole-dataset mean imputation."""

    def test_mean_of_present_values(self):
        dataset = Dataset([[1.0, 5.0], [np.nan, 5.0], [3.0, 5.0]],
                          [0, 1, 0], ('a', 'b'))
        imputed = data.impute_missing(dataset)
        assert np.array_equal(imputed.X[:, 0], [1, 2, 3])
        assert not imputed.has_missing

    def test_all_missing_feature_becomes_zero(self):
        dataset = Dataset([[np.nan, 1.0], [np.nan, 2.0]], [0, 0], ('a',))
        imputed = data.impute_missing(dataset)
        assert np.array_equal(imputed.X[:, 0], [0, 0])

    def test_complete_dataset_untouched(self, rng):
        dataset = random_dataset(rng)
        assert data.impute_missing(dataset) is dataset

    def test_idempotent(self):
        dataset = Dataset([[1.0], [np.nan], [4.0]], [0, 1, 0], ('a', 'b'))
        once = data.impute_missing(dataset)
        twice = data.impute_missing(once)
        assert np.array_equal(once.X, twice.X)


class TestBatching:
    """Test cases for splitting a stream into batches."""

    @pytest.mark.parametrize("n_rows,batch_size,expected", [
        (40000, 1000, [1000] * 40),
        (45312, 1000, [1000] * 45 + [312]),
        (5, 10, [5]),
    ])
    def test_batch_sizes(self, n_rows, batch_size, expected):
        dataset = Dataset(np.zeros((n_rows, 1)), np.zeros(n_rows, dtype=int),
                          ('only',))
        batches = data.batchify(dataset, batch_size)
        assert [len(b) for b in batches] == expected
        assert [b.index for b in batches] == list(range(1, len(expected) + 1))

    def test_concatenation_restores_stream(self, rng):
        dataset = random_dataset(rng, n_rows=97)
        batches = data.batchify(dataset, 10)
        assert np.array_equal(np.vstack([b.X for b in batches]), dataset.X)
        assert np.array_equal(np.concatenate([b.y for b in batches]),
                              dataset.y)

    def test_empty_dataset(self):
        dataset = Dataset(np.empty((0, 2)), np.empty(0, dtype=int), ('a',))
        with pytest.raises(ValueError, match="empty"):
            data.batchify(dataset, 10)

    def test_invalid_batch_size(self, rng):
        with pytest.raises(ValueError):
            data.batchify(random_dataset(rng), 0)


class TestArrays:
    """Test cases for the Dataset/Batch/Instance conversions."""

    def test_dataset_is_read_only(self, rng):
        dataset = random_dataset(rng)
        with pytest.raises(ValueError):
            dataset.X[0, 0] = 1.0

    def test_iteration_yields_instances(self, rng):
        dataset = random_dataset(rng, n_rows=4)
        instances = dataset.instances
        assert all(isinstance(i, Instance) for i in instances)
        X, y = data.as_arrays(instances)
        assert np.array_equal(X, dataset.X)
        assert np.array_equal(y, dataset.y)

    def test_batch_arrays(self):
        batch = Batch(3, np.ones((2, 2)), np.array([0, 1]))
        X, y = data.as_arrays(batch)
        assert X.shape == (2, 2) and list(y) == [0, 1]

    def test_invalid_label_ids(self):
        with pytest.raises(ValueError):
            Dataset([[1.0]], [2], ('a', 'b'))

    def test_class_names(self):
        dataset = Dataset([[1.0], [2.0]], [1, 0], ('neg', 'pos'))
        assert dataset.class_names(dataset.y) == ['pos', 'neg']
