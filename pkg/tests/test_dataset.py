"""Tests for the dataset file format and the synthetic texture generator."""

import struct

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from core.errors import (
    BadMagicError, ConfigurationError, FormatError, LabelRangeError, TruncatedFileError,
)
from data_io.dataset import (
    Dataset, augment_batch, decode_dataset, encode_dataset, load_dataset, save_dataset,
)
from data_io.synth import class_template, grating, synth_generate


@pytest.fixture
def small_dataset(rng):
    images = rng.standard_normal((5, 3, 4, 4)).astype(np.float32)
    return Dataset(images, np.array([0, 1, 2, 1, 0]), 3)


class TestDatasetFormat:

    def test_round_trip(self, small_dataset, tmp_path):
        path = save_dataset(small_dataset, tmp_path / "nested" / "set.msgd")
        loaded = load_dataset(path)
        assert_array_equal(loaded.images, small_dataset.images)
        assert_array_equal(loaded.labels, small_dataset.labels)
        assert loaded.num_classes == 3
        assert loaded.image_shape == (3, 4, 4)

    def test_header_layout(self, small_dataset):
        raw = encode_dataset(small_dataset)
        assert raw[:4] == b"MSGD"
        assert struct.unpack_from("<6I", raw, 4) == (1, 5, 3, 4, 4, 3)
        assert len(raw) == 28 + 5 * 3 * 4 * 4 * 4 + 5 * 4

    def test_labels_are_u32_on_disk(self):
        labels = np.array([0, 299, 256, 7])
        dataset = Dataset(np.zeros((4, 1, 2, 2), dtype=np.float32), labels, 300)
        raw = encode_dataset(dataset)
        assert struct.unpack_from("<4I", raw, len(raw) - 16) == (0, 299, 256, 7)
        loaded = decode_dataset(raw)
        assert loaded.labels.dtype == np.int64
        assert_array_equal(loaded.labels, labels)

    def test_float64_promotion(self, small_dataset):
        loaded = decode_dataset(encode_dataset(small_dataset), np.float64)
        assert loaded.images.dtype == np.float64

    def test_bad_magic(self, small_dataset):
        raw = encode_dataset(small_dataset)
        with pytest.raises(BadMagicError):
            decode_dataset(b"XXXX" + raw[4:])

    @pytest.mark.parametrize("cut", [0, 3, 20, 100, -1])
    def test_truncated(self, small_dataset, cut):
        raw = encode_dataset(small_dataset)
        with pytest.raises(TruncatedFileError):
            decode_dataset(raw[:cut])

    def test_trailing_bytes(self, small_dataset):
        with pytest.raises(FormatError):
            decode_dataset(encode_dataset(small_dataset) + b"\0")

    def test_unknown_version(self, small_dataset):
        raw = bytearray(encode_dataset(small_dataset))
        raw[4:8] = struct.pack("<I", 2)
        with pytest.raises(FormatError):
            decode_dataset(bytes(raw))

    def test_label_out_of_range(self, small_dataset):
        raw = bytearray(encode_dataset(small_dataset))
        raw[-4:] = struct.pack("<I", 3)
        with pytest.raises(LabelRangeError):
            decode_dataset(bytes(raw))

    def test_empty_dataset_is_valid(self):
        empty = Dataset(np.zeros((0, 3, 4, 4), dtype=np.float32), np.zeros(0), 2)
        loaded = decode_dataset(encode_dataset(empty))
        assert len(loaded) == 0

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_dataset(tmp_path / "absent.msgd")


class TestDataset:

    def test_label_range_checked(self):
        with pytest.raises(LabelRangeError):
            Dataset(np.zeros((2, 1, 2, 2)), np.array([0, 2]), 2)

    def test_batches_cover_every_sample(self, small_dataset, rng):
        seen = np.concatenate([y for _, y in small_dataset.batches(2, rng)])
        assert len(seen) == 5
        assert sorted(seen.tolist()) == sorted(small_dataset.labels.tolist())

    def test_batches_in_order_without_rng(self, small_dataset):
        sizes = [len(y) for _, y in small_dataset.batches(2)]
        assert sizes == [2, 2, 1]
        x, _ = next(iter(small_dataset.batches(2)))
        assert_array_equal(x, small_dataset.images[:2])

    def test_augment_keeps_shape(self, small_dataset, rng):
        out = augment_batch(small_dataset.images, rng, padding=2)
        assert out.shape == small_dataset.images.shape
        assert out.dtype == small_dataset.images.dtype

    def test_zero_padding_augment_only_flips(self, small_dataset, rng):
        out = augment_batch(small_dataset.images, rng, padding=0)
        for original, augmented in zip(small_dataset.images, out):
            assert (np.array_equal(original, augmented)
                    or np.array_equal(original[:, :, ::-1], augmented))


class TestSynth:

    def test_same_seed_same_bytes(self, tmp_path):
        a = synth_generate(5, 3, classes=4, size=8, out=tmp_path / "a.msgd")
        b = synth_generate(5, 3, classes=4, size=8, out=tmp_path / "b.msgd")
        assert (tmp_path / "a.msgd").read_bytes() == (tmp_path / "b.msgd").read_bytes()
        assert_array_equal(a.images, b.images)

    def test_different_seed_differs(self):
        a = synth_generate(1, 2, classes=2, size=8)
        b = synth_generate(2, 2, classes=2, size=8)
        assert not np.array_equal(a.images, b.images)

    def test_class_counts_and_dtype(self):
        data = synth_generate(0, 4, classes=3, size=8)
        assert data.images.shape == (12, 3, 8, 8)
        assert data.images.dtype == np.float32
        assert_array_equal(np.bincount(data.labels), [4, 4, 4])

    def test_class_zero_template(self):
        # theta = 0, frequency 2: a horizontal sweep along the column index
        template = class_template(0, classes=8, size=16)
        cols = np.arange(16)
        for c in range(3):
            expected = np.sin(2 * np.pi * 2 * cols / 16 + 2 * np.pi * c / 3)
            assert_allclose(template[c], np.tile(expected, (16, 1)), atol=1e-12)

    def test_vectorized_grating_matches_scalar(self):
        phases, contrasts = np.array([0.3, 1.7]), np.array([0.5, 0.9])
        batch = grating(3, 8, 8, 3, phases, contrasts)
        for i in range(2):
            assert_allclose(batch[i], grating(3, 8, 8, 3, phases[i], contrasts[i]))

    def test_noiseless_samples_are_bounded_by_contrast(self):
        data = synth_generate(0, 5, classes=2, noise=0.0, size=8)
        assert np.abs(data.images).max() <= 1.0 + 1e-6

    def test_zero_per_class_is_empty_file(self, tmp_path):
        data = synth_generate(0, 0, classes=4, size=8, out=tmp_path / "empty.msgd")
        assert len(data) == 0
        assert len(load_dataset(tmp_path / "empty.msgd")) == 0

    def test_single_class_rejected(self):
        with pytest.raises(ConfigurationError):
            synth_generate(0, 2, classes=1)
