import json
import struct

import numpy as np
import pytest
from conftest import random_sample

from avfuse.exceptions import DatasetIOError, FormatError, InvalidArgumentError
from avfuse.fusion.model import forward, init_params
from avfuse.storage.checkpoint import (
    CHECKPOINT_MAGIC,
    decode_checkpoint,
    encode_checkpoint,
    load_checkpoint,
    save_checkpoint,
)
from avfuse.storage.files import atomic_write_bytes
from avfuse.storage.manifest import ManifestRecord, load_samples, read_manifest, write_manifest
from avfuse.storage.matrix_io import MATRIX_MAGIC, decode_matrix, encode_matrix, read_matrix, write_matrix
from avfuse.storage.reports import emit_jsonl


class TestMatrixFormat:
    def test_layout(self):
        data = encode_matrix(np.array([[1.0, 2.0, 3.0], [4.0, 5.0, 6.5]]))
        assert data[:8] == MATRIX_MAGIC
        assert struct.unpack_from("<QQ", data, 8) == (2, 3)
        assert len(data) == 24 + 6 * 4
        np.testing.assert_array_equal(np.frombuffer(data[24:], dtype="<f4"), [1, 2, 3, 4, 5, 6.5])

    def test_file_round_trip(self, tmp_path, rng):
        matrix = rng.standard_normal((7, 4))
        write_matrix(tmp_path / "m.avf", matrix)
        np.testing.assert_array_equal(read_matrix(tmp_path / "m.avf"), matrix.astype(np.float32).astype(np.float64))
        assert [p.name for p in tmp_path.iterdir()] == ["m.avf"]

    def test_bad_magic(self):
        data = bytearray(encode_matrix(np.ones((2, 2))))
        for i in range(len(MATRIX_MAGIC)):
            corrupted = bytearray(data)
            corrupted[i] ^= 0xFF
            with pytest.raises(FormatError, match="bad magic"):
                decode_matrix(bytes(corrupted))
        with pytest.raises(FormatError, match="bad magic"):
            decode_matrix(b"")

    def test_every_corrupted_header_byte(self):
        data = encode_matrix(np.arange(6.0).reshape(2, 3))
        for i in range(24):
            for mask in range(1, 256):
                corrupted = bytearray(data)
                corrupted[i] ^= mask
                with pytest.raises(FormatError):
                    decode_matrix(bytes(corrupted))

    @pytest.mark.parametrize("cut", [8, 12, 23])
    def test_truncated_header(self, cut):
        with pytest.raises(FormatError, match="truncated"):
            decode_matrix(encode_matrix(np.ones((2, 2)))[:cut])

    def test_truncated_payload(self):
        with pytest.raises(FormatError, match="truncated"):
            decode_matrix(encode_matrix(np.ones((2, 2)))[:-1])

    def test_trailing_bytes(self):
        with pytest.raises(FormatError, match="trailing bytes"):
            decode_matrix(encode_matrix(np.ones((2, 2))) + b"\x00" * 4)

    def test_shape_overflow(self):
        data = MATRIX_MAGIC + struct.pack("<QQ", 1 << 20, 1 << 20)
        with pytest.raises(FormatError, match="shape overflow"):
            decode_matrix(data)

    def test_non_finite(self):
        data = MATRIX_MAGIC + struct.pack("<QQ", 1, 2) + np.array([1.0, np.nan], dtype="<f4").tobytes()
        with pytest.raises(FormatError, match="non-finite"):
            decode_matrix(data)

    def test_missing_file(self, tmp_path):
        with pytest.raises(DatasetIOError):
            read_matrix(tmp_path / "absent.avf")


def _rounded_params(dims, seed=0):
    params = init_params(dims, seed)
    return params.unflatten(params.flatten().astype(np.float32).astype(np.float64))


def _rewrite_header(data: bytes, edit) -> bytes:
    (length,) = struct.unpack_from("<Q", data, 8)
    header = json.loads(data[16 : 16 + length])
    edit(header)
    raw = json.dumps(header).encode("utf-8")
    return CHECKPOINT_MAGIC + struct.pack("<Q", len(raw)) + raw + data[16 + length :]


class TestCheckpoint:
    def test_round_trip_preserves_predictions(self, tmp_path, rng, small_dims):
        params = _rounded_params(small_dims.model_copy(update={"hidden": 3}))
        save_checkpoint(tmp_path / "model.avck", params, seed=9, epoch=4)
        loaded, header = load_checkpoint(tmp_path / "model.avck", expected_dims=params.dims)
        assert (header.version, header.seed, header.epoch) == (1, 9, 4)
        np.testing.assert_array_equal(loaded.flatten(), params.flatten())
        sample = random_sample(rng, params.dims)
        expected = forward(sample.video_raw, sample.audio_raw, params, sample.onset_set)
        actual = forward(sample.video_raw, sample.audio_raw, loaded, sample.onset_set)
        np.testing.assert_array_equal(actual.logits, expected.logits)

    def test_bad_magic(self, small_dims):
        data = encode_checkpoint(_rounded_params(small_dims), 0, 0)
        with pytest.raises(FormatError, match="bad magic"):
            decode_checkpoint(b"AVFCKPT2" + data[8:])

    def test_every_corrupted_prefix_byte(self, small_dims):
        data = encode_checkpoint(_rounded_params(small_dims), 0, 0)
        for i in range(16):
            for mask in range(1, 256):
                corrupted = bytearray(data)
                corrupted[i] ^= mask
                with pytest.raises(FormatError):
                    decode_checkpoint(bytes(corrupted))

    def test_corrupted_header_bytes(self, small_dims):
        params = _rounded_params(small_dims)
        data = encode_checkpoint(params, 0, 0)
        (length,) = struct.unpack_from("<Q", data, 8)
        for i in range(16, 16 + length):
            for mask in (0x01, 0x20, 0x80, 0xFF):
                corrupted = bytearray(data)
                corrupted[i] ^= mask
                try:
                    loaded, _ = decode_checkpoint(bytes(corrupted))
                except FormatError:
                    continue
                # Seed, epoch and k are free; anything that decodes keeps the payload intact
                np.testing.assert_array_equal(loaded.flatten(), params.flatten())

    def test_truncated(self, small_dims):
        data = encode_checkpoint(_rounded_params(small_dims), 0, 0)
        with pytest.raises(FormatError, match="truncated"):
            decode_checkpoint(data[:-4])
        with pytest.raises(FormatError, match="truncated"):
            decode_checkpoint(data[:12])
        with pytest.raises(FormatError, match="truncated"):
            decode_checkpoint(CHECKPOINT_MAGIC + struct.pack("<Q", 1 << 40))

    def test_tampered_shape(self, small_dims):
        data = encode_checkpoint(_rounded_params(small_dims), 0, 0)

        def edit(header):
            header["shapes"][0]["shape"] = [small_dims.video_in + 1, small_dims.embed]

        with pytest.raises(FormatError, match="shape"):
            decode_checkpoint(_rewrite_header(data, edit))

    def test_version(self, small_dims):
        data = encode_checkpoint(_rounded_params(small_dims), 0, 0)
        with pytest.raises(FormatError, match="version"):
            decode_checkpoint(_rewrite_header(data, lambda h: h.update(version=2)))

    def test_dims_mismatch(self, small_dims):
        data = encode_checkpoint(_rounded_params(small_dims), 0, 0)
        with pytest.raises(FormatError, match="dims"):
            decode_checkpoint(data, expected_dims=small_dims.model_copy(update={"classes": 4}))

    def test_non_finite(self, small_dims):
        data = bytearray(encode_checkpoint(_rounded_params(small_dims), 0, 0))
        data[-4:] = np.array([np.inf], dtype="<f4").tobytes()
        with pytest.raises(FormatError, match="non-finite"):
            decode_checkpoint(bytes(data))


def _write_features(directory, sample):
    write_matrix(directory / f"{sample.id}.video.avf", sample.video_raw.values)
    write_matrix(directory / f"{sample.id}.audio.avf", sample.audio_raw.values)
    return ManifestRecord(
        id=sample.id,
        category=sample.y,
        label=sample.y,
        video_path=f"{sample.id}.video.avf",
        audio_path=f"{sample.id}.audio.avf",
        onsets=list(sample.onset_set.steps),
    )


class TestManifest:
    def test_round_trip(self, tmp_path, rng, small_dims):
        samples = [random_sample(rng, small_dims, sample_id=f"s{i}") for i in range(3)]
        records = [_write_features(tmp_path, s) for s in samples]
        write_manifest(tmp_path / "all.manifest", records)
        assert read_manifest(tmp_path / "all.manifest") == records
        loaded = load_samples(tmp_path / "all.manifest")
        assert [s.id for s in loaded] == ["s0", "s1", "s2"]
        for original, restored in zip(samples, loaded):
            assert restored.onset_set == original.onset_set
            np.testing.assert_allclose(restored.audio_raw.values, original.audio_raw.values, rtol=1e-6)

    def test_optional_fields_omitted(self, tmp_path):
        record = ManifestRecord(id="a", category=0, label=0, video_path="v", audio_path="a")
        write_manifest(tmp_path / "m.manifest", [record])
        assert json.loads((tmp_path / "m.manifest").read_text()) == {
            "id": "a",
            "category": 0,
            "label": 0,
            "video_path": "v",
            "audio_path": "a",
        }

    def test_label_outside_classes(self, tmp_path):
        record = ManifestRecord(id="a", category=0, label=3, video_path="v", audio_path="a")
        write_manifest(tmp_path / "m.manifest", [record])
        with pytest.raises(InvalidArgumentError):
            read_manifest(tmp_path / "m.manifest", classes=3)
        assert len(read_manifest(tmp_path / "m.manifest", classes=4)) == 1

    @pytest.mark.parametrize(
        "line",
        [
            "not json",
            '{"id": "a", "category": 0, "label": 0, "video_path": "v"}',
            '{"id": "a", "category": 0, "label": 0, "video_path": "v", "audio_path": "a", "extra": 1}',
            '{"id": "a", "category": 0, "label": -1, "video_path": "v", "audio_path": "a"}',
        ],
    )
    def test_invalid_lines(self, tmp_path, line):
        (tmp_path / "m.manifest").write_text(line + "\n")
        with pytest.raises(FormatError, match=":1:"):
            read_manifest(tmp_path / "m.manifest")

    @pytest.mark.parametrize(
        "data",
        [
            b'\xff\xfe{"id": "a"}\n',
            b'{"id": "caf\xe9", "category": 0, "label": 0, "video_path": "v", "audio_path": "a"}\n',
            b'{"id": "a", "category": 0, "label": 0, "video_path": "v", "audio_path": "a"}\n\xc3\n',
        ],
    )
    def test_non_utf8_manifest(self, tmp_path, data):
        (tmp_path / "m.manifest").write_bytes(data)
        with pytest.raises(FormatError, match="UTF-8"):
            read_manifest(tmp_path / "m.manifest")

    def test_non_utf8_manifest_fails_before_feature_files(self, tmp_path):
        (tmp_path / "m.manifest").write_bytes(b"\x80\n")
        with pytest.raises(FormatError):
            load_samples(tmp_path / "m.manifest", classes=1)

    def test_missing_feature_file_names_the_sample(self, tmp_path):
        record = ManifestRecord(id="lost", category=0, label=0, video_path="v.avf", audio_path="a.avf")
        write_manifest(tmp_path / "m.manifest", [record])
        with pytest.raises(DatasetIOError, match="lost"):
            load_samples(tmp_path / "m.manifest", classes=1)


class TestFiles:
    def test_atomic_write_replaces(self, tmp_path):
        atomic_write_bytes(tmp_path / "f.bin", b"one")
        atomic_write_bytes(tmp_path / "f.bin", b"two")
        assert (tmp_path / "f.bin").read_bytes() == b"two"
        assert [p.name for p in tmp_path.iterdir()] == ["f.bin"]

    def test_unwritable_target(self, tmp_path):
        (tmp_path / "file").write_text("x")
        with pytest.raises(DatasetIOError):
            atomic_write_bytes(tmp_path / "file" / "child.bin", b"data")

    def test_emit_jsonl_to_stdout(self, capsys):
        emit_jsonl([{"id": "a", "n": 1}, {"id": "b", "n": 2}])
        lines = capsys.readouterr().out.splitlines()
        assert [json.loads(line)["id"] for line in lines] == ["a", "b"]
