"""Tests for checkpoint files: round trip, metadata, corruption and mismatches."""

import json
import struct

import numpy as np
import pytest

from stfl.constants import CKPT_MAGIC
from stfl.errors import FormatError, StateMismatchError
from stfl.models import ArchSpec, build, checkpoint_load, checkpoint_save, param_count, read_checkpoint


CLIP = (3, 16, 32, 32)


def _make_network(family: str = "mc3", seed: int = 3):
    return build(ArchSpec(family, width_multiplier=0.25, clip_shape=CLIP), seed=seed)


# ---------------------------------------------------------------------------
# Round trip
# ---------------------------------------------------------------------------


class TestRoundTrip:
    def test_parameters_bitwise_identical(self, tmp_path) -> None:
        network = _make_network()
        path = tmp_path / "net.ckpt"
        checkpoint_save(network, None, path)
        loaded = checkpoint_load(path)
        original = network.state_dict()
        restored = loaded.network.state_dict()
        assert list(original) == list(restored)
        for name in original:
            assert original[name].tobytes() == restored[name].tobytes()
        assert param_count(loaded.network) == param_count(network)
        assert loaded.network.arch == network.arch

    def test_header_layout(self, tmp_path) -> None:
        path = tmp_path / "net.ckpt"
        checkpoint_save(_make_network(), None, path)
        data = path.read_bytes()
        assert data[:4] == CKPT_MAGIC == b"STFL"
        (version,) = struct.unpack_from("<H", data, 4)
        assert version == 1

    def test_optimizer_and_metadata(self, tmp_path) -> None:
        network = _make_network()
        velocity = {"fc.weight": np.full((2, 128), 0.5, dtype=np.float32)}
        path = tmp_path / "net.ckpt"
        checkpoint_save(network, velocity, path, {"epoch": 4, "best_auc": 0.875})
        loaded = checkpoint_load(path)
        assert loaded.optimizer_state is not None
        np.testing.assert_array_equal(loaded.optimizer_state["fc.weight"], velocity["fc.weight"])
        assert loaded.metadata["epoch"] == 4
        assert loaded.metadata["arch"]["family"] == "mc3"

    def test_running_statistics_survive(self, tmp_path) -> None:
        network = _make_network()
        network.train()
        network.forward(np.random.default_rng(0).random((2, *CLIP), dtype=np.float32))
        network.eval()
        path = tmp_path / "net.ckpt"
        checkpoint_save(network, None, path)
        loaded = checkpoint_load(path).network
        clips = np.random.default_rng(1).random((1, *CLIP), dtype=np.float32)
        np.testing.assert_array_equal(loaded.forward(clips), network.forward(clips))

    def test_file_without_trailing_sections(self, tmp_path) -> None:
        path = tmp_path / "net.ckpt"
        checkpoint_save(_make_network(), None, path)
        params, _, metadata = read_checkpoint(path)
        # drop the optimizer flag, the metadata length word and the JSON block
        blob_len = len(json.dumps(metadata, sort_keys=True).encode("utf-8"))
        trimmed = path.read_bytes()[: -(1 + 4 + blob_len)]
        bare = tmp_path / "bare.ckpt"
        bare.write_bytes(trimmed)
        params2, optimizer, meta2 = read_checkpoint(bare)
        assert optimizer is None and meta2 == {}
        assert params2.keys() == params.keys()


# ---------------------------------------------------------------------------
# Errors
# ---------------------------------------------------------------------------


class TestCorruption:
    def test_bad_magic(self, tmp_path) -> None:
        path = tmp_path / "net.ckpt"
        checkpoint_save(_make_network(), None, path)
        data = bytearray(path.read_bytes())
        data[0:4] = b"XXXX"
        path.write_bytes(bytes(data))
        with pytest.raises(FormatError, match="bad magic") as info:
            checkpoint_load(path)
        assert info.value.offset == 0

    def test_bad_version(self, tmp_path) -> None:
        path = tmp_path / "net.ckpt"
        checkpoint_save(_make_network(), None, path)
        data = bytearray(path.read_bytes())
        data[4:6] = struct.pack("<H", 99)
        path.write_bytes(bytes(data))
        with pytest.raises(FormatError, match="version 99") as info:
            checkpoint_load(path)
        assert info.value.offset == 4

    def test_truncated_payload(self, tmp_path) -> None:
        path = tmp_path / "net.ckpt"
        checkpoint_save(_make_network(), None, path)
        path.write_bytes(path.read_bytes()[:200])
        with pytest.raises(FormatError, match="truncated") as info:
            checkpoint_load(path)
        assert info.value.offset is not None and info.value.offset <= 200

    def test_family_mismatch_names_first_tensor(self, tmp_path) -> None:
        path = tmp_path / "r3d.ckpt"
        checkpoint_save(_make_network("r3d"), None, path)
        with pytest.raises(StateMismatchError) as info:
            checkpoint_load(path, ArchSpec("mc3", width_multiplier=0.25, clip_shape=CLIP))
        assert info.value.name == "stage3.0.conv1.weight"

    def test_missing_tensor(self, tmp_path) -> None:
        path = tmp_path / "r3d.ckpt"
        checkpoint_save(_make_network("r3d"), None, path)
        with pytest.raises(StateMismatchError, match="missing parameter 'stem.conv.spatial.weight'"):
            checkpoint_load(path, ArchSpec("r2plus1d", width_multiplier=0.25, clip_shape=CLIP))


# ---------------------------------------------------------------------------
# Metadata
# ---------------------------------------------------------------------------


def _rewrite_metadata(path, edit) -> None:
    """Replace the trailing JSON block with ``edit(metadata)``."""
    data = path.read_bytes()
    _, _, metadata = read_checkpoint(path)
    old = json.dumps(metadata, sort_keys=True).encode("utf-8")
    assert data.endswith(old)
    new = json.dumps(edit(metadata)).encode("utf-8")
    path.write_bytes(data[: -len(old) - 4] + struct.pack("<I", len(new)) + new)


class TestMetadata:
    def test_normalization_round_trip(self, tmp_path) -> None:
        path = tmp_path / "net.ckpt"
        stats = {"mean": [0.4, 0.5, 0.6], "std": [0.2, 0.25, 0.3]}
        checkpoint_save(_make_network(), None, path, {"normalization": stats})
        mean, std = checkpoint_load(path).normalization()
        np.testing.assert_array_equal(mean, stats["mean"])
        np.testing.assert_array_equal(std, stats["std"])

    def test_no_normalization(self, tmp_path) -> None:
        path = tmp_path / "net.ckpt"
        checkpoint_save(_make_network(), None, path)
        assert checkpoint_load(path).normalization() is None

    def test_metadata_must_be_object(self, tmp_path) -> None:
        path = tmp_path / "net.ckpt"
        checkpoint_save(_make_network(), None, path)
        _rewrite_metadata(path, lambda meta: [meta])
        with pytest.raises(FormatError, match="not a JSON object"):
            checkpoint_load(path)

    @pytest.mark.parametrize("arch", [{"family": "resnet50"}, {"width_multiplier": 0.5}, "mc3", {"family": "mc3", "clip_shape": ["a"]}])
    def test_bad_architecture_is_format_error(self, tmp_path, arch) -> None:
        path = tmp_path / "net.ckpt"
        checkpoint_save(_make_network(), None, path)
        _rewrite_metadata(path, lambda meta: {**meta, "arch": arch})
        with pytest.raises(FormatError, match="checkpoint metadata"):
            checkpoint_load(path)

    @pytest.mark.parametrize("stats", [{"mean": [0.5, 0.5, 0.5]}, {"mean": [0.5], "std": [1.0]}, {"mean": "x", "std": [1, 1, 1]}])
    def test_malformed_normalization(self, tmp_path, stats) -> None:
        path = tmp_path / "net.ckpt"
        checkpoint_save(_make_network(), None, path, {"normalization": stats})
        with pytest.raises(FormatError, match="normalization metadata"):
            checkpoint_load(path).normalization()
