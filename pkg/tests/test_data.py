"""Tests for dataset ingestion: manifests, clip files, transforms, frames, synth and the loader."""

import struct
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

from stfl.config import RuntimeConfig
from stfl.data import (
    ClipCache,
    ClipLoader,
    ClipRecord,
    Manifest,
    SynthConfig,
    channel_stats,
    class_weights,
    crop_faces,
    decode_clip,
    denormalize,
    encode_clip,
    eval_starts,
    load_boxes,
    load_manifest,
    normalize,
    parse_manifest,
    read_clip,
    read_frames,
    resize_bilinear,
    sample_clip,
    synth_dataset,
    write_clip,
)
from stfl.errors import ConfigurationError, DataError, DimensionError, FormatError, NumericError


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------

HEADER = "path,label,split,frames,fps\n"


def _make_manifest(*rows: tuple[str, int, str, int]) -> Manifest:
    return Manifest([ClipRecord(path, label, split, frames) for path, label, split, frames in rows])


def _make_video(frames: int = 20, hw: int = 16, seed: int = 0) -> np.ndarray:
    return np.random.default_rng(seed).random((3, frames, hw, hw)).astype(np.float32)


# ---------------------------------------------------------------------------
# Manifest
# ---------------------------------------------------------------------------


class TestManifest:
    def test_parse_labels_and_splits(self) -> None:
        text = HEADER + "a.clpt,real,train,16,30\nb.clpt,fake,test,20,25\nc.clpt,1,train,16,\n"
        manifest = parse_manifest(text, Path("/data"))
        assert [r.label for r in manifest.records] == [0, 1, 1]
        assert manifest.records[1].fps == 25.0
        assert manifest.records[2].fps == 30.0
        assert manifest.counts("train") == (1, 1)
        assert manifest.resolve(manifest.records[0]) == Path("/data/a.clpt")

    def test_bad_label_reports_line(self) -> None:
        text = HEADER + "a.clpt,real,train,16,30\nb.clpt,maybe,train,16,30\n"
        with pytest.raises(DataError, match="line 3: bad label 'maybe'") as info:
            parse_manifest(text)
        assert info.value.line == 3

    def test_bad_split(self) -> None:
        with pytest.raises(DataError, match="line 2: bad split 'val'"):
            parse_manifest(HEADER + "a.clpt,real,val,16,30\n")

    def test_non_integer_frames(self) -> None:
        with pytest.raises(DataError, match="line 2: frames must be an integer"):
            parse_manifest(HEADER + "a.clpt,real,train,many,30\n")

    @pytest.mark.parametrize("fps", ["0", "-5", "nan", "inf"])
    def test_fps_must_be_positive(self, fps: str) -> None:
        with pytest.raises(DataError, match="line 2: fps must be a positive number"):
            parse_manifest(HEADER + f"a.clpt,real,train,16,{fps}\n")

    def test_oversized_field_is_data_error(self) -> None:
        with pytest.raises(DataError, match="malformed CSV"):
            parse_manifest(HEADER + "a" * 200_000 + ",real,train,16,30\n")

    def test_non_utf8_file(self, tmp_path) -> None:
        path = tmp_path / "manifest.csv"
        path.write_bytes(HEADER.encode() + b"\xff\xfe.clpt,real,train,16,30\n")
        with pytest.raises(DataError, match="not UTF-8"):
            load_manifest(path)

    def test_duplicate_path(self) -> None:
        text = HEADER + "a.clpt,real,train,16,30\na.clpt,fake,test,16,30\n"
        with pytest.raises(DataError, match="duplicate path 'a.clpt' \\(first on line 2\\)"):
            parse_manifest(text)

    def test_missing_column(self) -> None:
        with pytest.raises(DataError, match="missing column\\(s\\): fps"):
            parse_manifest("path,label,split,frames\na.clpt,real,train,16\n")

    def test_empty(self) -> None:
        with pytest.raises(DataError, match="empty manifest"):
            parse_manifest("\n\n")
        with pytest.raises(DataError, match="no records"):
            parse_manifest(HEADER)

    def test_save_and_load(self, tmp_path) -> None:
        manifest = _make_manifest(("clips/a.clpt", 0, "train", 16), ("clips/b.clpt", 1, "test", 18))
        manifest.save(tmp_path / "manifest.csv")
        loaded = load_manifest(tmp_path / "manifest.csv")
        assert loaded.records == manifest.records
        assert loaded.base_dir == tmp_path

    def test_class_weights(self) -> None:
        manifest = _make_manifest(*[(f"r{i}", 0, "train", 16) for i in range(3)], ("f0", 1, "train", 16))
        weights = class_weights(manifest)
        np.testing.assert_allclose(weights, [4 / 6, 2.0])
        np.testing.assert_allclose(weights * np.array(manifest.counts("train")), [2.0, 2.0])

    def test_class_weights_imbalanced_counts(self) -> None:
        rows = [(f"r{i}", 0, "train", 16) for i in range(590)] + [(f"f{i}", 1, "train", 16) for i in range(5639)]
        weights = class_weights(_make_manifest(*rows))
        np.testing.assert_allclose(weights, [5.2788, 0.5523], atol=1e-4)

    def test_class_weights_need_both_classes(self) -> None:
        manifest = _make_manifest(("r0", 0, "train", 16))
        with pytest.raises(DataError, match="no fake clips"):
            class_weights(manifest)


# ---------------------------------------------------------------------------
# Clip files
# ---------------------------------------------------------------------------


class TestClipFile:
    def test_round_trip(self, tmp_path) -> None:
        clip = _make_video(4, 8)
        write_clip(tmp_path / "a.clpt", clip)
        loaded = read_clip(tmp_path / "a.clpt")
        assert loaded.dtype == np.float32
        np.testing.assert_array_equal(loaded, clip)

    def test_header_layout(self) -> None:
        data = encode_clip(_make_video(4, 8))
        assert data[:4] == b"CLPT"
        assert struct.unpack_from("<H4I", data, 4) == (1, 3, 4, 8, 8)
        assert len(data) == 22 + 4 * 3 * 4 * 8 * 8

    def test_truncated_payload(self) -> None:
        data = encode_clip(_make_video(4, 8))[:-10]
        with pytest.raises(FormatError, match="truncated payload") as info:
            decode_clip(data)
        assert info.value.offset == len(data)

    def test_trailing_bytes(self) -> None:
        data = encode_clip(_make_video(4, 8))
        with pytest.raises(FormatError, match="trailing bytes") as info:
            decode_clip(data + b"\x00")
        assert info.value.offset == len(data)

    def test_bad_magic(self) -> None:
        data = b"NOPE" + encode_clip(_make_video(2, 4))[4:]
        with pytest.raises(FormatError, match="bad magic"):
            decode_clip(data)

    def test_values_outside_unit_range(self) -> None:
        with pytest.raises(DataError, match="\\[0, 1\\]"):
            encode_clip(np.full((3, 2, 4, 4), 1.5, dtype=np.float32))

    def test_wrong_channel_count(self) -> None:
        with pytest.raises(DimensionError):
            encode_clip(np.zeros((1, 2, 4, 4), dtype=np.float32))


# ---------------------------------------------------------------------------
# Resize and face crops
# ---------------------------------------------------------------------------


class TestResize:
    def test_half_pixel_downsample(self) -> None:
        row = np.array([[0.0, 1.0, 2.0, 3.0]])
        np.testing.assert_allclose(resize_bilinear(row, 1, 2), [[0.5, 2.5]])

    def test_constant_image_stays_constant(self) -> None:
        img = np.full((3, 7, 5), 0.25, dtype=np.float32)
        out = resize_bilinear(img, 12, 9)
        assert out.shape == (3, 12, 9)
        assert out.dtype == np.float32
        np.testing.assert_allclose(out, 0.25)

    def test_same_size_is_copy(self) -> None:
        img = np.random.default_rng(0).random((4, 4))
        out = resize_bilinear(img, 4, 4)
        np.testing.assert_array_equal(out, img)
        assert out is not img

    def test_non_positive_size(self) -> None:
        with pytest.raises(DimensionError):
            resize_bilinear(np.zeros((4, 4)), 0, 4)


class TestCropFaces:
    def test_crop_shape(self) -> None:
        frames = np.random.default_rng(1).random((2, 3, 20, 20)).astype(np.float32)
        out = crop_faces(frames, [(0, 0, 10, 10), (5, 5, 8, 12)], out_size=16)
        assert out.shape == (2, 3, 16, 16)

    def test_full_frame_box_at_same_size_is_identity(self) -> None:
        frames = np.random.default_rng(2).random((3, 3, 12, 12)).astype(np.float32)
        out = crop_faces(frames, [(0, 0, 12, 12)] * 3, out_size=12)
        np.testing.assert_array_equal(out, frames)

    def test_half_size_checkerboard_averages_quads(self) -> None:
        board = np.indices((4, 4)).sum(axis=0) % 2
        frames = np.broadcast_to(board, (1, 3, 4, 4)).astype(np.float64)
        np.testing.assert_allclose(crop_faces(frames, [(0, 0, 4, 4)], out_size=2), 0.5, atol=1e-12)

    def test_half_size_crop_averages_quads(self) -> None:
        plane = np.arange(36, dtype=np.float64).reshape(6, 6)
        frames = np.broadcast_to(plane, (1, 3, 6, 6)).copy()
        out = crop_faces(frames, [(1, 1, 4, 4)], out_size=2)
        window = plane[1:5, 1:5]
        quads = window.reshape(2, 2, 2, 2).mean(axis=(1, 3))
        for channel in range(3):
            np.testing.assert_allclose(out[0, channel], quads, atol=1e-12)

    def test_box_outside_frame_names_frame(self) -> None:
        frames = np.zeros((2, 3, 10, 10), dtype=np.float32)
        with pytest.raises(DataError, match="frame 1: box") as info:
            crop_faces(frames, [(0, 0, 4, 4), (8, 8, 4, 4)])
        assert info.value.frame == 1

    def test_zero_area_box(self) -> None:
        with pytest.raises(DataError, match="zero area"):
            crop_faces(np.zeros((1, 3, 10, 10), dtype=np.float32), [(0, 0, 0, 4)])

    def test_box_count_mismatch(self) -> None:
        with pytest.raises(DataError, match="1 boxes for 2 frames"):
            crop_faces(np.zeros((2, 3, 10, 10), dtype=np.float32), [(0, 0, 4, 4)])

    def test_load_boxes(self, tmp_path) -> None:
        path = tmp_path / "boxes.csv"
        path.write_text("frame,x,y,w,h\n0,1,2,30,40\n1,2,3,30,40\n")
        assert load_boxes(path) == [(1, 2, 30, 40), (2, 3, 30, 40)]

    def test_load_boxes_out_of_order(self, tmp_path) -> None:
        path = tmp_path / "boxes.csv"
        path.write_text("frame,x,y,w,h\n0,1,2,30,40\n2,2,3,30,40\n")
        with pytest.raises(DataError, match="line 3: expected frame 1, got 2"):
            load_boxes(path)


# ---------------------------------------------------------------------------
# Clip sampling and normalization
# ---------------------------------------------------------------------------


class TestSampling:
    def test_eval_centers_start_and_crop(self) -> None:
        clip, window = sample_clip(_make_video(20, 16), 16, (8, 8), "eval")
        assert clip.shape == (3, 16, 8, 8)
        assert window.start == 2
        # 16 -> 9 short side, 8x8 centered
        assert (window.top, window.left) == (0, 0)

    def test_train_is_seeded(self) -> None:
        video = _make_video(30, 16)
        a, wa = sample_clip(video, 16, (8, 8), "train", seed=5)
        b, wb = sample_clip(video, 16, (8, 8), "train", seed=5)
        assert wa == wb
        np.testing.assert_array_equal(a, b)
        assert 0 <= wa.start <= 14

    def test_train_starts_within_range(self) -> None:
        video = np.zeros((3, 100, 9, 9), dtype=np.float32)
        starts = {sample_clip(video, 16, (8, 8), "train", seed=s)[1].start for s in range(2000)}
        assert min(starts) >= 0
        assert max(starts) <= 84
        # uniform over 85 starts, so both ends show up in 2000 draws
        assert {0, 84} <= starts

    def test_train_crop_windows_in_bounds(self) -> None:
        # 9x12 frames are already at the 8 -> 9 pre-crop size
        video = np.zeros((3, 16, 9, 12), dtype=np.float32)
        for s in range(10_000):
            clip, window = sample_clip(video, 16, (8, 8), "train", seed=s)
            assert clip.shape == (3, 16, 8, 8)
            assert 0 <= window.top <= 1
            assert 0 <= window.left <= 4

    def test_frames_are_consecutive(self) -> None:
        video = np.zeros((3, 40, 18, 18), dtype=np.float32)
        video[0] = np.arange(40, dtype=np.float32)[:, None, None]
        for s in range(20):
            clip, window = sample_clip(video, 16, (8, 8), "train", seed=s)
            for i in range(16):
                np.testing.assert_allclose(clip[0, i], window.start + i, atol=1e-4)

    def test_explicit_start(self) -> None:
        _, window = sample_clip(_make_video(20, 16), 16, (8, 8), start=4)
        assert window.start == 4
        with pytest.raises(DataError, match="start 5 outside"):
            sample_clip(_make_video(20, 16), 16, (8, 8), start=5)

    def test_too_few_frames(self) -> None:
        with pytest.raises(DataError, match="has 10 frames, need 16"):
            sample_clip(_make_video(10, 16), 16, (8, 8))

    def test_eval_starts(self) -> None:
        assert eval_starts(32, 16) == [8]
        assert eval_starts(32, 16, 3) == [0, 8, 16]
        assert eval_starts(16, 16, 4) == [0]
        with pytest.raises(DataError):
            eval_starts(8, 16)


class TestNormalization:
    def test_round_trip(self) -> None:
        clip = _make_video(2, 4)
        mean, std = np.array([0.4, 0.5, 0.6]), np.array([0.2, 0.25, 0.3])
        np.testing.assert_allclose(denormalize(normalize(clip, mean, std), mean, std), clip, atol=1e-6)

    def test_batched_clips(self) -> None:
        batch = np.ones((2, 3, 2, 4, 4), dtype=np.float32)
        out = normalize(batch, np.array([0.0, 0.5, 1.0]), np.ones(3))
        np.testing.assert_allclose(out[:, 1], 0.5)
        np.testing.assert_allclose(out[:, 2], 0.0)

    def test_non_positive_std(self) -> None:
        with pytest.raises(NumericError, match="normalize: per-channel std must be positive"):
            normalize(_make_video(2, 4), np.zeros(3), np.array([1.0, 0.0, 1.0]))

    def test_channel_stats(self) -> None:
        a = np.zeros((3, 2, 2, 2))
        b = np.ones((3, 2, 2, 2))
        mean, std = channel_stats([a, b])
        np.testing.assert_allclose(mean, 0.5)
        np.testing.assert_allclose(std, 0.5)

    def test_channel_stats_empty(self) -> None:
        with pytest.raises(DataError):
            channel_stats([])


# ---------------------------------------------------------------------------
# Frame directories
# ---------------------------------------------------------------------------


class TestReadFrames:
    def test_reads_in_name_order(self, tmp_path) -> None:
        for i, value in enumerate((0, 255)):
            Image.new("RGB", (6, 4), (value, value, value)).save(tmp_path / f"{i:04d}.png")
        frames = read_frames(tmp_path)
        assert frames.shape == (2, 3, 4, 6)
        assert frames.dtype == np.float32
        assert frames[0].max() == 0.0 and frames[1].min() == 1.0

    def test_size_change_names_frame(self, tmp_path) -> None:
        Image.new("RGB", (6, 4)).save(tmp_path / "0000.png")
        Image.new("RGB", (8, 4)).save(tmp_path / "0001.png")
        with pytest.raises(DataError, match="frame 1: frame size"):
            read_frames(tmp_path)

    def test_undecodable_image(self, tmp_path) -> None:
        (tmp_path / "0000.png").write_bytes(b"not an image")
        with pytest.raises(DataError, match="frame 0: cannot decode"):
            read_frames(tmp_path)

    def test_empty_directory(self, tmp_path) -> None:
        with pytest.raises(DataError, match="no frame images"):
            read_frames(tmp_path)


# ---------------------------------------------------------------------------
# Synthetic dataset
# ---------------------------------------------------------------------------


class TestSynth:
    def test_layout_and_splits(self, tmp_path) -> None:
        manifest = synth_dataset(SynthConfig(10, 10, frames=4, hw=8), tmp_path)
        assert (tmp_path / "manifest.csv").is_file()
        assert (tmp_path / "clips" / "fake_00009.clpt").is_file()
        assert manifest.split_counts() == {"train": (8, 8), "test": (2, 2)}
        assert read_clip(tmp_path / "clips" / "real_00000.clpt").shape == (3, 4, 8, 8)

    def test_byte_identical_for_same_seed(self, tmp_path) -> None:
        config = SynthConfig(3, 3, frames=4, hw=8, seed=11)
        synth_dataset(config, tmp_path / "a")
        synth_dataset(config, tmp_path / "b")
        for path in sorted((tmp_path / "a").rglob("*.*")):
            twin = tmp_path / "b" / path.relative_to(tmp_path / "a")
            assert path.read_bytes() == twin.read_bytes(), path.name

    def test_zero_strength_fakes_are_real_clips(self, tmp_path) -> None:
        synth_dataset(SynthConfig(2, 2, frames=4, hw=8, artifact_strength=0.0), tmp_path)
        clip = read_clip(tmp_path / "clips" / "fake_00000.clpt")
        assert np.all((clip >= 0) & (clip <= 1))

    def test_invalid_config(self) -> None:
        with pytest.raises(ConfigurationError, match="test_fraction"):
            SynthConfig(2, 2, test_fraction=1.0)


# ---------------------------------------------------------------------------
# Cache and loader
# ---------------------------------------------------------------------------


class TestClipCache:
    def test_lru_eviction_and_health(self) -> None:
        reads: list[Path] = []

        def reader(path: Path) -> np.ndarray:
            reads.append(path)
            return np.zeros((3, 1, 2, 2), dtype=np.float32)

        cache = ClipCache(maxsize=2, reader=reader)
        for name in ("a", "b", "a", "c", "b"):
            cache.get(name)
        assert reads == [Path("a"), Path("b"), Path("c"), Path("b")]
        health = cache.health()
        assert health["hits"] == 1
        assert health["misses"] == 4
        assert health["evictions"] == 2
        assert health["cache_size"] == 2

    def test_cached_arrays_are_read_only(self) -> None:
        cache = ClipCache(reader=lambda _: np.zeros((3, 1, 2, 2), dtype=np.float32))
        with pytest.raises(ValueError):
            cache.get("a")[0, 0, 0, 0] = 1.0

    def test_zero_size_never_stores(self) -> None:
        cache = ClipCache(maxsize=0, reader=lambda _: np.zeros(1))
        cache.get("a")
        cache.get("a")
        assert cache.size == 0
        assert cache.health()["misses"] == 2


class TestClipLoader:
    def test_same_batches_for_any_thread_count(self, tmp_path) -> None:
        manifest = synth_dataset(SynthConfig(5, 5, frames=20, hw=16, test_fraction=0.0), tmp_path)
        windows = []
        for threads in (1, 4):
            loader = ClipLoader(
                manifest, "train", (3, 16, 8, 8), batch_size=3, seed=9, runtime=RuntimeConfig(threads),
            )
            assert len(loader) == 4
            batches = list(loader.epoch(2))
            windows.append([(b.indices, b.windows) for b in batches])
            assert batches[0].clips.shape == (3, 3, 16, 8, 8)
            assert batches[-1].clips.shape[0] == 1
        assert windows[0] == windows[1]

    def test_epochs_reshuffle(self, tmp_path) -> None:
        manifest = synth_dataset(SynthConfig(6, 6, frames=16, hw=8, test_fraction=0.0), tmp_path)
        loader = ClipLoader(manifest, "train", (3, 16, 8, 8), seed=1)
        assert list(loader.order(0)) != list(loader.order(1))
        assert sorted(loader.order(0)) == list(range(12))

    def test_short_records_skipped(self) -> None:
        manifest = _make_manifest(("a.clpt", 0, "train", 16), ("b.clpt", 1, "train", 8))
        loader = ClipLoader(manifest, "train", (3, 16, 8, 8))
        assert [r.path for r in loader.records] == ["a.clpt"]
        np.testing.assert_array_equal(loader.labels, [0])

    def test_eval_order_is_manifest_order(self) -> None:
        manifest = _make_manifest(*[(f"{i}.clpt", i % 2, "test", 16) for i in range(5)])
        loader = ClipLoader(manifest, "test", (3, 16, 8, 8), mode="eval")
        assert list(loader.order(3)) == [0, 1, 2, 3, 4]
