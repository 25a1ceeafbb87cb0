import json

import numpy as np
import pytest

from classreg.block import ClassRegBlock, normalize_affection
from classreg.errors import InputError, ShapeError, StateError
from classreg.saliency import (
    SaliencyMap,
    compute_block_saliency,
    export_frames,
    quantize,
    read_pgm,
    upsample_nearest,
    write_pgm,
)


def forwarded_block(a, affection_rate=0.6, seed=0, snap_seed=1):
    rng = np.random.default_rng(snap_seed)
    blk = ClassRegBlock("blk", feature_dim=4, channels=a.shape[1], classes=5,
                        affection_rate=affection_rate, mode="straddle", seed=seed)
    blk.refresh_snapshot(rng.standard_normal((5, 4)))
    blk.forward(a)
    return blk


class TestComputeSaliency:
    def test_single_nonzero_channel(self):
        a = np.zeros((1, 3, 2, 2, 2))
        a[0, 1] = np.random.default_rng(0).standard_normal((2, 2, 2))
        blk = forwarded_block(a)
        smap = compute_block_saliency(blk, class_index=2)
        w = normalize_affection(blk.last_weights[2], blk.affection_rate, blk.mode)
        expected = np.maximum(w[1] * blk.last_output[0, 1], 0.0)
        if expected.max() > 0:
            expected = expected / expected.max()
        np.testing.assert_allclose(smap.volume, expected, atol=1e-12)

    def test_all_zero_activations(self):
        a = np.zeros((1, 3, 2, 2, 2))
        blk = forwarded_block(a)
        smap = compute_block_saliency(blk, class_index=0)
        assert np.all(smap.volume == 0.0)

    def test_two_channel_hand_case(self):
        a = np.zeros((1, 2, 1, 1, 2))
        a[0, 0] = 1.0
        a[0, 1] = 2.0
        blk = ClassRegBlock("blk", feature_dim=2, channels=2, classes=2,
                            affection_rate=0.5, mode="straddle", seed=0)
        blk.proj.weights.value[...] = np.eye(2).reshape(2, 2, 1, 1, 1)
        blk.proj.bias.value[...] = 0.0
        blk.refresh_snapshot(np.array([[0.0, 1.0], [1.0, 0.0]]))
        blk.forward(a)
        smap = compute_block_saliency(blk, class_index=0)
        # class-0 row [0,1] -> straddle [0.5, 1.5]; excited channels are
        # a*(w_hat of the selected class); weighted sum then max-normalized
        w_sel = normalize_affection(blk.last_weights[int(blk.last_selected[0])],
                                    0.5, "straddle")
        excited0 = 1.0 * w_sel[0]
        excited1 = 2.0 * w_sel[1]
        manual = 0.5 * excited0 + 1.5 * excited1
        expected = np.full((1, 1, 2), manual)
        expected = expected / expected.max()
        np.testing.assert_allclose(smap.volume, expected, atol=1e-12)

    def test_scores_normalized_and_nonnegative(self):
        rng = np.random.default_rng(3)
        blk = forwarded_block(rng.standard_normal((1, 3, 2, 3, 3)))
        smap = compute_block_saliency(blk)
        assert np.all(smap.volume >= 0.0)
        assert smap.volume.max() == 1.0

    def test_rescale_invariance(self):
        rng = np.random.default_rng(4)
        a = rng.standard_normal((1, 3, 2, 3, 3))
        s1 = compute_block_saliency(forwarded_block(a), class_index=1)
        s2 = compute_block_saliency(forwarded_block(37.5 * a), class_index=1)
        np.testing.assert_allclose(s1.volume, s2.volume, atol=1e-9)

    def test_auto_class_uses_selection(self):
        rng = np.random.default_rng(5)
        blk = forwarded_block(rng.standard_normal((1, 3, 2, 2, 2)))
        smap = compute_block_saliency(blk)
        assert smap.class_index == int(blk.last_selected[0])

    def test_class_out_of_range(self):
        rng = np.random.default_rng(6)
        blk = forwarded_block(rng.standard_normal((1, 3, 2, 2, 2)))
        with pytest.raises(InputError):
            compute_block_saliency(blk, class_index=5)

    def test_requires_forward(self):
        blk = ClassRegBlock("blk", 4, 3, 5, 0.5, "straddle")
        with pytest.raises(StateError):
            compute_block_saliency(blk)

    def test_requires_single_clip(self):
        rng = np.random.default_rng(7)
        blk = forwarded_block(rng.standard_normal((2, 3, 2, 2, 2)))
        with pytest.raises(StateError):
            compute_block_saliency(blk)


class TestUpsampleQuantize:
    def test_2x2_to_4x4_blocks(self):
        vol = np.array([[[0.0, 0.25], [0.5, 1.0]]])  # [1,2,2]
        up = upsample_nearest(vol, (1, 4, 4))
        for sy, sx in ((0, 0), (0, 1), (1, 0), (1, 1)):
            block = up[0, 2 * sy:2 * sy + 2, 2 * sx:2 * sx + 2]
            assert np.all(block == vol[0, sy, sx])

    def test_target_smaller_rejected(self):
        with pytest.raises(ShapeError):
            upsample_nearest(np.zeros((2, 4, 4)), (1, 4, 4))

    def test_quantize_rounds_half_up(self):
        v = np.array([0.0, 0.5 / 255.0, 1.0 / 255.0, 1.0])
        np.testing.assert_array_equal(quantize(v), [0, 1, 1, 255])

    def test_constant_one_becomes_255(self):
        assert np.all(quantize(np.ones((2, 2))) == 255)


class TestPgm:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(8)
        img = rng.integers(0, 256, size=(5, 7), dtype=np.uint8)
        path = tmp_path / "img.pgm"
        write_pgm(path, img)
        np.testing.assert_array_equal(read_pgm(path), img)

    def test_header(self, tmp_path):
        img = np.zeros((2, 3), dtype=np.uint8)
        path = tmp_path / "img.pgm"
        write_pgm(path, img)
        assert path.read_bytes().startswith(b"P5\n3 2\n255\n")


class TestExportFrames:
    def _map(self, volume, block_id=0, class_index=2):
        return SaliencyMap(block_id=block_id, class_index=class_index,
                           volume=volume, source_shape=volume.shape)

    def test_file_naming_and_count(self, tmp_path):
        vol = np.random.default_rng(9).random((3, 2, 2))
        vol /= vol.max()
        paths = export_frames(self._map(vol), (3, 4, 4), tmp_path, prefix="sal")
        assert [p.name for p in paths] == [
            "sal_b0_c2_f0.pgm", "sal_b0_c2_f1.pgm", "sal_b0_c2_f2.pgm"
        ]

    def test_frames_parse_back_to_quantized_values(self, tmp_path):
        vol = np.random.default_rng(10).random((2, 3, 3))
        vol /= vol.max()
        smap = self._map(vol)
        paths = export_frames(smap, (2, 6, 6), tmp_path)
        expected = quantize(upsample_nearest(vol, (2, 6, 6)))
        for f, path in enumerate(paths):
            np.testing.assert_array_equal(read_pgm(path), expected[f])

    def test_brightest_pixel_matches_argmax(self, tmp_path):
        rng = np.random.default_rng(11)
        vol = rng.random((2, 4, 4)) * 0.7
        vol[1, 2, 3] = 1.0  # unique, well-separated peak
        smap = self._map(vol)
        paths = export_frames(smap, (4, 8, 8), tmp_path)
        pre = upsample_nearest(vol, (4, 8, 8))
        flat_argmax = np.unravel_index(np.argmax(pre), pre.shape)
        images = np.stack([read_pgm(p) for p in paths])
        assert np.unravel_index(np.argmax(images), images.shape) == flat_argmax

    def test_index_json(self, tmp_path):
        vol = np.ones((2, 2, 2))
        export_frames(self._map(vol, block_id=1, class_index=3), (2, 2, 2), tmp_path)
        index = json.loads((tmp_path / "saliency_index.json").read_text())
        assert len(index["files"]) == 2
        assert index["files"][0] == {
            "path": "saliency_b1_c3_f0.pgm", "block": 1, "class": 3, "frame": 0
        }

    def test_index_merges_blocks(self, tmp_path):
        vol = np.ones((1, 2, 2))
        export_frames(self._map(vol, block_id=0), (1, 2, 2), tmp_path)
        export_frames(self._map(vol, block_id=1), (1, 2, 2), tmp_path)
        index = json.loads((tmp_path / "saliency_index.json").read_text())
        assert {f["block"] for f in index["files"]} == {0, 1}
