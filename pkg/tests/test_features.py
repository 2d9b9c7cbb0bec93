import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cotrack.core import BBox, WindowWeights, hann_window
from cotrack.errors import DataError, InvalidArgument, TrackingLost
from cotrack.features import (
    CNLookupTable,
    FeatureGrid,
    align_stack,
    default_table,
    extract_cn,
    extract_features,
    extract_hog,
    extract_lbp,
    extract_patch,
    load_cn_table,
    save_cn_table,
)
from cotrack.features import cn as cnmod
from cotrack.features.hog import orientation_bins, pixel_gradients
from cotrack.features.lbp import lbp_codes


def rand_patch(rng, shape=(64, 64, 3)):
    return rng.integers(0, 256, size=shape, dtype=np.uint8)


class TestPatch:
    def test_identity_crop(self, rng):
        frame = rand_patch(rng, (50, 60, 3))
        b = BBox(20, 10, 16, 12)
        out = extract_patch(frame, b, 1.0, 12, 16)
        np.testing.assert_array_equal(out, frame[10:22, 20:36])

    def test_left_edge_replication(self, rng):
        frame = rand_patch(rng, (40, 40))
        b = BBox(0, 10, 10, 10)
        out = extract_patch(frame, b, 2.0, 20, 20)
        # the window spans x in [-5, 15): its first 5 columns replicate column 0
        np.testing.assert_array_equal(out[:, :5], np.repeat(frame[5:25, :1], 5, axis=1))

    def test_uniform_frame(self):
        frame = np.full((30, 30, 3), 77, np.uint8)
        out = extract_patch(frame, BBox(3, 4, 7, 9), 2.5, 17, 13)
        assert out.shape == (17, 13, 3) and np.all(out == 77)

    def test_outside_is_lost(self):
        with pytest.raises(TrackingLost):
            extract_patch(np.zeros((20, 20)), BBox(100, 100, 5, 5), 1.5, 8, 8)

    def test_bad_padding(self):
        with pytest.raises(InvalidArgument):
            extract_patch(np.zeros((20, 20)), BBox(1, 1, 5, 5), 0.5, 8, 8)


def hog_oracle(gray, cell):
    """Per-cell 18-bin orientation histograms by direct pixel loops (hard binning)."""
    dx, dy = pixel_gradients(gray)
    bins, mag = orientation_bins(dx, dy)
    r, c = gray.shape
    h = np.zeros((r // cell, c // cell, 18))
    for i in range(r):
        for j in range(c):
            h[i // cell, j // cell, bins[i, j]] += mag[i, j]
    return h


class TestHog:
    def test_shape(self, rng):
        g = extract_hog(rand_patch(rng), 4)
        assert g.values.shape == (16, 16, 31) and g.kind == "hog"

    def test_constant_patch(self):
        v = extract_hog(np.full((32, 32), 120, np.uint8), 4).values
        assert np.all(np.abs(v) <= 1e-9)

    def test_vertical_edge_energy(self):
        patch = np.zeros((32, 32), np.uint8)
        patch[:, 16:] = 200
        oracle = hog_oracle(patch.astype(float), 4)
        # a dark-to-bright vertical edge is a +x gradient: orientation 0 of 18
        assert np.argmax(oracle.sum(axis=(0, 1))) == 0
        v = extract_hog(patch, 4).values
        sens = v[:, :, :18].sum(axis=(0, 1))
        insens = v[:, :, 18:27].sum(axis=(0, 1))
        assert np.argmax(sens) == 0 and np.argmax(insens) == 0
        assert sens[0] > 0.9 * sens.sum()

    def test_bright_to_dark_uses_opposite_bin(self):
        patch = np.zeros((32, 32), np.uint8)
        patch[:, :16] = 200
        v = extract_hog(patch, 4).values
        assert np.argmax(v[:, :, :18].sum(axis=(0, 1))) == 9

    def test_too_small(self):
        with pytest.raises(InvalidArgument):
            extract_hog(np.zeros((3, 3)), 4)

    def test_translation_covariant(self, rng):
        img = rand_patch(rng, (48, 48))
        a = extract_hog(img[:, 4:44], 4).values
        b = extract_hog(img[:, 0:40], 4).values
        np.testing.assert_allclose(a[2:-2, 2:-3], b[2:-2, 3:-2], atol=1e-12)


class TestCN:
    def test_shape(self, rng):
        g = extract_cn(rand_patch(rng), 4)
        assert g.values.shape == (16, 16, 11) and not g.fallback

    def test_black_patch(self):
        t = default_table()
        v = extract_cn(np.zeros((16, 16, 3), np.uint8), 4, t).values
        expect = np.argmax(t.table[0])
        assert np.all(np.argmax(v, axis=2) == expect)
        assert cnmod.NAMES[expect] == "black"

    def test_two_color_average(self):
        t = default_table()
        patch = np.zeros((4, 4, 3), np.uint8)
        patch[:, :2] = (255, 0, 0)
        patch[:, 2:] = (0, 0, 255)
        v = extract_cn(patch, 4, t).values[0, 0]
        expect = 0.5 * (t.lookup(np.array([255, 0, 0])) + t.lookup(np.array([0, 0, 255])))
        np.testing.assert_allclose(v, expect, atol=1e-12)

    def test_prototype_argmax(self):
        t = default_table()
        for k, rgb in enumerate(cnmod.PROTOTYPES.astype(int)):
            assert np.argmax(t.lookup(rgb)) == k

    def test_grayscale_fallback(self, rng):
        g = extract_cn(rand_patch(rng, (16, 16)), 4)
        assert g.fallback and g.kind == "gray" and g.values.shape == (4, 4, 1)

    def test_table_validation(self):
        with pytest.raises(DataError):
            CNLookupTable(np.zeros((10, 11)))
        bad = np.full((cnmod.N_ENTRIES, 11), 1 / 11)
        bad[5, 0] = -0.1
        with pytest.raises(DataError):
            CNLookupTable(bad)
        with pytest.raises(DataError):
            CNLookupTable(np.full((cnmod.N_ENTRIES, 11), 0.5))

    def test_file_round_trip_and_env(self, tmp_path, monkeypatch):
        path = tmp_path / "cn.bin"
        save_cn_table(default_table(), path)
        t = load_cn_table(path)
        np.testing.assert_allclose(t.table, default_table().table, atol=1e-6)
        monkeypatch.setenv(cnmod.ENV_VAR, str(path))
        assert default_table().table.shape == (cnmod.N_ENTRIES, 11)

    def test_truncated_file(self, tmp_path):
        path = tmp_path / "cn.bin"
        np.zeros(100, "<f4").tofile(path)
        with pytest.raises(DataError):
            load_cn_table(path)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_cells_are_distributions(self, seed):
        v = extract_cn(rand_patch(np.random.default_rng(seed), (8, 8, 3)), 4).values
        assert np.all(v >= 0)
        np.testing.assert_allclose(v.sum(axis=2), 1.0, atol=1e-3)


class TestLBP:
    def test_shape(self, rng):
        assert extract_lbp(rand_patch(rng), 4).values.shape == (16, 16, 10)

    def test_constant_patch(self):
        v = extract_lbp(np.full((16, 16), 9, np.uint8), 4).values
        assert np.all(v[:, :, 0] == 1.0) and np.all(v[:, :, 1:] == 0)
        assert np.all(lbp_codes(np.full((5, 5), 3)) == 0)

    def test_histograms_sum_to_one(self, rng):
        v = extract_lbp(rand_patch(rng), 4).values
        np.testing.assert_allclose(v.sum(axis=2), 1.0, atol=1e-9)

    def test_single_bright_pixel(self):
        img = np.zeros((3, 3))
        img[1, 2] = 5  # east neighbor of the center
        assert lbp_codes(img)[1, 1] == 1 << 3

    def test_too_small(self):
        with pytest.raises(InvalidArgument):
            extract_lbp(np.zeros((2, 2)), 1)


class TestAlign:
    def test_identity(self, rng):
        g = FeatureGrid(rng.standard_normal((6, 5, 3)), "raw")
        out = align_stack([g], 6, 5, WindowWeights(np.ones((6, 5))))
        np.testing.assert_array_equal(out.grids[0].values, g.values)
        assert out.windowed

    def test_constant_downsample(self):
        g = FeatureGrid(np.full((12, 10, 2), 3.5), "raw")
        out = align_stack([g], 6, 5, WindowWeights(np.ones((6, 5))))
        np.testing.assert_allclose(out.grids[0].values, 3.5)

    def test_hann_ring(self, rng):
        grids = [FeatureGrid(rng.random((9, 7, c)), "raw") for c in (1, 4)]
        out = align_stack(grids, 8, 6, hann_window(8, 6))
        for g in out.grids:
            v = g.values
            assert np.all(v[0] == 0) and np.all(v[-1] == 0) and np.all(v[:, 0] == 0) and np.all(v[:, -1] == 0)

    def test_errors(self):
        with pytest.raises(InvalidArgument):
            align_stack([], 4, 4, hann_window(4, 4))
        with pytest.raises(InvalidArgument):
            align_stack([FeatureGrid(np.ones((4, 4, 1)), "raw")], 4, 4, hann_window(5, 4))

    def test_extract_features_stack(self, rng):
        stack = extract_features(rand_patch(rng, (40, 48, 3)), ("hog", "cn", "lbp"), 4, hann_window(10, 12))
        assert stack.shape == (10, 12) and stack.kinds == ("hog", "cn", "lbp")
        assert [g.channels for g in stack.grids] == [31, 11, 10]
        gray = extract_features(rand_patch(rng, (40, 48)), ("cn",), 4, hann_window(10, 12))
        assert "cn_fallback" in gray.diagnostics

    def test_channel_counts_enforced(self):
        with pytest.raises(InvalidArgument):
            FeatureGrid(np.ones((4, 4, 3)), "hog")
