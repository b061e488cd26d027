import dataclasses
import math

import numpy as np
import pytest

from pabeam import dsp
from pabeam.classic import dmas, image_classic
from pabeam.core import AcquisitionParams, ArrayGeometry, BeamformConfig, ChannelDataSet, ImagingGrid, Method
from pabeam.delay import scanline_snapshots
from pabeam.hybrid import eibmv_dmas_line, image_eibmv_dmas, term_lines, term_windows
from pabeam.synth import NoiseSpec, Phantom, add_noise, simulate_channels

from conftest import zero_channels

FS = 50e6


@pytest.fixture(scope="module")
def noisy(single_absorber_channels):
    return add_noise(single_absorber_channels, NoiseSpec(40, seed=8))


def degenerate(L):
    return BeamformConfig(method=Method.EIBMV_DMAS, subarray_length=L, temporal_half_width=0,
                          subspace_threshold=0.0, filtering=False)


class TestTermLines:
    def test_zero(self, small_geometry, acq, small_grid):
        terms = term_lines(zero_channels(small_geometry, acq), 3, small_grid)
        assert terms.shape == (15, len(small_grid.rf_depths(acq)))
        assert not np.any(terms)

    def test_row_sum_is_dmas_line(self, noisy, small_grid):
        col = 7
        terms = term_lines(noisy, col, small_grid)
        total = terms[0].copy()
        for row in terms[1:]:
            total = total + row
        snaps = scanline_snapshots(noisy, small_grid.lateral_positions[col], small_grid.rf_depths(noisy.acq))
        np.testing.assert_array_equal(total, dmas(snaps))

    def test_two_elements(self, acq, small_grid):
        geo = ArrayGeometry(2, 0.3e-3)
        rng = np.random.default_rng(0)
        ch = ChannelDataSet(rng.standard_normal((2, acq.num_samples)), acq, geo)
        terms = term_lines(ch, 4, small_grid)
        snaps = scanline_snapshots(ch, small_grid.lateral_positions[4], small_grid.rf_depths(acq))
        expected = [math.copysign(math.sqrt(abs(a * b)), a * b) for a, b in snaps]
        np.testing.assert_allclose(terms[0], expected, rtol=1e-14)


class TestTermWindows:
    def test_zero_padding_and_center(self):
        terms = np.arange(12.0).reshape(3, 4)
        w = term_windows(terms, 1)
        assert w.shape == (4, 3, 3)
        np.testing.assert_array_equal(w[:, :, 1], terms.T)
        np.testing.assert_array_equal(w[0, :, 0], 0.0)
        np.testing.assert_array_equal(w[-1, :, 2], 0.0)


class TestEibmvDmasLine:
    def test_unit_subarray_degenerates_to_scaled_dmas(self, noisy, small_grid):
        terms = term_lines(noisy, 10, small_grid)
        out = eibmv_dmas_line(terms, degenerate(1), FS)
        ref = terms.sum(axis=0) / terms.shape[0]
        np.testing.assert_allclose(out, ref, rtol=0, atol=1e-9 * np.max(np.abs(ref)))

    def test_full_subarray_is_not_uniform(self, noisy, small_grid):
        # one subarray: R = t t' + eps I, whose MV weights are not uniform
        terms = term_lines(noisy, 10, small_grid)
        out = eibmv_dmas_line(terms, degenerate(terms.shape[0]), FS)
        ref = terms.sum(axis=0) / terms.shape[0]
        assert np.max(np.abs(out - ref)) > 0.1 * np.max(np.abs(ref))

    def test_zero_terms(self):
        out = eibmv_dmas_line(np.zeros((15, 200)), BeamformConfig(method=Method.EIBMV_DMAS, subarray_length=8), FS)
        np.testing.assert_array_equal(out, 0.0)

    def test_subarray_too_long(self):
        with pytest.raises(ValueError):
            eibmv_dmas_line(np.ones((15, 50)), BeamformConfig(method=Method.EIBMV_DMAS, subarray_length=16), FS)

    def test_scale_covariance(self, noisy, small_grid):
        cfg = BeamformConfig(method=Method.EIBMV_DMAS, subarray_length=8)
        col = 9
        base = eibmv_dmas_line(term_lines(noisy, col, small_grid), cfg, FS)
        alpha = 3.7
        scaled_channels = noisy.with_samples(alpha * noisy.samples)
        scaled = eibmv_dmas_line(term_lines(scaled_channels, col, small_grid), cfg, FS)
        np.testing.assert_allclose(scaled, alpha * base, rtol=0, atol=1e-9 * alpha * np.max(np.abs(base)))

    def test_finite_on_noise(self, small_geometry, acq, small_grid):
        rng = np.random.default_rng(1)
        ch = ChannelDataSet(rng.standard_normal((small_geometry.num_elements, acq.num_samples)), acq, small_geometry)
        out = eibmv_dmas_line(term_lines(ch, 0, small_grid), BeamformConfig(method=Method.EIBMV_DMAS, subarray_length=8), FS)
        assert np.all(np.isfinite(out))

    def test_five_absorber_peaks(self, acq):
        geo = ArrayGeometry(32, 0.3e-3)
        ch = add_noise(simulate_channels(Phantom.reference_default(), geo, acq), NoiseSpec(50, seed=0))
        grid = ImagingGrid(lateral_extent=0.0, axial_range=(20e-3, 50e-3), spacing=0.2e-3)
        cfg = BeamformConfig(method=Method.EIBMV_DMAS, subarray_length=16)
        line = eibmv_dmas_line(term_lines(ch, 0, grid), cfg, FS)
        env = dsp.resample_rows(dsp.envelope(line)[:, None], grid.rf_depths(acq), grid.axial_positions)[:, 0]
        for depth in (25e-3, 30e-3, 35e-3, 40e-3, 45e-3):
            target = grid.row_of_depth(depth)
            lo, hi = target - 10, target + 11
            peak = lo + int(np.argmax(env[lo:hi]))
            assert abs(peak - target) <= 1


class TestImageEibmvDmas:
    def test_zero_channels(self, small_geometry, acq, small_grid):
        img = image_eibmv_dmas(zero_channels(small_geometry, acq), small_grid,
                               BeamformConfig(method=Method.EIBMV_DMAS, subarray_length=8))
        assert not np.any(img)

    def test_unit_subarray_image_matches_dmas(self, noisy, small_grid):
        img = image_eibmv_dmas(noisy, small_grid, degenerate(1))
        ref = image_classic(noisy, small_grid, BeamformConfig(method=Method.DMAS, filtering=False)) / 15
        np.testing.assert_allclose(img, ref, rtol=0, atol=1e-9 * np.max(np.abs(ref)))

    def test_wrong_method(self, noisy, small_grid):
        with pytest.raises(ValueError):
            image_eibmv_dmas(noisy, small_grid, BeamformConfig(method=Method.EIBMV))

    def test_workers_bit_identical(self, noisy, small_grid):
        cfg = BeamformConfig(method=Method.EIBMV_DMAS, subarray_length=8)
        a = image_eibmv_dmas(noisy, small_grid, cfg, workers=1)
        b = image_eibmv_dmas(noisy, small_grid, cfg, workers=2)
        assert a.tobytes() == b.tobytes()

    def test_filtering_applies_per_term(self, noisy, small_grid):
        cfg = BeamformConfig(method=Method.EIBMV_DMAS, subarray_length=8)
        off = dataclasses.replace(cfg, filtering=False)
        assert not np.allclose(image_eibmv_dmas(noisy, small_grid, cfg), image_eibmv_dmas(noisy, small_grid, off))
