import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pabeam import dsp
from pabeam.core import AcquisitionParams, ArrayGeometry
from pabeam.synth import (
    Absorber,
    NoiseSpec,
    Phantom,
    add_noise,
    impulse_response,
    nwave_pressure,
    signal_support,
    simulate_channels,
)

C = 1540.0
FS = 50e6


class TestNWave:
    def test_zero_at_arrival(self):
        assert nwave_pressure(25e-3, 0.1e-3, 1.0, 25e-3 / C, C) == pytest.approx(0.0, abs=1e-12)

    def test_leading_edge(self):
        R, a = 25e-3, 0.1e-3
        # p0 * a / (2R) = 0.002 p0
        p = nwave_pressure(R, a, 3.0, (R - a) / C, C)
        assert p == pytest.approx(3.0 * 0.002, rel=1e-6)

    def test_outside_support(self):
        R, a = 25e-3, 0.1e-3
        assert nwave_pressure(R, a, 1.0, (R + 2 * a) / C, C) == 0.0
        assert nwave_pressure(R, a, 1.0, 0.0, C) == 0.0

    def test_antisymmetry_exact_on_dyadic_values(self):
        R, a, c = 1.0, 0.5, 1.0
        for tau in (0.125, 0.25, 0.375, 0.5):
            assert nwave_pressure(R, a, 2.0, R / c + tau, c) == -nwave_pressure(R, a, 2.0, R / c - tau, c)

    @settings(max_examples=50, deadline=None)
    @given(frac=st.floats(0.0, 1.0))
    def test_antisymmetry(self, frac):
        R, a = 25e-3, 0.1e-3
        tau = frac * a / C * 0.999
        plus = nwave_pressure(R, a, 1.0, R / C + tau, C)
        minus = nwave_pressure(R, a, 1.0, R / C - tau, C)
        assert plus == pytest.approx(-minus, abs=1e-12 * a / R)

    def test_observer_inside_absorber(self):
        with pytest.raises(ValueError):
            nwave_pressure(0.05e-3, 0.1e-3, 1.0, 0.0, C)

    def test_negative_time(self):
        with pytest.raises(ValueError):
            nwave_pressure(1e-3, 0.1e-3, 1.0, -1e-9, C)


def _spectrum(kernel, nfft=1 << 16):
    mag = np.abs(np.fft.rfft(kernel, nfft))
    return np.fft.rfftfreq(nfft, 1 / FS), mag


class TestImpulseResponse:
    def test_peak_at_center_frequency(self):
        kernel = impulse_response()
        n = len(kernel)
        f = np.fft.rfftfreq(n, 1 / FS)
        peak = f[np.argmax(np.abs(np.fft.rfft(kernel)))]
        assert abs(peak - 4e6) <= FS / n

    def test_minus6db_width(self):
        f, mag = _spectrum(impulse_response())
        above = f[mag >= 0.5 * mag.max()]
        width = above.max() - above.min()
        assert width == pytest.approx(0.77 * 4e6, rel=0.05)

    def test_zero_phase(self):
        kernel = impulse_response()
        assert len(kernel) % 2 == 1
        np.testing.assert_array_equal(kernel, kernel[::-1])

    def test_unit_gain_at_center(self):
        kernel = impulse_response()
        t = (np.arange(len(kernel)) - len(kernel) // 2) / FS
        gain = abs(np.sum(kernel * np.exp(-2j * np.pi * 4e6 * t)))
        assert gain == pytest.approx(1.0, rel=1e-12)

    def test_truncation_level(self):
        kernel = impulse_response()
        n_half = len(kernel) // 2
        t_edge = n_half / FS
        sigma = math.sqrt(2 * math.log(2)) / (2 * math.pi * 0.77 * 4e6 / 2)
        assert math.exp(-0.5 * (t_edge / sigma) ** 2) >= 1e-3
        assert math.exp(-0.5 * ((n_half + 1) / FS / sigma) ** 2) < 1e-3

    @pytest.mark.parametrize("fc,fbw", [(0.0, 0.77), (30e6, 0.77), (4e6, 0.0), (4e6, 2.0)])
    def test_domain(self, fc, fbw):
        with pytest.raises(ValueError):
            impulse_response(fc, fbw, FS)


class TestSimulateChannels:
    acq = AcquisitionParams()

    def test_mirror_pair_doubles_center_element(self):
        geo = ArrayGeometry(17, 0.3e-3)
        one = simulate_channels(Phantom((Absorber((1e-3, 15e-3)),)), geo, self.acq)
        pair = simulate_channels(Phantom((Absorber((1e-3, 15e-3)), Absorber((-1e-3, 15e-3)))), geo, self.acq)
        np.testing.assert_allclose(pair.samples[8], 2 * one.samples[8], rtol=1e-12, atol=1e-15)

    def test_arrival_times(self):
        geo = ArrayGeometry(32, 0.3e-3)
        ch = simulate_channels(Phantom((Absorber((0.0, 25e-3)),)), geo, self.acq)
        half = len(impulse_response()) // 2
        expected = np.hypot(geo.element_x, 25e-3) / C * FS
        peaks = np.argmax(dsp.envelope(ch.samples, axis=1), axis=1)
        assert np.all(np.abs(peaks - expected) <= half)

    def test_time_of_flight_within_one_sample(self):
        # cross-channel delays from the peak of the band-passed N-wave envelope
        geo = ArrayGeometry(32, 0.3e-3)
        ch = simulate_channels(Phantom((Absorber((0.0, 25e-3)),)), geo, self.acq)
        env = dsp.envelope(ch.samples, axis=1)
        peaks = np.argmax(env, axis=1)
        arrivals = np.hypot(geo.element_x, 25e-3) / C * FS
        rel_measured = peaks - peaks[0]
        rel_expected = arrivals - arrivals[0]
        assert np.max(np.abs(rel_measured - rel_expected)) <= 1.0

    def test_zero_amplitude(self):
        geo = ArrayGeometry(8, 0.3e-3)
        ch = simulate_channels(Phantom((Absorber((0.0, 10e-3), amplitude=0.0),)), geo, self.acq)
        assert not np.any(ch.samples)

    def test_linear_in_amplitude(self):
        geo = ArrayGeometry(8, 0.3e-3)
        base = Phantom((Absorber((0.0, 10e-3)), Absorber((1e-3, 12e-3), amplitude=0.5)))
        a = simulate_channels(base, geo, self.acq).samples
        b = simulate_channels(base.scaled(-3.7), geo, self.acq).samples
        np.testing.assert_allclose(b, -3.7 * a, rtol=1e-12, atol=1e-12 * np.abs(a).max())

    def test_truncation_warns(self):
        geo = ArrayGeometry(4, 0.3e-3)
        acq = AcquisitionParams(num_samples=400)
        with pytest.warns(RuntimeWarning):
            simulate_channels(Phantom((Absorber((0.0, 12.3e-3)),)), geo, acq)

    def test_no_warning_when_inside_record(self):
        geo = ArrayGeometry(4, 0.3e-3)
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            simulate_channels(Phantom((Absorber((0.0, 10e-3)),)), geo, self.acq)

    def test_invalid_absorber(self):
        with pytest.raises(ValueError):
            Absorber((0.0, 1e-3), radius=0.0)


@pytest.fixture(scope="module")
def clean():
    return simulate_channels(Phantom.reference_default(), ArrayGeometry(32, 0.3e-3), AcquisitionParams())


class TestAddNoise:
    @pytest.mark.parametrize("target", [20.0, 50.0])
    def test_achieved_snr(self, clean, target):
        noisy = add_noise(clean, NoiseSpec(target, seed=11))
        noise = noisy.samples - clean.samples
        support = signal_support(clean.samples)
        achieved = 10 * np.log10(np.mean(clean.samples[support] ** 2) / np.var(noise))
        assert abs(achieved - target) <= 0.5

    def test_deterministic(self, clean):
        a = add_noise(clean, NoiseSpec(50, seed=99)).samples
        b = add_noise(clean, NoiseSpec(50, seed=99)).samples
        assert a.tobytes() == b.tobytes()

    def test_seed_matters(self, clean):
        a = add_noise(clean, NoiseSpec(50, seed=1)).samples
        b = add_noise(clean, NoiseSpec(50, seed=2)).samples
        assert not np.array_equal(a, b)

    def test_infinite_snr_identity(self, clean):
        out = add_noise(clean, NoiseSpec(math.inf, seed=0))
        np.testing.assert_array_equal(out.samples, clean.samples)

    def test_monotone_in_target(self, clean):
        levels = []
        for target in (10, 20, 30, 40):
            noise = add_noise(clean, NoiseSpec(target, seed=5)).samples - clean.samples
            levels.append(np.std(noise))
        assert all(a > b for a, b in zip(levels, levels[1:]))

    def test_all_zero_rejected(self, clean):
        with pytest.raises(ValueError):
            add_noise(clean.with_samples(np.zeros_like(clean.samples)), NoiseSpec())

    def test_seed_domain(self):
        with pytest.raises(ValueError):
            NoiseSpec(50, seed=-1)
        with pytest.raises(ValueError):
            NoiseSpec(50, seed=2**64)
