import math

import numpy as np
import pytest

from umacsim.channel import (
    ChannelConfig,
    ChannelError,
    ChannelModel,
    awgn_mac_transmit,
    check_power,
    complex_noise,
    ebn0_db,
    energy,
    fading_mac_transmit,
    sample_fading_gains,
)


def cfg(noise=1.0, power=1.0, model=ChannelModel.AWGN, noiseless=False):
    return ChannelConfig(noise_power=noise, power_limit=power, model=model, noiseless=noiseless)


class TestAwgnTransmit:
    def test_no_inputs_pure_noise_variance(self):
        c = cfg(noise=2.0)
        samples = []
        for seed in range(2000):
            y = awgn_mac_transmit([], c, np.random.default_rng(seed), n=4)
            samples.append(y)
        z = np.concatenate(samples)
        mean_sq = np.mean(np.abs(z) ** 2)
        # |Z|^2 is exponential with mean sigma^2 and std sigma^2.
        se = 2.0 / math.sqrt(len(z))
        assert abs(mean_sq - 2.0) < 3 * se

    def test_noiseless_cancellation(self):
        x = np.exp(1j * np.linspace(0, 3, 64))
        y = awgn_mac_transmit([x, -x], cfg(noiseless=True), np.random.default_rng(0))
        assert np.all(y == 0)

    def test_mean_output_energy_two_users(self):
        c = cfg(noise=0.5)
        n = 1000
        expected = 2.0 + c.noise_power
        vals = np.empty(10_000)
        for seed in range(10_000):
            rng = np.random.default_rng(seed)
            x1 = np.exp(1j * rng.uniform(0, 2 * np.pi, n))
            x2 = np.exp(1j * rng.uniform(0, 2 * np.pi, n))
            y = awgn_mac_transmit([x1, x2], c, rng)
            vals[seed] = energy(y) / n
        se = vals.std(ddof=1) / math.sqrt(len(vals))
        assert abs(vals.mean() - expected) < 3 * se

    def test_length_mismatch_rejected(self):
        with pytest.raises(ChannelError):
            awgn_mac_transmit([np.zeros(4, complex), np.zeros(5, complex)], cfg(),
                              np.random.default_rng(0))

    def test_power_violation_rejected(self):
        x = 2.0 * np.ones(16, dtype=complex)   # per-sample power 4 > P=1
        with pytest.raises(ChannelError):
            awgn_mac_transmit([x], cfg(), np.random.default_rng(0))

    def test_determinism(self):
        x = np.ones(32, dtype=complex)
        y1 = awgn_mac_transmit([x], cfg(), np.random.default_rng(5))
        y2 = awgn_mac_transmit([x], cfg(), np.random.default_rng(5))
        assert np.array_equal(y1, y2)

    def test_noiseless_equals_exact_sum(self):
        rng = np.random.default_rng(3)
        xs = [complex_noise(50, 0.5, rng) for _ in range(3)]
        y = awgn_mac_transmit(xs, cfg(noiseless=True), np.random.default_rng(0))
        assert np.array_equal(y, xs[0] + xs[1] + xs[2])


class TestFadingTransmit:
    def test_unit_gain_reduces_to_awgn(self):
        x = 0.5 * np.ones(100, dtype=complex)
        c_awgn = cfg()
        c_fad = cfg(model=ChannelModel.RAYLEIGH)
        y_ref = awgn_mac_transmit([x], c_awgn, np.random.default_rng(11))
        y, gains = fading_mac_transmit(
            [x], c_fad, np.random.default_rng(11), gains=np.array([1.0 + 0.0j])
        )
        assert np.array_equal(y, y_ref)
        assert gains[0] == 1.0 + 0.0j

    def test_gain_second_moment(self):
        gains = sample_fading_gains(100_000, np.random.default_rng(1))
        m = np.mean(np.abs(gains) ** 2)
        se = 1.0 / math.sqrt(len(gains))   # var(|H|^2) = 1 for CN(0,1)
        assert abs(m - 1.0) < 3 * se

    def test_opposite_gains_cancel(self):
        x = np.exp(1j * np.arange(64))
        y, _ = fading_mac_transmit(
            [x, x], cfg(model=ChannelModel.RAYLEIGH, noiseless=True),
            np.random.default_rng(0), gains=np.array([1.0, -1.0], dtype=complex),
        )
        assert np.all(y == 0)

    def test_awgn_model_rejected(self):
        with pytest.raises(ChannelError):
            fading_mac_transmit([np.zeros(4, complex)], cfg(), np.random.default_rng(0))

    def test_gains_frame_constant_impulse_train(self):
        # An impulse train exposes the per-sample scaling factor directly.
        n = 90
        x = np.zeros(n, dtype=complex)
        x[::10] = 1.0
        y, gains = fading_mac_transmit(
            [x], cfg(model=ChannelModel.RAYLEIGH, noiseless=True), np.random.default_rng(9)
        )
        factors = y[::10]
        assert np.allclose(factors, gains[0], rtol=0, atol=1e-15)


class TestCheckPower:
    def test_all_zero(self):
        assert check_power(np.zeros(10, complex), cfg())

    def test_boundary_exact(self):
        p = 0.7
        x = math.sqrt(p) * np.exp(1j * np.linspace(0, 1, 25))
        assert check_power(x, cfg(power=p))

    def test_beyond_boundary(self):
        p = 0.7
        x = 1.01 * math.sqrt(p) * np.exp(1j * np.linspace(0, 1, 25))
        assert energy(x) == pytest.approx(1.01**2 * 25 * p)
        assert not check_power(x, cfg(power=p))


class TestNoiseStatistics:
    def test_component_variance(self):
        z = complex_noise(200_000, 0.8, np.random.default_rng(4))
        for part in (z.real, z.imag):
            var = part.var()
            se = math.sqrt(2.0 / len(z)) * 0.4   # var of sample variance ~ 2 sigma^4 / n
            assert abs(var - 0.4) < 3 * se


class TestEbn0:
    def test_direct_arithmetic(self):
        c = cfg(noise=1.0, power=1.0)
        assert ebn0_db(30_000, c, 100) == pytest.approx(10 * math.log10(150), abs=1e-12)

    def test_doubling_power_adds_3db(self):
        lo = ebn0_db(1000, cfg(power=1.0), 50)
        hi = ebn0_db(1000, cfg(power=2.0), 50)
        assert hi - lo == pytest.approx(10 * math.log10(2), abs=1e-12)

    def test_independent_arithmetic_oracle(self):
        # nP/(2 sigma^2 log2M) computed by hand for n=16278, 100 bits.
        c = cfg(noise=0.25, power=0.5)
        expected = 10 * math.log10((16278 * 0.5) / (2 * 0.25 * 100))
        assert ebn0_db(16278, c, 100) == pytest.approx(expected, abs=1e-12)

    def test_nonpositive_payload(self):
        with pytest.raises(ChannelError):
            ebn0_db(100, cfg(), 0)
