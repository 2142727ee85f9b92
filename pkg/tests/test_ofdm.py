import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cofdm_nlc import ofdm
from cofdm_nlc.channel import wiener_phase
from cofdm_nlc.errors import ConfigMismatchError, UnobservableError
from cofdm_nlc.metrics import evm
from cofdm_nlc.ofdm import OfdmConfig, qam16_demap, qam16_map
from cofdm_nlc.waveform import DualPolWaveform, power_dbm

SQRT10 = np.sqrt(10)
ALL_NIBBLES = np.array(list(itertools.product([0, 1], repeat=4)), dtype=np.uint8)

SMALL = OfdmConfig(fft_size=64, data_subcarriers=44, pilot_subcarriers=4, cp_fraction=0.0625)


def bits_of(s):
    return np.array([int(c) for c in s], dtype=np.uint8)


class TestConfig:
    def test_paper_cp_length(self):
        cfg = OfdmConfig()
        assert cfg.cp_length == 123
        assert cfg.symbol_length == 4096 + 123

    def test_small_symbol_length(self):
        assert OfdmConfig(fft_size=8, data_subcarriers=4, pilot_subcarriers=0, cp_fraction=0.25).symbol_length == 10

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(data_subcarriers=4096, pilot_subcarriers=4),
            dict(qam_order=8),
            dict(qam_order=32),
            dict(cp_fraction=1.0),
        ],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(ValueError):
            OfdmConfig(**kwargs)

    def test_paper_pilot_plan(self):
        plan = OfdmConfig().plan
        occ = 3304
        assert plan.n_occupied == occ
        pilot_offsets = sorted(plan.offsets[plan.pilot_positions])
        assert pilot_offsets == [-(3 * occ // 8), -(occ // 8), occ // 8, 3 * occ // 8]
        assert plan.data_positions.size == 3300
        assert np.all(np.diff(plan.offsets) == 1)
        assert plan.offsets[0] == -occ // 2

    def test_paper_band_and_rate(self):
        cfg = OfdmConfig()
        assert cfg.occupied_bandwidth_hz == pytest.approx(25.8125e9)
        # four channels, one polarization of payload (twin waves)
        rate = cfg.net_bit_rate(4, 1)
        assert rate == pytest.approx(4 * 3300 * 4 * 32e9 / 4219, rel=1e-12)
        assert rate == pytest.approx(401.33e9, rel=3e-3)


class TestQam16:
    def test_all_zero_nibble(self):
        assert qam16_map(bits_of("0000"))[0] == pytest.approx((-3 - 3j) / SQRT10)

    def test_1110(self):
        assert qam16_map(bits_of("1110"))[0] == pytest.approx((1 + 3j) / SQRT10)

    def test_axis_levels(self):
        for code, level in {"00": -3, "01": -1, "11": 1, "10": 3}.items():
            assert qam16_map(bits_of(code + "00"))[0].real == pytest.approx(level / SQRT10)

    def test_unit_average_power(self):
        sym = qam16_map(ALL_NIBBLES.ravel())
        assert np.mean(np.abs(sym) ** 2) == pytest.approx(1.0, abs=1e-15)

    def test_bad_length(self):
        with pytest.raises(ValueError):
            qam16_map(bits_of("101"))

    def test_round_trip_all_patterns(self):
        bits = ALL_NIBBLES.ravel()
        np.testing.assert_array_equal(qam16_demap(qam16_map(bits)), bits)

    def test_small_noise_decides_correctly(self):
        noisy = (-3 - 3j) / SQRT10 + 0.05 * np.exp(1j * np.linspace(0, 2 * np.pi, 9))
        assert np.all(qam16_demap(noisy).reshape(-1, 4) == 0)

    @pytest.mark.parametrize(
        "value, expected",
        [(-2, "00"), (0, "01"), (2, "10")],
    )
    def test_boundary_tie_break(self, value, expected):
        sym = value / SQRT10 + 1j * value / SQRT10
        assert "".join(map(str, qam16_demap(np.array([sym])))) == expected * 2

    def test_gray_adjacency(self):
        points = {}
        for nib in ALL_NIBBLES:
            s = qam16_map(nib)[0] * SQRT10
            points[(int(round(s.real)), int(round(s.imag)))] = nib
        adjacent = 0
        for (i, q), nib in points.items():
            for di, dq in ((2, 0), (0, 2)):
                other = points.get((i + di, q + dq))
                if other is not None:
                    adjacent += 1
                    assert np.sum(nib != other) == 1
        assert adjacent == 24


def random_frames(cfg, n_sym, rng):
    bits = rng.integers(0, 2, size=2 * n_sym * cfg.data_subcarriers * 4, dtype=np.uint8)
    data = qam16_map(bits).reshape(2, n_sym, cfg.data_subcarriers)
    return ofdm.assemble_frames(data, ofdm.known_pilots(n_sym, cfg), cfg), bits


class TestModulation:
    def test_single_subcarrier_is_complex_exponential(self):
        cfg = OfdmConfig(fft_size=16, data_subcarriers=8, pilot_subcarriers=0, cp_fraction=0.0)
        frames = np.zeros((2, 1, 8), complex)
        k = 3
        frames[0, 0, list(cfg.plan.offsets).index(k)] = 1.0
        w = ofdm.ofdm_modulate(frames, cfg)
        n = np.arange(16)
        np.testing.assert_allclose(w.x_samples, np.exp(2j * np.pi * k * n / 16) / 4, atol=1e-15)
        np.testing.assert_allclose(w.y_samples, 0)

    def test_samples_per_symbol(self, rng):
        cfg = OfdmConfig(fft_size=8, data_subcarriers=4, pilot_subcarriers=0, cp_fraction=0.25)
        frames = np.ones((2, 3, 4), complex)
        assert ofdm.ofdm_modulate(frames, cfg).n_samples == 30

    def test_training_prepended(self, rng):
        frames, _ = random_frames(SMALL, 3, rng)
        training = np.ones((2, 2, SMALL.n_occupied), complex)
        w = ofdm.ofdm_modulate(frames, SMALL, training)
        out = ofdm.ofdm_demodulate(w, SMALL)
        np.testing.assert_allclose(out[:, :2], training, atol=1e-12)
        np.testing.assert_allclose(out[:, 2:], frames, atol=1e-12)

    def test_mismatched_frames(self):
        with pytest.raises(ConfigMismatchError):
            ofdm.ofdm_modulate(np.ones((2, 1, 5), complex), SMALL)

    def test_demodulate_round_trip(self, rng):
        frames, _ = random_frames(SMALL, 6, rng)
        out = ofdm.ofdm_demodulate(ofdm.ofdm_modulate(frames, SMALL), SMALL)
        assert np.sqrt(np.mean(np.abs(out - frames) ** 2)) < 1e-12

    def test_demodulate_non_integral(self):
        w = DualPolWaveform(np.ones(SMALL.symbol_length + 1), np.ones(SMALL.symbol_length + 1), 1.0)
        with pytest.raises(ConfigMismatchError):
            ofdm.ofdm_demodulate(w, SMALL)

    @pytest.mark.parametrize("d", [1, 2, 4])
    def test_delay_within_cp_is_a_phase_ramp(self, rng, d):
        assert d <= SMALL.cp_length
        frames, _ = random_frames(SMALL, 4, rng)
        w = ofdm.ofdm_modulate(frames, SMALL)
        delayed = DualPolWaveform(np.roll(w.x_samples, d), np.roll(w.y_samples, d), w.sample_rate_hz)
        out = ofdm.ofdm_demodulate(delayed, SMALL)
        k = SMALL.plan.offsets
        np.testing.assert_allclose(out, frames * np.exp(-2j * np.pi * k * d / SMALL.fft_size), atol=1e-12)

    def test_zero_in_zero_out(self):
        n = 3 * SMALL.symbol_length
        w = DualPolWaveform(np.zeros(n), np.zeros(n), 1.0)
        assert not np.any(ofdm.ofdm_demodulate(w, SMALL))

    def test_mean_power_stationary(self):
        cfg = OfdmConfig(fft_size=256, data_subcarriers=200, pilot_subcarriers=4)
        p = []
        for n_sym in (100, 200, 400):
            frames, _ = random_frames(cfg, n_sym, np.random.default_rng(n_sym))
            p.append(power_dbm(ofdm.ofdm_modulate(frames, cfg)))
        assert max(p) - min(p) < 0.1


class TestEqualizer:
    def _setup(self, rng, n_train=2, n_pay=3):
        train = ofdm.qpsk_symbols(rng, (2, n_train, SMALL.n_occupied))
        payload, _ = random_frames(SMALL, n_pay, rng)
        return train, payload

    def test_constant_complex_gain(self, rng):
        train, payload = self._setup(rng)
        h = 2 * np.exp(1j * np.pi / 4)
        out = ofdm.channel_equalize(train * h, train, payload * h)
        np.testing.assert_allclose(out, payload, atol=1e-14)

    def test_identity(self, rng):
        train, payload = self._setup(rng)
        np.testing.assert_allclose(ofdm.channel_equalize(train, train, payload), payload, atol=1e-15)

    def test_phase_ramp_channel(self, rng):
        train, payload = self._setup(rng)
        k = SMALL.plan.offsets
        h = np.exp(1j * 0.002 * k**2 + 0.3j * k)
        out = ofdm.channel_equalize(train * h, train, payload * h)
        assert evm(out, payload) < -40

    def test_unobservable(self, rng):
        train, payload = self._setup(rng)
        rx = train.copy()
        rx[..., 5] = 0
        with pytest.raises(UnobservableError):
            ofdm.channel_equalize(rx, train, payload)


class TestPhaseRecovery:
    def test_common_rotation_removed(self, rng):
        frames, _ = random_frames(SMALL, 5, rng)
        pilots = ofdm.known_pilots(5, SMALL)
        out = ofdm.phase_recover(frames * np.exp(0.3j), SMALL, pilots)
        np.testing.assert_allclose(out, frames, atol=1e-14)

    def test_zero_rotation_is_identity(self, rng):
        frames, _ = random_frames(SMALL, 5, rng)
        out = ofdm.phase_recover(frames, SMALL, ofdm.known_pilots(5, SMALL))
        np.testing.assert_allclose(out, frames, atol=1e-15)

    def test_unobservable(self, rng):
        frames, _ = random_frames(SMALL, 2, rng)
        frames[..., SMALL.plan.pilot_positions] = 0
        with pytest.raises(UnobservableError):
            ofdm.phase_recover(frames, SMALL, ofdm.known_pilots(2, SMALL))

    def test_wiener_residual_within_symbol_variation(self):
        """Monte Carlo: pilot CPE tracks the average phase of each symbol window."""
        cfg = OfdmConfig(fft_size=512, data_subcarriers=412, pilot_subcarriers=4, cp_fraction=0.03)
        n_sym = 200
        rng = np.random.default_rng(99)
        frames, _ = random_frames(cfg, n_sym, rng)
        w = ofdm.ofdm_modulate(frames, cfg)
        phi = wiener_phase(w.n_samples, 1e6, cfg.sample_rate_hz, rng)
        rot = np.exp(1j * phi)
        rx = ofdm.ofdm_demodulate(DualPolWaveform(w.x_samples * rot, w.y_samples * rot, w.sample_rate_hz), cfg)
        out = ofdm.phase_recover(rx, cfg, ofdm.known_pilots(n_sym, cfg))
        data = cfg.plan.data_positions
        residual = np.angle(np.sum(out[0][:, data] * np.conj(frames[0][:, data]), axis=-1))
        windows = phi.reshape(n_sym, cfg.symbol_length)[:, cfg.cp_length :]
        within = np.std(windows, axis=-1)
        assert np.all(np.abs(residual) < 4 * within)
        assert np.mean(np.abs(residual)) < np.mean(within)
        # without correction the error is the full random walk
        raw = np.angle(np.sum(rx[0][:, data] * np.conj(frames[0][:, data]), axis=-1))
        assert np.mean(np.abs(raw)) > 5 * np.mean(within)


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=10, deadline=None)
def test_noiseless_back_to_back_chain(seed):
    rng = np.random.default_rng(seed)
    n_pay = 3
    frames, bits = random_frames(SMALL, n_pay, rng)
    train = ofdm.qpsk_symbols(rng, (2, 2, SMALL.n_occupied))
    rx = ofdm.ofdm_demodulate(ofdm.ofdm_modulate(frames, SMALL, train), SMALL)
    eq = ofdm.channel_equalize(rx[:, :2], train, rx[:, 2:])
    out = ofdm.phase_recover(eq, SMALL, ofdm.known_pilots(n_pay, SMALL))
    np.testing.assert_array_equal(qam16_demap(out[..., SMALL.plan.data_positions]), bits)
