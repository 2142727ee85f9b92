"""Superchannel transmitter: per-channel OFDM frames multiplexed on a frequency grid."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.fft as sfft

from .. import ofdm
from ..channel import FiberParams, NoiseSource, dispersion_filter
from ..compensation import ReceiverContext, pctw_encode
from ..ofdm import OfdmConfig
from ..waveform import DualPolWaveform, freq_shift, resample, set_power


@dataclass(frozen=True)
class SuperchannelPlan:
    n_channels: int = 4
    spacing_hz: float = 37.5e9
    oversampling: int | None = None  # aggregate / per-channel sample rate
    measured_channel: int | None = None  # 0-based; default is an inner channel

    def __post_init__(self) -> None:
        if self.n_channels < 1 or self.spacing_hz <= 0:
            raise ValueError("need at least one channel and a positive spacing")
        if self.oversampling is not None and self.oversampling < 1:
            raise ValueError("oversampling must be >= 1")
        if self.measured_channel is not None and not 0 <= self.measured_channel < self.n_channels:
            raise ValueError("measured_channel out of range")

    def oversampling_for(self, cfg: OfdmConfig) -> int:
        if self.oversampling is not None:
            return self.oversampling
        return math.ceil(self.n_channels * self.spacing_hz / cfg.sample_rate_hz) + 1

    @property
    def measured(self) -> int:
        if self.measured_channel is not None:
            return self.measured_channel
        return (self.n_channels - 1) // 2

    def centers_hz(self, rate_hz: float, n_samples: int) -> list[float]:
        """Grid centers snapped to the FFT bin spacing of the aggregate buffer."""
        bin_hz = rate_hz / n_samples
        centers = []
        for i in range(self.n_channels):
            nominal = (i - (self.n_channels - 1) / 2) * self.spacing_hz
            centers.append(round(nominal / bin_hz) * bin_hz)
        return centers


@dataclass(frozen=True)
class ChannelPayload:
    frames: np.ndarray  # (2, S, n_occupied)
    training: np.ndarray  # (2, T, n_occupied)
    pilots: np.ndarray  # (2, S, n_pilots)
    data_symbols: np.ndarray  # (2, S, data_subcarriers)
    bits: np.ndarray  # receiver output order


def make_payload(cfg: OfdmConfig, n_payload: int, noise: NoiseSource, channel: int, pctw: bool) -> ChannelPayload:
    """Random payload, training and pilots for one channel.

    Payload bits come from the ``payload`` stream and training from the
    ``training`` stream of ``noise``, both keyed by channel index.
    """
    bits_rng = noise.generator("payload", channel)
    train_rng = noise.generator("training", channel)
    k = cfg.bits_per_symbol
    pilots = ofdm.known_pilots(n_payload, cfg)
    if pctw:
        bits = bits_rng.integers(0, 2, size=n_payload * cfg.data_subcarriers * k, dtype=np.uint8)
        sym = ofdm.qam_map(bits, cfg.qam_order).reshape(n_payload, cfg.data_subcarriers)
        fx = ofdm.assemble_frames(sym, pilots, cfg)
        frames = np.stack(pctw_encode(fx))
        tx = ofdm.training_frames(cfg, train_rng)
        training = np.stack(pctw_encode(tx))
        pilot_pair = np.stack(pctw_encode(pilots))
        data = np.stack(pctw_encode(sym))
    else:
        bits = bits_rng.integers(0, 2, size=2 * n_payload * cfg.data_subcarriers * k, dtype=np.uint8)
        data = ofdm.qam_map(bits, cfg.qam_order).reshape(2, n_payload, cfg.data_subcarriers)
        frames = ofdm.assemble_frames(data, pilots, cfg)
        training = np.stack([ofdm.training_frames(cfg, train_rng) for _ in range(2)])
        pilot_pair = np.stack([pilots, pilots])
    return ChannelPayload(frames, training, pilot_pair, data, bits)


def aggregate_length(cfg: OfdmConfig, n_symbols_total: int, plan: SuperchannelPlan) -> int:
    """Aggregate buffer length: the oversampled frame rounded up to a fast FFT size.

    The aggregate rate follows as ``fs * aggregate_length / channel_samples``,
    so the effective oversampling is slightly above the nominal integer.
    """
    return sfft.next_fast_len(n_symbols_total * cfg.symbol_length * plan.oversampling_for(cfg))


@dataclass(frozen=True)
class Transmission:
    waveform: DualPolWaveform
    contexts: list[ReceiverContext]
    payloads: list[ChannelPayload]


def build_superchannel(
    cfg: OfdmConfig,
    plan: SuperchannelPlan,
    n_symbols: int,
    launch_power_dbm: float,
    noise: NoiseSource,
    pctw: bool,
    fiber: FiberParams | None = None,
    predispersion_km: float = 0.0,
) -> Transmission:
    """Modulate every channel, place it on the grid and sum.

    ``n_symbols`` counts all OFDM symbols including training;
    ``launch_power_dbm`` is per channel.
    """
    n_payload = n_symbols - cfg.training_symbols
    if n_payload < 1:
        raise ValueError("n_symbols must exceed the number of training symbols")
    n_agg = aggregate_length(cfg, n_symbols, plan)
    rate = cfg.sample_rate_hz * n_agg / (n_symbols * cfg.symbol_length)
    centers = plan.centers_hz(rate, n_agg)
    total = None
    contexts, payloads = [], []
    for ch, center in enumerate(centers):
        payload = make_payload(cfg, n_payload, noise, ch, pctw)
        w = ofdm.ofdm_modulate(payload.frames, cfg, payload.training)
        w = DualPolWaveform(w.x_samples, w.y_samples, w.sample_rate_hz, center)
        w = set_power(resample(w, n_agg), launch_power_dbm)
        w = freq_shift(w, center)
        total = w if total is None else total + w
        payloads.append(payload)
        contexts.append(
            ReceiverContext(
                center_hz=center,
                training=payload.training,
                pilots=payload.pilots,
                reference=payload.data_symbols,
                tx_bits=payload.bits,
                pctw=pctw,
                predispersion_km=predispersion_km,
            )
        )
    if predispersion_km:
        if fiber is None:
            raise ValueError("pre-dispersion needs fiber parameters")
        total = dispersion_filter(total, fiber, -predispersion_km)
    return Transmission(total, contexts, payloads)
