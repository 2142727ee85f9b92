"""CO-OFDM transmitter/receiver DSP.

Frames are complex arrays shaped ``(..., n_symbols, n_occupied)``: the last
axis runs over occupied subcarriers from the lowest to the highest frequency,
and any leading axis (usually polarization) is broadcast. ``SubcarrierPlan``
tags each occupied position as data or pilot.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.fft as sfft
from numpy.typing import NDArray

from .errors import ConfigMismatchError, UnobservableError
from .waveform import ComplexArray, DualPolWaveform

Frames = ComplexArray
Bits = NDArray[np.uint8]

PILOT_SEED = 0x50_11_07  # fixed so pilots are known without the run seed


def _gray(i):
    return i ^ (i >> 1)


@dataclass(frozen=True)
class SubcarrierPlan:
    """Where the occupied subcarriers sit in the FFT and which carry pilots."""

    fft_size: int
    offsets: NDArray[np.int64]  # subcarrier offset from DC, ascending
    pilot_positions: NDArray[np.int64]  # indices into ``offsets``
    data_positions: NDArray[np.int64]

    @property
    def n_occupied(self) -> int:
        return self.offsets.size

    @property
    def fft_bins(self) -> NDArray[np.int64]:
        return np.mod(self.offsets, self.fft_size)

    def roles(self) -> list[str]:
        tags = ["data"] * self.n_occupied
        for p in self.pilot_positions:
            tags[p] = "pilot"
        return tags


@dataclass(frozen=True)
class OfdmConfig:
    fft_size: int = 4096
    data_subcarriers: int = 3300
    pilot_subcarriers: int = 4
    cp_fraction: float = 0.03
    training_symbols: int = 2
    qam_order: int = 16
    sample_rate_hz: float = 32e9

    def __post_init__(self) -> None:
        if self.fft_size <= 0 or self.data_subcarriers <= 0 or self.pilot_subcarriers < 0:
            raise ValueError("subcarrier counts must be positive")
        if self.data_subcarriers + self.pilot_subcarriers > self.fft_size:
            raise ValueError("occupied subcarriers exceed the FFT size")
        if not 0.0 <= self.cp_fraction < 1.0:
            raise ValueError("cp_fraction must lie in [0, 1)")
        if self.training_symbols < 0:
            raise ValueError("training_symbols must be non-negative")
        side = int(round(np.sqrt(self.qam_order)))
        if side * side != self.qam_order or side < 2 or side & (side - 1):
            raise ValueError("qam_order must be a square power of 4")
        if not self.sample_rate_hz > 0:
            raise ValueError("sample_rate_hz must be positive")

    @property
    def cp_length(self) -> int:
        return int(round(self.cp_fraction * self.fft_size))

    @property
    def symbol_length(self) -> int:
        return self.fft_size + self.cp_length

    @property
    def n_occupied(self) -> int:
        return self.data_subcarriers + self.pilot_subcarriers

    @property
    def bits_per_symbol(self) -> int:
        return int(np.log2(self.qam_order))

    @property
    def subcarrier_spacing_hz(self) -> float:
        return self.sample_rate_hz / self.fft_size

    @property
    def occupied_bandwidth_hz(self) -> float:
        return self.n_occupied * self.subcarrier_spacing_hz

    @cached_property
    def plan(self) -> SubcarrierPlan:
        occ = self.n_occupied
        offsets = np.arange(-(occ // 2), occ - occ // 2)
        p = self.pilot_subcarriers
        # p = 4 gives +-floor(occ/8), +-floor(3 occ/8) around band center
        raw = [(2 * i + 1 - p) * occ / (2 * p) for i in range(p)]
        pilot_offsets = [int(np.sign(r) * np.floor(abs(r))) for r in raw]
        if len(set(pilot_offsets)) != p:
            raise ValueError("pilot plan collides; use fewer pilots")
        pilot_pos = np.searchsorted(offsets, pilot_offsets)
        data_pos = np.setdiff1d(np.arange(occ), pilot_pos)
        return SubcarrierPlan(self.fft_size, offsets, pilot_pos, data_pos)

    def net_bit_rate(self, n_channels: int = 1, polarizations: int = 1) -> float:
        """Payload bit rate after pilot and cyclic-prefix overhead."""
        per_symbol = self.data_subcarriers * self.bits_per_symbol * polarizations
        return n_channels * per_symbol * self.sample_rate_hz / self.symbol_length


# -- QAM ---------------------------------------------------------------------


def _qam_axis(order: int) -> tuple[int, int, float]:
    side = int(round(np.sqrt(order)))
    return side, int(np.log2(side)), float(np.sqrt(2 * (order - 1) / 3))


def qam_map(bits: Bits, order: int = 16) -> ComplexArray:
    """Gray-coded square QAM with unit average power.

    The first half of each symbol's bits picks the in-phase level, the second
    half the quadrature level.
    """
    side, per_axis, norm = _qam_axis(order)
    bits = np.asarray(bits, dtype=np.uint8).ravel()
    if bits.size % (2 * per_axis):
        raise ValueError(f"bit count {bits.size} is not a multiple of {2 * per_axis}")
    groups = bits.reshape(-1, 2, per_axis)
    weights = 1 << np.arange(per_axis - 1, -1, -1)
    gray = groups @ weights
    # gray -> binary
    idx = gray.copy()
    shift = gray >> 1
    while np.any(shift):
        idx ^= shift
        shift >>= 1
    levels = 2 * idx - (side - 1)
    return (levels[:, 0] + 1j * levels[:, 1]) / norm


def qam_demap(symbols: ComplexArray, order: int = 16) -> Bits:
    """Hard minimum-distance decision; exact boundary ties go to the lower Gray code."""
    side, per_axis, norm = _qam_axis(order)
    symbols = np.asarray(symbols, dtype=np.complex128).ravel()
    bounds = (2 * np.arange(side - 1) + 1 - (side - 1)) / norm
    codes = []
    for axis in (symbols.real, symbols.imag):
        idx = np.searchsorted(bounds, axis, side="left")
        tie = (idx < side - 1) & (axis == bounds[np.minimum(idx, side - 2)])
        bump = tie & (_gray(idx + 1) < _gray(idx))
        codes.append(_gray(idx + bump))
    shifts = np.arange(per_axis - 1, -1, -1)
    out = np.empty((symbols.size, 2, per_axis), dtype=np.uint8)
    for a, code in enumerate(codes):
        out[:, a, :] = (code[:, None] >> shifts) & 1
    return out.reshape(-1)


def qam16_map(bits: Bits) -> ComplexArray:
    return qam_map(bits, 16)


def qam16_demap(symbols: ComplexArray) -> Bits:
    return qam_demap(symbols, 16)


# -- framing -----------------------------------------------------------------


def qpsk_symbols(rng: np.random.Generator, shape) -> ComplexArray:
    return (rng.choice([-1.0, 1.0], size=shape) + 1j * rng.choice([-1.0, 1.0], size=shape)) / np.sqrt(2)


def known_pilots(n_symbols: int, cfg: OfdmConfig) -> ComplexArray:
    """Pilot values, shape ``(n_symbols, pilot_subcarriers)``; independent of the run seed."""
    rng = np.random.default_rng(PILOT_SEED)
    return qpsk_symbols(rng, (n_symbols, cfg.pilot_subcarriers))


def training_frames(cfg: OfdmConfig, rng: np.random.Generator) -> Frames:
    """Known QPSK on every occupied subcarrier, shape ``(training_symbols, n_occupied)``."""
    return qpsk_symbols(rng, (cfg.training_symbols, cfg.n_occupied))


def assemble_frames(data_symbols: ComplexArray, pilots: ComplexArray, cfg: OfdmConfig) -> Frames:
    """Place data (``(..., S, data_subcarriers)``) and pilots (``(S, pilots)``) on the plan."""
    plan = cfg.plan
    shape = data_symbols.shape[:-1] + (cfg.n_occupied,)
    frames = np.zeros(shape, dtype=np.complex128)
    frames[..., plan.data_positions] = data_symbols
    frames[..., plan.pilot_positions] = pilots
    return frames


def ofdm_modulate(frames: Frames, cfg: OfdmConfig, training: Frames | None = None) -> DualPolWaveform:
    """Unitary IFFT per symbol with cyclic prefix; ``training`` symbols go first.

    ``frames`` and ``training`` are shaped ``(2, n_symbols, n_occupied)``.
    """
    frames = np.asarray(frames, dtype=np.complex128)
    if training is not None:
        frames = np.concatenate([np.asarray(training, dtype=np.complex128), frames], axis=1)
    if frames.ndim != 3 or frames.shape[0] != 2 or frames.shape[2] != cfg.n_occupied:
        raise ConfigMismatchError(
            f"frames of shape {frames.shape} do not match (2, n_symbols, {cfg.n_occupied})"
        )
    n_pol, n_sym, _ = frames.shape
    bins = np.zeros((n_pol, n_sym, cfg.fft_size), dtype=np.complex128)
    bins[..., cfg.plan.fft_bins] = frames
    blocks = sfft.ifft(bins, axis=-1, norm="ortho")
    cp = cfg.cp_length
    if cp:
        blocks = np.concatenate([blocks[..., -cp:], blocks], axis=-1)
    samples = blocks.reshape(n_pol, -1)
    return DualPolWaveform(samples[0], samples[1], cfg.sample_rate_hz)


def ofdm_demodulate(w: DualPolWaveform, cfg: OfdmConfig) -> Frames:
    """Strip cyclic prefix, forward FFT, and return occupied bins as ``(2, S, n_occupied)``."""
    if w.n_samples % cfg.symbol_length:
        raise ConfigMismatchError(
            f"{w.n_samples} samples is not a whole number of {cfg.symbol_length}-sample symbols"
        )
    blocks = w.stacked().reshape(2, -1, cfg.symbol_length)[..., cfg.cp_length :]
    bins = sfft.fft(blocks, axis=-1, norm="ortho")
    return bins[..., cfg.plan.fft_bins]


def channel_equalize(rx_training: Frames, known_training: Frames, rx_payload: Frames) -> Frames:
    """One-tap per-subcarrier equalizer estimated by averaging over training symbols."""
    if rx_training.shape[-2] < 1:
        raise UnobservableError("at least one training symbol is required")
    h = np.mean(rx_training / known_training, axis=-2, keepdims=True)
    if np.any(np.abs(h) < 1e-12):
        raise UnobservableError("unobservable subcarrier")
    return rx_payload / h


def phase_recover(frames: Frames, cfg: OfdmConfig, pilots: ComplexArray) -> Frames:
    """Remove the per-symbol common phase error measured on the pilot subcarriers.

    ``pilots`` holds the known pilot values, shape ``(n_symbols, pilot_subcarriers)``.
    """
    rx_pilots = frames[..., cfg.plan.pilot_positions]
    corr = np.sum(rx_pilots * np.conj(pilots), axis=-1, keepdims=True)
    if np.any(np.abs(corr) < 1e-12):
        raise UnobservableError("phase unobservable")
    return frames * np.exp(-1j * np.angle(corr))
