"""Receiver-side nonlinearity compensation schemes and the per-channel receiver.

Five schemes are compared: linear dispersion compensation (LDC), single- and
multi-channel digital back-propagation (SC-DBP, MC-DBP), phase-conjugated
twin waves (PCTW) and SC-DBP followed by the PCTW superposition.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import ofdm
from .channel import LinkConfig, dispersion_filter, ssfm_propagate
from .errors import ConfigMismatchError
from .metrics import evm
from .ofdm import Bits, Frames, OfdmConfig
from .waveform import ComplexArray, DualPolWaveform, bandpass_select, freq_shift, resample, set_power

DEFAULT_GUARD = 0.10  # SC-DBP selection bandwidth = occupied band * (1 + guard)


@dataclass(frozen=True)
class Ldc:
    tag = "ldc"
    uses_pctw = False

    @property
    def label(self) -> str:
        return self.tag


@dataclass(frozen=True)
class ScDbp:
    steps_per_span: int = 1
    channel_bandwidth_hz: float | None = None
    tag = "sc-dbp"
    uses_pctw = False

    def __post_init__(self):
        if self.steps_per_span < 1:
            raise ValueError("steps_per_span must be >= 1")

    @property
    def label(self) -> str:
        return f"{self.tag}:{self.steps_per_span}"


@dataclass(frozen=True)
class McDbp:
    steps_per_span: int = 16
    tag = "mc-dbp"
    uses_pctw = False

    def __post_init__(self):
        if self.steps_per_span < 1:
            raise ValueError("steps_per_span must be >= 1")

    @property
    def label(self) -> str:
        return f"{self.tag}:{self.steps_per_span}"


@dataclass(frozen=True)
class Pctw:
    tag = "pctw"
    uses_pctw = True

    @property
    def label(self) -> str:
        return self.tag


@dataclass(frozen=True)
class ScDbpPctw:
    steps_per_span: int = 1
    channel_bandwidth_hz: float | None = None
    tag = "sc-dbp-pctw"
    uses_pctw = True

    def __post_init__(self):
        if self.steps_per_span < 1:
            raise ValueError("steps_per_span must be >= 1")

    @property
    def label(self) -> str:
        return f"{self.tag}:{self.steps_per_span}"


CompensationScheme = Ldc | ScDbp | McDbp | Pctw | ScDbpPctw

_SCHEMES = {cls.tag: cls for cls in (Ldc, ScDbp, McDbp, Pctw, ScDbpPctw)}


def parse_scheme(text: str) -> CompensationScheme:
    """Parse ``ldc``, ``pctw``, ``sc-dbp:1``, ``mc-dbp:16``, ``sc-dbp-pctw:1``."""
    name, _, steps = text.strip().lower().partition(":")
    if name not in _SCHEMES:
        raise ValueError(f"unknown scheme {name!r}; expected one of {sorted(_SCHEMES)}")
    cls = _SCHEMES[name]
    if cls in (Ldc, Pctw):
        if steps:
            raise ValueError(f"scheme {name!r} takes no steps-per-span")
        return cls()
    return cls(int(steps)) if steps else cls()


# -- waveform-level compensation ---------------------------------------------


def ldc(w: DualPolWaveform, link: LinkConfig) -> DualPolWaveform:
    """All-pass filter undoing the chromatic dispersion of the whole link."""
    return dispersion_filter(w, link.fiber, -link.total_length_km)


def select_channel(w: DualPolWaveform, center_hz: float, bandwidth_hz: float) -> DualPolWaveform:
    """Band-select the channel at absolute ``center_hz`` and move it to baseband."""
    rel = center_hz - w.center_offset_hz
    w = bandpass_select(w, rel, bandwidth_hz)
    return freq_shift(w, -rel)


def dbp(
    w: DualPolWaveform,
    link: LinkConfig,
    steps_per_span: int,
    center_hz: float | None = None,
    bandwidth_hz: float | None = None,
) -> DualPolWaveform:
    """Digital back-propagation through every span in reverse order.

    With ``center_hz``/``bandwidth_hz`` the channel is selected first
    (single-channel mode); otherwise the whole buffer is back-propagated.
    The output is rescaled to the power of the signal entering the spans.
    """
    if center_hz is not None:
        if bandwidth_hz is None:
            raise ValueError("single-channel DBP needs a bandwidth")
        w = select_channel(w, center_hz, bandwidth_hz)
    p_in = w.mean_power_w()
    inv_gain = 10 ** (-link.gain_db / 20)
    for _ in range(link.n_spans):
        w = ssfm_propagate(w.scaled(inv_gain), link.fiber, steps_per_span, "backward")
    if p_in > 0:
        w = set_power(w, 10 * np.log10(p_in / 1e-3))
    return w


# -- twin waves ----------------------------------------------------------------


def pctw_encode(frames_x: Frames) -> tuple[Frames, Frames]:
    """Twin frames: y carries the per-subcarrier complex conjugate of x."""
    frames_x = np.asarray(frames_x)
    return frames_x, np.conj(frames_x)


def pctw_superpose(frames_x: Frames, frames_y: Frames) -> Frames:
    """Coherent superposition (x + conj(y)) / 2."""
    frames_x = np.asarray(frames_x)
    frames_y = np.asarray(frames_y)
    if frames_x.shape != frames_y.shape:
        raise ConfigMismatchError(f"twin frames differ in shape: {frames_x.shape} vs {frames_y.shape}")
    return 0.5 * (frames_x + np.conj(frames_y))


# -- full receiver -------------------------------------------------------------


@dataclass(frozen=True)
class ReceiverContext:
    """Everything the receiver of one channel knows in advance.

    ``training`` is ``(2, T, n_occupied)``, ``pilots`` ``(2, S, n_pilots)``
    for the payload symbols, ``reference`` the transmitted payload symbols
    (for EVM) shaped ``(2, S, data_subcarriers)`` and ``tx_bits`` the payload
    bits in receiver output order. ``predispersion_km`` is the length of
    dispersion pre-compensated at the transmitter.
    """

    center_hz: float
    training: Frames
    pilots: ComplexArray
    reference: ComplexArray
    tx_bits: Bits
    pctw: bool = False
    predispersion_km: float = 0.0


@dataclass(frozen=True)
class Recovered:
    bits: Bits
    symbols: ComplexArray
    evm_db: float


def selection_bandwidth(scheme, cfg: OfdmConfig) -> float:
    bw = getattr(scheme, "channel_bandwidth_hz", None)
    return bw if bw is not None else cfg.occupied_bandwidth_hz * (1 + DEFAULT_GUARD)


def equalize_frames(
    w: DualPolWaveform, cfg: OfdmConfig, ctx: ReceiverContext
) -> Frames:
    """Demodulate a baseband channel and apply one-tap EQ and pilot CPR per polarization."""
    frames = ofdm.ofdm_demodulate(w, cfg)
    n_train = ctx.training.shape[-2]
    rx_train, rx_payload = frames[:, :n_train], frames[:, n_train:]
    if rx_payload.shape[1] != ctx.pilots.shape[1]:
        raise ConfigMismatchError("payload symbol count differs from the known pilot plan")
    eq = ofdm.channel_equalize(rx_train, ctx.training, rx_payload)
    return ofdm.phase_recover(eq, cfg, ctx.pilots)


def compensate(
    w: DualPolWaveform,
    scheme: CompensationScheme,
    link: LinkConfig,
    ofdm_cfg: OfdmConfig,
    ctx: ReceiverContext,
) -> Recovered:
    """Run one scheme's receiver chain on a received (superchannel) waveform."""
    if scheme.uses_pctw != ctx.pctw:
        raise ConfigMismatchError(f"scheme {scheme.tag} does not match the transmitted format")
    bw = selection_bandwidth(scheme, ofdm_cfg)
    if isinstance(scheme, (Ldc, Pctw)):
        w = ldc(select_channel(w, ctx.center_hz, bw), link)
    elif isinstance(scheme, (ScDbp, ScDbpPctw)):
        w = dbp(w, link, scheme.steps_per_span, ctx.center_hz, bw)
    elif isinstance(scheme, McDbp):
        w = select_channel(dbp(w, link, scheme.steps_per_span), ctx.center_hz, bw)
    else:
        raise TypeError(f"unsupported scheme {scheme!r}")
    if ctx.predispersion_km:
        w = dispersion_filter(w, link.fiber, ctx.predispersion_km)
    w = resample(w, _channel_samples(ofdm_cfg, ctx))

    frames = equalize_frames(w, ofdm_cfg, ctx)
    data = frames[..., ofdm_cfg.plan.data_positions]
    if ctx.pctw:
        symbols = pctw_superpose(data[0], data[1])
        reference = ctx.reference[0]
    else:
        symbols = data
        reference = ctx.reference
    bits = ofdm.qam_demap(symbols, ofdm_cfg.qam_order)
    return Recovered(bits, symbols, evm(symbols, reference))


def _channel_samples(cfg: OfdmConfig, ctx: ReceiverContext) -> int:
    n_symbols = ctx.training.shape[-2] + ctx.pilots.shape[1]
    return n_symbols * cfg.symbol_length
