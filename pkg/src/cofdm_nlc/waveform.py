"""Dual-polarization sampled waveform and spectral conditioning helpers.

Samples are in sqrt(W) so that ``|x|**2 + |y|**2`` is instantaneous power in
watts. Every spectral operation treats the buffer as one period of a circular
signal.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, replace
from pathlib import Path
from typing import BinaryIO

import numpy as np
import scipy.fft as sfft
import scipy.signal
from numpy.typing import NDArray

from .errors import NyquistError, ZeroPowerError

ComplexArray = NDArray[np.complex128]

WAVEFORM_MAGIC = b"FWV1"
_HEADER = struct.Struct("<4sIdd")


@dataclass(frozen=True, eq=False)
class DualPolWaveform:
    """Complex baseband fields on the x and y polarizations.

    ``center_offset_hz`` is the offset of this buffer's band center from the
    superchannel center; dispersion operators use it to work on absolute
    frequencies.
    """

    x_samples: ComplexArray
    y_samples: ComplexArray
    sample_rate_hz: float
    center_offset_hz: float = 0.0

    def __post_init__(self) -> None:
        x = np.asarray(self.x_samples, dtype=np.complex128)
        y = np.asarray(self.y_samples, dtype=np.complex128)
        if x.ndim != 1 or x.shape != y.shape or x.size == 0:
            raise ValueError("x and y must be non-empty 1-D arrays of equal length")
        if not self.sample_rate_hz > 0:
            raise ValueError("sample_rate_hz must be positive")
        object.__setattr__(self, "x_samples", x)
        object.__setattr__(self, "y_samples", y)

    @classmethod
    def from_stacked(
        cls, samples: ComplexArray, sample_rate_hz: float, center_offset_hz: float = 0.0
    ) -> DualPolWaveform:
        return cls(samples[0], samples[1], sample_rate_hz, center_offset_hz)

    def stacked(self) -> ComplexArray:
        """Return a fresh ``(2, n)`` array with x in row 0 and y in row 1."""
        return np.stack([self.x_samples, self.y_samples])

    def with_stacked(self, samples: ComplexArray) -> DualPolWaveform:
        return DualPolWaveform(samples[0], samples[1], self.sample_rate_hz, self.center_offset_hz)

    def scaled(self, factor: float) -> DualPolWaveform:
        return replace(self, x_samples=self.x_samples * factor, y_samples=self.y_samples * factor)

    def __add__(self, other: DualPolWaveform) -> DualPolWaveform:
        if (
            other.n_samples != self.n_samples
            or other.sample_rate_hz != self.sample_rate_hz
            or other.center_offset_hz != self.center_offset_hz
        ):
            raise ValueError("waveforms must share length, sample rate and center")
        return replace(
            self,
            x_samples=self.x_samples + other.x_samples,
            y_samples=self.y_samples + other.y_samples,
        )

    @property
    def n_samples(self) -> int:
        return self.x_samples.size

    @property
    def energy(self) -> float:
        """Sum of |x|^2 + |y|^2 over all samples (W times samples)."""
        return float(np.vdot(self.x_samples, self.x_samples).real + np.vdot(self.y_samples, self.y_samples).real)

    def mean_power_w(self) -> float:
        return self.energy / self.n_samples

    def baseband_freqs_hz(self) -> NDArray[np.float64]:
        """FFT bin frequencies relative to this buffer's center."""
        return sfft.fftfreq(self.n_samples, d=1.0 / self.sample_rate_hz)

    def absolute_freqs_hz(self) -> NDArray[np.float64]:
        """FFT bin frequencies relative to the superchannel center."""
        return self.baseband_freqs_hz() + self.center_offset_hz


def power_dbm(w: DualPolWaveform) -> float:
    """Mean total power of ``w`` in dBm."""
    p = w.mean_power_w()
    if p <= 0.0:
        raise ZeroPowerError("zero power waveform has no finite dBm value")
    return 10.0 * np.log10(p / 1e-3)


def dbm_to_w(p_dbm: float) -> float:
    return 1e-3 * 10.0 ** (p_dbm / 10.0)


def set_power(w: DualPolWaveform, target_dbm: float) -> DualPolWaveform:
    """Scale both polarizations uniformly so the mean power is ``target_dbm``."""
    p = w.mean_power_w()
    if p <= 0.0:
        raise ZeroPowerError("cannot rescale a zero power waveform")
    return w.scaled(np.sqrt(dbm_to_w(target_dbm) / p))


def freq_shift(w: DualPolWaveform, delta_hz: float) -> DualPolWaveform:
    """Multiply by exp(j 2 pi delta n / fs) on both polarizations.

    Content at absolute frequency f now sits ``delta_hz`` higher inside the
    buffer, so the buffer's center moves to ``center_offset_hz - delta_hz``
    and absolute frequencies of the content are unchanged.
    """
    if abs(delta_hz) >= w.sample_rate_hz / 2:
        raise NyquistError(f"shift of {delta_hz} Hz exceeds Nyquist ({w.sample_rate_hz / 2} Hz)")
    if delta_hz == 0.0:
        return replace(w)
    n = np.arange(w.n_samples)
    carrier = np.exp(2j * np.pi * (delta_hz / w.sample_rate_hz) * n)
    return DualPolWaveform(
        w.x_samples * carrier,
        w.y_samples * carrier,
        w.sample_rate_hz,
        w.center_offset_hz - delta_hz,
    )


def raised_cosine_mask(
    freqs_hz: NDArray[np.float64], center_hz: float, bandwidth_hz: float, rolloff: float
) -> NDArray[np.float64]:
    """Amplitude response of a band centered at ``center_hz``.

    Flat inside ``|f - fc| <= (1 - rolloff) * B / 2``, zero beyond
    ``(1 + rolloff) * B / 2``, with a raised-cosine transition in between.
    ``rolloff = 0`` gives a brick wall that includes the nominal edges.
    """
    dist = np.abs(freqs_hz - center_hz)
    half = bandwidth_hz / 2
    if rolloff <= 0.0:
        return (dist <= half).astype(np.float64)
    lo, hi = (1 - rolloff) * half, (1 + rolloff) * half
    mask = np.where(dist <= lo, 1.0, 0.0)
    trans = (dist > lo) & (dist < hi)
    mask[trans] = 0.5 * (1 + np.cos(np.pi * (dist[trans] - lo) / (hi - lo)))
    return mask


def bandpass_select(
    w: DualPolWaveform, center_hz: float, bandwidth_hz: float, rolloff: float = 0.0
) -> DualPolWaveform:
    """Keep only spectral content within ``center_hz +/- bandwidth_hz / 2``.

    ``center_hz`` is measured relative to the buffer's own center. A band as
    wide as the sample rate and centered on the buffer is an all-pass.
    """
    nyq = w.sample_rate_hz / 2
    if bandwidth_hz <= 0 or abs(center_hz) >= nyq:
        raise NyquistError("band center outside the sampled spectrum")
    if center_hz == 0.0 and bandwidth_hz >= w.sample_rate_hz:
        return replace(w)
    if abs(center_hz) + bandwidth_hz / 2 > nyq:
        raise NyquistError("band extends beyond Nyquist")
    mask = raised_cosine_mask(w.baseband_freqs_hz(), center_hz, bandwidth_hz, rolloff)
    spec = sfft.fft(w.stacked(), axis=-1)
    return w.with_stacked(sfft.ifft(spec * mask, axis=-1))


def resample(w: DualPolWaveform, n_samples: int) -> DualPolWaveform:
    """FFT-domain (circular) resampling to ``n_samples`` at a scaled sample rate.

    Amplitudes of band-limited content are preserved; content beyond the new
    Nyquist frequency is discarded.
    """
    if n_samples == w.n_samples:
        return replace(w)
    out = scipy.signal.resample(w.stacked(), n_samples, axis=-1)
    rate = w.sample_rate_hz * n_samples / w.n_samples
    return DualPolWaveform(out[0], out[1], rate, w.center_offset_hz)


def write_waveform(w: DualPolWaveform, target: str | Path | BinaryIO) -> None:
    """Dump ``w`` in the little-endian FWV1 debug format."""
    payload = _HEADER.pack(WAVEFORM_MAGIC, w.n_samples, w.sample_rate_hz, w.center_offset_hz)
    body = np.concatenate([w.x_samples, w.y_samples]).astype("<c16").tobytes()
    if isinstance(target, (str, Path)):
        Path(target).write_bytes(payload + body)
    else:
        target.write(payload + body)


def read_waveform(source: str | Path | BinaryIO) -> DualPolWaveform:
    if isinstance(source, (str, Path)):
        raw = Path(source).read_bytes()
    else:
        raw = source.read()
    magic, n, rate, offset = _HEADER.unpack_from(raw)
    if magic != WAVEFORM_MAGIC:
        raise ValueError(f"bad waveform magic {magic!r}")
    data = np.frombuffer(raw, dtype="<c16", offset=_HEADER.size)
    if data.size != 2 * n:
        raise ValueError(f"expected {2 * n} complex samples, found {data.size}")
    return DualPolWaveform(data[:n].copy(), data[n:].copy(), rate, offset)
