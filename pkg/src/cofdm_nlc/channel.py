"""Forward fiber channel: Manakov split-step propagation, EDFA and laser noise.

Sign convention: fields vary as exp(+j omega t). Dispersion over a length L
multiplies the spectrum by exp(-j beta2/2 omega^2 L) and the Kerr effect
rotates the field by exp(-j (8/9) gamma P L_eff), so both operators carry the
same sign and anomalous dispersion (beta2 < 0) is focusing.
"""

from __future__ import annotations

from collections.abc import Iterator
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.fft as sfft
from scipy.constants import Planck, c
from scipy.stats import unitary_group

from .errors import NumericalBlowUpError
from .waveform import DualPolWaveform

MANAKOV_FACTOR = 8.0 / 9.0

_STAGE_TAGS = {
    "payload": 1,
    "training": 2,
    "tx_laser": 3,
    "edfa": 4,
    "pmd": 5,
    "lo_laser": 6,
}


@dataclass(frozen=True)
class NoiseSource:
    """Seeded family of independent random streams.

    Each consumer asks for a stream by a key such as ``("edfa", span)``; the
    stream depends only on the seed and that key, never on call order.
    With ``enabled=False`` the physical noise streams are switched off while
    data streams (payload, training) stay available.
    """

    seed: int
    enabled: bool = True
    key: tuple[int, ...] = ()

    def child(self, *key: int) -> NoiseSource:
        return NoiseSource(self.seed, self.enabled, self.key + tuple(int(k) for k in key))

    def generator(self, tag: str, *key: int) -> np.random.Generator:
        spawn_key = self.key + (_STAGE_TAGS[tag],) + tuple(int(k) for k in key)
        return np.random.default_rng(np.random.SeedSequence(self.seed, spawn_key=spawn_key))

    def noise(self, tag: str, *key: int) -> np.random.Generator | None:
        return self.generator(tag, *key) if self.enabled else None


@dataclass(frozen=True)
class FiberParams:
    length_km: float = 80.0
    alpha_db_per_km: float = 0.2
    dispersion_ps_nm_km: float = 16.0
    gamma_per_w_km: float = 1.22
    pmd_ps_sqrt_km: float = 0.1
    reference_wavelength_nm: float = 1550.0

    def __post_init__(self) -> None:
        if self.length_km <= 0 or self.alpha_db_per_km < 0 or self.gamma_per_w_km < 0:
            raise ValueError("length must be positive; alpha and gamma non-negative")

    @property
    def beta2_ps2_km(self) -> float:
        lam_nm = self.reference_wavelength_nm
        c_nm_per_ps = c * 1e9 / 1e12
        return -self.dispersion_ps_nm_km * lam_nm**2 / (2 * np.pi * c_nm_per_ps)

    @property
    def beta2_s2_km(self) -> float:
        return self.beta2_ps2_km * 1e-24

    @property
    def alpha_np_per_km(self) -> float:
        """Power attenuation in nepers per km."""
        return self.alpha_db_per_km * np.log(10) / 10

    @property
    def span_loss_db(self) -> float:
        return self.alpha_db_per_km * self.length_km

    @property
    def carrier_hz(self) -> float:
        return c / (self.reference_wavelength_nm * 1e-9)


@dataclass(frozen=True)
class LinkConfig:
    n_spans: int = 25
    fiber: FiberParams = field(default_factory=FiberParams)
    edfa_gain_db: float | None = None  # None -> span loss
    edfa_nf_db: float = 4.0
    tx_linewidth_hz: float = 100e3
    lo_linewidth_hz: float = 100e3
    pmd_enabled: bool = False
    forward_steps_per_span: int = 100

    def __post_init__(self) -> None:
        if self.n_spans < 0 or self.forward_steps_per_span < 1:
            raise ValueError("n_spans must be >= 0 and forward_steps_per_span >= 1")

    @property
    def gain_db(self) -> float:
        return self.fiber.span_loss_db if self.edfa_gain_db is None else self.edfa_gain_db

    @property
    def total_length_km(self) -> float:
        return self.n_spans * self.fiber.length_km

    def with_spans(self, n_spans: int) -> LinkConfig:
        return replace(self, n_spans=n_spans)


def angular_freqs(w: DualPolWaveform) -> np.ndarray:
    """Absolute angular frequency of every FFT bin (rad/s)."""
    return 2 * np.pi * w.absolute_freqs_hz()


def dispersion_filter(w: DualPolWaveform, fiber: FiberParams, length_km: float) -> DualPolWaveform:
    """Lossless chromatic dispersion over ``length_km`` (negative length inverts it)."""
    if length_km == 0:
        return w.with_stacked(w.stacked())
    omega = angular_freqs(w)
    h = np.exp(-0.5j * fiber.beta2_s2_km * omega**2 * length_km)
    return w.with_stacked(sfft.ifft(sfft.fft(w.stacked(), axis=-1) * h, axis=-1))


def _pmd_section(spec: np.ndarray, omega: np.ndarray, dgd_s: float, rng: np.random.Generator) -> np.ndarray:
    u = unitary_group.rvs(2, random_state=rng)
    spec = u @ spec
    spec[0] *= np.exp(0.5j * omega * dgd_s)
    spec[1] *= np.exp(-0.5j * omega * dgd_s)
    return spec


def ssfm_propagate(
    w: DualPolWaveform,
    fiber: FiberParams,
    n_steps: int,
    direction: str = "forward",
    pmd_rng: np.random.Generator | None = None,
) -> DualPolWaveform:
    """Symmetric split-step solution of the Manakov equation over one fiber span.

    ``direction="backward"`` negates loss, dispersion and nonlinearity, so
    backward propagation with the same ``n_steps`` exactly inverts a forward
    pass. Passing ``pmd_rng`` adds a random birefringence section per step.
    """
    if n_steps < 1:
        raise ValueError("n_steps must be >= 1")
    if direction not in ("forward", "backward"):
        raise ValueError(f"unknown direction {direction!r}")
    s = 1.0 if direction == "forward" else -1.0
    h = fiber.length_km / n_steps
    alpha = fiber.alpha_np_per_km
    omega = angular_freqs(w)
    lin = s * (-alpha / 2 - 0.5j * fiber.beta2_s2_km * omega**2)
    spec = sfft.fft(w.stacked(), axis=-1)

    gamma = fiber.gamma_per_w_km
    if gamma == 0 and pmd_rng is None:
        spec *= np.exp(lin * fiber.length_km)
        return w.with_stacked(sfft.ifft(spec, axis=-1))

    half = np.exp(lin * h / 2)
    full = half * half
    # Kerr phase at mid-step with the power referred back to the step start
    # (identical weight for both directions)
    weight = 2 * np.sinh(alpha * h / 2) / alpha if alpha > 0 else h
    nl = -s * MANAKOV_FACTOR * gamma * weight
    dgd = fiber.pmd_ps_sqrt_km * 1e-12 * np.sqrt(h)

    spec *= half
    for step in range(n_steps):
        field = sfft.ifft(spec, axis=-1)
        with np.errstate(over="ignore", invalid="ignore"):
            power = field[0].real ** 2 + field[0].imag ** 2 + field[1].real ** 2 + field[1].imag ** 2
        if not np.isfinite(power).all():
            raise NumericalBlowUpError(step)
        field *= np.exp(1j * nl * power)
        spec = sfft.fft(field, axis=-1)
        if pmd_rng is not None:
            spec = _pmd_section(spec, omega, dgd, pmd_rng)
        spec *= full if step < n_steps - 1 else half
    out = sfft.ifft(spec, axis=-1)
    if not np.isfinite(out).all():
        raise NumericalBlowUpError(n_steps - 1)
    return w.with_stacked(out)


def ase_variance_per_pol(gain_db: float, nf_db: float, sample_rate_hz: float, carrier_hz: float) -> float:
    """Per-sample ASE variance on one polarization: (G-1) n_sp h nu fs."""
    g = 10 ** (gain_db / 10)
    n_sp = 10 ** (nf_db / 10) / 2
    return (g - 1) * n_sp * Planck * carrier_hz * sample_rate_hz


def edfa_amplify(
    w: DualPolWaveform,
    gain_db: float,
    nf_db: float,
    noise: np.random.Generator | None,
    carrier_hz: float = FiberParams().carrier_hz,
) -> DualPolWaveform:
    """Amplify by ``gain_db`` and add circular Gaussian ASE on each polarization."""
    if gain_db < 0:
        raise ValueError("gain_db must be >= 0")
    out = w.stacked() * 10 ** (gain_db / 20)
    var = ase_variance_per_pol(gain_db, nf_db, w.sample_rate_hz, carrier_hz)
    if noise is not None and var > 0:
        std = np.sqrt(var / 2)
        out += std * (noise.standard_normal(out.shape) + 1j * noise.standard_normal(out.shape))
    return w.with_stacked(out)


def wiener_phase(n: int, linewidth_hz: float, sample_rate_hz: float, rng: np.random.Generator) -> np.ndarray:
    step_var = 2 * np.pi * linewidth_hz / sample_rate_hz
    return np.cumsum(rng.normal(0.0, np.sqrt(step_var), n))


def apply_phase_noise(w: DualPolWaveform, linewidth_hz: float, noise: np.random.Generator | None) -> DualPolWaveform:
    """Rotate both polarizations by a common Wiener phase walk."""
    if linewidth_hz < 0:
        raise ValueError("linewidth must be >= 0")
    if noise is None or linewidth_hz == 0:
        return w.with_stacked(w.stacked())
    rot = np.exp(1j * wiener_phase(w.n_samples, linewidth_hz, w.sample_rate_hz, noise))
    return DualPolWaveform(w.x_samples * rot, w.y_samples * rot, w.sample_rate_hz, w.center_offset_hz)


def propagate_span(w: DualPolWaveform, link: LinkConfig, noise: NoiseSource, span: int) -> DualPolWaveform:
    """One fiber span followed by its EDFA."""
    pmd = noise.generator("pmd", span) if link.pmd_enabled else None
    w = ssfm_propagate(w, link.fiber, link.forward_steps_per_span, "forward", pmd_rng=pmd)
    return edfa_amplify(w, link.gain_db, link.edfa_nf_db, noise.noise("edfa", span), link.fiber.carrier_hz)


def transmit(w: DualPolWaveform, link: LinkConfig, noise: NoiseSource) -> DualPolWaveform:
    return apply_phase_noise(w, link.tx_linewidth_hz, noise.noise("tx_laser"))


def receive(w: DualPolWaveform, link: LinkConfig, noise: NoiseSource) -> DualPolWaveform:
    """Local-oscillator phase noise applied at the coherent receiver."""
    return apply_phase_noise(w, link.lo_linewidth_hz, noise.noise("lo_laser"))


def propagate_spans(w: DualPolWaveform, link: LinkConfig, noise: NoiseSource) -> Iterator[DualPolWaveform]:
    """Transmitter laser noise, then yield the field after every span (before LO noise)."""
    w = transmit(w, link, noise)
    for span in range(link.n_spans):
        w = propagate_span(w, link, noise, span)
        yield w


def propagate_link(w: DualPolWaveform, link: LinkConfig, noise: NoiseSource) -> DualPolWaveform:
    """Full link: transmitter laser noise, ``n_spans`` x (fiber, EDFA), LO noise."""
    w = transmit(w, link, noise)
    for span in range(link.n_spans):
        w = propagate_span(w, link, noise, span)
    return receive(w, link, noise)
