"""Shared test helpers."""

import numpy as np

from cofdm_nlc.waveform import DualPolWaveform


def random_waveform(rng, n=256, rate=32e9, offset=0.0):
    x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    y = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return DualPolWaveform(x * 1e-2, y * 1e-2, rate, offset)


def tone(n, k, rate=32e9, amplitude=1.0, offset=0.0):
    """Bin-aligned complex tone at FFT bin ``k`` on x only."""
    x = amplitude * np.exp(2j * np.pi * k * np.arange(n) / n)
    return DualPolWaveform(x, np.zeros(n, complex), rate, offset)


def rel_rms(a, b):
    a, b = np.asarray(a), np.asarray(b)
    return float(np.linalg.norm(a - b) / np.linalg.norm(b))
