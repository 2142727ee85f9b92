"""Quality metrics, reach estimation and the real-multiplication counter."""

from __future__ import annotations

import math
from collections.abc import Iterable
from dataclasses import dataclass

import numpy as np
from scipy.special import erfc, erfcinv

from .errors import QUndefinedError, ReachError

FEC_BER_LIMIT = 2.7e-2  # 20% overhead soft-decision FEC threshold
EVM_FLOOR_DB = -120.0
MIN_CONFIDENT_ERRORS = 100
REAL_MULTS_PER_COMPLEX = 4


@dataclass(frozen=True)
class SweepRecord:
    scheme: str
    launch_power_dbm: float
    distance_km: float
    ber: float
    q_db: float
    real_mults_per_subcarrier: int
    seed: int
    confident: bool = False
    bit_errors: int = 0
    n_bits: int = 0
    failure: str | None = None

    @property
    def failed(self) -> bool:
        return self.failure is not None


def ber_count(rx_bits, tx_bits) -> float:
    rx = np.asarray(rx_bits, dtype=np.uint8).ravel()
    tx = np.asarray(tx_bits, dtype=np.uint8).ravel()
    if rx.size != tx.size or rx.size == 0:
        raise ValueError(f"bit streams must have equal non-zero length ({rx.size} vs {tx.size})")
    return np.count_nonzero(rx != tx) / rx.size


def q_from_ber(ber: float) -> float:
    """Gaussian-equivalent Q factor in dB: 20 log10(sqrt(2) erfcinv(2 BER))."""
    if not 0.0 < ber < 0.5:
        raise QUndefinedError(f"Q undefined for BER {ber}")
    return 20.0 * math.log10(math.sqrt(2.0) * float(erfcinv(2.0 * ber)))


def ber_from_q(q_db: float) -> float:
    q_lin = 10.0 ** (q_db / 20.0)
    return 0.5 * float(erfc(q_lin / math.sqrt(2.0)))


def q_or_limit(ber: float) -> float:
    """``q_from_ber`` extended to inf at BER 0 and -inf at BER >= 0.5."""
    if ber <= 0.0:
        return math.inf
    if ber >= 0.5:
        return -math.inf
    return q_from_ber(ber)


def evm(rx_symbols, ref_symbols) -> float:
    """Error-vector magnitude in dB, clipped at ``EVM_FLOOR_DB``."""
    rx = np.asarray(rx_symbols).ravel()
    ref = np.asarray(ref_symbols).ravel()
    if rx.shape != ref.shape:
        raise ValueError("symbol arrays must have equal length")
    ref_energy = float(np.vdot(ref, ref).real)
    if ref_energy == 0.0:
        raise ValueError("reference symbols have zero energy")
    err = float(np.vdot(rx - ref, rx - ref).real)
    if err == 0.0:
        return EVM_FLOOR_DB
    return max(10.0 * math.log10(err / ref_energy), EVM_FLOOR_DB)


def best_ber_by_distance(records: Iterable[SweepRecord], scheme: str | None = None) -> dict[float, float]:
    """Minimum BER over launch powers at each distance (failed records skipped)."""
    best: dict[float, float] = {}
    for r in records:
        if r.failed or (scheme is not None and r.scheme != scheme) or math.isnan(r.ber):
            continue
        best[r.distance_km] = min(best.get(r.distance_km, math.inf), r.ber)
    return best


def estimate_reach(records: Iterable[SweepRecord], fec_ber: float = FEC_BER_LIMIT, ber_floor: float = 1e-12) -> float:
    """Largest distance at which the power-optimized BER crosses ``fec_ber``.

    log10(BER) is interpolated linearly in distance between neighbouring grid
    points; zero BER is clamped to ``ber_floor`` for the logarithm.
    """
    best = best_ber_by_distance(records)
    if len(best) < 2:
        raise ReachError("at least two distances are needed")
    dists = sorted(best)
    logs = [math.log10(max(best[d], ber_floor)) for d in dists]
    target = math.log10(fec_ber)
    reach = None
    for (d0, l0), (d1, l1) in zip(zip(dists, logs), zip(dists[1:], logs[1:])):
        if l0 <= target < l1:
            reach = d0 + (target - l0) * (d1 - d0) / (l1 - l0)
        elif l0 <= target and l1 == target:
            reach = d1
    if reach is None:
        raise ReachError("reach outside sweep range")
    return reach


# -- complexity --------------------------------------------------------------


def fft_complex_mults(n: int) -> int:
    """Radix-2 count: (N/2) log2 N complex multiplications."""
    return (n // 2) * int(math.ceil(math.log2(n)))


def count_total_real_mults(scheme, fft_size: int, n_spans: int, n_channels: int) -> int:
    """Real multiplications per block of ``fft_size`` samples for one channel.

    One complex multiplication counts as four real ones. LDC is two FFTs and
    one N-point phase filter. Each back-propagation step is two FFTs, an
    N-point phase filter and 3N for power and nonlinear rotation on both
    polarizations. MC-DBP runs at the aggregate size ``n_channels * N``.
    PCTW adds N for the coherent superposition.
    """
    tag = scheme.tag
    n = fft_size
    if tag in ("ldc", "pctw"):
        cm = 2 * fft_complex_mults(n) + n
    elif tag in ("sc-dbp", "sc-dbp-pctw"):
        cm = (2 * fft_complex_mults(n) + 4 * n) * scheme.steps_per_span * n_spans
    elif tag == "mc-dbp":
        na = n * n_channels
        cm = (2 * fft_complex_mults(na) + 4 * na) * scheme.steps_per_span * n_spans
    else:
        raise ValueError(f"unknown scheme {tag!r}")
    if tag.endswith("pctw"):
        cm += n
    return REAL_MULTS_PER_COMPLEX * cm


def count_real_mults(scheme, ofdm_cfg, link, n_channels: int) -> int:
    """Real multiplications per occupied subcarrier, rounded up.

    PCTW schemes carry each bit on both polarizations, so their count is
    normalised by half the occupied subcarriers.
    """
    total = count_total_real_mults(scheme, ofdm_cfg.fft_size, link.n_spans, n_channels)
    carriers = ofdm_cfg.n_occupied
    if scheme.tag.endswith("pctw"):
        total *= 2
    return -(-total // carriers)
