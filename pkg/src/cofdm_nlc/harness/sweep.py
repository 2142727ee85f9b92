"""Power/distance sweeps over compensation schemes.

One job is a (transmit format, launch power, seed replica) triple: the
superchannel is propagated span by span once and every scheme is evaluated
at each distance of the grid as the field passes it. Bit errors are pooled
over seed replicas into one record per (scheme, power, distance).
"""

from __future__ import annotations

import logging
import os
from collections.abc import Iterable
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

from ..channel import NoiseSource, propagate_spans, receive
from ..compensation import compensate
from ..errors import ReachError, SimulationError
from ..metrics import MIN_CONFIDENT_ERRORS, SweepRecord, count_real_mults, estimate_reach, q_or_limit
from .config import ExperimentConfig
from .superchannel import build_superchannel

log = logging.getLogger(__name__)

WORKERS_ENV = "COFDM_WORKERS"


@dataclass(frozen=True)
class _Job:
    pctw: bool
    power_index: int
    replica: int


@dataclass
class _Tally:
    errors: int = 0
    bits: int = 0
    failure: str | None = None


def _jobs(cfg: ExperimentConfig) -> list[_Job]:
    formats = sorted({s.uses_pctw for s in cfg.sweep.schemes})
    return [
        _Job(pctw, p, r)
        for pctw in formats
        for p in range(len(cfg.sweep.power_grid_dbm))
        for r in range(cfg.sweep.n_seeds)
    ]


def _run_job(cfg: ExperimentConfig, job: _Job) -> dict[tuple[str, int], _Tally]:
    """Tallies keyed by (scheme label, spans) for one propagation."""
    sweep = cfg.sweep
    schemes = [s for s in sweep.schemes if s.uses_pctw == job.pctw]
    grid = set(sweep.distance_grid_spans)
    out = {(s.label, d): _Tally() for s in schemes for d in grid}
    # streams depend on the replica only, so every power sees the same bits and noise draws
    noise = NoiseSource(cfg.seed, cfg.noise_enabled, key=(job.replica,))
    power = sweep.power_grid_dbm[job.power_index]
    plan = cfg.superchannel
    reached = 0
    try:
        tx = build_superchannel(cfg.ofdm, plan, sweep.n_ofdm_symbols, power, noise, job.pctw, cfg.link.fiber)
        ctx = tx.contexts[plan.measured]
        for spans, field in enumerate(propagate_spans(tx.waveform, cfg.link, noise), 1):
            reached = spans
            if spans not in grid:
                continue
            link = cfg.link.with_spans(spans)
            rx = receive(field, link, noise)
            for scheme in schemes:
                tally = out[(scheme.label, spans)]
                try:
                    rec = compensate(rx, scheme, link, cfg.ofdm, ctx)
                except (SimulationError, ArithmeticError, ValueError) as exc:
                    tally.failure = f"{type(exc).__name__}: {exc}"
                    continue
                tally.errors = int((rec.bits != ctx.tx_bits).sum())
                tally.bits = int(ctx.tx_bits.size)
    except (SimulationError, ArithmeticError, ValueError) as exc:
        reason = f"{type(exc).__name__}: {exc}"
        log.warning("propagation failed at power %s dBm after %d spans: %s", power, reached, reason)
        for (_, d), tally in out.items():
            if d > reached and tally.failure is None:
                tally.failure = reason
    return out


def _run_job_star(args):
    return _run_job(*args)


def resolve_workers(workers: int | None = None) -> int:
    """Explicit value, else the environment override, else 1."""
    if workers is None:
        env = os.environ.get(WORKERS_ENV)
        workers = int(env) if env else 1
    if workers < 1:
        raise ValueError("workers must be >= 1")
    return workers


def run_sweep(cfg: ExperimentConfig, workers: int | None = None) -> list[SweepRecord]:
    """Evaluate every (scheme, power, distance) grid point.

    Records are ordered by scheme, then power, then distance as listed in
    the config, independent of worker count and completion order.
    """
    workers = resolve_workers(workers)
    jobs = _jobs(cfg)
    if workers == 1 or len(jobs) == 1:
        results = [_run_job(cfg, j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
            results = list(pool.map(_run_job_star, [(cfg, j) for j in jobs]))

    pooled: dict[tuple[bool, int], list[dict]] = {}
    for job, res in zip(jobs, results):
        pooled.setdefault((job.pctw, job.power_index), []).append(res)

    records = []
    sweep = cfg.sweep
    span_km = cfg.link.fiber.length_km
    for scheme in sweep.schemes:
        for p_idx, power in enumerate(sweep.power_grid_dbm):
            replicas = pooled[(scheme.uses_pctw, p_idx)]
            for spans in sweep.distance_grid_spans:
                tallies = [r[(scheme.label, spans)] for r in replicas]
                mults = count_real_mults(scheme, cfg.ofdm, cfg.link.with_spans(spans), cfg.superchannel.n_channels)
                records.append(_pool(tallies, scheme.label, power, spans * span_km, cfg.seed, mults))
    return records


def _pool(tallies: list[_Tally], label: str, power: float, distance_km: float, seed: int, mults: int) -> SweepRecord:
    errors = sum(t.errors for t in tallies)
    bits = sum(t.bits for t in tallies)
    failures = [t.failure for t in tallies if t.failure]
    if failures:
        nan = float("nan")
        return SweepRecord(label, power, distance_km, nan, nan, mults, seed, False, errors, bits, failures[0])
    ber = errors / bits
    return SweepRecord(
        scheme=label,
        launch_power_dbm=power,
        distance_km=distance_km,
        ber=ber,
        q_db=q_or_limit(ber),
        real_mults_per_subcarrier=mults,
        seed=seed,
        confident=errors >= MIN_CONFIDENT_ERRORS,
        bit_errors=errors,
        n_bits=bits,
    )


# -- summaries ---------------------------------------------------------------------


def optimum_q(records: Iterable[SweepRecord], distance_km: float) -> dict[str, tuple[float, float]]:
    """Best Q over launch power at one distance: scheme -> (q_db, power_dbm)."""
    best: dict[str, tuple[float, float]] = {}
    for r in records:
        if r.failed or r.distance_km != distance_km:
            continue
        if r.scheme not in best or r.q_db > best[r.scheme][0]:
            best[r.scheme] = (r.q_db, r.launch_power_dbm)
    return best


def reach_by_scheme(records: Iterable[SweepRecord]) -> dict[str, float | None]:
    """FEC-limited reach per scheme; None where the grid does not bracket it."""
    by_scheme: dict[str, list[SweepRecord]] = {}
    for r in records:
        by_scheme.setdefault(r.scheme, []).append(r)
    out: dict[str, float | None] = {}
    for name, recs in by_scheme.items():
        try:
            out[name] = estimate_reach(recs)
        except ReachError:
            out[name] = None
    return out
