"""Result tables: the main CSV, plot-data CSVs and the run metadata."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

from ..metrics import SweepRecord, best_ber_by_distance, count_real_mults, q_or_limit
from .config import ExperimentConfig, format_config
from .sweep import optimum_q, reach_by_scheme

RESULTS_HEADER = ["scheme", "power_dbm", "distance_km", "ber", "q_db", "real_mults_per_subcarrier", "seed", "confident"]
COMPLEXITY_SPANS = tuple(range(5, 51, 5))


@dataclass(frozen=True)
class OutputPaths:
    results: Path
    q_vs_power: Path
    reach: Path
    complexity: Path
    metadata: Path

    @classmethod
    def in_dir(cls, out_dir: str | Path) -> OutputPaths:
        d = Path(out_dir)
        return cls(
            d / "results.csv",
            d / "q_vs_power.csv",
            d / "reach.csv",
            d / "complexity.csv",
            d / "metadata.cfg",
        )


def fmt_ber(ber: float) -> str:
    return "nan" if math.isnan(ber) else f"{ber:.5e}"


def fmt_float(x: float) -> str:
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.4f}"


def fmt_grid(x: float) -> str:
    return f"{x:g}"


def _write_csv(path: Path, header: list[str], rows: list[list[str]]) -> None:
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(header)
            writer.writerows(rows)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def results_rows(records: list[SweepRecord]) -> list[list[str]]:
    return [
        [
            r.scheme,
            fmt_grid(r.launch_power_dbm),
            fmt_grid(r.distance_km),
            fmt_ber(r.ber),
            fmt_float(r.q_db),
            str(r.real_mults_per_subcarrier),
            str(r.seed),
            "true" if r.confident else "false",
        ]
        for r in records
    ]


def emit_results(records: list[SweepRecord], cfg: ExperimentConfig, out_dir: str | Path) -> OutputPaths:
    """Write every output file into ``out_dir`` (created if missing)."""
    if not records:
        raise ValueError("no records to write")
    paths = OutputPaths.in_dir(out_dir)
    try:
        paths.results.parent.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out_dir}: {exc}") from exc

    _write_csv(paths.results, RESULTS_HEADER, results_rows(records))

    ref_km = cfg.sweep.q_reference_spans * cfg.link.fiber.length_km
    rows = [
        [r.scheme, fmt_grid(r.launch_power_dbm), fmt_float(r.q_db), fmt_ber(r.ber)]
        for r in records
        if r.distance_km == ref_km
    ]
    _write_csv(paths.q_vs_power, ["scheme", "power_dbm", "q_db", "ber"], rows)

    reach = reach_by_scheme(records)
    rows = []
    for scheme in cfg.sweep.schemes:
        best = best_ber_by_distance(records, scheme.label)
        r_km = reach.get(scheme.label)
        for d in sorted(best):
            rows.append([
                scheme.label,
                fmt_grid(d),
                fmt_ber(best[d]),
                fmt_float(q_or_limit(best[d])),
                "nan" if r_km is None else f"{r_km:.1f}",
            ])
    _write_csv(paths.reach, ["scheme", "distance_km", "best_ber", "best_q_db", "reach_km"], rows)

    rows = [
        [scheme.label, str(n), str(count_real_mults(scheme, cfg.ofdm, cfg.link.with_spans(n), cfg.superchannel.n_channels))]
        for scheme in cfg.sweep.schemes
        for n in COMPLEXITY_SPANS
    ]
    _write_csv(paths.complexity, ["scheme", "n_spans", "real_mults_per_subcarrier"], rows)

    try:
        paths.metadata.write_text(format_config(cfg))
    except OSError as exc:
        raise OSError(f"cannot write {paths.metadata}: {exc}") from exc
    return paths


def summarize(records: list[SweepRecord], cfg: ExperimentConfig) -> str:
    """Human-readable digest: optimum Q at the reference distance and reach."""
    ref_km = cfg.sweep.q_reference_spans * cfg.link.fiber.length_km
    best = optimum_q(records, ref_km)
    reach = reach_by_scheme(records)
    lines = [f"optimum Q at {ref_km:g} km and FEC-limited reach:"]
    for scheme in cfg.sweep.schemes:
        q, p = best.get(scheme.label, (math.nan, math.nan))
        r = reach.get(scheme.label)
        r_txt = "outside grid" if r is None else f"{r:.0f} km"
        lines.append(f"  {scheme.label:<16} Q {q:6.2f} dB at {p:g} dBm   reach {r_txt}")
    failed = sum(r.failed for r in records)
    if failed:
        lines.append(f"  {failed} record(s) failed")
    return "\n".join(lines)

