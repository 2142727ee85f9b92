import csv
import math

import pytest

from cofdm_nlc import cli
from cofdm_nlc.compensation import Ldc, McDbp, ScDbp
from cofdm_nlc.errors import ConfigError
from cofdm_nlc.harness.config import format_config, load_config, load_preset, parse_config
from cofdm_nlc.harness.output import RESULTS_HEADER, emit_results, fmt_ber
from cofdm_nlc.harness.superchannel import SuperchannelPlan
from cofdm_nlc.harness.sweep import WORKERS_ENV, optimum_q, reach_by_scheme, resolve_workers, run_sweep
from cofdm_nlc.metrics import SweepRecord
from cofdm_nlc.ofdm import OfdmConfig

TINY = """
ofdm.fft_size = 64
ofdm.data_subcarriers = 44
ofdm.pilot_subcarriers = 4
link.forward_steps_per_span = 2
superchannel.n_channels = 2
sweep.schemes = ldc, sc-dbp:1, pctw
sweep.power_grid_dbm = 0, 4
sweep.distance_grid_spans = 1, 2
sweep.n_ofdm_symbols = 5
sweep.n_seeds = 2
run.seed = 9
"""


@pytest.fixture(scope="module")
def tiny():
    return parse_config(TINY)


@pytest.fixture(scope="module")
def tiny_records(tiny):
    return run_sweep(tiny, workers=1)


class TestConfig:
    def test_defaults_are_paper_scale(self):
        cfg = parse_config("")
        assert cfg.ofdm == OfdmConfig()
        assert cfg.superchannel == SuperchannelPlan()

    def test_values_applied(self, tiny):
        assert tiny.ofdm.fft_size == 64
        assert tiny.sweep.schemes[1] == ScDbp(1)
        assert tiny.sweep.power_grid_dbm == (0.0, 4.0)
        assert tiny.link.n_spans == 2
        assert tiny.seed == 9

    def test_unknown_key_is_error(self):
        with pytest.raises(ConfigError, match="unknown key"):
            parse_config("ofdm.fft_sise = 64")

    def test_unknown_section_is_error(self):
        with pytest.raises(ConfigError):
            parse_config("foo.bar = 1")

    def test_malformed_line(self):
        with pytest.raises(ConfigError):
            parse_config("just words")

    def test_bad_value(self):
        with pytest.raises(ConfigError):
            parse_config("ofdm.fft_size = 6.5")

    @pytest.mark.parametrize(
        "text",
        [
            "sweep.power_grid_dbm = ",
            "sweep.distance_grid_spans = 0, 1",
            "sweep.n_ofdm_symbols = 2",
            "sweep.reference_spans = 7",
            "sweep.schemes = ldc, ldc",
        ],
    )
    def test_invariants(self, text):
        with pytest.raises(ConfigError):
            parse_config(text)

    def test_auto_values(self):
        cfg = parse_config("link.edfa_gain_db = auto\nsuperchannel.oversampling = 3\nlink.edfa_gain_db = 10")
        assert cfg.link.edfa_gain_db == 10.0
        assert cfg.superchannel.oversampling == 3

    def test_format_round_trip(self, tiny):
        assert parse_config(format_config(tiny)) == tiny

    def test_constant_mismatch_rejected(self):
        with pytest.raises(ConfigError, match="differs"):
            parse_config("constants.fec_ber_limit = 0.03")

    @pytest.mark.parametrize("name", ["desk", "paper"])
    def test_presets_load(self, name):
        cfg = load_preset(name)
        assert set(s.tag for s in cfg.sweep.schemes) == {"ldc", "sc-dbp", "mc-dbp", "pctw", "sc-dbp-pctw"}

    def test_file_overrides_preset(self, tmp_path):
        path = tmp_path / "c.cfg"
        path.write_text("run.seed = 77\n")
        cfg = load_config(path, "desk")
        assert cfg.seed == 77
        assert cfg.ofdm.fft_size == load_preset("desk").ofdm.fft_size

    def test_missing_everything(self):
        with pytest.raises(ConfigError):
            load_config(None, None)


class TestSweep:
    def test_cardinality_single_point(self):
        cfg = parse_config(TINY + "sweep.schemes = ldc\nsweep.power_grid_dbm = 0\nsweep.distance_grid_spans = 1\nsweep.n_seeds = 1")
        assert len(run_sweep(cfg)) == 1

    def test_cardinality_and_order(self, tiny, tiny_records):
        assert len(tiny_records) == 3 * 2 * 2
        keys = [(r.scheme, r.launch_power_dbm, r.distance_km) for r in tiny_records]
        expected = [(s.label, p, d * 80.0) for s in tiny.sweep.schemes for p in (0.0, 4.0) for d in (1, 2)]
        assert keys == expected

    def test_records_pool_seeds(self, tiny, tiny_records):
        per_seed_bits = 2 * 3 * 44 * 4
        ldc = tiny_records[0]
        assert ldc.n_bits == 2 * per_seed_bits
        pctw = tiny_records[-1]
        assert pctw.n_bits == 2 * per_seed_bits // 2

    def test_fields(self, tiny_records):
        for r in tiny_records:
            assert not r.failed
            assert 0 <= r.ber <= 1
            assert r.seed == 9
            assert r.confident == (r.bit_errors >= 100)
            assert r.real_mults_per_subcarrier > 0

    def test_deterministic(self, tiny, tiny_records):
        assert run_sweep(tiny) == tiny_records

    def test_worker_count_irrelevant(self, tiny, tiny_records):
        assert run_sweep(tiny, workers=2) == tiny_records

    def test_failures_are_recorded_not_raised(self):
        cfg = parse_config(TINY + "sweep.power_grid_dbm = 0, 3200\nsweep.schemes = ldc\nsweep.n_seeds = 1")
        recs = run_sweep(cfg)
        assert [r.failed for r in recs] == [False, False, True, True]
        assert "Overflow" in recs[-1].failure
        assert math.isnan(recs[-1].ber)

    def test_workers_env(self, monkeypatch):
        monkeypatch.setenv(WORKERS_ENV, "3")
        assert resolve_workers() == 3
        assert resolve_workers(2) == 2
        monkeypatch.delenv(WORKERS_ENV)
        assert resolve_workers() == 1
        with pytest.raises(ValueError):
            resolve_workers(0)

    def test_summaries(self):
        recs = [
            SweepRecord("a", 0, 800, 1e-3, 9.8, 1, 1),
            SweepRecord("a", 2, 800, 1e-2, 7.3, 1, 1),
            SweepRecord("a", 0, 1600, 1e-1, 2.2, 1, 1),
            SweepRecord("b", 0, 800, 1e-3, 9.8, 1, 1),
        ]
        assert optimum_q(recs, 800) == {"a": (9.8, 0), "b": (9.8, 0)}
        reach = reach_by_scheme(recs)
        assert reach["b"] is None
        assert 800 < reach["a"] < 1600


class TestOutput:
    def test_ber_format(self):
        assert fmt_ber(2.7e-2) == "2.70000e-02"
        assert fmt_ber(0.0) == "0.00000e+00"

    def test_single_record_two_lines(self, tiny, tmp_path):
        r = SweepRecord("ldc", 0.0, 80.0, 1.234567e-3, 9.1, 65, 9, True)
        paths = emit_results([r], tiny, tmp_path)
        lines = paths.results.read_text().splitlines()
        assert lines == [",".join(RESULTS_HEADER), "ldc,0,80,1.23457e-03,9.1000,65,9,true"]

    def test_all_files_written(self, tiny, tiny_records, tmp_path):
        paths = emit_results(tiny_records, tiny, tmp_path / "nested")
        for p in (paths.results, paths.q_vs_power, paths.reach, paths.complexity, paths.metadata):
            assert p.exists()
        with open(paths.q_vs_power) as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 3 * 2
        assert all(r["power_dbm"] in ("0", "4") for r in rows)

    def test_metadata_reproduces_results(self, tiny, tiny_records, tmp_path):
        paths = emit_results(tiny_records, tiny, tmp_path / "a")
        again = load_config(paths.metadata)
        assert again == tiny
        paths2 = emit_results(run_sweep(again), again, tmp_path / "b")
        assert paths2.results.read_bytes() == paths.results.read_bytes()

    def test_unwritable(self, tiny, tiny_records, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("")
        with pytest.raises(OSError):
            emit_results(tiny_records, tiny, blocker / "sub")


class TestCli:
    def test_success(self, tmp_path, capsys):
        cfg = tmp_path / "tiny.cfg"
        cfg.write_text(TINY + "sweep.n_seeds = 1\n")
        code = cli.main(["--config", str(cfg), "--out", str(tmp_path / "out"), "--seed", "3"])
        assert code == 0
        assert "optimum Q" in capsys.readouterr().out
        assert "run.seed = 3" in (tmp_path / "out" / "metadata.cfg").read_text()

    def test_failed_record_gives_nonzero_exit(self, tmp_path):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text(TINY + "sweep.power_grid_dbm = 3200\nsweep.schemes = ldc\nsweep.n_seeds = 1\n")
        assert cli.main(["--config", str(cfg), "--out", str(tmp_path / "out")]) == 1

    def test_config_error_exit(self, tmp_path, capsys):
        cfg = tmp_path / "bad.cfg"
        cfg.write_text("nonsense.key = 1\n")
        assert cli.main(["--config", str(cfg), "--out", str(tmp_path)]) == 2
        assert "unknown" in capsys.readouterr().err

    def test_scheme_objects_in_config(self, tiny):
        assert Ldc() in tiny.sweep.schemes
        assert McDbp(16) not in tiny.sweep.schemes
