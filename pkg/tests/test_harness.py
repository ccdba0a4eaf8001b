import io

import numpy as np
import pytest

from otfsftn import ConfigError, parse_config, run_ber_sweep, run_rate_sweep, validate
from otfsftn.cli import main as cli_main
from otfsftn.harness import channel_dump, trial_rng

MINIMAL = """
M: 4
N: 2
alpha: 1.0
beta: 0.25
channel:
  profile: identity
"""

FIG1_STYLE = """
M: 128
N: 12
alpha: [0.8, 0.9, 1.0]
beta: 0.25
snr_db_grid: [0, 10, 20]
master_seed: 7
trials: 2
cp_len: 8
channel:
  profile: synthetic
  num_paths: 20
  l_max: 7
  k_max: 5
  frac_doppler: true
"""

AWGN_QPSK = """
M: 4
N: 4
alpha: 1.0
beta: 0.25
snr_db_grid: [0, 4]
master_seed: 11
trials: 40
channel:
  profile: identity
"""

EVA_BER = """
M: 16
N: 4
alpha: [0.9]
beta: 0.25
delta_f_hz: 30000
snr_db_grid: [8]
master_seed: 3
trials: 6
cp_len: 3
channel:
  profile: eva
  nu_max_hz: 1000
"""


class TestParseConfig:
    def test_minimal_accepted(self):
        cfg = parse_config(MINIMAL)
        assert cfg.M == 4 and cfg.N == 2 and cfg.alpha == 1.0
        assert cfg.channel.profile == "identity"
        assert cfg.effective_cp_len() == 1

    def test_rate_curve_setup_accepted(self):
        cfg = parse_config(FIG1_STYLE)
        assert cfg.alpha_grid == (0.8, 0.9, 1.0)
        assert cfg.channel.num_paths == 20 and cfg.channel.k_max == 5

    def test_alpha_below_bound_rejected(self):
        with pytest.raises(ConfigError, match="1/\\(1\\+beta\\) = 0.8"):
            parse_config(MINIMAL.replace("alpha: 1.0", "alpha: 0.7"))

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="unknown config key"):
            parse_config(MINIMAL + "\nbogus_key: 3\n")

    def test_unknown_channel_key_rejected(self):
        with pytest.raises(ConfigError, match="unknown channel key"):
            parse_config(MINIMAL + "  bogus: 1\n")

    def test_missing_required_key(self):
        with pytest.raises(ConfigError, match="required key 'beta'"):
            parse_config("M: 4\nN: 2\nalpha: 1.0\n")

    def test_cp_shorter_than_delay_rejected(self):
        with pytest.raises(ConfigError, match="cp_len"):
            parse_config(EVA_BER.replace("cp_len: 3", "cp_len: 1"))

    def test_oversized_doppler_rejected(self):
        with pytest.raises(ConfigError, match="delta_f/2"):
            parse_config(EVA_BER.replace("nu_max_hz: 1000", "nu_max_hz: 16000"))

    def test_impossible_synthetic_distinctness(self):
        bad = FIG1_STYLE.replace("l_max: 7", "l_max: 0").replace("k_max: 5", "k_max: 0")
        with pytest.raises(ConfigError, match="distinct"):
            parse_config(bad)

    def test_non_mapping_rejected(self):
        with pytest.raises(ConfigError):
            parse_config("- 1\n- 2\n")

    def test_malformed_values_rejected(self):
        with pytest.raises(ConfigError, match="malformed config value"):
            parse_config("M: abc\nN: 2\nalpha: 1.0\nbeta: 0.25\n")
        with pytest.raises(ConfigError, match="'alpha'"):
            parse_config("M: 4\nN: 2\nalpha: [0.9, oops]\nbeta: 0.25\n")

    def test_frame_size_cap(self):
        big = MINIMAL.replace("M: 4", "M: 1600")
        cfg = parse_config(big)
        from otfsftn.harness import assert_memory_budget

        with pytest.raises(ConfigError, match="1536"):
            assert_memory_budget(cfg)


class TestRateSweep:
    def test_identity_awgn_is_shannon(self):
        cfg = parse_config(AWGN_QPSK)
        result = run_rate_sweep(cfg)
        # the beta = 0 Nyquist baseline on the identity channel is the AWGN rate
        for row in result.rows:
            if row.mode == "nyquist" and row.beta == 0.0:
                snr = 10.0 ** (row.snr_db / 10.0)
                assert abs(row.rate_bps_hz - np.log2(1.0 + snr)) <= 1e-9

    def test_pa_dominates_no_pa(self):
        cfg = parse_config(FIG1_STYLE.replace("M: 128", "M: 16").replace("N: 12", "N: 4"))
        result = run_rate_sweep(cfg)
        by_key = {(r.alpha, r.snr_db, r.mode): r for r in result.rows}
        for alpha in (0.8, 0.9, 1.0):
            for snr in (0.0, 10.0, 20.0):
                assert by_key[(alpha, snr, "pa")].rate_bps_hz >= by_key[(alpha, snr, "no_pa")].rate_bps_hz

    def test_rows_sorted_and_csv_schema(self):
        cfg = parse_config(AWGN_QPSK)
        result = run_rate_sweep(cfg)
        csv = result.to_csv()
        lines = csv.splitlines()
        assert lines[0].startswith("# provenance config_sha256=")
        assert lines[1] == "snr_db,alpha,beta,mode,mi_bits,rate_bps_hz,seeds"
        keys = [(r.alpha, r.snr_db) for r in result.rows]
        assert keys == sorted(keys)

    def test_threads_change_nothing(self):
        cfg = parse_config(FIG1_STYLE.replace("M: 128", "M: 8").replace("N: 12", "N: 4"))
        a = run_rate_sweep(cfg, threads=1).to_csv()
        b = run_rate_sweep(cfg, threads=4).to_csv()
        assert a == b


class TestBerSweep:
    def test_noiseless_limit_zero_errors(self):
        cfg = parse_config(AWGN_QPSK.replace("snr_db_grid: [0, 4]", "snr_db_grid: [200]"))
        result = run_ber_sweep(cfg)
        assert all(r.errors == 0 for r in result.rows)
        assert all(r.bits > 0 for r in result.rows)

    def test_byte_identical_across_threads(self):
        cfg = parse_config(EVA_BER)
        a = run_ber_sweep(cfg, threads=1).to_csv()
        b = run_ber_sweep(cfg, threads=4).to_csv()
        assert a == b

    def test_awgn_qpsk_matches_q_function(self):
        from math import erfc, sqrt

        text = AWGN_QPSK.replace("M: 4", "M: 8").replace("trials: 40", "trials: 100")
        cfg = parse_config(text)
        result = run_ber_sweep(cfg)
        for row in result.rows:
            snr = 10.0 ** (row.snr_db / 10.0)
            p = 0.5 * erfc(sqrt(snr) / sqrt(2.0))  # Q(sqrt(2 Eb/N0)) for QPSK
            se = sqrt(p * (1.0 - p) / row.bits)
            assert abs(row.ber - p) <= 3.0 * se

    def test_llr_dump_schema(self):
        cfg = parse_config(EVA_BER.replace("trials: 6", "trials: 2"))
        sink = io.StringIO()
        run_ber_sweep(cfg, llr_sink=sink)
        lines = sink.getvalue().splitlines()
        assert lines[0].startswith("# provenance config_sha256=")
        assert lines[1] == "frame,subchannel,bit,llr"
        first = lines[2].split(",")
        assert len(first) == 4
        int(first[0]); int(first[1]); int(first[2]); float(first[3])

    def test_csv_schema(self):
        cfg = parse_config(AWGN_QPSK)
        lines = run_ber_sweep(cfg).to_csv().splitlines()
        assert lines[1] == "snr_db,alpha,beta,target_rate,bits,errors,ber,trials"

    def test_llr_dump_identical_across_threads(self):
        cfg = parse_config(EVA_BER.replace("trials: 6", "trials: 4"))
        sinks = []
        for threads in (1, 3):
            sink = io.StringIO()
            run_ber_sweep(cfg, threads=threads, llr_sink=sink)
            sinks.append(sink.getvalue())
        assert sinks[0] == sinks[1]


class TestChannelDump:
    def test_deterministic_and_parseable(self):
        from otfsftn import load_paths

        cfg = parse_config(EVA_BER)
        d1 = channel_dump(cfg)
        d2 = channel_dump(cfg)
        assert d1 == d2
        chan = load_paths("\n".join(l for l in d1.splitlines() if not l.startswith("#")))
        assert chan.num_paths == 9


class TestTrialRng:
    def test_streams_differ_across_cells(self):
        a = trial_rng(1, 0, 0).standard_normal(4)
        b = trial_rng(1, 0, 1).standard_normal(4)
        c = trial_rng(1, 1, 0).standard_normal(4)
        d = trial_rng(2, 0, 0).standard_normal(4)
        assert not np.allclose(a, b) and not np.allclose(a, c) and not np.allclose(a, d)

    def test_streams_reproducible(self):
        assert np.array_equal(trial_rng(9, 3, 7).standard_normal(8), trial_rng(9, 3, 7).standard_normal(8))


class TestValidate:
    def test_default_all_pass(self):
        report = validate()
        assert report.passed, report.format()

    def test_report_has_timings(self):
        report = validate()
        text = report.format()
        assert all(c.seconds >= 0.0 for c in report.checks)
        assert "[PASS]" in text and " s)" in text

    def test_injected_fault_detected(self):
        report = validate(inject_fault="skip-eig-floor")
        assert not report.passed
        failed = [c.name for c in report.checks if not c.ok]
        assert failed == ["gram-floor-policy"]


class TestCli:
    def test_validate_exit_zero(self, capsys):
        assert cli_main(["validate"]) == 0
        assert "checks passed" in capsys.readouterr().out

    def test_rate_subcommand(self, tmp_path):
        cfg = tmp_path / "cfg.yaml"
        cfg.write_text(AWGN_QPSK)
        out = tmp_path / "rates.csv"
        assert cli_main(["rate", "--config", str(cfg), "--out", str(out)]) == 0
        assert out.read_text().splitlines()[1] == "snr_db,alpha,beta,mode,mi_bits,rate_bps_hz,seeds"

    def test_ber_subcommand_threads_identical(self, tmp_path):
        cfg = tmp_path / "cfg.yaml"
        cfg.write_text(EVA_BER)
        out1 = tmp_path / "a.csv"
        out2 = tmp_path / "b.csv"
        assert cli_main(["ber", "--config", str(cfg), "--out", str(out1), "--threads", "1"]) == 0
        assert cli_main(["ber", "--config", str(cfg), "--out", str(out2), "--threads", "3"]) == 0
        assert out1.read_bytes() == out2.read_bytes()

    def test_channel_dump_subcommand(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.yaml"
        cfg.write_text(EVA_BER)
        assert cli_main(["channel-dump", "--config", str(cfg)]) == 0
        out = capsys.readouterr().out
        assert "# dd-channel-dump v1" in out

    def test_bad_config_exit_two(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.yaml"
        cfg.write_text(MINIMAL.replace("alpha: 1.0", "alpha: 0.5"))
        assert cli_main(["rate", "--config", str(cfg)]) == 2
        assert "config error" in capsys.readouterr().err

    def test_missing_config_exit_two(self, capsys):
        assert cli_main(["rate", "--config", "/nonexistent/x.yaml"]) == 2

    def test_seed_override_changes_output(self, tmp_path):
        cfg = tmp_path / "cfg.yaml"
        cfg.write_text(EVA_BER)
        out1 = tmp_path / "a.csv"
        out2 = tmp_path / "b.csv"
        cli_main(["ber", "--config", str(cfg), "--out", str(out1), "--seed", "100"])
        cli_main(["ber", "--config", str(cfg), "--out", str(out2), "--seed", "101"])
        assert out1.read_text() != out2.read_text()
