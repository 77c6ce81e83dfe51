"""CLI harness: exit codes, file outputs and determinism."""

import json

from scsim.cli import DEFAULT_SEED, build_parser, main


def run(tmp_path, *argv):
    return main(["--out-dir", str(tmp_path), *argv])


class TestVerifyCommands:
    def test_lemma1_passes(self, tmp_path):
        assert run(tmp_path, "verify-lemma1", "--n-min", "3",
                   "--n-max", "6") == 0
        text = (tmp_path / "lemma1.csv").read_text()
        assert text.startswith(f"# seed={DEFAULT_SEED:#x}")

    def test_lemma1_negative_control(self, tmp_path):
        assert run(tmp_path, "verify-lemma1", "--n-min", "4", "--n-max", "4",
                   "--corrupt-mask") == 1

    def test_apc_check_passes(self, tmp_path, capsys):
        assert run(tmp_path, "apc-check", "--n-inputs", "15", "--samples",
                   "1000") == 0
        assert "0 mismatches" in capsys.readouterr().out

    def test_apc_check_negative_control(self, tmp_path):
        assert run(tmp_path, "apc-check", "--n-inputs", "25", "--samples",
                   "1000", "--corrupt-tree") == 1

    def test_verify_lfsr(self, tmp_path, capsys):
        assert run(tmp_path, "verify-lfsr") == 0
        out = capsys.readouterr().out
        assert "n=16" in out and "SHORT" not in out

    def test_pcc_curves_outputs(self, tmp_path):
        assert run(tmp_path, "pcc-curves", "--n-list", "4") == 0
        assert (tmp_path / "pcc_curves_n4.csv").exists()
        assert (tmp_path / "pcc_curves_n4.svg").exists()


class TestInferenceCommands:
    def test_infer_bundled_defaults(self, tmp_path, capsys):
        assert run(tmp_path, "infer", "--limit", "10", "--k", "16") == 0
        assert "accuracy" in capsys.readouterr().out
        assert (tmp_path / "infer.csv").exists()

    def test_sweep_deterministic(self, tmp_path):
        args = ["sweep", "--limit", "5", "--k-list", "8,16",
                "--n-bits-list", "8"]
        assert run(tmp_path / "a", *args) == 0
        assert run(tmp_path / "b", *args) == 0
        assert (tmp_path / "a" / "sweep.csv").read_bytes() == \
            (tmp_path / "b" / "sweep.csv").read_bytes()

    def test_missing_model_is_usage_error(self, tmp_path):
        assert run(tmp_path, "infer", "--model", "/nonexistent.json") == 2


class TestArchReport:
    def test_report_outputs(self, tmp_path, capsys):
        assert run(tmp_path, "arch-report", "--channels-max", "16") == 0
        out = capsys.readouterr().out
        assert "argmin" in out
        assert (tmp_path / "arch_report.csv").exists()
        assert (tmp_path / "arch_report.svg").exists()

    def test_csv_columns(self, tmp_path):
        run(tmp_path, "arch-report", "--channels-max", "4")
        lines = (tmp_path / "arch_report.csv").read_text().splitlines()
        assert lines[1].split(",")[:3] == ["channels", "profile", "area_um2"]


class TestPlumbing:
    def test_config_file_sets_defaults(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"n-max": 4, "n-min": 4}))
        assert main(["--config", str(cfg), "--out-dir", str(tmp_path),
                     "verify-lemma1"]) == 0
        rows = (tmp_path / "lemma1.csv").read_text().splitlines()
        assert len(rows) == 2 + 16      # header comment + columns + 2^4 rows

    def test_flags_beat_config(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"n-max": 8}))
        assert main(["--config", str(cfg), "--out-dir", str(tmp_path),
                     "verify-lemma1", "--n-min", "3", "--n-max", "3"]) == 0
        rows = (tmp_path / "lemma1.csv").read_text().splitlines()
        assert len(rows) == 2 + 8

    def test_bad_config_is_usage_error(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text("{not json")
        assert main(["--config", str(cfg), "verify-lfsr"]) == 2

    def test_parser_lists_subcommands(self):
        ap = build_parser()
        help_text = ap.format_help()
        for name in ("verify-lemma1", "pcc-curves", "apc-check", "infer",
                     "sweep", "arch-report"):
            assert name in help_text

    def test_seed_flag_recorded(self, tmp_path):
        assert run(tmp_path, "--seed", "0x123", "verify-lemma1", "--n-min",
                   "3", "--n-max", "3") == 0
        assert (tmp_path / "lemma1.csv").read_text().startswith("# seed=0x123")
