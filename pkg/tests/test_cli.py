"""Command-line interface, driven in-process through main(argv)."""

import json

import pytest

from censim.cli import main
from censim.gaen import DailyKey
from conftest import SCENARIO_DIR, VECTOR_DIR

ZERO_KEY = "00" * 16


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


class TestKeygen:
    def test_output_parses_back(self, capsys):
        code, out, _ = run_cli(capsys, "keygen", "--seed", "7", "--days", "2")
        assert code == 0
        lines = out.strip().splitlines()
        assert len(lines) == 2
        keys = [DailyKey.from_text(line) for line in lines]
        assert keys[0].key != keys[1].key
        assert keys[1].day_start.value == 144

    def test_deterministic(self, capsys):
        _, a, _ = run_cli(capsys, "keygen", "--seed", "7")
        _, b, _ = run_cli(capsys, "keygen", "--seed", "7")
        assert a == b


class TestDeriveRpis:
    def test_zero_key_matches_golden_file(self, capsys):
        code, out, _ = run_cli(capsys, "derive-rpis", "--key", ZERO_KEY, "--day-start", "0")
        assert code == 0
        assert out == (VECTOR_DIR / "rpi_zero_day.txt").read_text()

    def test_exactly_144_lines(self, capsys):
        _, out, _ = run_cli(capsys, "derive-rpis", "--key", "ab" * 16, "--day-start", "144")
        assert len(out.strip().splitlines()) == 144

    def test_bad_hex_is_usage_error(self, capsys):
        code, _, err = run_cli(capsys, "derive-rpis", "--key", "zz", "--day-start", "0")
        assert code == 2
        assert "error:" in err

    def test_wrong_length_key(self, capsys):
        code, _, _ = run_cli(capsys, "derive-rpis", "--key", "00" * 8, "--day-start", "0")
        assert code == 2

    def test_unaligned_day_start(self, capsys):
        code, _, _ = run_cli(capsys, "derive-rpis", "--key", ZERO_KEY, "--day-start", "7")
        assert code == 2


class TestPayloadCommands:
    def test_encode_decode_round_trip(self, capsys):
        code, out, _ = run_cli(
            capsys, "encode-payload", "--rpi", "aa" * 16, "--scheme", "none"
        )
        assert code == 0
        payload_hex = out.strip()
        assert len(payload_hex) == 42  # 21 bytes

        code, out, _ = run_cli(capsys, "decode-payload", "--hex", payload_hex)
        assert code == 0
        assert "rpi: " + "aa" * 16 in out
        assert "scheme: none (0)" in out
        assert "context: none" in out

    def test_scheme_by_number(self, capsys):
        code, out, _ = run_cli(
            capsys, "encode-payload", "--rpi", "aa" * 16, "--scheme", "0"
        )
        assert code == 0

    def test_context_length_enforced(self, capsys):
        code, _, err = run_cli(
            capsys,
            "encode-payload", "--rpi", "aa" * 16, "--scheme", "sym",
            "--context", "00" * 10,
        )
        assert code == 2

    def test_decode_locked_without_key(self, capsys):
        _, ct_hex, _ = run_cli(
            capsys,
            "encrypt-ctx", "--scheme", "sym", "--key", "11" * 16,
            "--lat", "42.36", "--lon", "-71.09", "--enin", "5",
        )
        _, payload_hex, _ = run_cli(
            capsys,
            "encode-payload", "--rpi", "aa" * 16, "--scheme", "sym",
            "--context", ct_hex.strip(),
        )
        code, out, _ = run_cli(capsys, "decode-payload", "--hex", payload_hex.strip())
        assert code == 0
        assert "context: locked (missing key material)" in out

    def test_decode_with_key_reveals_context(self, capsys):
        _, ct_hex, _ = run_cli(
            capsys,
            "encrypt-ctx", "--scheme", "sym", "--key", "11" * 16,
            "--lat", "42.36", "--lon", "-71.09", "--enin", "5",
        )
        _, payload_hex, _ = run_cli(
            capsys,
            "encode-payload", "--rpi", "aa" * 16, "--scheme", "sym",
            "--context", ct_hex.strip(),
        )
        code, out, _ = run_cli(
            capsys, "decode-payload", "--hex", payload_hex.strip(), "--key", "11" * 16
        )
        assert code == 0
        assert "context: lat=42.36" in out
        assert "enin=5" in out

    def test_decode_wrong_key_locked(self, capsys):
        _, ct_hex, _ = run_cli(
            capsys,
            "encrypt-ctx", "--scheme", "sym", "--key", "11" * 16,
            "--lat", "42.36", "--lon", "-71.09", "--enin", "5",
        )
        _, payload_hex, _ = run_cli(
            capsys,
            "encode-payload", "--rpi", "aa" * 16, "--scheme", "sym",
            "--context", ct_hex.strip(),
        )
        code, out, _ = run_cli(
            capsys, "decode-payload", "--hex", payload_hex.strip(), "--key", "22" * 16
        )
        assert code == 0
        assert out.strip().endswith("context: locked")


class TestContextCommands:
    def test_sym_round_trip(self, capsys):
        code, ct_hex, _ = run_cli(
            capsys,
            "encrypt-ctx", "--scheme", "sym", "--key", "11" * 16,
            "--lat", "51.5074", "--lon", "-0.1278", "--enin", "123456",
        )
        assert code == 0
        code, out, _ = run_cli(
            capsys, "decrypt-ctx", "--hex", ct_hex.strip(), "--key", "11" * 16
        )
        assert code == 0
        assert "lat=51.507" in out and "enin=123456" in out

    def test_consent_round_trip(self, capsys):
        args = [
            "encrypt-ctx", "--scheme", "consent", "--key", "11" * 16,
            "--consent", "22" * 16,
            "--lat", "10.0", "--lon", "20.0", "--enin", "9",
        ]
        _, ct_hex, _ = run_cli(capsys, *args)
        code, out, _ = run_cli(
            capsys,
            "decrypt-ctx", "--hex", ct_hex.strip(),
            "--key", "11" * 16, "--consent", "22" * 16,
        )
        assert code == 0 and "enin=9" in out

    def test_wrong_key_exits_one(self, capsys):
        _, ct_hex, _ = run_cli(
            capsys,
            "encrypt-ctx", "--scheme", "sym", "--key", "11" * 16,
            "--lat", "10.0", "--lon", "20.0", "--enin", "9",
        )
        code, _, err = run_cli(
            capsys, "decrypt-ctx", "--hex", ct_hex.strip(), "--key", "33" * 16
        )
        assert code == 1
        assert "error:" in err

    def test_fixed_nonce_reproducible(self, capsys):
        args = [
            "encrypt-ctx", "--scheme", "sym", "--key", "11" * 16,
            "--lat", "10.0", "--lon", "20.0", "--enin", "9",
            "--nonce", "0a" * 12,
        ]
        _, a, _ = run_cli(capsys, *args)
        _, b, _ = run_cli(capsys, *args)
        assert a == b

    def test_missing_material_is_usage_error(self, capsys):
        code, _, _ = run_cli(
            capsys,
            "encrypt-ctx", "--scheme", "consent", "--key", "11" * 16,
            "--lat", "0", "--lon", "0", "--enin", "0",
        )
        assert code == 2

    def test_asym_needs_pub(self, capsys):
        code, _, _ = run_cli(
            capsys, "encrypt-ctx", "--scheme", "asym",
            "--lat", "0", "--lon", "0", "--enin", "0",
        )
        assert code == 2


class TestRunAuditBench:
    def test_run_writes_reports(self, capsys, tmp_path):
        out_dir = tmp_path / "out"
        code, out, _ = run_cli(
            capsys,
            "run", "--scenario", str(SCENARIO_DIR / "two_agent_sym.yaml"),
            "--out", str(out_dir),
        )
        assert code == 0
        assert out.strip() == "scenario=two_agent_sym events=4 disclosures=4 audit=pass"
        report = json.loads((out_dir / "report.json").read_text())
        assert report["scenario"] == "two_agent_sym"
        assert (out_dir / "events.jsonl").read_text().count("\n") == 4
        assert (out_dir / "audit.json").exists()

    def test_run_twice_identical_files(self, capsys, tmp_path):
        spec = str(SCENARIO_DIR / "two_agent_sym.yaml")
        run_cli(capsys, "run", "--scenario", spec, "--out", str(tmp_path / "a"))
        run_cli(capsys, "run", "--scenario", spec, "--out", str(tmp_path / "b"))
        for name in ("report.json", "events.jsonl", "audit.json"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_audit_command(self, capsys, tmp_path):
        spec = str(SCENARIO_DIR / "two_agent_sym.yaml")
        run_cli(capsys, "run", "--scenario", spec, "--out", str(tmp_path))
        code, out, _ = run_cli(
            capsys,
            "audit", "--report", str(tmp_path / "report.json"), "--scenario", spec,
        )
        assert code == 0
        assert "check=disclosure_subset passed=true" in out
        assert "check=wall_false_positive informational" in out

    def test_missing_scenario_file(self, capsys, tmp_path):
        code, _, err = run_cli(
            capsys, "run", "--scenario", str(tmp_path / "nope.yaml"), "--out", str(tmp_path)
        )
        assert code == 2
        assert "missing file" in err

    def test_invalid_scenario_lists_problems(self, capsys, tmp_path):
        bad = tmp_path / "bad.yaml"
        bad.write_text("version: 1\nseed: -2\nduration_s: 0\nagents: []\n")
        code, _, err = run_cli(capsys, "run", "--scenario", str(bad), "--out", str(tmp_path))
        assert code == 2
        assert err.count("error:") >= 2

    def test_bench_matching(self, capsys):
        code, out, _ = run_cli(capsys, "bench", "--matching", "1,2")
        assert code == 0
        assert "keys=1" in out and "derivations=288" in out

    def test_bench_without_args(self, capsys):
        code, _, _ = run_cli(capsys, "bench")
        assert code == 2


class TestVectors:
    def test_regenerates_identical_files(self, capsys, tmp_path):
        code, _, _ = run_cli(capsys, "vectors", "--out", str(tmp_path))
        assert code == 0
        produced = sorted(p.name for p in tmp_path.iterdir())
        frozen = sorted(p.name for p in VECTOR_DIR.iterdir())
        assert produced == frozen
        for name in produced:
            assert (tmp_path / name).read_bytes() == (VECTOR_DIR / name).read_bytes()
