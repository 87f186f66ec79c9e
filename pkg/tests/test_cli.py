"""End-to-end tests for the command-line front end.

Everything goes through lostchance.cli.main(argv) so exit codes and
captured output are checked without spawning subprocesses.
"""

import csv
import io

import pytest

from lostchance import (
    SCHEMA_TEXT,
    matos_case,
    medical_malpractice,
    prize_case,
    save_case,
)
from lostchance.cli import main


@pytest.fixture
def medical_file(tmp_path):
    sc = medical_malpractice(0.95, 0.90, 1e5)
    path = tmp_path / "medical.json"
    save_case(path, sc.model, sc.evidence_joint)
    return path


@pytest.fixture
def bare_file(tmp_path):
    # Same case, but without the evidence coupling.
    sc = medical_malpractice(0.95, 0.90, 1e5)
    path = tmp_path / "bare.json"
    save_case(path, sc.model)
    return path


@pytest.fixture
def paper_table_file(tmp_path):
    sc = prize_case()
    path = tmp_path / "prize_published.json"
    save_case(path, sc.model, sc.paper_table_joint)
    return path


@pytest.fixture
def matos_file(tmp_path):
    path = tmp_path / "matos.json"
    save_case(path, matos_case(0.95, 0.0))
    return path


def run(capsys, argv):
    code = main(argv)
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestEvaluate:
    def test_default_policy(self, capsys, medical_file):
        code, out, err = run(capsys, ["evaluate", str(medical_file)])
        assert code == 0 and err == ""
        lines = out.splitlines()
        assert len(lines) == 2
        assert lines[0].startswith("h-fi/e-c/cc-i")
        assert "bad" in lines[0] and "compensation=50000" in lines[0]
        assert "good" in lines[1] and "compensation=0" in lines[1]

    def test_explicit_combo(self, capsys, medical_file):
        code, out, _ = run(
            capsys,
            ["evaluate", str(medical_file), "--info", "l-fi",
             "--connection", "i-c", "--indemnity", "fm-i"],
        )
        assert code == 0
        assert out.splitlines()[0].startswith("l-fi/i-c/fm-i")
        assert "compensation=5000" in out

    def test_all_policies_grid(self, capsys, medical_file):
        code, out, _ = run(capsys, ["evaluate", str(medical_file), "--all-policies"])
        assert code == 0
        descriptors = {
            line.split()[0] for line in out.splitlines() if not line.startswith("#")
        }
        assert len(descriptors) == 18
        assert "l-fi/e-c/cc-i" in descriptors
        assert "h-fi/i-c/fm-i" in descriptors
        assert "skipped" not in out

    def test_all_policies_skips_evidence_without_coupling(self, capsys, bare_file):
        code, out, _ = run(capsys, ["evaluate", str(bare_file), "--all-policies"])
        assert code == 0
        descriptors = {
            line.split()[0] for line in out.splitlines() if not line.startswith("#")
        }
        assert len(descriptors) == 12
        assert not any("e-c" in d for d in descriptors)
        assert "# skipped h-fi/e-c: no evidence coupling in file" in out

    def test_csv_output_full_precision(self, capsys, medical_file):
        code, out, _ = run(
            capsys, ["evaluate", str(medical_file), "--info", "l-fi", "--csv"]
        )
        assert code == 0
        rows = list(csv.reader(io.StringIO(out)))
        assert rows[0] == ["policy", "outcome", "compensation", "award"]
        assert len(rows) == 3
        # l-fi pays the mean gap everywhere; CSV keeps repr precision.
        for row in rows[1:]:
            assert float(row[2]) == pytest.approx(5_000.0, rel=1e-12)
            assert repr(float(row[2])) == row[2]

    def test_paper_table_flag_and_strict(self, capsys, paper_table_file):
        argv = ["evaluate", str(paper_table_file), "--connection", "paper-table"]
        code, out, _ = run(capsys, argv)
        assert code == 0
        assert "# FLAG published least-divergence table is not cost-minimal" in out
        assert "1125" in out and "565" in out
        code, _, _ = run(capsys, argv + ["--strict"])
        assert code == 1

    def test_strict_without_flags_passes(self, capsys, medical_file):
        code, _, _ = run(capsys, ["evaluate", str(medical_file), "--strict"])
        assert code == 0

    def test_custom_blocks(self, capsys, medical_file):
        code, out, _ = run(
            capsys,
            ["evaluate", str(medical_file), "--info", "custom",
             "--custom-blocks", "bad|good"],
        )
        assert code == 0
        assert "compensation=50000" in out
        code, _, err = run(
            capsys,
            ["evaluate", str(medical_file), "--info", "custom",
             "--custom-blocks", "bad,mythical"],
        )
        assert code == 2 and err.startswith("error:")

    def test_choice_case_default_presumption(self, capsys, matos_file):
        code, out, _ = run(capsys, ["evaluate", str(matos_file)])
        assert code == 0
        # Only the factually possible pair appears in the schedule.
        assert "refuse|500000" in out
        assert "compensation=450015" in out
        assert "# presumption(it-cp): counterfactual choice presumed 'answer'" in out

    def test_choice_case_presumption_none_needs_evidence(self, capsys, matos_file):
        code, _, err = run(
            capsys, ["evaluate", str(matos_file), "--presumption", "none"]
        )
        assert code == 2
        assert "counterfactual choice is unresolved" in err

    def test_choice_case_override_presumption(self, capsys, matos_file):
        code, _, _ = run(
            capsys, ["evaluate", str(matos_file), "--presumption", "ii-cp"]
        )
        assert code == 0


class TestTable:
    def test_malpractice_table(self, capsys):
        code, out, _ = run(capsys, ["table", "2"])
        assert code == 0
        assert "8/8 cells match" in out
        assert all(
            line.startswith("table 2 | ") or line.endswith("cells match")
            for line in out.splitlines()
        )
        assert "FAIL" not in out

    def test_prize_table_flags_do_not_fail(self, capsys):
        code, out, _ = run(capsys, ["table", "4"])
        assert code == 0
        assert "40/40 cells match" in out
        flag_lines = [l for l in out.splitlines() if " FLAG" in l]
        assert len(flag_lines) == 4
        for line in flag_lines:
            assert line.count("FLAG published least-divergence table") == 1
        code, _, _ = run(capsys, ["table", "4", "--strict"])
        assert code == 1

    def test_custom_parameters(self, capsys):
        code, out, _ = run(
            capsys, ["table", "2", "--p0", "0.6", "--p1", "0.2", "--delta-v", "10"]
        )
        assert code == 0 and "8/8 cells match" in out
        code, out, _ = run(
            capsys, ["table", "5", "--v-red", "100", "--v-blue", "600"]
        )
        assert code == 0 and "8/8 cells match" in out

    def test_unknown_table_is_a_usage_error(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["table", "3"])
        assert exc.value.code == 2


class TestSweep:
    def test_matos_sweep_deterministic(self, capsys, tmp_path):
        out_path = tmp_path / "m.csv"
        argv = [
            "sweep", "matos", "--theta-steps", "2", "--p-steps", "3",
            "--out", str(out_path),
        ]
        code, out, _ = run(capsys, argv)
        assert code == 0
        assert f"wrote 6 rows to {out_path}" in out
        first = out_path.read_bytes()
        lines = first.decode().splitlines()
        assert lines[0] == "theta,p,award,band"
        assert len(lines) == 7
        assert main(argv) == 0
        capsys.readouterr()
        assert out_path.read_bytes() == first

    def test_medical_sweep_columns(self, capsys, tmp_path):
        out_path = tmp_path / "med.csv"
        code, out, _ = run(
            capsys,
            ["sweep", "medical", "--p1-steps", "2", "--p1-max", "0.5",
             "--out", str(out_path)],
        )
        assert code == 0
        assert "# rejected_formula_comparison: comparison only" in out
        rows = list(csv.reader(io.StringIO(out_path.read_text())))
        assert rows[0] == [
            "p0", "p1", "delta_v", "award_l_fi", "award_e_c",
            "award_i_c_cc_i", "award_i_c_fm_i", "rejected_formula_comparison",
        ]
        assert len(rows) == 3
        assert float(rows[1][1]) == 0.0 and float(rows[2][1]) == 0.5

    def test_empty_grid_writes_header_only(self, capsys, tmp_path):
        out_path = tmp_path / "empty.csv"
        code, out, _ = run(
            capsys,
            ["sweep", "matos", "--theta-steps", "0", "--out", str(out_path)],
        )
        assert code == 0
        assert "wrote 0 rows" in out
        assert out_path.read_text() == "theta,p,award,band\n"

    def test_out_dir_env_sets_default_path(self, capsys, tmp_path, monkeypatch):
        monkeypatch.setenv("LOSTCHANCE_OUT_DIR", str(tmp_path))
        code, out, _ = run(
            capsys, ["sweep", "matos", "--theta-steps", "1", "--p-steps", "2"]
        )
        assert code == 0
        assert (tmp_path / "matos_sweep.csv").exists()
        assert str(tmp_path / "matos_sweep.csv") in out


class TestVerify:
    def test_audit_passes(self, capsys):
        code, out, _ = run(capsys, ["verify", "--seed", "0", "--instances", "40"])
        assert code == 0
        assert "overall: PASS" in out

    def test_injected_fault_caught(self, capsys):
        code, out, _ = run(
            capsys,
            ["verify", "--seed", "0", "--instances", "30",
             "--inject-lambda-offset", "0.1"],
        )
        assert code == 1
        assert "FAIL" in out
        assert "fair-mean-constrained-optimal" in out


class TestSchemaAndErrors:
    def test_schema_prints_grammar(self, capsys):
        code, out, _ = run(capsys, ["schema"])
        assert code == 0
        assert out == SCHEMA_TEXT

    def test_missing_file(self, capsys):
        code, _, err = run(capsys, ["evaluate", "/nonexistent/case.json"])
        assert code == 2
        assert err.startswith("error:")

    def test_invalid_json(self, capsys, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{oops")
        code, _, err = run(capsys, ["evaluate", str(path)])
        assert code == 2
        assert "case file is invalid" in err
        assert "invalid JSON" in err

    def test_invalid_case_lists_violations(self, capsys, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(
            '{"outcomes": [{"label": "a", "value": 0}],'
            ' "counterfactual": {"a": 0.4}, "factual": {"a": 1.0},'
            ' "money": {"kind": "identity"}, "policy": "h-fi"}'
        )
        code, _, err = run(capsys, ["evaluate", str(path)])
        assert code == 2
        assert "  - " in err
        assert "--info/--connection/--indemnity" in err

    def test_unknown_policy_name(self, capsys, medical_file):
        code, _, err = run(
            capsys, ["evaluate", str(medical_file), "--info", "x-fi"]
        )
        assert code == 2
        assert "error:" in err
