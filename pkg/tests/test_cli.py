import json

import pytest

from qecheck.cli import main

from _corpus import S3_STATIC_FILE, SCHWARZSCHILD_FILE, random_file


@pytest.fixture
def schw_file(tmp_path):
    p = tmp_path / "schw.qmf"
    p.write_text(SCHWARZSCHILD_FILE)
    return str(p)


@pytest.fixture
def random_path(tmp_path):
    p = tmp_path / "rand.qmf"
    p.write_text(random_file())
    return str(p)


class TestExitCodes:
    def test_verify_pass(self, schw_file, capsys):
        assert main(["verify", schw_file]) == 0
        out = capsys.readouterr().out
        assert "decision: pass" in out

    def test_check_yes(self, schw_file):
        assert main(["check", schw_file, "--mode", "qe"]) == 0

    def test_check_no(self, random_path):
        assert main(["check", random_path, "--mode", "qe"]) == 1

    def test_not_generic(self, tmp_path):
        p = tmp_path / "s3.qmf"
        p.write_text(S3_STATIC_FILE)
        assert main(["check", str(p), "--mode", "static"]) == 2

    def test_input_error(self, schw_file):
        assert main(["check", schw_file, "--mode", "soliton"]) == 3

    def test_missing_file(self, capsys):
        with pytest.raises(SystemExit) as err:
            main(["verify", "/nonexistent/file.qmf"])
        assert err.value.code == 3

    def test_tol_flag_flips_decision(self, random_path):
        assert main(["check", random_path, "--mode", "qe", "--tol", "1e9"]) == 0


class TestReports:
    def test_json_output(self, schw_file, tmp_path):
        out = tmp_path / "report.json"
        assert main(["check", schw_file, "--mode", "qe", "--json", str(out)]) == 0
        body = json.loads(out.read_text())
        assert body["schema"] == "qecheck.report/1"
        assert body["mode"] == "qe"
        assert body["summary"]["decision"] == "yes"

    def test_determinism_modulo_timestamp(self, schw_file, tmp_path):
        out1, out2 = tmp_path / "r1.json", tmp_path / "r2.json"
        main(["check", schw_file, "--mode", "qe", "--json", str(out1)])
        main(["check", schw_file, "--mode", "qe", "--json", str(out2)])
        b1 = json.loads(out1.read_text())
        b2 = json.loads(out2.read_text())
        b1["generated_at"] = b2["generated_at"] = None
        assert json.dumps(b1, sort_keys=True) == json.dumps(b2, sort_keys=True)

    def test_potential_command(self, schw_file, capsys):
        code = main([
            "potential", schw_file,
            "--path", "(1.6,1.0,0.5) -> (2.2,1.0,0.5)",
            "--subdivisions", "8",
        ])
        assert code == 0
        assert "exact" in capsys.readouterr().out

    def test_harnack_command(self, schw_file):
        assert main(["harnack", schw_file, "--m", "50,100", "--trials", "1"]) == 0

    def test_bad_m_list(self, schw_file):
        assert main(["harnack", schw_file, "--m", "abc"]) == 3
