import os

import pytest

from mrfkit.cli import main

CONFIGS = os.path.join(os.path.dirname(__file__), os.pardir, "configs")


def _cfg(name):
    return os.path.join(CONFIGS, name)


def test_verify_pass(tmp_path, capsys):
    code = main(["verify", "--config", _cfg("int1d_analytic.ini"), "--out", str(tmp_path), "--quiet"])
    assert code == 0
    assert "verify: PASS" in capsys.readouterr().out


def test_verify_fail_exit_code(tmp_path, capsys):
    code = main(["verify", "--config", _cfg("int1d_fail.ini"), "--out", str(tmp_path), "--quiet"])
    assert code == 1
    assert "verify: FAIL" in capsys.readouterr().out


def test_config_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("[system]\nname = int1d_mintime\n[grid]\nresolution = 1\n")
    assert main(["solve", "--config", str(bad)]) == 2
    assert "[grid] resolution" in capsys.readouterr().err


def test_missing_config_and_bad_seed(tmp_path):
    assert main(["solve"]) == 2
    assert main(["solve", "--config", _cfg("solve_only.ini"), "--seed", "-1"]) == 2


def test_unknown_subcommand():
    with pytest.raises(SystemExit):
        main(["dance"])


def test_plot_subcommand(tmp_path, capsys):
    main(["solve", "--config", _cfg("solve_only.ini"), "--out", str(tmp_path), "--quiet"])
    assert main(["plot", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "field.svg").exists()


def test_seed_override_reaches_report(tmp_path):
    main(["synthesize", "--config", _cfg("int1d_analytic.ini"), "--out", str(tmp_path),
          "--seed", "123", "--quiet"])
    assert "seed = 123" in (tmp_path / "report.txt").read_text()
