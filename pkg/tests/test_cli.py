import subprocess
import sys

import pytest

from omegabound.cli import RunConfig, main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_prove_then_verify(tmp_path, capsys):
    out = tmp_path / "k13.txt"
    code, stdout, _ = run(capsys, "prove", "--target", "13", "--out", str(out))
    assert code == 0 and "proved Omega(N) >= 13" in stdout
    code, stdout, _ = run(capsys, "verify", str(out))
    assert code == 0 and "sound" in stdout


def test_prove_rejects_bad_targets(capsys):
    for target in ("84", "83", "7", "10"):
        code, _, err = run(capsys, "prove", "--target", target)
        assert code == 2 and "error" in err


def test_prove_stuck_writes_wishes(tmp_path, capsys):
    out = tmp_path / "stuck.txt"
    code, _, err = run(capsys, "prove", "--target", "25", "--small-threshold", "10", "--out", str(out))
    assert code == 1
    assert "factorizations needed" in err and "c_36 = " in err
    text = out.read_text()
    assert "# status=stuck" in text and "# WISH c_36 = " in text
    code, _, _ = run(capsys, "verify", str(out))
    assert code == 1


def test_prove_with_hints_and_effort_flags(tmp_path, capsys):
    hints = tmp_path / "h.txt"
    hints.write_text("88573: 23\n")
    out = tmp_path / "k11.txt"
    code, _, _ = run(
        capsys, "prove", "--target", "11", "--hints", str(hints), "--jobs", "2", "--seed", "3",
        "--trial-bound", "5000", "--rho-cap", "4096", "--rho-restarts", "2", "--out", str(out),
    )
    assert code == 0
    assert run(capsys, "verify", str(out))[0] == 0


def test_identical_config_identical_bytes(tmp_path, capsys):
    a, b = tmp_path / "a.txt", tmp_path / "b.txt"
    assert run(capsys, "prove", "--target", "15", "--out", str(a))[0] == 0
    assert run(capsys, "prove", "--target", "15", "--out", str(b), "--jobs", "2")[0] == 0
    assert a.read_bytes() == b.read_bytes()


def test_verify_failures(tmp_path, capsys):
    empty = tmp_path / "empty.txt"
    empty.write_text("")
    code, _, err = run(capsys, "verify", str(empty))
    assert code == 1 and "empty transcript" in err
    assert run(capsys, "verify", str(tmp_path / "missing.txt"))[0] == 2

    good = tmp_path / "k17.txt"
    run(capsys, "prove", "--target", "17", "--out", str(good))
    bad = tmp_path / "bad.txt"
    bad.write_text(good.read_text().replace("  xs=3", "  xs=5", 1))
    code, _, err = run(capsys, "verify", str(bad))
    assert code == 1 and "line" in err


@pytest.mark.parametrize("n, expected", [("270", "2 3^3 5"), ("88573", "23 3851"), ("1", "1")])
def test_factor(capsys, n, expected):
    code, out, _ = run(capsys, "factor", n)
    assert code == 0
    assert out.splitlines()[0] == expected


def test_factor_residual_line(capsys):
    n = 10000000000000000051 * 10000000000000000087 * 9
    code, out, _ = run(capsys, "factor", str(n), "--rho-cap", "16", "--rho-restarts", "1")
    assert code == 0
    assert out.splitlines() == ["3^2 c_39", "c_39 = 100000000000000001380000000000000004437"]


def test_factor_rejects_garbage():
    with pytest.raises(SystemExit):
        main(["factor", "abc"])
    with pytest.raises(SystemExit):
        main(["factor", "0"])


def test_hints_check(tmp_path, capsys):
    good = tmp_path / "good.txt"
    good.write_text("# ok\n88573: 23 3851\n")
    code, out, _ = run(capsys, "hints-check", str(good))
    assert code == 0 and "1 entries" in out
    bad = tmp_path / "bad.txt"
    bad.write_text("100: 7\n")
    code, _, err = run(capsys, "hints-check", str(bad))
    assert code == 1 and "line 1" in err


def test_run_config_validation():
    RunConfig(target_K=23)
    with pytest.raises(ValueError):
        RunConfig(target_K=23, jobs=0)
    with pytest.raises(ValueError):
        RunConfig(target_K=22)


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "omegabound", "factor", "270"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.strip() == "2 3^3 5"
