import io
import os
import subprocess
import sys

import pytest

from censored_lab import cli
from censored_lab.cli import ConfigError, parse_config

INTERVAL = 'domain = { kind = "interval", a = -0.5, b = 0.5 }\n'


def test_defaults_filled_and_echoed():
    cfg = parse_config(INTERVAL, "solve")
    assert cfg["level"] == 3 and cfg["s"] == 0.5 and cfg.explicit == {"domain"}
    out = io.StringIO()
    assert cli.run(cfg, out) == 0
    head = [l for l in out.getvalue().splitlines() if l.startswith("#")]
    for key in ("level", "grading", "abs_tol", "max_depth", "workers"):
        assert any(l.startswith(f"# {key} = ") for l in head)


def test_out_of_range_s_names_constraint():
    with pytest.raises(ConfigError) as exc:
        parse_config(INTERVAL + "s = 1.2\n", "solve")
    assert "line 2" in exc.value.violations[0] and "(0, 1)" in exc.value.violations[0]


def test_all_violations_collected():
    text = INTERVAL + "level = 2\nlevel = 3\nbogus = 1\nthis is not toml\n"
    with pytest.raises(ConfigError) as exc:
        parse_config(text, "solve")
    v = exc.value.violations
    assert len(v) == 3
    assert "line 2" in v[0] and "line 3" in v[0]
    assert "bogus" in v[1] and "line 5" in v[2]


def test_malformed_domain_and_dimension_mismatch():
    with pytest.raises(ConfigError):
        parse_config('domain = { kind = "ball", radius = 1.0 }\n', "solve")
    with pytest.raises(ConfigError):
        parse_config('domain = { kind = "interval", a = 1.0, b = 0.0 }\n', "solve")
    with pytest.raises(ConfigError):
        parse_config(INTERVAL + "points = [[0.0, 0.1]]\n", "apply")


def _cfg(tmp_path, text):
    p = tmp_path / "run.cfg"
    p.write_text(text)
    return str(p)


def test_exit_codes(tmp_path, capsys):
    assert cli.main(["solve", _cfg(tmp_path, "")]) == 2
    assert cli.main(["solve", _cfg(tmp_path, "s = 1.2\n")]) == 2
    assert cli.main(["solve", str(tmp_path / "missing.cfg")]) == 2
    assert cli.main(["apply", _cfg(tmp_path, INTERVAL + "points = [0.7]\n")]) == 2
    rough = INTERVAL + 'field = "monomial"\np = 0.5\npoints = [0.01]\nmax_depth = 4\n'
    assert cli.main(["apply", _cfg(tmp_path, rough)]) == 3
    assert cli.main(["barrier", _cfg(tmp_path, "n = 1\np = 1.5\nr0 = 0.25\nthreshold = 50\n")]) == 4
    assert cli.main(["selftest"]) == 0
    err = capsys.readouterr().err
    assert "config error" in err


def test_console_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "censored_lab", "special", "-"], input="n = 1\n",
                         capture_output=True, text=True, check=True).stdout
    assert out.startswith("# censored-lab ") and "# columns = " in out


def test_solve_matrix_output(tmp_path):
    coo = tmp_path / "A.coo"
    cfg = _cfg(tmp_path, INTERVAL + f'level = 1\nmatrix_output = "{coo}"\n')
    assert cli.main(["solve", cfg, "--output", str(tmp_path / "u.csv")]) == 0
    rows = [l for l in coo.read_text().splitlines() if not l.startswith("#")]
    assert rows and all(len(r.split(",")) == 3 for r in rows)


def test_mc_output_independent_of_workers(tmp_path):
    cfg = _cfg(tmp_path, INTERVAL + "points = [0.0]\npaths = 3000\nseed = 2\n")
    outs = []
    for w in ("1", "3"):
        path = tmp_path / f"w{w}.csv"
        assert cli.main(["mc", cfg, "--workers", w, "--output", str(path)]) == 0
        outs.append([l for l in path.read_text().splitlines() if not l.startswith("# workers")])
    assert outs[0] == outs[1]
