import json
import textwrap

import numpy as np
import pytest
import scipy.io

from landscapelab.cli import ConfigError, bundled_configs, load_config, run

SMALL = """
[grid]
dim = 3
half_width = 1.5
h = 0.25

[potential]
kind = power
alpha = 2

[run]
experiments = uncertainty, decay-green, decay-lax-milgram
functions = 5
mu = 4, 8
boundary_margin = 0.25
"""


def write(tmp_path, text, name="c.ini"):
    p = tmp_path / name
    p.write_text(textwrap.dedent(text))
    return str(p)


def test_bundled_configs_present():
    assert {"yukawa-smoke", "example1-magnetic"} <= set(bundled_configs())


def test_verify_small_config_exit_zero(tmp_path):
    cfg = write(tmp_path, SMALL)
    out = tmp_path / "out"
    assert run(["verify", "--config", cfg, "--out", str(out)]) == 0
    data = json.loads((out / "reports.json").read_text())
    assert [r["id"] for r in data] == ["uncertainty-nonmagnetic", "decay-green", "decay-lax-milgram"]
    assert all(r["pass"] for r in data)


def test_all_subcommands_write_outputs(tmp_path):
    cfg = write(tmp_path, SMALL)
    out = tmp_path / "out"
    assert run(["all", "--config", cfg, "--out", str(out), "--format", "csv", "--export-matrix"]) == 0
    for name in ("u.csv", "m.csv", "rho.csv", "spectrum.csv", "counting.csv", "reports.csv", "operator.mtx"):
        assert (out / name).exists(), name
    assert (out / "u.csv").read_text().startswith("# grid n=3")
    M = scipy.io.mmread(out / "operator.mtx")
    assert M.shape == (11 ** 3, 11 ** 3)  # 11 interior nodes per axis


def test_power_alpha_at_most_minus_two_exit_2(tmp_path):
    cfg = write(tmp_path, SMALL.replace("alpha = 2", "alpha = -2"))
    assert run(["landscape", "--config", cfg, "--out", str(tmp_path / "o")]) == 2


@pytest.mark.parametrize("patch", [
    ("h = 0.25", "h = 0.25\nspacing = 1"),
    ("alpha = 2", "alpha = 2\nwidth = 3"),
    ("functions = 5", "functions = 5\ncolour = red"),
    ("[run]", "[extras]\nx = 1\n[run]"),
    ("experiments = uncertainty", "experiments = telepathy"),
])
def test_unknown_keys_rejected(tmp_path, patch):
    cfg = write(tmp_path, SMALL.replace(*patch))
    with pytest.raises(ConfigError):
        load_config(cfg)
    assert run(["verify", "--config", cfg, "--out", str(tmp_path / "o")]) == 2


def test_missing_config_exit_2(tmp_path):
    assert run(["verify", "--config", str(tmp_path / "nope.ini")]) == 2


def test_seed_flag_overrides_and_outputs_are_deterministic(tmp_path):
    cfg = write(tmp_path, SMALL.replace("kind = power\nalpha = 2", "kind = random\nlow = 1\nhigh = 5"))
    a, b = tmp_path / "a", tmp_path / "b"
    run(["landscape", "--config", cfg, "--out", str(a), "--seed", "4"])
    run(["landscape", "--config", cfg, "--out", str(b), "--seed", "4"])
    assert (a / "u.csv").read_bytes() == (b / "u.csv").read_bytes()
    c = tmp_path / "c"
    run(["landscape", "--config", cfg, "--out", str(c), "--seed", "5"])
    assert (a / "u.csv").read_bytes() != (c / "u.csv").read_bytes()


def test_threads_do_not_change_results(tmp_path):
    cfg = write(tmp_path, SMALL)
    a, b = tmp_path / "a", tmp_path / "b"
    run(["verify", "--config", cfg, "--out", str(a)])
    run(["verify", "--config", cfg, "--out", str(b), "--threads", "3"])
    ra = json.loads((a / "reports.json").read_text())
    rb = json.loads((b / "reports.json").read_text())
    for x, y in zip(ra, rb):
        assert x["checks"] == y["checks"]


def test_magnetic_landau_config(tmp_path):
    cfg = write(tmp_path, """
        [grid]
        dim = 2
        half_width = 2
        h = 0.125

        [potential]
        kind = constant
        value = 0

        [magnetic]
        kind = constant-field
        b = 1
        selection = auto

        [run]
        experiments = uncertainty, decay-green, decay-lax-milgram
        functions = 5
        boundary_margin = 0.25
        """)
    out = tmp_path / "out"
    assert run(["verify", "--config", cfg, "--out", str(out)]) == 0
    data = json.loads((out / "reports.json").read_text())
    assert data[0]["id"] == "uncertainty-magnetic"
    assert data[0]["instance"]["selection"] == "{(1,2)}"


def test_negative_control_does_not_fail_exit_code(tmp_path):
    cfg = write(tmp_path, SMALL.replace("functions = 5", "functions = 5\nnegative_control = true")
                .replace("boundary_margin = 0.25", "boundary_margin = 5"))
    assert run(["verify", "--config", cfg, "--out", str(tmp_path / "o")]) == 0


def test_rotation_must_be_orthogonal(tmp_path):
    cfg = write(tmp_path, """
        [grid]
        dim = 2
        half_width = 1
        h = 0.25
        [potential]
        kind = constant
        value = 1
        [magnetic]
        kind = constant-field
        rotation = 1, 1, 0, 1
        """)
    with pytest.raises(ConfigError):
        load_config(cfg)
    rot = "0, -1, 1, 0"
    cfg2 = write(tmp_path, (tmp_path / "c.ini").read_text().replace("1, 1, 0, 1", rot), "d.ini")
    assert np.allclose(load_config(cfg2).rotation, [[0, -1], [1, 0]])
