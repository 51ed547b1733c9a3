import pytest

from hpl import cli

SIMPLE = """[experiment]
kind = simulate
reps = 200

[params]
level = 3.0
"""


def run_main(tmp_path, text, *extra):
    cfg = tmp_path / "exp.ini"
    cfg.write_text(text)
    return cli.main(["run", "--config", str(cfg), "--out", str(tmp_path / "out"), *extra])


def test_parse_defaults_explicit(monkeypatch):
    monkeypatch.delenv("HPL_SEED", raising=False)
    cfg = cli.parse_config(SIMPLE)
    assert cfg.params == {"level": 3.0, "resolution": 0}
    assert cfg.seed == cli.acceptance.DEFAULT_SEED and cfg.reps == 200


def test_echo_round_trip():
    cfg = cli.parse_config(SIMPLE, seed=5)
    again = cli.parse_config(cfg.echo())
    assert again == cfg
    assert cli.parse_config(again.echo()).echo() == cfg.echo()


def test_env_seed(monkeypatch):
    monkeypatch.setenv("HPL_SEED", "42")
    assert cli.parse_config(SIMPLE).seed == 42
    assert cli.parse_config(SIMPLE, seed=7).seed == 7
    monkeypatch.setenv("HPL_SEED", "x")
    with pytest.raises(cli.ConfigError):
        cli.parse_config(SIMPLE)


@pytest.mark.parametrize("text,needle", [
    ("[experiment]\nkind = simulate\ncolour = red\n", "line 3: unknown key 'colour'"),
    ("[experiment]\nkind = juggle\n", "line 2: unknown kind"),
    ("[experiment]\nkind = simulate\n[params]\nlevel = 1\nwidth = 2\n", "line 5: unknown parameter 'width'"),
    ("[experiment]\nkind = simulate\n[params]\nlevel = lots\n", "line 4: cannot read 'lots'"),
    ("[experiment]\nkind = simulate\n[extra]\n", "unknown section"),
    ("kind = simulate\n", "no section headers"),
])
def test_config_errors_reference_lines(text, needle):
    with pytest.raises(cli.ConfigError, match=needle.replace("(", r"\(")):
        cli.parse_config(text)


def test_run_is_byte_identical(tmp_path):
    assert run_main(tmp_path, SIMPLE, "--seed", "3") == 0
    first = (tmp_path / "out" / "simulate.csv").read_bytes()
    assert run_main(tmp_path, SIMPLE, "--seed", "3") == 0
    assert (tmp_path / "out" / "simulate.csv").read_bytes() == first
    lines = first.decode().splitlines()
    assert lines[0].startswith("# [experiment]; kind = simulate; seed = 3")
    assert lines[1] == "rep,N" and len(lines) == 202
    mean = sum(int(r.split(",")[1]) for r in lines[2:]) / 200
    assert abs(mean - 3.0) < 4 * (3.0 / 200) ** 0.5
    echo = (tmp_path / "out" / "simulate.ini").read_text()
    assert cli.parse_config(echo).seed == 3


def test_reps_override(tmp_path):
    assert run_main(tmp_path, SIMPLE, "--reps", "5") == 0
    assert len((tmp_path / "out" / "simulate.csv").read_text().splitlines()) == 7


def test_exit_codes(tmp_path, capsys):
    assert run_main(tmp_path, "[experiment]\nkind = nope\n") == cli.EXIT_CONFIG
    assert "config error" in capsys.readouterr().err
    huge = "[experiment]\nkind = net-info\n[params]\nn_observed = 1e6\nk = 6\ntheta = 0.05\n"
    assert run_main(tmp_path, huge) == cli.EXIT_CAPACITY
    assert cli.main(["run", "--config", str(tmp_path / "missing.ini")]) == cli.EXIT_CONFIG


@pytest.mark.parametrize("kind", ["metric-checks", "net-info", "lower-bound", "approx"])
def test_cheap_kinds_run(tmp_path, kind):
    assert run_main(tmp_path, f"[experiment]\nkind = {kind}\n") == 0
    text = (tmp_path / "out" / f"{kind}.csv").read_text()
    assert text.startswith("# [experiment]")


def test_lower_bound_value(tmp_path):
    run_main(tmp_path, "[experiment]\nkind = lower-bound\n")
    row = (tmp_path / "out" / "lower-bound.csv").read_text().splitlines()[2].split(",")
    assert float(row[2]) == pytest.approx(0.751477293075286)


@pytest.mark.parametrize("kind", ["test-bounds", "t-select", "aggregate", "regression"])
def test_simulation_kinds_run(tmp_path, kind):
    assert run_main(tmp_path, f"[experiment]\nkind = {kind}\nreps = 20\n") == 0
    lines = (tmp_path / "out" / f"{kind}.csv").read_text().splitlines()
    assert len(lines) > 2
