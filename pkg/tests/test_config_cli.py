import json

import pytest
from hypothesis import given, strategies as st

from bsdechaos.cli import run
from bsdechaos.config import SCHEMA, ExperimentConfig, dump_config, parse_config
from bsdechaos.errors import ConfigError


def test_parse_basic():
    cfg = parse_config("# c\n[run]   # header\nseed = 7  # inline\n\n[sweep]\nNs = 8, 16,32\n[generator]\ne=0.5\n")
    assert cfg["run.seed"] == 7
    assert cfg["sweep.Ns"] == [8, 16, 32]
    assert cfg["generator.e"] == 0.5
    assert cfg["driver.k"] == SCHEMA["driver"]["k"][1]


@pytest.mark.parametrize("text,line", [
    ("[run]\nseed = 1\nseed = 2\n", 3),
    ("[nope]\n", 1),
    ("[run]\nbogus = 1\n", 2),
    ("seed = 1\n", 1),
    ("[run]\n\nseed = x\n", 3),
    ("[run]\nseed\n", 2),
    ("[generator]\na = nan\n", 2),
])
def test_parse_errors_carry_line(text, line):
    with pytest.raises(ConfigError, match=f"line {line}:"):
        parse_config(text)


@given(st.integers(0, 2**31), st.floats(-1e6, 1e6, allow_nan=False), st.lists(st.integers(1, 999), max_size=5),
       st.sampled_from(["tree", "lattice", "ensemble"]))
def test_round_trip(seed, e, Ns, backend):
    cfg = ExperimentConfig()
    cfg.set("run.seed", seed)
    cfg.set("generator.e", e)
    cfg.set("sweep.Ns", Ns)
    cfg.set("run.backend", backend)
    assert parse_config(dump_config(cfg)) == cfg


def test_cli_constants(capsys):
    assert run(["constants", "--beta", "240", "400"]) == 0
    out = capsys.readouterr().out
    assert "M_tilde=0.2490534012" in out and "M_tilde=0.1493978585" in out


def test_cli_fg_sample_size(capsys):
    assert run(["fg-sample-size", "--eps", "0.1", "--cd", "1", "--r0", "1", "--law", "compact", "--compact"]) == 0
    assert capsys.readouterr().out.strip() == "ell1=1 ell2=4 N=1440001"


def test_cli_exit_codes(tmp_path, capsys):
    assert run(["no-such-command"]) == 2
    assert run([]) == 2
    bad = tmp_path / "bad.cfg"
    bad.write_text("[run]\nfoo = 1\n")
    assert run(["validate", "--config", str(bad)]) == 2
    assert "line 2" in capsys.readouterr().err
    assert run(["validate", "--config", str(tmp_path / "missing.cfg")]) == 2
    failing = tmp_path / "fail.cfg"
    failing.write_text("[generator]\na = 50\n[run]\nbeta_hat = 1\n")
    assert run(["validate", "--config", str(failing)]) == 3
    small = tmp_path / "small.cfg"
    small.write_text("[run]\nmax_nodes = 10\n[driver]\nk = 8\n")
    assert run(["solve-mv", "--config", str(small)]) == 4
    assert run(["solve-mv", "--threads", "0"]) == 2


def test_cli_solve_and_sweep_outputs(tmp_path, capsys):
    assert run(["solve-mv", "--k", "3"]) == 0
    res = json.loads(capsys.readouterr().out)
    assert res["picard"]["converged"]
    cfg = tmp_path / "c.cfg"
    cfg.write_text("[driver]\nmode = mixed\nk = 4\n[generator]\ne = 0.005\nc0 = 1\n[terminal]\npayoff = sum\n"
                   "[sweep]\nNs = 4,8\nreps = 2\n")
    out = tmp_path / "sweep.csv"
    assert run(["chaos-sweep", "--config", str(cfg), "--out", str(out)]) == 0
    first = out.read_text()
    assert first.startswith("k,N,rep,seed")
    assert json.loads((tmp_path / "sweep.csv.summary.json").read_text())["Ns"] == [4, 8]
    assert run(["chaos-sweep", "--config", str(cfg), "--out", str(out), "--threads", "8"]) == 0
    assert out.read_text() == first
