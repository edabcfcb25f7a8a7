import json
import os
import subprocess
import sys

import pytest
from hypothesis import given
from hypothesis import strategies as st

from hoflab import cli
from hoflab.cli import RunConfig, ValidationError, read_csv_meta, run


def _hoflab(args, env=None, cwd=None):
    e = dict(os.environ, **(env or {}))
    return subprocess.run([sys.executable, "-m", "hoflab", *args], capture_output=True, text=True, env=e, cwd=cwd)


configs = st.builds(
    RunConfig,
    subcommand=st.sampled_from(cli.SUBCOMMANDS),
    lattice=st.sampled_from(["hex", "square"]),
    flux=st.sampled_from(["1/40", "2/7", "0/1", "0.25"]),
    L=st.integers(1, 400),
    lam=st.floats(0, 2, allow_nan=False),
    seed=st.integers(0, 2**31),
    below_zero=st.booleans(),
    center=st.floats(-3, 3, allow_nan=False),
    width=st.floats(0, 1, allow_nan=False),
)


@given(configs)
def test_config_round_trip(cfg):
    back = RunConfig.from_text(cfg.canonical())
    assert back == cfg
    assert back.config_hash() == cfg.config_hash()


def test_hash_ignores_output_path():
    a = RunConfig("bands", out="x.csv", threads=3)
    b = RunConfig("bands", out="y.csv", threads=1)
    assert a.config_hash() == b.config_hash()
    assert a.config_hash() != RunConfig("bands", L=41).config_hash()


def test_unknown_key_rejected():
    with pytest.raises(ValidationError):
        RunConfig.from_text("subcommand=bands\nbogus=1\n")


def test_exit_codes(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    assert run(["chambers", "--p", "1", "--q", "3"]) == 0
    assert run(["bands", "--bogus"]) == 1
    assert run(["bands", "--p", "2", "--q", "4"]) == 1
    assert run(["bands", "--lattice", "triangle"]) == 1
    assert run(["transport", "--bc", "torus"]) == 1
    # the requested level sits outside the trusted semiclassical window
    assert run(["hall", "--lattice", "square", "--flux", "0/1", "--level", "40", "--qs", "48,46,44"]) == 2


def test_contract_failure_exit_two(tmp_path, monkeypatch):
    import hoflab.dirac as dirac

    real = dirac.dirac_report

    def broken(p, q):
        rep = real(p, q)
        rep.residual = 1.0
        return rep

    monkeypatch.setattr(dirac, "dirac_report", broken)
    monkeypatch.chdir(tmp_path)
    assert run(["dirac", "--p", "1", "--q", "2"]) == 2


def test_metadata_header(tmp_path):
    out = tmp_path / "b.csv"
    assert run(["bands", "--lattice", "square", "--p", "1", "--q", "2", "--kgrid", "24", "--out", str(out)]) == 0
    meta = read_csv_meta(out)
    assert set(meta) == {"version", "config_hash", "sign_convention", "subcommand"}
    assert meta["subcommand"] == "bands"
    lines = out.read_text().splitlines()
    assert lines[1].startswith("k1,k2,F_1") and len(lines) == 2 + 24 * 24


def test_json_metadata(tmp_path):
    out = tmp_path / "c.json"
    assert run(["chambers", "--p", "2", "--q", "5", "--out", str(out)]) == 0
    data = json.loads(out.read_text())
    assert data["meta"]["subcommand"] == "chambers"
    assert data["f_at_minus3"] == pytest.approx(3.0)


def test_config_file_and_override(tmp_path):
    conf = tmp_path / "run.conf"
    conf.write_text("# demo\nlattice = square\nflux = 1/4\nkgrid = 60\n")
    out = tmp_path / "b.csv"
    assert run(["bands", "--config", str(conf), "--q", "5", "--p", "1", "--out", str(out)]) == 0
    assert "F_5" in out.read_text().splitlines()[1]


def test_threads_do_not_change_output(tmp_path):
    outs = []
    for n in ("1", "2"):
        path = tmp_path / f"t{n}.csv"
        r = _hoflab(["transport", "--lattice", "hex", "--flux", "1/12", "--L", "125", "--bc", "box",
                     "--disorder", "uniform:-0.5:0.5", "--lam", "0.1", "--seed", "3", "--T", "0.5,1",
                     "--out", str(path)], env={"HOFLAB_THREADS": n})
        assert r.returncode == 0, r.stderr
        outs.append(path.read_bytes())
    assert outs[0] == outs[1]


def test_bad_thread_env():
    r = _hoflab(["chambers", "--p", "1", "--q", "2"], env={"HOFLAB_THREADS": "zero"})
    assert r.returncode == 1


def test_selfcheck_subprocess():
    r = _hoflab(["selfcheck"])
    assert r.returncode == 0, r.stdout + r.stderr
    assert "FAIL" not in r.stdout
