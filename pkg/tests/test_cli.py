import json

import pytest

from shearlab import cli, runner
from shearlab.errors import ConfigError


@pytest.fixture
def outroot(tmp_path, monkeypatch):
    monkeypatch.setenv("SHEARLAB_OUT", str(tmp_path))
    return tmp_path


def write_cfg(path, **cfg):
    path.write_text(json.dumps(cfg))
    return str(path)


SMALL_HOMOG = dict(nu=0.5, n_paths=200, horizon=0.25, save_paths=True)


def test_resolve_config():
    cfg = runner.resolve_config("cell", {"grid_size": 512})
    assert cfg["grid_size"] == 512 and cfg["u"] == runner.KOLMOGOROV
    with pytest.raises(ConfigError, match="bogus"):
        runner.resolve_config("cell", {"bogus": 1})
    with pytest.raises(ConfigError):
        runner.resolve_config("cell", {"experiment": "snapshots"})


def test_cell_run_and_verify(outroot, capsys):
    cfg = write_cfg(outroot / "c.json")
    assert cli.main(["cell", "--config", cfg, "--out", "cellrun"]) == 0
    man = json.loads((outroot / "cellrun" / "manifest.json").read_text())
    names = {a["path"] for a in man["artifacts"]}
    assert {"cell.json", "chi_u.csv", "chi_v.csv", "model.json"} <= names
    assert cli.main(["verify", "--manifest", str(outroot / "cellrun" / "manifest.json")]) == 0


def test_homogenize_reproducible_across_threads(outroot):
    cfg = write_cfg(outroot / "h.json", **SMALL_HOMOG)
    assert cli.main(["homogenize", "--config", cfg, "--seed", "7", "--out", "h"]) == 0
    m = str(outroot / "h" / "manifest.json")
    assert cli.main(["verify", "--manifest", m, "--threads", "3"]) == 0
    assert (outroot / "h" / "paths.bin").stat().st_size > 0


def test_verify_detects_tampering(outroot, capsys):
    cfg = write_cfg(outroot / "h.json", **SMALL_HOMOG)
    cli.main(["homogenize", "--config", cfg, "--out", "h"])
    summ = outroot / "h" / "summary.csv"
    summ.write_text(summ.read_text().replace("0.", "1.", 1))
    capsys.readouterr()
    assert cli.main(["verify", "--manifest", str(outroot / "h" / "manifest.json")]) == 1
    assert "summary.csv" in capsys.readouterr().err


def test_verify_other_seed_statistical(outroot):
    cfg = write_cfg(outroot / "h.json", **SMALL_HOMOG)
    cli.main(["homogenize", "--config", cfg, "--seed", "1", "--out", "h"])
    assert cli.main(["verify", "--manifest", str(outroot / "h" / "manifest.json"), "--seed", "2"]) == 0


def test_exit_codes(outroot, capsys):
    bad = write_cfg(outroot / "b.json", u={"const": 0, "modes": [[1, "x", 0]]})
    assert cli.main(["cell", "--config", bad]) == 2
    assert "u" in capsys.readouterr().err
    assert cli.main(["cell", "--config", str(outroot / "missing.json")]) == 2
    assert cli.main(["nonsense"]) == 2
    regime = write_cfg(outroot / "r.json", nu=0.2)
    assert cli.main(["hypo-check", "--config", regime]) == 3
    unstable = write_cfg(outroot / "u.json", kind="shear_full", nu=0.01, dt=0.01, n_paths=200)
    assert cli.main(["homogenize", "--config", unstable]) == 3
    (outroot / "blocked").write_text("a file, not a directory")
    ok = write_cfg(outroot / "ok.json")
    assert cli.main(["cell", "--config", ok, "--out", "blocked"]) == 4


def test_inadmissible_cell_reports_without_D_u(outroot):
    cfg = write_cfg(outroot / "c.json", v={"const": 0, "modes": [[1, 0.0, 1.0]]})
    assert cli.main(["cell", "--config", cfg, "--out", "c"]) == 0
    res = json.loads((outroot / "c" / "cell.json").read_text())
    assert res["admissible"] is False and "D_u" not in res
    assert not (outroot / "c" / "chi_u.csv").exists()


def test_default_out_dir(outroot):
    cfg = write_cfg(outroot / "c.json", grid_size=64)
    assert cli.main(["cell", "--config", cfg, "--seed", "3"]) == 0
    assert (outroot / "cell_3" / "manifest.json").exists()


def test_snapshots_small(outroot):
    cfg = write_cfg(outroot / "s.json", grid=[32, 32], nu=0.2, T=0.1, eps=0.2)
    assert cli.main(["snapshots", "--config", cfg, "--out", "s"]) == 0
    d = outroot / "s"
    pgms = sorted(d.glob("snap_*.pgm"))
    assert pgms and all(p.with_suffix(".json").exists() for p in pgms)
    assert (d / "norms.csv").read_text().startswith("t,weighted_norm2")
    assert cli.main(["verify", "--manifest", str(d / "manifest.json")]) == 0


def test_mode_decay_small(outroot):
    cfg = write_cfg(outroot / "m.json", nu=[1e-2, 3e-3], v_off={"const": 0, "modes": [[1, 0.0, 1.0]]},
                    grid_size=128, efolds=6.0)
    assert cli.main(["mode-decay", "--config", cfg, "--out", "m"]) == 0
    res = json.loads((outroot / "m" / "decay.json").read_text())
    assert len(res["lam"]) == 2
    assert all(0.5 <= r <= 2 for r in res["invariance"]["ratio"])
    assert (outroot / "m" / "invariance.csv").exists()
