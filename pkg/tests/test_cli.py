import csv
import json
import os

import pytest

from coulombgas.cli import main
from coulombgas.config import ExperimentConfig
from coulombgas.errors import ConfigError
from coulombgas.manifest import table_text


def _write(tmp_path, text, name="run.ini"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def _manifest(out_dir):
    files = [f for f in os.listdir(out_dir) if "_manifest_" in f]
    assert len(files) == 1
    with open(os.path.join(out_dir, files[0])) as fh:
        return json.load(fh)


def _table(out_dir, part):
    name = next(f for f in os.listdir(out_dir) if f"_{part}_" in f and f.endswith(".csv"))
    with open(os.path.join(out_dir, name)) as fh:
        return list(csv.DictReader(fh))


SANITY = """
[gibbs]
kernel = Log1
d = 1
beta = 2.0
N = 1
a = 0.5

[sampler]
sweeps = 2000
thinning = 5
chains = 2
"""


def test_config_defaults_roundtrip_and_hash():
    cfg = ExperimentConfig.from_text(SANITY)
    assert cfg["gibbs"]["N"] == 1 and cfg["sampler"]["chains"] == 2
    again = ExperimentConfig.from_mapping(cfg.snapshot())
    assert again.snapshot() == cfg.snapshot()
    assert again.digest() == cfg.digest()
    other = ExperimentConfig.from_text(SANITY.replace("N = 1", "N = 2"))
    assert other.digest() != cfg.digest()


@pytest.mark.parametrize("text,path", [
    ("[gibbs]\nbogus = 1\n", "gibbs.bogus"),
    ("[nonsense]\nx = 1\n", "nonsense"),
    ("[gibbs]\nbeta = -1\n", "gibbs.beta"),
    ("[gibbs]\nN = many\n", "gibbs.N"),
    ("[gibbs]\nkernel = Yukawa\n", "gibbs.kernel"),
    ("[jellium]\nscan = maybe\n", "jellium.scan"),
])
def test_config_errors_carry_key_path(text, path):
    with pytest.raises(ConfigError) as exc:
        ExperimentConfig.from_text(text)
    assert exc.value.key_path == path


def test_table_text_round_trips_floats():
    x = 0.1 + 0.2
    text = table_text([{"a": x, "b": 3, "c": True}], ["a", "b", "c"])
    row = next(csv.DictReader(text.splitlines()))
    assert float(row["a"]) == x and row["b"] == "3" and row["c"] == "1"


def test_sample_manifest_and_rerun_from_manifest(tmp_path):
    out = str(tmp_path / "a")
    cfg = _write(tmp_path, SANITY)
    assert main(["sample", "--config", cfg, "--seed", "7", "--out", out]) == 0
    man = _manifest(out)
    assert man["status"] == "complete" and man["seed"] == 7
    assert man["config"]["run"]["seed"] == "7"
    assert {r["stream"] for r in man["rng"]} == {0, 1}
    rows = _table(out, "samples")
    assert set(rows[0]) == {"chain", "sweep", "particle", "x0"}
    assert all(f"seed7_{man['config_hash']}" in o["file"] for o in man["outputs"])
    manifest_path = os.path.join(out, next(f for f in os.listdir(out) if "_manifest_" in f))
    out2 = str(tmp_path / "b")
    assert main(["sample", "--config", manifest_path, "--out", out2]) == 0
    for o in man["outputs"]:
        name2 = o["file"]
        with open(os.path.join(out, o["file"]), "rb") as f1, open(os.path.join(out2, name2), "rb") as f2:
            assert f1.read() == f2.read()
    m2 = _manifest(out2)
    strip = lambda m: {k: v for k, v in m.items() if k not in ("started", "wall_clock", "config")}
    assert strip(m2) == strip(man)


def test_resume_from_checkpoint(tmp_path):
    out = str(tmp_path / "r")
    cfg = _write(tmp_path, SANITY.replace("chains = 2", "chains = 1\ncheckpoint_every = 500"))
    assert main(["sample", "--config", cfg, "--out", out]) == 0
    ckpt = next(f for f in os.listdir(out) if f.endswith(".ckpt.json"))
    assert main(["sample", "--config", cfg, "--out", out, "--resume", os.path.join(out, ckpt)]) == 0
    assert main(["sample", "--config", cfg, "--out", out, "--seed", "3",
                 "--resume", os.path.join(out, ckpt)]) == 2


def test_validation_failure_exit_code(tmp_path, capsys):
    cfg = _write(tmp_path, "[gibbs]\nbogus = 1\n")
    assert main(["sample", "--config", cfg, "--out", str(tmp_path)]) == 2
    assert "gibbs.bogus" in capsys.readouterr().err
    assert main(["no-such-command"]) == 2
    assert main(["verify", "--resume", "x", "--out", str(tmp_path)]) == 2


def test_energy_audit_single_record(tmp_path):
    out = str(tmp_path / "e")
    cfg = _write(tmp_path, "[gibbs]\nkernel = Coul\nd = 3\n\n[energy]\nconfigs = 1\nN = 12\n")
    assert main(["energy-audit", "--config", cfg, "--out", out]) == 0
    rows = _table(out, "splitting")
    assert len(rows) == 1
    assert {"H_N", "I_V_term", "zeta_term", "F_N", "residual", "tolerance"} <= set(rows[0])


def test_jellium_tables_and_scan(tmp_path):
    out = str(tmp_path / "j")
    cfg = _write(tmp_path, "[jellium]\nlattices = square triangular integers dimer cubic\nscan = yes\n"
                           "scan_re = 6\nscan_im = 5\n")
    assert main(["jellium", "--config", cfg, "--out", out]) == 0
    rows = {r["lattice"]: float(r["W"]) for r in _table(out, "energies")}
    assert rows["triangular"] < rows["square"] and rows["integers"] < rows["dimer"]
    grid = _table(out, "scan")
    assert len(grid) == 30 and list(grid[0]) == ["tau_re", "tau_im", "W", "error"]


def test_oracle_ks_table(tmp_path):
    out = str(tmp_path / "o")
    cfg = _write(tmp_path, "[gibbs]\nkernel = Log1\nd = 1\nN = 8\na = 0.5\n\n[sampler]\nsweeps = 6000\n"
                           "thinning = 10\n\n[oracle]\nsamples = 300\n")
    assert main(["oracle", "--config", cfg, "--out", out]) == 0
    ks = _table(out, "ks")
    assert [r["statistic"] for r in ks] == ["one_point", "bulk_gap"]
    man = _manifest(out)
    assert any(r["task"] == "oracle" for r in man["rng"])


def test_fluct_clt_columns(tmp_path):
    out = str(tmp_path / "f")
    cfg = _write(tmp_path, "[gibbs]\nN = 16\n\n[sampler]\nsweeps = 3000\nthinning = 2\n\n[fluct]\nbetas = 2.0\n")
    assert main(["fluct", "--config", cfg, "--out", out]) == 0
    rows = _table(out, "clt")
    assert list(rows[0])[:7] == ["beta", "N", "mean", "var", "var_pred", "p_normal", "se"]


def test_logz_report_and_tolerance_exit(tmp_path, capsys):
    out = str(tmp_path / "z")
    base = "[gibbs]\nkernel = Log1\nd = 1\na = 0.5\n\n[logz]\nNs = 8 16 32 64\n"
    assert main(["logz", "--config", _write(tmp_path, base), "--out", out]) == 0
    assert "order-N constant" in capsys.readouterr().out
    fit = _table(out, "fit")
    assert [r["term"] for r in fit] == ["leading", "nlogn", "order_N", "C_order_N"]
    ti = base + "beta_target = 3.0\nti_N = 4\nti_sweeps = 3000\n\n[tolerances]\nti = 1e-9\n"
    out2 = str(tmp_path / "z2")
    assert main(["logz", "--config", _write(tmp_path, ti, "ti.ini"), "--out", out2]) == 3
    man = _manifest(out2)
    assert man["status"] == "failed" and man["failure"]["type"] == "NumericToleranceError"
    summary = next(f for f in os.listdir(out2) if "_summary_" in f)
    with open(os.path.join(out2, summary)) as fh:
        assert json.load(fh)["report"] == "INCOMPLETE"


def test_verify_exit_codes(tmp_path, capsys):
    assert main(["verify", "--only", "1,9", "--out", str(tmp_path / "v")]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 2 and all(" PASS " in ln for ln in lines)
    assert main(["verify", "--only", "8", "--out", str(tmp_path / "v2")]) == 4


def test_hash_ignores_output_location_and_workers():
    cfg = ExperimentConfig.from_text(SANITY)
    moved = ExperimentConfig.from_text(SANITY + "\n[run]\nout = elsewhere\nworkers = 4\n")
    assert moved.digest() == cfg.digest()
