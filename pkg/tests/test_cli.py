import json
import subprocess
import sys
import time

import numpy as np
import pytest

from regsysid.benchmark import CollectionSpec, generate_run
from regsysid.cli import main


def write_config(path, **cfg):
    path.write_text(json.dumps(cfg))
    return str(path)


def test_databank_writes_files_and_manifest(tmp_path):
    out = tmp_path / "bank"
    assert main(["databank", "--out", str(out), "--count", "2", "--seed", "4"]) == 0
    for name in ("S1D1", "S1D2", "S2D1", "S2D2"):
        assert sorted(p.name for p in (out / name).iterdir()) == ["run_000.csv", "run_001.csv"]
    man = json.loads((out / "manifest.json").read_text())
    assert len(man["runs"]) == 8
    assert man["runs"][0]["file"] == "S1D1/run_000.csv"


def test_databank_rerun_is_byte_identical(tmp_path):
    cfg = write_config(tmp_path / "c.json", seed=1, count=2, collections=["S2D2"])
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["databank", "--config", cfg, "--out", str(a)]) == 0
    assert main(["databank", "--config", cfg, "--out", str(b)]) == 0
    main(["databank", "--config", cfg, "--out", str(b)])
    for f in ("manifest.json", "S2D2/run_000.csv", "S2D2/run_001.csv"):
        assert (a / f).read_bytes() == (b / f).read_bytes()


def test_databank_bad_path(tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    assert main(["databank", "--out", str(blocker / "sub"), "--count", "1"]) == 1
    assert "error" in capsys.readouterr().err
    assert not (blocker / "sub").exists()


def test_databank_missing_config_key(tmp_path, capsys):
    cfg = write_config(tmp_path / "c.json", seed=1)
    assert main(["databank", "--config", cfg, "--out", str(tmp_path)]) == 2
    assert "collections" in capsys.readouterr().err


def test_unknown_config_key(tmp_path, capsys):
    cfg = write_config(tmp_path / "c.json", seed=1, collections=["S1D1"], colour="red")
    assert main(["databank", "--config", cfg, "--out", str(tmp_path)]) == 2
    assert "colour" in capsys.readouterr().err


@pytest.fixture(scope="module")
def record_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("rec") / "run.csv"
    generate_run(CollectionSpec("S1D1", 1, 0), 0).data.write_csv(path)
    return path


def test_estimate_rlag_tc(record_csv, tmp_path, capsys):
    rc = main(["estimate", "--data", str(record_csv), "--method", "RLAG-TC", "--m", "10",
               "--out", str(tmp_path)])
    assert rc == 0
    lines = (tmp_path / "estimate.csv").read_text().splitlines()
    assert lines[0] == "k,g_hat"
    assert len(lines) == 126
    summary = json.loads(capsys.readouterr().out)
    assert summary["method"] == "RLAG-TC" and "a" in summary["hyperparameters"]


def test_estimate_unknown_method_is_usage_error(record_csv, tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["estimate", "--data", str(record_csv), "--method", "NOPE", "--out", str(tmp_path)])
    assert exc.value.code == 2


def test_estimate_unknown_method_in_config(record_csv, tmp_path):
    cfg = write_config(tmp_path / "c.json", method="NOPE", data=str(record_csv))
    assert main(["estimate", "--config", cfg, "--out", str(tmp_path)]) == 2


def test_estimate_too_short(tmp_path, capsys):
    path = tmp_path / "short.csv"
    path.write_text("t,u,y\n" + "".join(f"{t},{np.sin(t)},{np.cos(t)}\n" for t in range(1, 6)))
    assert main(["estimate", "--data", str(path), "--method", "RFIR-TC", "--out", str(tmp_path)]) == 1
    assert "N=5" in capsys.readouterr().err


def test_estimate_malformed_csv_names_line(tmp_path, capsys):
    path = tmp_path / "bad.csv"
    path.write_text("t,u,y\n1,1.0,2.0\n2,oops,3.0\n")
    assert main(["estimate", "--data", str(path), "--method", "RFIR-TC", "--out", str(tmp_path)]) == 1
    assert "line 3" in capsys.readouterr().err


def test_tiny_benchmark_and_table(tmp_path, capsys):
    cfg = write_config(tmp_path / "c.json", seed=0, count=2, collections=["S1D1"],
                       methods=["RFIR-TC"])
    t0 = time.perf_counter()
    assert main(["benchmark", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    assert time.perf_counter() - t0 < 60
    o = tmp_path / "o"
    for f in ("raw_fits.csv", "table.txt", "table.csv", "manifest.json"):
        assert (o / f).exists()
    assert len((o / "raw_fits.csv").read_text().splitlines()) == 3
    capsys.readouterr()
    assert main(["table", "--raw", str(o / "raw_fits.csv"), "--format", "csv"]) == 0
    assert capsys.readouterr().out == (o / "table.csv").read_text()


def test_benchmark_missing_methods_key(tmp_path, capsys):
    cfg = write_config(tmp_path / "c.json", seed=0, collections=["S1D1"])
    assert main(["benchmark", "--config", cfg, "--out", str(tmp_path)]) == 2
    assert "methods" in capsys.readouterr().err


def test_missing_out_is_config_error(capsys):
    assert main(["databank", "--count", "1"]) == 2


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "regsysid", "--help"], capture_output=True,
                          text=True)
    assert proc.returncode == 0
    assert "databank" in proc.stdout
    proc = subprocess.run([sys.executable, "-m", "regsysid", "bogus"], capture_output=True)
    assert proc.returncode == 2
