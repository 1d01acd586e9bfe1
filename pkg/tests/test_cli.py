import json
import os
from pathlib import Path

import pytest

from fockforge.cli import main
from fockforge.fock import jets_of, wk_element


def write_cfg(tmp_path, data, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(data))
    return str(p)


def test_graphs_command(tmp_path):
    cfg = write_cfg(tmp_path, {"command": "graphs", "g": 2, "n": 0})
    assert main(["--config", cfg, "--out", str(tmp_path)]) == 0
    data = json.loads((tmp_path / "graphs.json").read_text())
    assert data["count"] == 7
    auts = sorted(g["aut_order"] for g in data["graphs"])
    assert auts == [1, 2, 2, 2, 8, 8, 12]


def test_psi_command_contains_anchor(tmp_path):
    cfg = write_cfg(tmp_path, {"command": "psi", "bound": 9})
    assert main(["--config", cfg, "--out", str(tmp_path)]) == 0
    rows = (tmp_path / "psi.csv").read_text().splitlines()
    assert '1,"1",1/24' in rows


def test_rmatrix_command_p1(tmp_path):
    cfg = write_cfg(tmp_path, {"command": "rmatrix", "frobenius": "p1", "z_order": 6})
    assert main(["--config", cfg, "--out", str(tmp_path)]) == 0
    blob = json.loads((tmp_path / "rmatrix.json").read_text())
    assert blob["unitary"] and blob["ode_residual_zero"]
    assert sorted(blob["u"]) == ["-2", "2"]


def test_propagator_command_scalar(tmp_path):
    cfg = write_cfg(
        tmp_path, {"command": "propagator", "scalar_exponent": "1", "cutoff": 3}
    )
    assert main(["--config", cfg, "--out", str(tmp_path)]) == 0
    blob = json.loads((tmp_path / "propagator.json").read_text())
    assert blob["crosscheck_agrees"]
    entries = {
        (tuple(e["a"]), tuple(e["b"])): e["value"] for e in blob["entries"]
    }
    assert entries[((0, 0), (0, 0))] == "1"
    assert entries[((0, 0), (1, 0))] == "-1/2"
    assert entries[((1, 0), (1, 0))] == "1/3"


def test_transform_roundtrip_files(tmp_path):
    table = jets_of(wk_element(1, 1, 3))
    (tmp_path / "table.json").write_text(table.to_json())
    prop = {
        "colors": 1,
        "cutoff": 8,
        "entries": [{"a": [0, 0], "b": [0, 0], "value": "1"}],
    }
    (tmp_path / "prop.json").write_text(json.dumps(prop))
    cfg = write_cfg(
        tmp_path,
        {
            "command": "transform",
            "table_file": str(tmp_path / "table.json"),
            "propagator_file": str(tmp_path / "prop.json"),
            "g_max": 1,
            "n_max": 1,
        },
    )
    assert main(["--config", cfg, "--out", str(tmp_path)]) == 0
    from fockforge.fock import CorrelatorTable

    out = CorrelatorTable.from_json((tmp_path / "transformed.json").read_text())
    assert out.get(1, ((0, 0),)) == out.get(1, ((0, 0),))
    assert str(out.get(1, ((0, 0),)).to_fraction()) == "1/2"


def test_ancestor_command_points(tmp_path):
    cfg = write_cfg(
        tmp_path,
        {
            "command": "ancestor",
            "frobenius": ["0", "2"],
            "g_max": 2,
            "n_max": 1,
            "outputs": ["jets", "closed_form"],
        },
    )
    assert main(["--config", cfg, "--out", str(tmp_path)]) == 0
    blob = json.loads((tmp_path / "ancestor_closed_form.json").read_text())
    assert blob["genus1_dlog_at_base"] == ["1/24", "1/24"]
    assert (tmp_path / "ancestor_jets.csv").exists()


def test_verify_command_and_determinism(tmp_path):
    cfg = write_cfg(tmp_path, {"command": "verify", "suite": "cocycle", "count": 2})
    out1 = tmp_path / "a"
    out2 = tmp_path / "b"
    assert main(["--config", cfg, "--seed", "7", "--out", str(out1)]) == 0
    assert main(["--config", cfg, "--seed", "7", "--out", str(out2)]) == 0
    assert (out1 / "verify.json").read_bytes() == (out2 / "verify.json").read_bytes()


def test_anomaly_command(tmp_path):
    cfg = write_cfg(tmp_path, {"command": "anomaly", "cases": [[1, 2]]})
    assert main(["--config", cfg, "--out", str(tmp_path)]) == 0
    text = (tmp_path / "anomaly_certificates.txt").read_text()
    assert "residual ZERO" in text


def test_exit_codes(tmp_path):
    assert main(["--config", str(tmp_path / "absent.json")]) == 3
    bad = write_cfg(tmp_path, {"command": "nope"})
    assert main(["--config", bad]) == 2
    missing_table = write_cfg(
        tmp_path,
        {
            "command": "transform",
            "table_file": str(tmp_path / "nothere.json"),
            "propagator_file": str(tmp_path / "alsonot.json"),
        },
        name="cfg2.json",
    )
    assert main(["--config", missing_table, "--out", str(tmp_path)]) == 3


def test_threads_env(tmp_path, monkeypatch):
    monkeypatch.setenv("FOCKFORGE_THREADS", "2")
    cfg = write_cfg(tmp_path, {"command": "verify", "suite": "propagator", "count": 2})
    assert main(["--config", cfg, "--seed", "3", "--out", str(tmp_path)]) == 0
