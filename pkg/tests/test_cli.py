import json
import shutil
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

import specloc as sl
from specloc.cli import ConfigError, load_config, main

CONFIGS = Path(__file__).parent.parent / "configs"


def write_cfg(tmp_path, payload, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(payload, indent=1))
    return p


def tiny_haldane_cfg(**extra):
    cfg = {
        "schema_version": 1,
        "lattice": {"kind": "haldane", "nx": 8, "ny": 8, "boundary": "open",
                    "t": 1.0, "t_c": 0.5, "phi": 1.5707963267948966, "M": 0.0},
        "probe": {"x": "center", "rho_al": 4.0},
        "localizer": {"kappa_t_per_al": 0.2, "E_t": 0.0},
    }
    cfg.update(extra)
    return cfg


def test_validate_config_ok(tmp_path, capsys):
    cfg = write_cfg(tmp_path, tiny_haldane_cfg())
    assert main(["validate-config", "--config", str(cfg)]) == 0
    assert "config ok" in capsys.readouterr().out


def test_packaged_configs_validate():
    for path in sorted(CONFIGS.glob("*.json")):
        load_config(path)


def test_unknown_key_rejected_with_line(tmp_path, capsys):
    payload = tiny_haldane_cfg()
    payload["lattice"]["typo_key"] = 1
    cfg = write_cfg(tmp_path, payload)
    assert main(["validate-config", "--config", str(cfg)]) == 2
    err = capsys.readouterr().err
    assert "typo_key" in err and "config error" in err


def test_bad_json_reports_line(tmp_path, capsys):
    p = tmp_path / "bad.json"
    p.write_text('{\n  "schema_version": 1,\n  oops\n}\n')
    assert main(["validate-config", "--config", str(p)]) == 2
    assert ":3:" in capsys.readouterr().err


def test_wrong_schema_version_rejected(tmp_path):
    payload = tiny_haldane_cfg()
    payload["schema_version"] = 99
    with pytest.raises(ConfigError):
        load_config(write_cfg(tmp_path, payload))


def test_missing_config_file(tmp_path, capsys):
    assert main(["local-gap", "--config", str(tmp_path / "nope.json")]) == 2


def test_local_gap_requires_a_sweep(tmp_path, capsys):
    cfg = write_cfg(tmp_path, tiny_haldane_cfg(sweep={}))
    assert main(["local-gap", "--config", str(cfg), "--out", str(tmp_path)]) == 2


def test_local_gap_outputs_and_manifest(tmp_path):
    cfg = write_cfg(tmp_path, tiny_haldane_cfg(
        sweep={"rho_grid_al": [2.0, 3.0, 4.0],
               "energy_grid_t": [-1.0, 0.0, 1.0], "sigma_t": 0.1}))
    out = tmp_path / "out"
    assert main(["local-gap", "--config", str(cfg), "--out", str(out),
                 "--emit-plot-script"]) == 0
    assert (out / "rho_sweep.csv").exists()
    assert (out / "dos.csv").exists()
    assert (out / "plot_local-gap.py").exists()
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["command"] == "local-gap"
    assert len(manifest["config_sha256"]) == 64
    rows = (out / "rho_sweep.csv").read_text().strip().splitlines()
    assert rows[0] == "rho,g_rho" and len(rows) == 4
    # monotone non-increasing gap
    gs = [float(r.split(",")[1]) for r in rows[1:]]
    assert gs[0] >= gs[1] >= gs[2]


def test_zero_disorder_block_matches_clean_run(tmp_path):
    base = tiny_haldane_cfg(sweep={"rho_grid_al": [2.0, 3.0]})
    cfg_clean = write_cfg(tmp_path, base, "clean.json")
    with_dis = dict(base)
    with_dis["disorder"] = {"lambda_t": 0.0, "seed": 42}
    cfg_dis = write_cfg(tmp_path, with_dis, "disordered.json")
    out1, out2 = tmp_path / "o1", tmp_path / "o2"
    assert main(["local-gap", "--config", str(cfg_clean), "--out", str(out1)]) == 0
    assert main(["local-gap", "--config", str(cfg_dis), "--out", str(out2)]) == 0
    assert (out1 / "rho_sweep.csv").read_bytes() == (out2 / "rho_sweep.csv").read_bytes()


def test_kappa_bounds_a_zero_matches_cond11_column(tmp_path):
    cfg = write_cfg(tmp_path, tiny_haldane_cfg(
        localizer={"kappa_t_per_al": 0.2, "a": 0.0, "b": 0.5, "C_F": 2.0},
        sweep={"defect_strength_t": 7.0, "defect_n": 3}))
    out = tmp_path / "out"
    assert main(["kappa-bounds", "--config", str(cfg), "--out", str(out)]) == 0
    rows = [r for r in (out / "kappa_bounds.csv").read_text().splitlines()
            if r and not r.startswith("#")][1:]
    for row in rows:
        cells = row.split(",")
        assert cells[1] == cells[2]  # upper_cond10 == upper_cond11 bitwise


def test_localizer_single_cell_row_and_ratio(tmp_path):
    cfg = write_cfg(tmp_path, tiny_haldane_cfg(
        sweep={"kappa_grid_t_per_al": [0.2], "rho_grid_al": [4.0]}))
    out = tmp_path / "out"
    assert main(["localizer", "--config", str(cfg), "--out", str(out)]) == 0
    rows = (out / "localizer_sweep.csv").read_text().strip().splitlines()
    assert rows[0] == "kappa,rho,mu,index,g_rho,ratio"
    assert len(rows) == 2
    kappa, rho, mu, index, g, ratio = rows[1].split(",")
    # ratio column recomputed independently
    lat, H = sl.build_haldane(8, 8, sl.HaldaneParams(1.0, 0.5, np.pi / 2, 0.0),
                              "open")
    g_check = sl.local_gap(H, lat.center, 4.0).g_rho
    assert float(g) == pytest.approx(g_check, rel=1e-12)
    assert float(ratio) == pytest.approx(float(g) / float(mu), rel=1e-12)
    report = json.loads((out / "localizer_report.json").read_text())
    assert report["probe"]["kappa"] == 0.2


def test_anderson_rerun_byte_identical(tmp_path):
    cfg = write_cfg(tmp_path, {
        "schema_version": 1,
        "lattice": {"kind": "haldane", "nx": 6, "ny": 6, "boundary": "periodic",
                    "t": 1.0, "t_c": 0.5, "phi": 1.5707963267948966, "M": 0.0},
        "probe": {"x": "center", "rho_al": 3.0},
        "localizer": {"kappa_t_per_al": 0.2},
        "sweep": {"lambda_list_t": [0.0, 1.5], "seeds": [11, 12, 13],
                  "rho_grid_al": [2.0, 3.0], "sigma_t": 0.05},
    })
    out1, out2 = tmp_path / "r1", tmp_path / "r2"
    assert main(["anderson", "--config", str(cfg), "--out", str(out1)]) == 0
    assert main(["anderson", "--config", str(cfg), "--out", str(out2),
                 "--threads", "2"]) == 0
    for name in ("realizations.csv", "aggregate.csv"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()
    header = (out1 / "realizations.csv").read_text().splitlines()[0]
    assert header == "# seeds: 11,12,13"
    spec = json.loads((out1 / "ensemble_spec.json").read_text())
    from specloc.anderson import EnsembleSpec

    assert EnsembleSpec.from_json_dict(spec).to_json_dict() == spec


def test_anderson_seed_override(tmp_path):
    cfg = write_cfg(tmp_path, {
        "schema_version": 1,
        "lattice": {"kind": "haldane", "nx": 6, "ny": 6, "boundary": "periodic",
                    "t": 1.0, "t_c": 0.5, "phi": 1.5707963267948966, "M": 0.0},
        "probe": {"x": "center", "rho_al": 3.0},
        "localizer": {"kappa_t_per_al": 0.2},
        "sweep": {"lambda_list_t": [0.0], "seeds": [11, 12],
                  "rho_grid_al": [3.0]},
    })
    out = tmp_path / "out"
    assert main(["anderson", "--config", str(cfg), "--out", str(out),
                 "--seed-override", "500"]) == 0
    header = (out / "realizations.csv").read_text().splitlines()[0]
    assert header == "# seeds: 500,501"


def test_tapering_single_k(tmp_path):
    cfg = write_cfg(tmp_path, {
        "schema_version": 1,
        "lattice": {"kind": "ssh", "n_cells": 40, "t1": 1.0, "t2": 0.2},
        "sweep": {"family": "beta", "k_list": [1], "rho_grid_al": [10.0]},
    })
    out = tmp_path / "out"
    assert main(["tapering", "--config", str(cfg), "--out", str(out)]) == 0
    four = (out / "cf_fourier.csv").read_text().strip().splitlines()
    assert len(four) == 2 and abs(float(four[1].split(",")[1]) - 4.56) < 0.02
    direct = (out / "cf_direct.csv").read_text().strip().splitlines()
    assert direct[0] == "k,rho,cf_estimate,lattice"
    assert direct[1].endswith(",ssh")


def test_flow_command_and_rerun_determinism(tmp_path):
    s3 = np.sqrt(3)
    cfg = write_cfg(tmp_path, {
        "schema_version": 1,
        "lattice": {"kind": "heterostructure", "nx": 16, "ny": 16,
                    "left": {"t": 1.0, "t_c": 0.0, "phi": 0.0, "M": s3 / 2},
                    "right": {"t": 1.0, "t_c": 0.5,
                              "phi": 1.5707963267948966, "M": 0.0}},
        "probe": {"x": "center", "rho_al": 5.0},
        "localizer": {"kappa_t_per_al": 0.4},
        "sweep": {"path": {"from": "center-left", "to": "center-right",
                           "n_t": 9}},
    })
    out1, out2 = tmp_path / "f1", tmp_path / "f2"
    assert main(["flow", "--config", str(cfg), "--out", str(out1)]) == 0
    assert main(["flow", "--config", str(cfg), "--out", str(out2)]) == 0
    for name in ("spectrum_clean.csv", "profile_clean.csv"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()
    payload = json.loads((out1 / "flow.json").read_text())
    assert "clean" in payload and "flow" in payload["clean"]


def test_cli_entry_point_installed():
    exe = shutil.which("specloc")
    if exe is None:
        pytest.skip("console script not on PATH")
    proc = subprocess.run([exe, "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "local-gap" in proc.stdout
