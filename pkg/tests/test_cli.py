import csv
import json
import math
import subprocess
import sys

import pytest

from osc_spectra import counterexample
from osc_spectra.cli import main
from osc_spectra.config import RunConfig, load_config, parse_config
from osc_spectra.errors import ConfigurationError


def write_cfg(tmp_path, data, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(data))
    return str(p)


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_spectrum_unperturbed(tmp_path):
    out = tmp_path / "out"
    cfg = write_cfg(tmp_path, {"command": "spectrum", "N": 32})
    proc = subprocess.run([sys.executable, "-m", "osc_spectra.cli", "spectrum", "--config", cfg, "--out", str(out),
                           "--no-plots"], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    rep = json.loads((out / "report.json").read_text())
    assert [z[0] for z in rep["findings"]["eigenvalues"]] == [2 * k + 1 for k in range(32)]
    assert rep["status"] == 0 and rep["violations"] == []


def test_counterexample_csv(tmp_path):
    out = tmp_path / "ce"
    cfg = write_cfg(tmp_path, {"command": "counterexample", "blocks": {"t": 0.5, "m_max": 8, "sweep": 10}})
    assert main(["counterexample", "--config", cfg, "--out", str(out)]) == 0
    rows = read_csv(out / "counterexample.csv")
    assert len(rows) == 9
    for r in rows:
        assert float(r["phi_norm"]) >= 2 ** (int(r["m"]) + 1)
    sweep = read_csv(out / "norm_sweep.csv")
    assert len(sweep) == 100 and all(r["inside"] == "true" for r in sweep)
    for name in ("functional_norms.gp", "functional_norms.png", "report.json"):
        assert (out / name).exists()


def test_bari_markus_exit_zero(tmp_path):
    out = tmp_path / "bm"
    cfg = write_cfg(tmp_path, {"command": "bari-markus", "N": 64,
                               "potential": {"kind": "analytic-formula", "name": "gaussian", "amplitude": 0.03},
                               "vectors": [{"kind": "hermite", "index": 0}]})
    assert main(["bari-markus", "--config", cfg, "--out", str(out), "--no-plots"]) == 0
    rep = json.loads((out / "report.json").read_text())
    finals = [v["final_sum"] for v in rep["findings"]["sums"]]
    assert finals and all(f <= 0.5 for f in finals)


def test_katsnelson_and_decay(tmp_path):
    cfg = write_cfg(tmp_path, {"command": "katsnelson"})
    assert main(["katsnelson", "--config", cfg, "--out", str(tmp_path / "k"), "--no-plots"]) == 0
    cfg = write_cfg(tmp_path, {"command": "decay", "potential": {"kind": "indicator"}}, "d.json")
    assert main(["decay", "--config", cfg, "--out", str(tmp_path / "d"), "--no-plots"]) == 0
    rep = json.loads((tmp_path / "d" / "report.json").read_text())
    assert abs(rep["findings"]["fit"]["slope"] + 0.25) <= 0.05


def test_violation_exit_two(tmp_path, monkeypatch):
    real = counterexample.katsnelson_check

    def broken(spectrum, rho=None):
        res = real(spectrum, rho)
        return counterexample.KatsnelsonResult(**{**res.as_dict(), "pair_sup": 2.0, "passes": False,
                                                  "pair_within_bound": False})

    monkeypatch.setattr(counterexample, "katsnelson_check", broken)
    cfg = write_cfg(tmp_path, {"command": "katsnelson", "katsnelson": {"rho": [0.5]}})
    assert main(["katsnelson", "--config", cfg, "--out", str(tmp_path / "k"), "--no-plots"]) == 2
    rep = json.loads((tmp_path / "k" / "report.json").read_text())
    assert rep["violations"] == ["katsnelson:rho=0.5"]


def test_invalid_config_exit_one(tmp_path, capsys):
    cfg = write_cfg(tmp_path, {"command": "spectrum", "contour": {"M": 15}})
    assert main(["spectrum", "--config", cfg, "--out", str(tmp_path / "x")]) == 1
    assert "contour.M" in capsys.readouterr().err


def test_unknown_key_rejected(tmp_path, capsys):
    cfg = write_cfg(tmp_path, {"command": "spectrum", "Nn": 5})
    assert main(["spectrum", "--config", cfg]) == 1
    assert "Nn" in capsys.readouterr().err


def test_command_mismatch(tmp_path):
    cfg = write_cfg(tmp_path, {"command": "spectrum"})
    with pytest.raises(ConfigurationError, match="command"):
        load_config(cfg, command="decay")


def test_bad_potential_and_json(tmp_path, capsys):
    cfg = write_cfg(tmp_path, {"command": "spectrum", "potential": {"kind": "indicator", "lo": 0, "width": 2}})
    assert main(["spectrum", "--config", cfg]) == 1
    assert "potential" in capsys.readouterr().err
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["spectrum", "--config", str(bad)]) == 1


def test_not_in_v_is_an_error(tmp_path, capsys):
    cfg = write_cfg(tmp_path, {"command": "projections", "N": 32,
                               "potential": {"kind": "analytic-formula", "name": "constant", "value": 1.0}})
    assert main(["projections", "--config", cfg, "--out", str(tmp_path / "p")]) == 1
    assert "1/68" in capsys.readouterr().err


def test_config_round_trip():
    cfg = parse_config({"command": "hilbert", "N": 100, "hilbert": {"truncation": 512, "weight": "power"},
                        "potential": {"kind": "indicator", "lo": -2, "hi": 2}, "seed": 7})
    again = RunConfig.model_validate(json.loads(cfg.to_json()))
    assert again == cfg
    assert again.to_json() == cfg.to_json()


def test_determinism(tmp_path):
    data = {"command": "weights", "weights": {"K_max": 5000, "r_sum_N": 500, "a2_scan": 2000}, "seed": 3}
    cfg = write_cfg(tmp_path, data)
    outs = []
    for name in ("a", "b"):
        assert main(["weights", "--config", cfg, "--out", str(tmp_path / name), "--no-plots"]) == 0
        outs.append(sorted(p.name for p in (tmp_path / name).glob("*.csv")))
    assert outs[0] == outs[1] and outs[0]
    for f in outs[0]:
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_provenance_block(tmp_path):
    cfg = write_cfg(tmp_path, {"command": "spectrum", "N": 16,
                               "potential": {"kind": "analytic-formula", "name": "gaussian", "amplitude": 0.01}})
    assert main(["spectrum", "--config", cfg, "--out", str(tmp_path / "s"), "--seed", "9", "--no-plots"]) == 0
    rep = json.loads((tmp_path / "s" / "report.json").read_text())
    prov = rep["provenance"]
    assert prov["config"]["seed"] == 9 and prov["config"]["N"] == 16
    for key in ("package_version", "grid", "contour", "tolerances", "n_trust"):
        assert key in prov, key
    assert {"assembly_rtol", "deflation_tol", "projection_rtol"} <= set(prov["tolerances"])
    assert math.isfinite(rep["runtime_seconds"])


def test_gnuplot_script_references_csv(tmp_path):
    cfg = write_cfg(tmp_path, {"command": "katsnelson"})
    main(["katsnelson", "--config", cfg, "--out", str(tmp_path / "k"), "--no-plots"])
    gp = (tmp_path / "k" / "katsnelson.gp").read_text()
    assert '"katsnelson.csv"' in gp and "set terminal svg" in gp
    assert not (tmp_path / "k" / "katsnelson.png").exists()
