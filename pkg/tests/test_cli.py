import json
import subprocess
import sys

import numpy as np
import pytest

from cziswap import cli
from cziswap.readout import ConfusionMatrix


def run(capsys, *argv):
    code = cli.main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_verify_passes(capsys):
    code, out, _ = run(capsys, "verify")
    assert code == 0
    assert out.count("PASS") == 5


def test_verify_perturbed_fails(capsys):
    code, out, _ = run(capsys, "verify", "--perturb", "1e-6")
    assert code == cli.EXIT_FAILED
    assert "FAIL" in out


def test_verify_json(capsys):
    code, out, _ = run(capsys, "verify", "--json")
    rep = json.loads(out)
    assert code == 0 and rep["passed"] is True and len(rep["checks"]) == 5


def test_fidelity_report(capsys):
    code, out, _ = run(capsys, "fidelity", "--json")
    rep = json.loads(out)
    g = rep["gates"]
    assert code == 0
    for gate, pct in (("CZ", 98.8), ("iSWAP", 99.2), ("SWAP", 97.4)):
        assert abs(100 * g[gate]["fidelity"] - pct) <= 0.1
    assert rep["three_cz_duration_s"] == pytest.approx(2.67e-6)
    assert rep["swap_duration_s"] == pytest.approx(1.960e-6)


def test_fidelity_without_relaxation(capsys):
    code, out, _ = run(capsys, "fidelity", "--infinite-t1", "--json")
    assert all(v["fidelity"] == 1.0 for v in json.loads(out)["gates"].values())


def test_commensurate(capsys):
    code, out, _ = run(capsys, "commensurate", "--json")
    rep = json.loads(out)
    assert rep["commensurate"] is True
    assert 100 * rep["residual_population"] == pytest.approx(0.6, abs=0.05)
    code, out, _ = run(capsys, "commensurate", "--f-lo", "3.6e9", "--t-rep", "400.0001e-6")
    assert "NOT commensurate" in out


def test_doane_file(tmp_path, capsys):
    p = tmp_path / "x.txt"
    p.write_text("value\n" + "\n".join(str(v) for v in range(-128, 128) if v != 0) + "\n0\n")
    code, out, _ = run(capsys, "doane", str(p), "--json")
    assert code == 0 and json.loads(out) == {"n": 256, "bins": 9}


def test_confusion_and_mitigate(tmp_path, capsys):
    out_dir = tmp_path / "ro"
    code, out, _ = run(capsys, "confusion", "--shots", "2000", "--seed", "3", "--out-dir", str(out_dir))
    assert code == 0
    joint = ConfusionMatrix.read_csv(out_dir / "confusion_joint.csv")
    assert joint.dim == 9 and list(joint.shots) == [2000] * 9
    assert (out_dir / "confusion_q1.csv").exists()
    # mitigate an exact trace distorted by the same matrix
    code, _, _ = run(capsys, "ramsey", "--gate", "CZ", "--out-dir", str(tmp_path / "r"))
    trace = tmp_path / "r" / "ramsey_CZ_q1q2_prep1.csv"
    code, out, _ = run(capsys, "mitigate", str(trace), "--mitigate",
                       str(out_dir / "confusion_joint.csv"), "--out-dir", str(tmp_path / "m"))
    assert code == 0
    first = (tmp_path / "m" / "ramsey_CZ_q1q2_prep1_mitigated.csv").read_text().splitlines()[0]
    assert first.startswith("# mitigated with confusion matrix:")


def test_ramsey_outputs(tmp_path, capsys):
    code, out, _ = run(capsys, "ramsey", "--gate", "iSWAP", "--out-dir", str(tmp_path))
    assert code == 0
    names = sorted(p.name for p in tmp_path.iterdir())
    assert names == ["ramsey_iSWAP_fits.csv", "ramsey_iSWAP_q1q2_prep0.csv",
                     "ramsey_iSWAP_q1q2_prep1.csv", "ramsey_iSWAP_q2q1_prep0.csv",
                     "ramsey_iSWAP_q2q1_prep1.csv"]
    header = (tmp_path / "ramsey_iSWAP_q1q2_prep0.csv").read_text().splitlines()[0]
    assert header == "phi_rad,p00,p01,p02,p10,p11,p12,p20,p21,p22,backend,shots"


def test_shot_outputs_are_byte_identical(tmp_path, capsys):
    args = ["ramsey", "--gate", "CZ", "--backend", "shots", "--source", "exact", "--seed", "5"]
    run(capsys, *args, "--out-dir", str(tmp_path / "a"))
    run(capsys, *args, "--out-dir", str(tmp_path / "b"))
    run(capsys, *args[:-1], "6", "--out-dir", str(tmp_path / "c"))
    for p in (tmp_path / "a").iterdir():
        assert p.read_bytes() == (tmp_path / "b" / p.name).read_bytes()
    name = "ramsey_CZ_q1q2_prep0.csv"
    assert (tmp_path / "a" / name).read_bytes() != (tmp_path / "c" / name).read_bytes()


def test_confusion_outputs_are_byte_identical(tmp_path, capsys):
    for d in ("a", "b"):
        run(capsys, "confusion", "--shots", "500", "--seed", "2", "--out-dir", str(tmp_path / d))
    for p in (tmp_path / "a").iterdir():
        assert p.read_bytes() == (tmp_path / "b" / p.name).read_bytes()


def test_config_file(tmp_path, capsys):
    cfg = tmp_path / "run.toml"
    cfg.write_text('backend = "shots"\nsource = "exact"\nshots = 300\nseed = 4\n'
                   f'out_dir = "{tmp_path / "out"}"\n')
    code, _, _ = run(capsys, "ramsey", "--gate", "CZ", "--config", str(cfg))
    assert code == 0
    text = (tmp_path / "out" / "ramsey_CZ_q1q2_prep0.csv").read_text().splitlines()
    assert text[1].endswith(",shots,300")


def test_unknown_config_key_is_validation_error(tmp_path, capsys):
    cfg = tmp_path / "run.toml"
    cfg.write_text("shot = 300\n")
    code, _, err = run(capsys, "verify", "--config", str(cfg))
    assert code == cli.EXIT_INVALID
    assert "unknown config keys: shot" in err


@pytest.mark.parametrize("argv", [
    ["ramsey", "--gate", "CZ", "--backend", "shots", "--shots", "0"],
    ["mitigate", "missing.csv"],
    ["mitigate", "missing.csv", "--mitigate", "missing_t.csv"],
    ["doane", "missing.txt"],
    ["fit", "missing.csv", "--model", "T1"],
    ["fidelity", "--device", "missing.toml"],
    ["ramsey", "--gate", "CZ", "--backend", "pulse", "--calibration", "missing.json"],
])
def test_validation_errors_exit_2(tmp_path, capsys, monkeypatch, argv):
    monkeypatch.chdir(tmp_path)
    code, _, err = run(capsys, *argv)
    assert code == cli.EXIT_INVALID
    assert err.startswith("error:")


def test_bad_device_key_rejected(tmp_path, capsys):
    dev = tmp_path / "dev.toml"
    dev.write_text("f01_q1_hz = 3.86e9\nbogus = 1\n")
    code, _, _ = run(capsys, "fidelity", "--device", str(dev))
    assert code == cli.EXIT_INVALID


def test_calibration_failure_exits_3(tmp_path, capsys, monkeypatch):
    from cziswap.dynamics import calibrate as cal_mod

    def fail(*a, **k):
        raise cal_mod.CalibrationError("no resonance above threshold")
    monkeypatch.setattr(cal_mod, "calibrate_cz", fail)
    code, _, err = run(capsys, "calibrate", "--out-dir", str(tmp_path))
    assert code == cli.EXIT_FAILED
    assert "no resonance" in err


def test_fit_command(tmp_path, capsys):
    t = np.linspace(0, 400e-6, 101)
    p = tmp_path / "t1.csv"
    p.write_text("t_s,signal\n" + "".join(f"{a!r},{b!r}\n" for a, b in
                                          zip(t.tolist(), np.exp(-t / 77e-6).tolist())))
    code, out, _ = run(capsys, "fit", str(p), "--model", "T1", "--out-dir", str(tmp_path), "--json")
    rep = json.loads(out)
    assert code == 0 and rep["results"][0]["accepted"] is True
    assert rep["results"][0]["T_s"] == pytest.approx(77e-6, rel=1e-6)
    assert (tmp_path / "fits_T1.csv").exists()


def test_load_shipped_calibration():
    cals, corr = cli.load_calibration()
    assert set(cals) == {"CZ", "iSWAP"}
    assert len(corr) == 2


def test_console_entry_point():
    res = subprocess.run([sys.executable, "-m", "cziswap.cli", "verify"], capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.count("PASS") == 5
    res = subprocess.run([sys.executable, "-m", "cziswap.cli", "nonsense"], capture_output=True, text=True)
    assert res.returncode == 2
