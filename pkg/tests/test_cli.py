import json

import numpy as np
import pytest

from resetfreq.cli import CONFIG_SCHEMA, config_hash, main


def write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg))
    return str(p)


def csv_rows(path):
    lines = path.read_text().splitlines()
    return lines[0], lines[1].split(","), [l.split(",") for l in lines[2:]]


FIG5 = {"system": {"case": "fig5"}, "excitation": {"freqs_hz": [200.0]}, "n_h": 9}
PCI = {"system": {"case": "pci_pid"}, "excitation": {"freqs_hz": [100.0]}, "n_h": 21}


def test_schema_is_valid():
    import jsonschema
    jsonschema.Draft202012Validator.check_schema(CONFIG_SCHEMA)


def test_bode_open(tmp_path):
    out = tmp_path / "o"
    assert main(["bode-open", "--config", write(tmp_path, FIG5), "--out", str(out)]) == 0
    head, cols, rows = csv_rows(out / "bode_open.csv")
    assert head == f"# resetfreq 0.1.0 config-sha256={config_hash(FIG5)}"
    assert cols[:2] == ["f_hz", "n"]
    assert [int(r[1]) for r in rows] == [1, 3, 5, 7, 9]
    for r in rows:
        assert float(r[2]) == pytest.approx(float(r[4]), abs=1e-9)


def test_bode_closed_deterministic_and_parallel(tmp_path):
    cfg = dict(PCI, excitation={"freqs_hz": [50.0, 100.0, 400.0]})
    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    path = write(tmp_path, cfg)
    assert main(["bode-closed", "--config", path, "--out", str(a), "--method", "all"]) == 0
    assert main(["bode-closed", "--config", path, "--out", str(b), "--method", "all"]) == 0
    assert (a / "bode_closed.csv").read_bytes() == (b / "bode_closed.csv").read_bytes()
    par = write(tmp_path, dict(cfg, jobs=2), "par.json")
    assert main(["bode-closed", "--config", par, "--out", str(c), "--method", "all"]) == 0
    body = lambda p: (p / "bode_closed.csv").read_text().split("\n", 1)[1]  # noqa: E731
    assert body(a) == body(c)
    _, cols, rows = csv_rows(a / "bode_closed.csv")
    assert "gamma" in cols and "B_S_mag_db" in cols
    assert len(rows) == 3 * 11


def test_empty_frequency_list(tmp_path):
    cfg = dict(PCI, excitation={"freqs_hz": []})
    out = tmp_path / "o"
    assert main(["bode-closed", "--config", write(tmp_path, cfg), "--out", str(out)]) == 0
    _, _, rows = csv_rows(out / "bode_closed.csv")
    assert rows == []


def test_predict(tmp_path):
    out = tmp_path / "o"
    assert main(["predict", "--config", write(tmp_path, PCI), "--out", str(out)]) == 0
    _, cols, rows = csv_rows(out / "predict_100hz.csv")
    assert cols == ["t", "e_pre", "y_pre", "u_pre"] and len(rows) == 1024


def test_simulate_and_compare(tmp_path):
    out = tmp_path / "o"
    path = write(tmp_path, PCI)
    assert main(["simulate", "--config", path, "--out", str(out)]) == 0
    rec = json.loads((out / "steady_state_100hz.json").read_text())
    assert rec["reset_counts"] == [2, 2]
    _, cols, _ = csv_rows(out / "trajectory_100hz.csv")
    assert cols == ["t", "r", "e", "e_s", "v", "u", "y", "reset_flag"]
    assert main(["compare", "--config", path, "--out", str(out), "--method", "all"]) == 0
    rep = json.loads((out / "compare.json").read_text())
    m = rep["results"][0]["methods"]
    assert set(m) == {"new", "A", "B"}
    assert m["new"]["PE_rel"] < m["A"]["PE_rel"]


def test_freqs_override(tmp_path):
    out = tmp_path / "o"
    assert main(["bode-open", "--config", write(tmp_path, FIG5), "--out", str(out),
                 "--freqs", "100,300", "--nh", "3"]) == 0
    _, _, rows = csv_rows(out / "bode_open.csv")
    assert [(float(r[0]), int(r[1])) for r in rows] == [(100, 1), (100, 3), (300, 1), (300, 3)]


@pytest.mark.parametrize("cfg,where", [
    ({"system": {"case": "nope"}, "excitation": {"freqs_hz": [1]}}, "system/case"),
    ({"system": {"case": "fig5"}, "excitation": {"freqs_hz": [-1]}}, "excitation/freqs_hz/0"),
    ({"system": {"case": "fig5"}}, "<root>"),
    ({"system": {"case": "fig5"}, "excitation": {"freqs_hz": [1]}, "n_h": 0}, "n_h"),
    ({"system": {"case": "custom"}, "excitation": {"freqs_hz": [1]}}, "system"),
])
def test_config_errors(tmp_path, capsys, cfg, where):
    assert main(["bode-open", "--config", write(tmp_path, cfg)]) == 2
    assert f"config error at {where}" in capsys.readouterr().err


def test_unreadable_config(tmp_path):
    assert main(["bode-open", "--config", str(tmp_path / "missing.json")]) == 2
    bad = tmp_path / "bad.json"
    bad.write_text("{")
    assert main(["bode-open", "--config", str(bad)]) == 2
    assert main(["bode-open", "--config", write(tmp_path, FIG5), "--freqs", "a"]) == 2


def test_non_convergence_exit(tmp_path):
    cfg = dict(PCI, sim={"periods": 3, "transient_periods": 0, "auto_transient": False})
    assert main(["simulate", "--config", write(tmp_path, cfg), "--out", str(tmp_path)]) == 3


def test_verify_strict(tmp_path):
    cfg = {"system": {"case": "custom",
                      "controller": {"A": [[1.0]], "B": [[1.0]], "C": [[1.0]], "D": [[0.0]],
                                     "gamma": 0.9}},
           "excitation": {"freqs_hz": [1.0]},
           "verify": {"deltas_s": [0.5], "two_reset": False}}
    path = write(tmp_path, cfg)
    assert main(["verify", "--config", path, "--out", str(tmp_path)]) == 0
    assert main(["verify", "--config", path, "--out", str(tmp_path), "--strict"]) == 4
    rep = json.loads((tmp_path / "verify.json").read_text())
    assert rep["open_loop_condition"]["worst_radius"] == pytest.approx(0.9 * np.exp(0.5))


def test_version(capsys):
    with pytest.raises(SystemExit) as info:
        main(["--version"])
    assert info.value.code == 0
    assert "0.1.0" in capsys.readouterr().out
