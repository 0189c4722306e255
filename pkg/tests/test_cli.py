import csv
import json

import pytest

from honeylat.cli import main


def rows(p):
    with open(p) as fh:
        return list(csv.reader(fh))


def manifest(d):
    return json.loads((d / "manifest.json").read_text())


def test_bands_path(tmp_path):
    assert main(["bands", "--M", "3", "--nk", "4", "--n-bands", "3", "--out", str(tmp_path)]) == 0
    m = manifest(tmp_path)
    assert m["status"] == "ok" and m["command"] == "bands"
    r = rows(tmp_path / m["outputs"][0])
    assert len(r) > 1
    # 17 significant digits survive the round trip
    x = [c for c in r[1] if "." in c][0]
    assert float(x) == float(f"{float(x):.17g}")


def test_dirac_json(tmp_path):
    assert main(["dirac", "--M", "6", "--eps", "10", "--out", str(tmp_path)]) == 0
    d = json.loads((tmp_path / "dirac.json").read_text())
    assert d["b_star"] == 1


def test_slice_schema(tmp_path):
    assert main(["slice", "--M", "3", "--eps", "1", "--n-lambda", "5", "--out", str(tmp_path)]) == 0
    r = rows(tmp_path / manifest(tmp_path)["outputs"][0])
    assert r[0] == ["lambda", "b", "E"]


def test_edge_sweep_schema(tmp_path):
    a = ["edge-sweep", "--N", "8", "--M", "3", "--deltas", "0.4,0.5", "--n-eigs", "2", "--out", str(tmp_path)]
    assert main(a) == 0
    r = rows(tmp_path / manifest(tmp_path)["outputs"][0])
    assert r[0] == ["axis_value", "E", "is_localized", "ipr", "decay_rate"]
    assert len(r) == 5


def test_v11_scan_schema(tmp_path):
    assert main(["v11-scan", "--a-values", "0.8:1.2:3", "--out", str(tmp_path)]) == 0
    r = rows(tmp_path / manifest(tmp_path)["outputs"][0])
    assert r[0] == ["a", "V11_poisson", "V11_quadrature", "sign_flip"] and len(r) == 4


def test_effective_dirac(tmp_path):
    assert main(["effective-1d", "--n", "257", "--out", str(tmp_path)]) == 0
    outs = manifest(tmp_path)["outputs"]
    assert {"dirac_spectrum.csv", "dirac_mode.csv"} <= set(outs)
    assert rows(tmp_path / "dirac_mode.csv")[0] == ["zeta", "re_plus", "im_plus", "re_minus", "im_minus"]
    assert rows(tmp_path / "dirac_spectrum.csv")[0] == ["theta_or_param", "eig_index", "E"]


def test_usage_errors(tmp_path):
    assert main([]) == 1
    with pytest.raises(SystemExit) as e:
        main(["bands", "--M", "x"])
    assert e.value.code == 1
    with pytest.raises(SystemExit) as e:
        main(["nonsense"])
    assert e.value.code == 1


def test_config_errors(tmp_path, monkeypatch):
    assert main(["dirac", "--potential", str(tmp_path / "nope.json"), "--out", str(tmp_path)]) == 2
    assert manifest(tmp_path)["status"] == "error"
    assert main(["edge-sweep", "--N", "8", "--deltas", "0.01", "--out", str(tmp_path)]) == 2
    assert main(["slice", "--edge", "2,4", "--M", "2", "--out", str(tmp_path)]) == 2
    monkeypatch.setenv("HONEYLAT_THREADS", "many")
    assert main(["dirac", "--out", str(tmp_path)]) == 2


def test_threads_env(tmp_path, monkeypatch):
    monkeypatch.setenv("HONEYLAT_THREADS", "3")
    assert main(["v11-scan", "--a-values", "1.0", "--threads", "1", "--out", str(tmp_path)]) == 0
    assert manifest(tmp_path)["threads"] == 3


def test_numeric_failure(tmp_path):
    # V = 0 has a threefold degeneracy at K: not a Dirac point
    assert main(["dirac", "--eps", "0", "--out", str(tmp_path)]) == 3
