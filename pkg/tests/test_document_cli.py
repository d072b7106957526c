import csv
import json

import numpy as np
import pytest

from phdae import MatFun, verify_structure
from phdae.cli import main
from phdae.document import SystemDocument, dumps, load, loads, report_document, save, to_jsonable
from phdae.exceptions import ShapeError
from phdae.generators import random_index_one, time_varying_phdae
from phdae.models import PRESETS, preset


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_round_trip_is_bit_identical(name):
    text = dumps(preset(name))
    doc = loads(text)
    assert dumps(doc) == text
    s = preset(name)
    for c in ("E", "Q", "J", "R", "K", "B", "P", "S", "N"):
        assert np.array_equal(getattr(doc.system, c).coeffs, getattr(s, c).coeffs)


def test_round_trip_time_varying_with_extras(rng):
    s = time_varying_phdae(rng, 3, 2)
    doc = SystemDocument(s, x0=rng.standard_normal(3) / 3,
                         input={"times": np.array([0.0, 0.5, 1.0]), "values": rng.standard_normal((3, 2))})
    text = dumps(doc)
    back = loads(text)
    assert dumps(back) == text
    assert np.array_equal(back.x0, doc.x0)
    assert np.array_equal(back.system.E.coeffs, s.E.coeffs)
    poly = SystemDocument(s, input={"polynomial": np.ones((2, 2, 1)) * 0.1})
    assert isinstance(loads(dumps(poly)).input_spec(), MatFun)


def _doc_dict(name="rlc"):
    return json.loads(dumps(preset(name)))


def test_missing_coefficient_named():
    d = _doc_dict()
    del d["coefficients"]["K"]
    with pytest.raises(ShapeError, match="K.*zero matrices must be written explicitly"):
        loads(json.dumps(d))


@pytest.mark.parametrize("mutate,pattern", [
    (lambda d: d["coefficients"].update(E=[[[1.0]]]), "coefficient E"),
    (lambda d: d["coefficients"].update(Z=[[[1.0]]]), "unknown coefficient"),
    (lambda d: d.update(schema=7), "unsupported schema"),
    (lambda d: d.update(n=-1), "nonnegative"),
    (lambda d: d.pop("tf"), "missing required field"),
    (lambda d: d.update(x0=[1.0]), "x0"),
    (lambda d: d.update(input={"bogus": 1}), "polynomial"),
])
def test_malformed_documents(mutate, pattern):
    d = _doc_dict()
    mutate(d)
    with pytest.raises(ShapeError, match=pattern):
        loads(json.dumps(d))


def test_invalid_json_position():
    with pytest.raises(ShapeError, match="line 2"):
        loads('{\n  "n": ,\n}')


def test_non_finite_rejected():
    s = preset("rlc_minimal")
    bad = s.replace(R=np.full((3, 3), np.nan))
    with pytest.raises(ShapeError):
        dumps(bad)
    assert to_jsonable({"a": np.array([np.inf, 1.0])}) == {"a": [None, 1.0]}


def test_report_provenance():
    r = report_document("verify", {"tol": 1e-9}, structure={"ok": True}, skipped=None)
    assert r["provenance"]["tool"] == "phdae"
    assert r["provenance"]["tolerances"] == {"tol": 1e-9}
    assert "skipped" not in r


# command line -----------------------------------------------------------------

def _export(tmp_path, name):
    path = tmp_path / f"{name}.json"
    assert main(["export", name, "--out", str(path)]) == 0
    return path


def test_verify_pass_and_report(tmp_path, capsys):
    path = _export(tmp_path, "gas")
    assert main(["verify", str(path)]) == 0
    rep = json.loads((tmp_path / "gas.verify.json").read_text())
    assert rep["structure"]["passed"] and rep["command"] == "verify"
    assert "pass" in capsys.readouterr().out


def test_verify_detects_corrupted_j(tmp_path, capsys):
    d = _doc_dict("gas")
    d["coefficients"]["J"][0][0][1] += 0.5
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(d))
    assert main(["verify", str(path)]) == 1
    assert "derivative identity" in capsys.readouterr().out


def test_missing_field_exit_code(tmp_path, capsys):
    d = _doc_dict()
    del d["coefficients"]["K"]
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(d))
    assert main(["verify", str(path)]) == 2
    assert "K" in capsys.readouterr().err
    assert main(["verify", str(tmp_path / "absent.json")]) == 2


def test_analyze_gas(tmp_path, capsys):
    path = _export(tmp_path, "gas")
    assert main(["analyze", str(path)]) == 0
    out = capsys.readouterr().out
    assert any(line.split() == ["mu", "1"] for line in out.splitlines())
    rep = json.loads((tmp_path / "gas.analyze.json").read_text())
    assert rep["index"]["mu"] == 1


@pytest.mark.parametrize("name", ["rlc", "gas", "manipulator"])
def test_reduce_output_reverifies(tmp_path, name):
    path = _export(tmp_path, name)
    out = tmp_path / f"{name}.red.json"
    assert main(["reduce", str(path), "--out", str(out)]) == 0
    red = load(out).system
    assert red.n < preset(name).n
    assert verify_structure(red, tol=1e-7).ok
    assert main(["verify", str(out), "--tol", "1e-7"]) == 0
    assert (tmp_path / f"{name}.red.report.json").exists()


def test_simulate_high_index_refused(tmp_path, capsys):
    path = _export(tmp_path, "gas")
    assert main(["simulate", str(path)]) == 1
    assert "index" in capsys.readouterr().err


def test_simulate_inconsistent_then_project(tmp_path, rng, capsys):
    inst = random_index_one(rng, 2, 2, 1)
    path = tmp_path / "sys.json"
    save(SystemDocument(inst.system, x0=np.ones(4)), path)
    assert main(["simulate", str(path), "--h", "0.05"]) == 1
    assert "consistency residual" in capsys.readouterr().err
    csv_path = tmp_path / "t.csv"
    assert main(["simulate", str(path), "--h", "0.05", "--project", "--u", "0.5",
                 "--csv", str(csv_path)]) == 0
    with open(csv_path) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["t", "x1", "x2", "x3", "x4", "y1", "u1", "H"]
    assert len(rows) == 22
    rep = json.loads((tmp_path / "sys.simulate.json").read_text())
    assert rep["simulation"]["projected"] and not rep["energy"]["violated"]


def test_simulate_bad_x0_length(tmp_path):
    path = _export(tmp_path, "acoustic")
    assert main(["simulate", str(path), "--x0", "1,2"]) == 2


def test_demo_rlc(tmp_path):
    assert main(["demo", "rlc", "--out-dir", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "rlc.report.json").read_text())
    assert rep["energy"]["dissipation_margin"] >= 0
    final = rep["simulation"]["final_state"]
    assert len(final) == 4
    # the source branch forces the first node voltage to zero
    assert abs(final[0]) <= 1e-10
    for suffix in (".json", ".reduced.json", ".trajectory.csv"):
        assert (tmp_path / f"rlc{suffix}").exists()


@pytest.mark.parametrize("argv", [[], ["frobnicate"], ["verify"], ["demo", "nope"],
                                  ["simulate", "x.json", "--h", "abc"]])
def test_usage_errors_exit_2(argv):
    with pytest.raises(SystemExit) as exc:
        main(argv)
    assert exc.value.code == 2
