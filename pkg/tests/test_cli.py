import json
import math

import pytest

from isoscurv.cli import dumps_report, make_rng, record, run

NO_DOMAIN = ["--param", 'sigma={"poly": [[[0, 0], 1.0]]}', "--param", 'xi={"poly": [[[0, 0], 1.0]]}',
             "--param", "eta=0", "--param", 'phi={"variant": "randers"}']


def run_json(argv, capsys):
    code = run(argv)
    out = capsys.readouterr().out
    return code, (json.loads(out) if out else None), out


def by_name(report):
    return {r["name"]: r for r in report["records"]}


def test_verify_example_passes(capsys):
    code, rep, _ = run_json(["verify-example", "--name", "example-1-1", "--points", "40"], capsys)
    assert code == 0 and rep["summary"]["pass"]
    assert all(r["pass"] for r in rep["records"])
    s = by_name(rep)["S = 0 on random (x, y)"]
    assert s["residual"] <= 1e-6 and s["tolerance"] == 1e-6


def test_series_audit_record(capsys):
    code, rep, _ = run_json(["series-audit", "--phi", "class-iv", "--k1", "0", "--k2", "4", "--order", "12"], capsys)
    assert code == 0
    assert by_name(rep)["gamma18: k=c=eps=nu=0"]["pass"]


@pytest.mark.parametrize(
    "argv,code",
    [
        (["verify-example", "--name", "no-such"], 2),
        (["no-such-command"], 2),
        (["series-audit", "--phi", "class-iv", "--k1", "0", "--k2", "4", "--order", "6"], 2),
        (["series-audit", "--phi", "class-iv", "--k1", "4", "--k2", "0"], 2),
        (["classify", "--name", "flat-parallel", "--expect", "iv", "--points", "5"], 1),
        (["classify", "--name", "flat-parallel", "--expect", "iii", "--points", "5"], 0),
        (["regularity", "--phi", "randers", "--b0", "0.5,1.5"], 1),
        (["regularity", "--phi", "class-iv", "--k1", "0", "--k2", "4"], 0),
        (["fb-check", "--phi", "randers"], 0),
        (["s-curvature", "--name", "conformal-general"] + NO_DOMAIN, 3),
    ],
)
def test_exit_codes(argv, code, capsys):
    assert run(argv) == code
    capsys.readouterr()


def test_usage_error_names_problem(capsys):
    assert run(["verify-example", "--name", "no-such"]) == 2
    assert "no-such" in capsys.readouterr().err


def test_summary_pass_iff_every_record_passes(capsys):
    code, rep, _ = run_json(["regularity", "--phi", "randers", "--b0", "0.5,1.5"], capsys)
    passes = [r["pass"] for r in rep["records"]]
    assert passes == [True, False]
    assert rep["summary"]["pass"] is False and rep["summary"]["failed"] == ["regular for b < 1.5"]


def test_reports_are_byte_identical(capsys):
    argv = ["s-curvature", "--name", "example-5-1", "--points", "6", "--seed", "11"]
    _, _, a = run_json(argv, capsys)
    _, _, b = run_json(argv, capsys)
    assert a == b
    _, _, c = run_json(argv[:-1] + ["12"], capsys)
    assert c != a


def test_report_metadata(capsys):
    _, rep, text = run_json(["classify", "--name", "example-1-1", "--points", "5", "--seed", "3"], capsys)
    assert rep["rng"] == {"name": "numpy.PCG64", "seed": 3}
    assert rep["tool"] == "isoscurv" and rep["command"] == "classify"
    assert rep["config"]["name"] == "example-1-1"
    for r in rep["records"]:
        assert set(r) == {"name", "inputs", "values", "residual", "tolerance", "pass"}
    assert text == dumps_report(rep)


def test_config_overrides_flags(tmp_path, capsys):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"command": "regularity", "b0": "0.5,1.5"}))
    assert run(["regularity", "--phi", "randers", "--b0", "0.5", "--config", str(cfg)]) == 1
    rep = json.loads(capsys.readouterr().out)
    assert rep["config"]["b0"] == "0.5,1.5"


@pytest.mark.parametrize("payload,needle", [
    ({"no_such_key": 1}, "no_such_key"),
    ({"command": "classify"}, "command"),
    ([1, 2], "object"),
])
def test_bad_config(tmp_path, capsys, payload, needle):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps(payload))
    assert run(["regularity", "--phi", "randers", "--config", str(cfg)]) == 2
    assert needle in capsys.readouterr().err


def test_unreadable_config(tmp_path, capsys):
    assert run(["regularity", "--phi", "randers", "--config", str(tmp_path / "missing.json")]) == 2
    bad = tmp_path / "x.json"
    bad.write_text("{not json")
    assert run(["regularity", "--phi", "randers", "--config", str(bad)]) == 2
    capsys.readouterr()


def test_out_file(tmp_path, capsys):
    out = tmp_path / "report.json"
    assert run(["fb-check", "--phi", "class-iv", "--k1", "0", "--k2", "4", "--out", str(out)]) == 0
    assert capsys.readouterr().out == ""
    rep = json.loads(out.read_text(encoding="utf-8"))
    assert rep["summary"]["pass"]


def test_float_formatting():
    rep = {"b": 0.1, "a": [math.inf, -math.inf, math.nan], "c": 1 / 3}
    text = dumps_report(rep)
    assert text.index('"a"') < text.index('"b"') < text.index('"c"')
    assert "0.10000000000000001" in text and "0.33333333333333331" in text
    assert json.loads(text)["a"] == ["inf", "-inf", "nan"]


def test_record_never_passes_on_nan():
    assert record("x", {}, {}, math.nan, 1.0)["pass"] is False
    assert record("x", {}, {}, 0.5, 1.0)["pass"] is True


def test_rng_is_pcg64():
    a, b = make_rng(5), make_rng(5)
    assert a.uniform() == b.uniform()
    assert type(a.bit_generator).__name__ == "PCG64"


def test_version_flag(capsys):
    assert run(["--version"]) == 0
    assert "isoscurv" in capsys.readouterr().out
