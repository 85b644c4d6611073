import json

import pytest

from novikov.cli import RunConfig, main, run

FIB = '{"h": [[1, 1], [1, 0]], "lambda": [1, 0], "p": [1, 0], "m": 0}'


def call(capsys, *argv):
    status = main(list(argv))
    return status, capsys.readouterr().out


def test_transfer_fibonacci(capsys, tmp_path):
    path = tmp_path / "fib.json"
    path.write_text(FIB)
    status, out = call(capsys, "transfer", "--input", str(path))
    rep = json.loads(out)
    assert status == 0
    assert rep["P"] == ["1"] and rep["Q"] == ["1", "-1", "-1"] and rep["oracle_match"] is True


def test_transfer_malformed(capsys):
    status, out = call(capsys, "transfer", "--input", '{"h": [[1, 2]], "lambda": [1], "p": [1]}')
    assert status == 2 and "error" in json.loads(out)
    status, _ = call(capsys, "transfer", "--input", "{not json")
    assert status == 2
    status, _ = call(capsys, "transfer", "--input", '{"h": [[1]], "lambda": [1], "p": [1], "torsion": [2]}')
    assert status == 2


def test_quickness(capsys):
    status, out = call(capsys, "flow", "quickness", "--N", "3", "--beta", "1")
    rep = json.loads(out)
    assert status == 0 and rep["quickness"] == 25 and rep["constant_le_8"]


def test_series_fit_nofit_is_data(capsys):
    status, out = call(capsys, "series", "fit", "--input", "[0,1,0,0,1,0,0,0,0,1,0,0]", "--max-deg", "3")
    assert status == 0 and json.loads(out)["fit"] is None


def test_series_round_trip(capsys):
    _, out = call(capsys, "series", "expand", "--input", '{"P": ["1"], "m": 0, "Q": ["1", "-1", "-1"]}',
                  "--terms", "10")
    series = json.loads(out)["series"]
    _, out = call(capsys, "series", "fit", "--input", json.dumps(series), "--max-deg", "2")
    assert json.loads(out)["fit"] == {"P": ["1"], "m": 0, "Q": ["1", "-1", "-1"]}


def test_flow_sweeps_and_determinism(capsys):
    for action in ("annulus", "lens", "aconstruction"):
        s1, a = call(capsys, "flow", action, "--samples", "20", "--seed", "5")
        s2, b = call(capsys, "flow", action, "--samples", "20", "--seed", "5")
        assert s1 == s2 == 0 and a == b
        assert json.loads(a)["violations"] == []


def test_flow_csv(capsys):
    status, out = call(capsys, "flow", "lens", "--samples", "3", "--format", "csv")
    lines = out.strip().splitlines()
    assert status == 0 and lines[0].startswith("id,") and len(lines) == 4


def test_violation_exit_code():
    status, text = run(RunConfig("flow", "annulus", samples=10, tolerance=-10.0))
    assert status == 1 and json.loads(text)["violations"]


def test_stability_commands(capsys):
    assert call(capsys, "stability", "gronwall")[0] == 0
    status, out = call(capsys, "stability", "crossing", "--delta", "1e-3")
    assert status == 0 and json.loads(out)["deviation"] < 1e-3
    assert call(capsys, "stability", "reach", "--delta", "1e-3")[0] == 0
    status, out = call(capsys, "stability", "reach", "--delta", "0.5")
    assert status == 1 and json.loads(out)["w_failures"]


def test_output_file(tmp_path, capsys):
    out = tmp_path / "r.json"
    assert main(["flow", "quickness", "--N", "1", "--output", str(out)]) == 0
    assert json.loads(out.read_text())["quickness"] == 8


def test_help_lists_knobs(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["torus", "--help"])
    assert exc.value.code == 0
    text = capsys.readouterr().out
    for knob in ("--amplitude", "--terms", "--rays", "--step", "--seed"):
        assert knob in text


def test_torus(capsys):
    status, out = call(capsys, "torus", "--terms", "8")
    rep = json.loads(out)
    assert status == 0 and rep["d_squared_ok"] and rep["euler_characteristic"] == 0
    assert set(rep) >= {"critical_points", "counts", "fitted", "d_squared_ok", "growth"}
