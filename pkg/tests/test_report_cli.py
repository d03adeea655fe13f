import json
import os

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from twistcoh import cli
from twistcoh.report import BettiReport, SpectrumEntry, from_json, spectra_csv, to_json

T3A = {"backend": "mapping_torus", "model": {"matrix": [[2, 1], [1, 1]]}}


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(0, 5), max_size=4),
       st.dictionaries(st.sampled_from(["a", "b", "c"]), st.floats(0, 1, allow_nan=False)),
       st.lists(st.floats(-10, 10, allow_nan=False), max_size=5))
def test_report_round_trip(dims, residuals, eigs):
    rep = BettiReport("torus", dims=dims, seed=3)
    for k, v in residuals.items():
        rep.add_check(k, v, 0.5)
    rep.spectra = [SpectrumEntry("(0,)", 0, e) for e in eigs]
    text = to_json(rep)
    assert to_json(from_json(text)) == text
    assert from_json(text).passed == rep.passed


def test_empty_spectrum_csv_is_header_only():
    assert spectra_csv(BettiReport("torus")) == "mode,degree,eigenvalue\n"


def test_failed_check_marks_report():
    rep = BettiReport("torus")
    rep.add_check("x", 2.0, 1.0)
    assert not rep.passed and rep.failures() == ["x"]
    assert json.loads(to_json(rep))["status"] == "FAILED"


def test_overrides_parse_json_values():
    raw = cli.apply_overrides({"model": {"q": 2}}, ["model.q=3", "twist.constant=[1, 0, 0]", "output.name=x"])
    assert raw == {"model": {"q": 3}, "twist": {"constant": [1, 0, 0]}, "output": {"name": "x"}}
    with pytest.raises(cli.ConfigError):
        cli.apply_overrides({}, ["novalue"])


@pytest.mark.parametrize("raw,key", [
    ({"backend": "sphere"}, "backend"),
    ({}, "backend"),
    ({"backend": "torus", "cutoff": 0}, "cutoff"),
    ({"backend": "torus", "tolerances": {"rank": -1}}, "tolerances.rank"),
    ({"backend": "torus", "colour": 1}, "colour"),
    ({"backend": "torus", "workers": 0}, "workers"),
])
def test_config_validation(raw, key):
    with pytest.raises(cli.ConfigError) as err:
        cli.RunConfig.from_dict(raw)
    assert err.value.key == key


def test_verb_backend_mismatch():
    with pytest.raises(cli.ConfigError):
        cli.run("scan", {"backend": "torus", "model": {"q": 2}})


def test_cutoff_below_bound_is_a_config_error():
    with pytest.raises(cli.ConfigError) as err:
        cli.run("betti", {"backend": "torus", "model": {"q": 2}, "twist": {"constant": [40.0, 0.0]}, "cutoff": 1})
    assert err.value.key == "cutoff"


def run_main(tmp_path, monkeypatch, capsys, argv):
    monkeypatch.setenv(cli.OUTPUT_ENV, str(tmp_path))
    code = cli.main(argv)
    return code, json.loads(capsys.readouterr().out.strip().splitlines()[-1])


def test_main_minimal_torus(tmp_path, monkeypatch, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"backend": "torus", "model": {"q": 2}, "twist": {"constant": [0, 0]}, "cutoff": 4}))
    code, out = run_main(tmp_path, monkeypatch, capsys, ["betti", "--config", str(cfg)])
    assert code == 0 and out["dims"] == [1, 2, 1]
    csv_text = (tmp_path / "betti-torus.csv").read_text()
    assert sum(1 for ln in csv_text.splitlines() if ln.startswith('"(0, 0)"') and ln.endswith(",0.0")) == 4


def test_main_unknown_backend(tmp_path, monkeypatch, capsys):
    code, out = run_main(tmp_path, monkeypatch, capsys, ["betti", "--set", "backend=sphere"])
    assert code == 2
    assert out["status"] == "ERROR" and out["error"]["key"] == "backend"


def test_main_missing_config_file(tmp_path, monkeypatch, capsys):
    code, out = run_main(tmp_path, monkeypatch, capsys, ["betti", "--config", str(tmp_path / "nope.json")])
    assert code == 2 and out["error"]["key"] == "config"


def test_bundled_golden(tmp_path, monkeypatch, capsys):
    code, out = run_main(tmp_path, monkeypatch, capsys, ["betti", "--config", "bundled:t3a_golden"])
    assert code == 0
    rep = json.loads((tmp_path / "t3a-golden.json").read_text())
    assert [g["dims"] for _, g in sorted(rep["golden"].items(), key=lambda kv: kv[1]["c"])] == \
        [[0, 1, 1], [1, 1, 0], [0, 0, 0]]


def test_golden_mismatch_fails(tmp_path, monkeypatch, capsys):
    golden = tmp_path / "g.json"
    golden.write_text(json.dumps({"entries": [{"label": "0", "c": 0, "dims": [0, 0, 0]}]}))
    cfg = dict(T3A, golden=str(golden))
    (tmp_path / "c.json").write_text(json.dumps(cfg))
    code, out = run_main(tmp_path, monkeypatch, capsys, ["betti", "--config", str(tmp_path / "c.json")])
    assert code == 1 and out["failures"] == ["golden:0"]


def test_determinism(tmp_path, monkeypatch, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps(dict(T3A, twist={"c": 0.3}, samples=5)))
    first = tmp_path / "a"
    second = tmp_path / "b"
    for d in (first, second):
        monkeypatch.setenv(cli.OUTPUT_ENV, str(d))
        assert cli.main(["verify", "--config", str(cfg)]) == 0
    capsys.readouterr()
    assert (first / "verify-mapping_torus.json").read_bytes() == (second / "verify-mapping_torus.json").read_bytes()


def test_timings_are_opt_in():
    plain = cli.run("betti", {"backend": "torus", "model": {"q": 1}})
    timed = cli.run("betti", {"backend": "torus", "model": {"q": 1}, "timings": True})
    assert plain.timings == {} and "wall_seconds" in timed.timings
    assert "timings" not in json.loads(to_json(plain))


def test_gate_verbs():
    assert cli.run("gate", {"backend": "lie_gate", "model": {"algebra": "o3"}, "expect": True}).passed
    flat = cli.run("gate", {"backend": "lie_gate", "model": {"kind": "flat_torus", "q": 3}})
    assert flat.gates["positivity"]["passed"] is False
    hyp = cli.run("gate", {"backend": "lie_gate", "model": {"kind": "mapping_torus",
                                                           "mapping_torus": {"matrix": [[2, 1], [1, 1]]}}})
    assert hyp.gates["positivity"]["passed"] is False


def test_lcs_verb_with_expectation():
    rep = cli.run("lcs", {"backend": "lcs_check", "model": {"q": 4}, "twist": {"constant": [1, 0, 0, 0]},
                          "expect": False})
    assert rep.passed and rep.gates["lcs"]["failure"] == "not twisted-closed"


def test_simplicial_verb():
    rep = cli.run("betti", {"backend": "simplicial", "model": {"complex": "torus7"},
                            "twist": {"holonomy": ["log:2", "0"]}})
    assert rep.dims == [0, 0, 0] and rep.passed
    assert rep.residuals["d_squared"].tolerance == 0.0


def test_parallel_scan_matches_serial():
    raw = dict(T3A, scan={"linspace": [-1, 1, 3]})
    serial = cli.run("scan", raw)
    parallel = cli.run("scan", dict(raw, workers=2))
    assert serial.extras["scan"] == parallel.extras["scan"]


def test_env_var_overrides_output_dir(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUTPUT_ENV, str(tmp_path / "env"))
    cfg = cli.RunConfig.from_dict({"backend": "torus", "output": {"dir": str(tmp_path / "cfg")}})
    assert cli.output_path(cfg, "betti").parent == tmp_path / "env"
    monkeypatch.delenv(cli.OUTPUT_ENV)
    assert cli.output_path(cfg, "betti").parent == tmp_path / "cfg"
    assert os.fspath(cli.output_path(cfg, "betti")).endswith("betti-torus")
