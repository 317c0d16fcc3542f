import json
import math
from pathlib import Path

import numpy as np
import pytest

from tripartite.analysis import EitSpectrum, TimeSeries
from tripartite.cli import main
from tripartite.config import ConfigError, load_config, validate_dict
from tripartite.io import emit_csv, read_csv

ROOT = Path(__file__).resolve().parent.parent
PRESETS = ROOT / "presets"
GOLDEN = Path(__file__).parent / "golden"


def run_cli(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def error_report(err):
    rep = json.loads(err.strip().splitlines()[-1])
    assert rep["status"] == "error"
    return rep


def test_missing_field2_named(capsys, tmp_path):
    code, _, err = run_cli(capsys, "evolve", "--out", tmp_path,
                           "--override", 'field1.kind="coherent"',
                           "--override", "times.stop=1.0")
    assert code != 0
    rep = error_report(err)
    assert rep["kind"] == "config"
    assert any(e.startswith("field2") for e in rep["errors"])


def test_every_violation_listed():
    raw = {"experiment": "kappa_sweep", "bogus": 1, "params": {"chi1": "x"}}
    with pytest.raises(ConfigError) as exc:
        validate_dict(raw)
    msgs = exc.value.errors
    for key in ("field1", "field2", "times", "kappa_sweep", "bogus", "params.chi1"):
        assert any(m.startswith(key) for m in msgs), key
    assert len(msgs) >= 6


def test_unknown_nested_key_rejected(tmp_path):
    p = tmp_path / "c.toml"
    p.write_text('experiment = "evolve"\n[field1]\nkind = "fock"\nfock_n = 2\ncolour = 3\n')
    with pytest.raises(ConfigError) as exc:
        load_config(p)
    assert any("field1.colour" in m for m in exc.value.errors)


def test_overrides_and_name_default():
    cfg, raw = load_config(PRESETS / "fig5a.toml", ["params.chi1=2.5", "times.samples=11"])
    assert cfg.params.chi1 == 2.5 and cfg.times.samples == 11
    assert raw["params"]["chi1"] == 2.5
    assert cfg.name == "fig5a"


def test_subcommand_mismatch(capsys, tmp_path):
    code, _, err = run_cli(capsys, "eit", "--config", PRESETS / "fig5a.toml", "--out", tmp_path)
    assert code == 2
    assert "subcommand" in error_report(err)["errors"][0]


def test_missing_config_file(capsys, tmp_path):
    code, _, err = run_cli(capsys, "evolve", "--config", tmp_path / "nope.toml")
    assert code != 0 and error_report(err)["kind"] == "io"


def test_cutoff_error_reported(capsys, tmp_path):
    code, _, err = run_cli(capsys, "evolve", "--config", PRESETS / "fig8a.toml", "--out", tmp_path,
                           "--override", "cutoff_epsilon=1e-12", "--override", "times.samples=3")
    assert code == 3 and error_report(err)["kind"] == "CutoffError"


@pytest.mark.slow
def test_validate_seed_42(capsys, tmp_path):
    code, out, _ = run_cli(capsys, "validate", "--config", PRESETS / "validate.toml", "--out", tmp_path)
    rep = json.loads(out.strip().splitlines()[-1])
    assert code == 0 and rep["passed"] and rep["seed"] == 42 and rep["cases"] == 100
    assert rep["max_infidelity"] <= 1e-8
    assert json.loads((tmp_path / "validate.json").read_text())["passed"]


def short_fig5a(capsys, out):
    code, _, _ = run_cli(capsys, "evolve", "--config", PRESETS / "fig5a.toml", "--out", out,
                         "--override", "times.stop=20.0", "--override", "times.samples=41")
    assert code == 0
    return out / "fig5a.csv"


def test_evolve_matches_golden(capsys, tmp_path):
    path = short_fig5a(capsys, tmp_path)
    header = path.read_text().splitlines()[0]
    assert header == "t,mean_n1,var_n1,mandel_q1,mean_n2,pop1,pop2,pop3,svne"
    got, ref = read_csv(path), read_csv(GOLDEN / "fig5a_short.csv")
    for col in ref:
        assert np.allclose(got[col], ref[col], rtol=1e-10, atol=1e-10), col
    meta = json.loads(Path(str(path) + ".json").read_text())
    assert meta["cutoffs"] == [48, 48]
    assert meta["params"]["chi1"] == 5.0 and "code_version" in meta


def test_bit_identical_reruns(capsys, tmp_path):
    a = short_fig5a(capsys, tmp_path / "a").read_bytes()
    b = short_fig5a(capsys, tmp_path / "b").read_bytes()
    assert a == b


def test_eit_scan_files(capsys, tmp_path):
    code, _, _ = run_cli(capsys, "eit", "--config", PRESETS / "fig1d.toml", "--out", tmp_path,
                         "--override", "eit.delta1.samples=5", "--threads", "2")
    assert code == 0
    names = sorted(p.name for p in tmp_path.glob("*.csv"))
    assert names == ["fig1d_alpha_sq-0.csv", "fig1d_alpha_sq-10.csv", "fig1d_alpha_sq-18.csv"]
    metas = [json.loads((tmp_path / (n + ".json")).read_text()) for n in names]
    # a single instant is shared by every scan point
    assert len({m["t_star"] for m in metas}) == 1
    assert metas[0]["collapse_overlap"][0] < metas[0]["t_star"] < metas[0]["collapse_overlap"][1]
    assert list(read_csv(tmp_path / names[0])) == ["delta1", "mean_n1_at_tstar"]


def test_kappa_sweep_cli(capsys, tmp_path):
    code, _, _ = run_cli(capsys, "kappa-sweep", "--config", PRESETS / "fig10_sweep.toml",
                         "--out", tmp_path, "--override", "times.stop=20.0",
                         "--override", "times.samples=201", "--override", "detector.window=2.0",
                         "--override", "kappa_sweep.kappas=[0.0, 1.0]")
    assert code == 0
    cols = read_csv(tmp_path / "fig10_sweep.csv")
    assert list(cols) == ["t", "svne_kappa=0", "svne_kappa=1"]
    meta = json.loads((tmp_path / "fig10_sweep.csv.json").read_text())
    assert [s["kappa"] for s in meta["summary"]] == [0.0, 1.0]


def test_emit_empty_series(tmp_path):
    p = emit_csv(TimeSeries([], [], "svne"), tmp_path / "e.csv")
    assert p.read_bytes() == b"t,svne\n"


def test_emit_eit_spectrum_sidecar(tmp_path):
    spec = EitSpectrum([-1.0, 0.0, 1.0], [1.0, 2.0, 1.0], 8.5, context={"chi1": 0.0})
    p = emit_csv(spec, tmp_path / "s.csv")
    assert p.read_text().splitlines()[0] == "delta1,mean_n1_at_tstar"
    meta = json.loads((tmp_path / "s.csv.json").read_text())
    assert meta["t_star"] == 8.5 and meta["context"] == {"chi1": 0.0}


def test_emit_round_trip(tmp_path):
    rng = np.random.default_rng(3)
    vals = rng.normal(size=50) * 10.0 ** rng.integers(-8, 8, 50)
    cols = {"t": np.linspace(0, 1, 50), "x": vals, "y": np.full(50, math.pi)}
    back = read_csv(emit_csv(cols, tmp_path / "r.csv"))
    for k in cols:
        # half a unit in the twelfth significant digit
        assert np.allclose(back[k], cols[k], rtol=5e-12, atol=0)
    # values already at twelve digits are fixed points
    again = read_csv(emit_csv(back, tmp_path / "r2.csv"))
    assert all(np.array_equal(again[k], back[k]) for k in cols)
    raw = (tmp_path / "r.csv").read_bytes()
    assert b"\r" not in raw and raw.endswith(b"\n")


def test_presets_all_parse():
    files = sorted(PRESETS.glob("*.toml"))
    assert len(files) >= 30
    for f in files:
        load_config(f)
