import csv
import io
import json
import math

import numpy as np
import pytest

from maxregkit import numlin as nl
from maxregkit.cli import main
from maxregkit.driver import (
    CSV_COLUMNS, ConfigError, bench, fit_order, load_config, parse_config, run, strip_volatile, sweep,
)
from maxregkit.presets import laplacian_1d, preset_matrix, random_sectorial
from maxregkit.signal import Grid, preset_signal, save_signal

SCALAR = {"preset": "scalar", "params": {"lambda": 1.0}}


def write(tmp_path, doc, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc) if not isinstance(doc, str) else doc)
    return str(p)


def test_presets():
    lam = np.linalg.eigvalsh(laplacian_1d(3))
    want = 16 * (2 - 2 * np.cos(np.arange(1, 4) * np.pi / 4))
    assert np.allclose(lam, want)
    assert np.array_equal(preset_matrix("jordan_like", {"n": 2, "coupling": 10}), [[1, 10], [0, 1]])
    assert np.array_equal(random_sectorial(4, 3), random_sectorial(4, 3))
    with pytest.raises(ValueError):
        preset_matrix("hilbert")


def test_empty_experiments_exit_zero(tmp_path, capsys):
    out = tmp_path / "r.json"
    code = main(["run", "--config", write(tmp_path, {"generator": SCALAR}), "--out", str(out), "--quiet"])
    assert code == 0
    rep = json.loads(out.read_text())
    assert rep["rows"] == [] and rep["passed"] is True
    assert set(rep["environment"]) == {"version", "timestamp"}


def test_scalar_commutator_row_matches_boundary_prediction():
    cfg = parse_config({"generator": SCALAR, "experiments": ["commutator"]})
    rep = run(cfg)
    (row,) = rep.rows
    assert row["pass"] and rep.exit_code == 0
    assert row["T"] == 20.0 and row["N"] == 2048
    # default bump t0 = 5, w = 0.5; the half-line commutator is -1/2 e^{-t} x with
    # x = ∫ e^{-s} f(s) ds, so ||[M+,M-]f|| / ||f|| = x / (2 sqrt(2) ||f||)
    t0, w = 5.0, 0.5
    x = w * math.sqrt(math.pi / 2) * math.exp(-t0 + w * w / 2) * (1 + math.erf((t0 - w * w) / (w * math.sqrt(2))))
    nf = math.sqrt(w * math.sqrt(math.pi) / 2 * (1 + math.erf(t0 / w)))
    assert row["value"] == pytest.approx(x / (2 * math.sqrt(2) * nf), rel=2e-3)


@pytest.mark.xfail(strict=True, reason="half-line boundary term ~3.6e-3 for the default bump exceeds 1e-3")
def test_scalar_commutator_below_1e3():
    (row,) = run(parse_config({"generator": SCALAR, "experiments": ["commutator"]})).rows
    assert row["value"] <= 1e-3


def test_jordan_norm_equality_fails(tmp_path):
    doc = {
        "generator": {"preset": "jordan_like", "params": {"n": 2, "coupling": 10}},
        "signal": {"preset": "gauss_bump", "params": {"t0": 2.0, "w": 0.5, "direction": [0, 1]}},
        "grid": {"T": 20.0, "N": 2048},
        "experiments": ["norm_equality"],
        "tolerances": {"norm_equality": 5e-3},
    }
    code = main(["run", "--config", write(tmp_path, doc), "--out", str(tmp_path / "r.json"), "--quiet"])
    assert code == 1
    (row,) = json.loads((tmp_path / "r.json").read_text())["rows"]
    assert not row["pass"] and row["value"] >= 0.05


def test_rows_follow_config_order():
    exps = ["funcalc", "residuals", "desimon", "adjoint", "norm_equality", "commutator", "extended_commutator"]
    rep = run(parse_config({"generator": SCALAR, "experiments": exps, "paths": "direct"}))
    assert [r["experiment"] for r in rep.rows] == exps
    assert all(r["pass"] for r in rep.rows)


def test_paths_both_doubles_path_sensitive_rows():
    rep = run(parse_config({"generator": SCALAR, "experiments": ["commutator", "desimon"], "paths": "both"}))
    assert [(r["experiment"], r["path"]) for r in rep.rows] == [
        ("commutator", "direct"), ("commutator", "fourier"), ("desimon", "direct")]


def test_experiment_error_is_recorded_not_raised():
    rep = run(parse_config({"generator": SCALAR, "signal": {"preset": "randsmooth"},
                            "experiments": ["l2_norm", "funcalc"]}))
    assert "error" in rep.rows[0] and not rep.rows[0]["pass"]
    assert rep.rows[1]["pass"]
    assert rep.exit_code == 1


@pytest.mark.parametrize("doc, field", [
    ({"generator": {"preset": "nope"}}, "config.generator.preset"),
    ({"generator": SCALAR, "grid": {"N": 1000}}, "config.grid.N"),
    ({"generator": SCALAR, "grid": {"T": -1}}, "config.grid.T"),
    ({"generator": SCALAR, "experiments": ["fft"]}, "config.experiments[0]"),
    ({"generator": SCALAR, "paths": "all"}, "config.paths"),
    ({"generator": {"preset": "random_sectorial", "params": {"angle": 2.0}}}, "config.generator.params.angle"),
    ({"generator": SCALAR, "tolerances": {"commutator": -1}}, "config.tolerances.commutator"),
    ({"generator": SCALAR, "colour": 1}, "config.colour"),
])
def test_config_field_diagnostics(doc, field):
    with pytest.raises(ConfigError, match=field.replace("[", r"\[").replace("]", r"\]")):
        parse_config(doc)


def test_config_syntax_error_has_line(tmp_path, capsys):
    path = write(tmp_path, '{"generator":\n  {"preset": "scalar",,}}')
    assert main(["run", "--config", path]) == 2
    assert "line 2" in capsys.readouterr().err
    with pytest.raises(ConfigError, match="line 2, column"):
        load_config(path)


def test_missing_config_exit_2(tmp_path):
    assert main(["run", "--config", str(tmp_path / "absent.json"), "--quiet"]) == 2


def test_not_sectorial_exit_3(tmp_path, capsys):
    mat = tmp_path / "a.json"
    nl.save_matrix(mat, np.diag([1.0, 1 + 1e12j]))
    path = write(tmp_path, {"generator": {"file": str(mat)}, "experiments": ["commutator"]})
    assert main(["run", "--config", path, "--quiet"]) == 3
    assert "NotSectorial" in capsys.readouterr().err


def test_files_as_inputs(tmp_path):
    a = random_sectorial(2, 4)
    nl.save_matrix(tmp_path / "a.json", a)
    f = preset_signal("randsmooth", Grid(30.0, 512), 2, seed=1)
    save_signal(tmp_path / "f.json", f)
    cfg = parse_config({"generator": {"file": str(tmp_path / "a.json")},
                        "signal": {"file": str(tmp_path / "f.json")},
                        "experiments": ["residuals"]})
    (row,) = run(cfg).rows
    assert row["N"] == 512 and row["T"] == 30.0 and row["n"] == 2 and row["pass"]


def test_default_horizon():
    cfg = parse_config({"generator": {"preset": "scalar", "params": {"lambda": 0.5}},
                        "signal": {"preset": "exp_decay"}, "experiments": ["desimon"]})
    # max(20/alpha, 10 * support) with support 12/beta
    assert run(cfg).rows[0]["T"] == 120.0


def test_determinism_modulo_volatile_fields(tmp_path):
    doc = {"generator": {"preset": "random_sectorial", "params": {"n": 3}},
           "signal": {"preset": "randsmooth"}, "seed": 7,
           "experiments": ["commutator", "adjoint", "funcalc"], "paths": "both"}
    path = write(tmp_path, doc)
    texts = []
    for k in range(2):
        out = tmp_path / f"r{k}.json"
        main(["run", "--config", path, "--out", str(out), "--quiet"])
        texts.append(json.loads(out.read_text()))
    assert json.dumps(strip_volatile(texts[0]), sort_keys=True) == json.dumps(strip_volatile(texts[1]), sort_keys=True)
    assert texts[0]["rows"][0]["wall_time_s"] >= 0


def test_seed_override_changes_signal(tmp_path):
    doc = {"generator": {"preset": "random_sectorial", "params": {"n": 2}},
           "signal": {"preset": "randsmooth"}, "experiments": ["commutator"]}
    path = write(tmp_path, doc)
    vals = []
    for seed in ("1", "2"):
        out = tmp_path / f"s{seed}.json"
        main(["run", "--config", path, "--out", str(out), "--seed", seed, "--quiet"])
        rep = json.loads(out.read_text())
        assert rep["config"]["seed"] == int(seed)
        vals.append(rep["rows"][0]["value"])
    assert vals[0] != vals[1]


def test_csv_columns(tmp_path):
    path = write(tmp_path, {"generator": SCALAR, "experiments": ["commutator", "desimon"]})
    out = tmp_path / "r.csv"
    assert main(["run", "--config", path, "--out", str(out), "--format", "csv", "--quiet"]) == 0
    rows = list(csv.reader(io.StringIO(out.read_text())))
    assert tuple(rows[0]) == CSV_COLUMNS
    assert CSV_COLUMNS == ("experiment", "operator", "path", "N", "T", "n", "alpha", "value",
                           "tail_bound", "wall_time_s", "pass")
    assert len(rows) == 3 and rows[1][0] == "commutator" and rows[1][-1] == "True"


def test_stdout_output(tmp_path, capsys):
    path = write(tmp_path, {"generator": SCALAR, "experiments": ["funcalc"]})
    assert main(["run", "--config", path, "--quiet"]) == 0
    assert json.loads(capsys.readouterr().out)["rows"][0]["experiment"] == "funcalc"


def test_tolerances_echoed():
    rep = run(parse_config({"generator": SCALAR, "tolerances": {"commutator": 1e-6}}))
    assert rep.config["tolerances"]["commutator"] == 1e-6
    assert rep.config["tolerances"]["funcalc"] == 1e-9


def test_sweep_l2_norm_order():
    cfg = parse_config({"generator": SCALAR, "signal": {"preset": "exp_decay", "params": {"direction": [1]}},
                        "grid": {"T": 40.0}, "experiments": ["l2_norm"]})
    rep = sweep(cfg, [512, 1024, 2048])
    order = [r for r in rep.rows if r["experiment"] == "l2_norm:order"][0]
    assert order["value"] == pytest.approx(2.0, abs=0.1) and order["pass"]
    assert [r["N"] for r in rep.rows[:3]] == [512, 1024, 2048]


def test_single_n_sweep_is_run():
    cfg = parse_config({"generator": SCALAR, "experiments": ["commutator", "funcalc"]})
    a = sweep(cfg, [1024])
    b = run(parse_config({"generator": SCALAR, "experiments": ["commutator", "funcalc"], "grid": {"N": 1024}}))
    strip = lambda rows: [{k: v for k, v in r.items() if k != "wall_time_s"} for r in rows]
    assert strip(a.rows) == strip(b.rows)


def test_sweep_rejects_unsorted():
    with pytest.raises(ConfigError):
        sweep(parse_config({"generator": SCALAR}), [1024, 512])


def test_fit_order():
    assert fit_order([1, 2, 4], [1.0, 0.25, 0.0625]) == pytest.approx(2.0)


def test_bench_single_cell():
    cfg = parse_config({"generator": {"preset": "random_sectorial", "params": {"n": 2}}})
    rep = bench(cfg, [256], [2])
    (row,) = rep.rows
    assert row["path"] == "both" and row["pass"]
    assert {"direct_s", "fourier_s", "ratio"} <= set(row["details"])


def test_bench_cli(tmp_path):
    path = write(tmp_path, {"generator": {"preset": "random_sectorial", "params": {"n": 2}}})
    out = tmp_path / "b.json"
    code = main(["bench", "--config", path, "--N", "256", "512", "--n", "2", "--out", str(out), "--quiet"])
    rep = json.loads(out.read_text())
    assert rep["kind"] == "bench" and len(rep["rows"]) == 3
    assert rep["rows"][-1]["experiment"] == "bench:ratio_trend"
    assert code in (0, 1)
