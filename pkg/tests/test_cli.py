import csv
import json

import numpy as np
import pytest

from rshdmr import datasets as ds
from rshdmr.cli import main
from rshdmr.hdmr import rmse


def write_config(path, **sections):
    lines = []
    for section, values in sections.items():
        lines.append(f"[{section}]")
        lines += [f"{k} = {v}" for k, v in values.items()]
    path.write_text("\n".join(lines) + "\n")
    return path


def read_rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture
def generated(tmp_path):
    cfg = write_config(tmp_path / "gen.ini", datasets={"generator": "additive", "n": 400, "d": 3,
                                                       "missing_per_column": 20},
                       run={"seed": 7, "out": "gen"})
    assert main(["gen", "--config", str(cfg)]) == 0
    return tmp_path / "gen"


class TestGen:
    def test_files_and_holes(self, generated):
        data = ds.load_csv(generated / "data.csv")
        assert (data.M, data.D) == (400, 3)
        assert data.missing_mask.sum(axis=0).tolist() == [20, 20, 20]
        truth = ds.MissingRecord.load(generated / "truth.csv", data.column_names)
        assert len(truth) == 60
        clean = ds.gen_additive(400, 3, 7)
        np.testing.assert_array_equal(clean.X[truth.rows, truth.columns], truth.values)

    def test_same_seed_same_bytes(self, tmp_path):
        outs = []
        for name in ("a", "b"):
            assert main(["gen", "--seed", "3", "--out", str(tmp_path / name)] +
                        ["--config", str(write_config(tmp_path / f"{name}.ini",
                                                      datasets={"generator": "quartic", "n": 50}))]) == 0
            outs.append((tmp_path / name / "data.csv").read_bytes())
        assert outs[0] == outs[1]

    def test_records_effective_config(self, generated):
        text = (generated / "run_config.ini").read_text()
        assert "generator = additive" in text and "seed = 7" in text


class TestPipeline:
    def test_fit_predict_reproduces_training_rmse(self, tmp_path):
        cfg = write_config(tmp_path / "g.ini", datasets={"generator": "coupled", "n": 120}, run={"out": "d"})
        assert main(["gen", "--config", str(cfg)]) == 0
        fit_cfg = write_config(tmp_path / "f.ini", datasets={"path": "d/data.csv"},
                               projection={"matrices": "1d"}, hdmr={"cycles": 20}, run={"out": "m"})
        assert main(["fit", "--config", str(fit_cfg)]) == 0
        report = json.loads((tmp_path / "m" / "fit_report.json").read_text())
        assert len(read_rows(tmp_path / "m" / "history.csv")) == 20
        assert main(["predict", "--config", str(fit_cfg), "--model", str(tmp_path / "m" / "model.npz"),
                     "--out", str(tmp_path / "p")]) == 0
        rows = read_rows(tmp_path / "p" / "predictions.csv")
        true = np.array([float(r["true"]) for r in rows])
        pred = np.array([float(r["predicted"]) for r in rows])
        assert all(float(r["std"]) >= 0 for r in rows)
        assert rmse(pred, true) == pytest.approx(report["rmse_train_raw"], abs=1e-10)
        assert main(["eval", "--config", str(fit_cfg), "--model", str(tmp_path / "m" / "model.npz"),
                     "--out", str(tmp_path / "e")]) == 0
        metrics = json.loads((tmp_path / "e" / "metrics.json").read_text())
        assert metrics["rmse"] == pytest.approx(report["rmse_train"], abs=1e-10)

    def test_impute_and_eval(self, generated, tmp_path):
        fit_cfg = write_config(tmp_path / "fit.ini", datasets={"path": "gen/data.csv", "scale": "none",
                                                               "train_size": 100},
                               run={"out": "model"})
        assert main(["fit", "--config", str(fit_cfg)]) == 0
        model = tmp_path / "model" / "model.npz"
        imp_cfg = write_config(tmp_path / "imp.ini",
                               datasets={"path": "gen/data.csv", "truth_path": "gen/truth.csv"},
                               imputation={"delta": 0.0, "subintervals": 1000,
                                           "report": "imp/imputation_report.csv"},
                               run={"out": "imp"})
        assert main(["impute", "--config", str(imp_cfg), "--model", str(model)]) == 0
        report_rows = read_rows(tmp_path / "imp" / "imputation_report.csv")
        assert len(report_rows) == 60
        raw = ds.load_csv(tmp_path / "gen" / "data.csv")
        done = ds.load_csv(tmp_path / "imp" / "completed.csv")
        assert not done.has_missing()
        keep = ~raw.missing_mask
        np.testing.assert_array_equal(done.X[keep], raw.X[keep])
        assert main(["eval", "--config", str(imp_cfg), "--out", str(tmp_path / "ev")]) == 0
        metrics = json.loads((tmp_path / "ev" / "metrics.json").read_text())
        assert set(metrics["imputation"]) == {"x1", "x2", "x3"}
        for entry in metrics["imputation"].values():
            assert entry["count"] == 20 and entry["rmse"] <= 0.01

    def test_zero_holes_passthrough(self, tmp_path):
        cfg = write_config(tmp_path / "g.ini", datasets={"generator": "power", "n": 80}, run={"out": "d"})
        assert main(["gen", "--config", str(cfg)]) == 0
        fit_cfg = write_config(tmp_path / "f.ini", datasets={"path": "d/data.csv"},
                               hdmr={"cycles": 5}, run={"out": "m"})
        assert main(["fit", "--config", str(fit_cfg)]) == 0
        assert main(["impute", "--config", str(fit_cfg), "--model", str(tmp_path / "m" / "model.npz"),
                     "--out", str(tmp_path / "i")]) == 0
        raw = ds.load_csv(tmp_path / "d" / "data.csv")
        done = ds.load_csv(tmp_path / "i" / "completed.csv")
        np.testing.assert_array_equal(done.X, raw.X)
        np.testing.assert_array_equal(done.y, raw.y)
        assert read_rows(tmp_path / "i" / "imputation_report.csv") == []

    def test_experiment_deterministic(self, tmp_path):
        for name in ("a", "b"):
            assert main(["eval", "--experiment", "uneven", "--seed", "2", "--out", str(tmp_path / name)]) == 0
        a = (tmp_path / "a" / "metrics.json").read_bytes()
        assert a == (tmp_path / "b" / "metrics.json").read_bytes()
        assert json.loads(a)["rmse_x1"] <= 0.05


class TestDiagnostics:
    @pytest.mark.parametrize("sections,fragment", [
        ({"gpr": {"length_scale": -1}}, "gpr.length_scale"),
        ({"hdmr": {"scale_start": 0}}, "hdmr.scale_start"),
        ({"hdmr": {"cyles": 3}}, "hdmr.cyles"),
        ({"optimizer": {"x": 1}}, "optimizer"),
        ({"datasets": {"path": "nowhere.csv"}}, "datasets.path"),
        ({"datasets": {"path": "d.csv"}, "projection": {"matrices": "[[1],[0]]"}}, "projection.matrices"),
        ({"imputation": {"brackets": "maybe"}}, "imputation.brackets"),
    ])
    def test_fit_names_field(self, tmp_path, capsys, sections, fragment):
        ds.save_csv(ds.gen_additive(20, 3, 0), tmp_path / "d.csv")
        sections.setdefault("datasets", {}).setdefault("path", "d.csv")
        cfg = write_config(tmp_path / "c.ini", **sections)
        assert main(["fit", "--config", str(cfg), "--out", str(tmp_path / "o")]) != 0
        assert fragment in capsys.readouterr().err

    def test_missing_model(self, tmp_path, capsys):
        assert main(["predict", "--out", str(tmp_path)]) != 0
        assert "--model" in capsys.readouterr().err

    def test_gen_needs_generator(self, tmp_path, capsys):
        assert main(["gen", "--out", str(tmp_path)]) != 0
        assert "datasets.generator" in capsys.readouterr().err

    def test_malformed_csv_located(self, tmp_path, capsys):
        (tmp_path / "bad.csv").write_text("a,b,y\n1,2,3\n1,oops,3\n")
        assert main(["fit", "--data", str(tmp_path / "bad.csv"), "--out", str(tmp_path / "o")]) != 0
        err = capsys.readouterr().err
        assert "bad.csv:3" in err and "'b'" in err


CONFIG_DIR = __import__("pathlib").Path(__file__).parent.parent / "configs"


@pytest.mark.parametrize("path", sorted(CONFIG_DIR.glob("*.ini")), ids=lambda p: p.name)
def test_shipped_configs_parse(path):
    from rshdmr.config import load_config
    cfg = load_config(path)
    if cfg.path is None and cfg.generator is None:
        assert "water" in path.name


def test_shipped_additive_workflow(tmp_path):
    args = ["--out", str(tmp_path)]
    assert main(["gen", "--config", str(CONFIG_DIR / "additive_gen.ini")] + args) == 0
    data = str(tmp_path / "data.csv")
    assert main(["fit", "--config", str(CONFIG_DIR / "additive_fit.ini"), "--data", data] + args) == 0
    model = str(tmp_path / "model.npz")
    assert main(["impute", "--config", str(CONFIG_DIR / "additive_impute.ini"), "--data", data,
                 "--model", model] + args) == 0
    assert len(read_rows(tmp_path / "imputation_report.csv")) == 300
