"""End-to-end command pipeline: gen, fit, predict, compare, manifests."""

import numpy as np
import pytest

from pricelab.ann import AnnModel
from pricelab.artifacts import load_model
from pricelab.cli import main, replay_manifest
from pricelab.dataset import CSV_COLUMNS, encode, load_csv
from pricelab.evaluation import predictor_for
from pricelab.gam import GamModel
from pricelab.glm import GlmModel


def run(*argv):
    return main([str(a) for a in argv])


@pytest.fixture()
def data_csv(tmp_path):
    path = tmp_path / "customers.csv"
    assert run("gen", "--n", 100, "--seed", 3, "-o", path) == 0
    return path


def test_gen_deterministic_and_manifested(tmp_path):
    a = tmp_path / "a.csv"
    b = tmp_path / "b.csv"
    assert run("gen", "--n", 50, "--seed", 7, "-o", a) == 0
    assert run("gen", "--n", 50, "--seed", 7, "-o", b) == 0
    assert a.read_bytes() == b.read_bytes()
    assert load_csv(a).n == 50
    manifest = (tmp_path / "a.csv.manifest").read_text()
    assert "command = gen" in manifest
    assert "argv = " in manifest
    different = tmp_path / "c.csv"
    assert run("gen", "--n", 50, "--seed", 8, "-o", different) == 0
    assert a.read_bytes() != different.read_bytes()


def test_gen_rejects_invalid_count(tmp_path):
    with pytest.raises(SystemExit) as exc:
        run("gen", "--n", 0, "-o", tmp_path / "x.csv")
    assert exc.value.code == 2


def test_fit_writes_artifact_index_and_manifest(tmp_path, data_csv):
    out = tmp_path / "glm.model"
    assert run("fit", "--family", "glm", "--in", data_csv, "--seed", 0, "-o", out) == 0
    model = load_model(out)
    assert isinstance(model, GlmModel)
    assert model.coef.shape == (6,)  # six features + stored intercept
    index = (tmp_path / "glm.model.test-index").read_text().split()
    assert len(index) == 50  # test half of 100
    assert len(set(index)) == 50
    assert (tmp_path / "glm.model.manifest").exists()


def test_fit_too_few_rows_exits_3(tmp_path):
    small = tmp_path / "small.csv"
    assert run("gen", "--n", 10, "--seed", 0, "-o", small) == 0
    # 10 rows -> train half of 5, below the additive model's minimum
    assert run("fit", "--family", "gam", "--in", small, "-o", tmp_path / "g.model") == 3


def test_fit_bad_header_exits_3(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("id,sex,age,income,smoke,previous_claim,expenditure\n")
    assert run("fit", "--family", "glm", "--in", bad, "-o", tmp_path / "m") == 3


def test_fit_divergent_config_exits_4(tmp_path, data_csv):
    cfg = tmp_path / "hot.cfg"
    cfg.write_text("learning_rate = 1000000\n")
    code = run("fit", "--family", "ann", "--in", data_csv,
               "--config", cfg, "-o", tmp_path / "ann.model")
    assert code == 4


def test_fit_honors_model_config(tmp_path, data_csv):
    cfg = tmp_path / "models.cfg"
    cfg.write_text(
        "knots = 4\npenalty = 0.01\nforce_linear = yes\nhidden = 4,3\n"
        "learning_rate = 0.1\nmax_epochs = 50\n"
    )
    gam_path = tmp_path / "gam.model"
    assert run("fit", "--family", "gam", "--in", data_csv,
               "--config", cfg, "-o", gam_path) == 0
    gam = load_model(gam_path)
    assert isinstance(gam, GamModel)
    assert gam.smooth_config.knots == 4
    assert gam.smooth_config.penalty == 0.01
    assert gam.smooth_config.force_linear
    assert all(s.kind == "linear" for s in gam.smooths)

    ann_path = tmp_path / "ann.model"
    assert run("fit", "--family", "ann", "--in", data_csv,
               "--config", cfg, "-o", ann_path) == 0
    ann = load_model(ann_path)
    assert isinstance(ann, AnnModel)
    assert ann.topology.hidden == (4, 3)
    assert ann.stopped_epoch <= 50


def test_predict_matches_library(tmp_path, data_csv):
    model_path = tmp_path / "glm.model"
    assert run("fit", "--family", "glm", "--in", data_csv, "-o", model_path) == 0
    out = tmp_path / "preds.csv"
    assert run("predict", "--model", model_path, "--in", data_csv, "-o", out) == 0

    lines = out.read_text().strip().splitlines()
    assert lines[0] == "id,predicted_expenditure,ratio"
    data = load_csv(data_csv)
    model = load_model(model_path)
    predict = predictor_for(model)
    assert len(lines) == data.n + 1
    for line, record in zip(lines[1:], data.records):
        cells = line.split(",")
        assert int(cells[0]) == record.id
        expected = predict(encode(record, model.encoding))
        assert float(cells[1]) == expected  # exact repr round-trip
        if record.expenditure == 0:
            assert cells[2] == ""
        else:
            assert float(cells[2]) == expected / record.expenditure


def test_predict_without_actuals_drops_ratio_column(tmp_path, data_csv):
    headless = tmp_path / "future.csv"
    rows = data_csv.read_text().strip().splitlines()
    trimmed = [",".join(CSV_COLUMNS[:-1])]
    trimmed += [",".join(r.split(",")[:-1]) for r in rows[1:]]
    headless.write_text("\n".join(trimmed) + "\n")

    model_path = tmp_path / "glm.model"
    assert run("fit", "--family", "glm", "--in", data_csv, "-o", model_path) == 0
    out = tmp_path / "preds.csv"
    assert run("predict", "--model", model_path, "--in", headless, "-o", out) == 0
    lines = out.read_text().strip().splitlines()
    assert lines[0] == "id,predicted_expenditure"
    assert all(line.count(",") == 1 for line in lines[1:])


def test_compare_end_to_end(tmp_path, data_csv):
    glm_path = tmp_path / "glm.model"
    gam_path = tmp_path / "gam.model"
    assert run("fit", "--family", "glm", "--in", data_csv, "--seed", 1, "-o", glm_path) == 0
    assert run("fit", "--family", "gam", "--in", data_csv, "--seed", 1, "-o", gam_path) == 0
    prefix = tmp_path / "report"
    assert run("compare", "--model", glm_path, "--model", gam_path,
               "--in", data_csv, "--seed", 1, "-o", prefix) == 0
    md = (tmp_path / "report.md").read_text()
    assert "## Prediction accuracy" in md
    assert "## Overfitting" in md
    assert "| glm |" in md and "| gam |" in md
    csv = (tmp_path / "report.csv").read_text().strip().splitlines()
    assert csv[0].startswith("model,ratio_min")
    assert len(csv) == 3
    assert (tmp_path / "report.md.manifest").exists()


def test_compare_needs_two_models(tmp_path, data_csv):
    model_path = tmp_path / "glm.model"
    assert run("fit", "--family", "glm", "--in", data_csv, "-o", model_path) == 0
    with pytest.raises(SystemExit) as exc:
        run("compare", "--model", model_path, "--in", data_csv, "-o", tmp_path / "r")
    assert exc.value.code == 2


def test_compare_detects_split_mismatch(tmp_path, data_csv, capsys):
    a = tmp_path / "a.model"
    b = tmp_path / "b.model"
    assert run("fit", "--family", "glm", "--in", data_csv, "--seed", 1, "-o", a) == 0
    assert run("fit", "--family", "glm", "--in", data_csv, "--seed", 2, "-o", b) == 0
    code = run("compare", "--model", a, "--model", b,
               "--in", data_csv, "-o", tmp_path / "r")
    assert code == 3
    assert "leakage" in capsys.readouterr().err


def test_manifest_replay_reproduces_artifacts(tmp_path):
    csv_path = tmp_path / "d.csv"
    assert run("gen", "--n", 40, "--seed", 5, "-o", csv_path) == 0
    original_csv = csv_path.read_bytes()
    model_path = tmp_path / "m.model"
    assert run("fit", "--family", "glm", "--in", csv_path, "-o", model_path) == 0
    original_model = model_path.read_bytes()
    original_index = (tmp_path / "m.model.test-index").read_bytes()

    csv_path.unlink()
    assert replay_manifest(tmp_path / "d.csv.manifest") == 0
    assert csv_path.read_bytes() == original_csv

    model_path.unlink()
    (tmp_path / "m.model.test-index").unlink()
    assert replay_manifest(tmp_path / "m.model.manifest") == 0
    assert model_path.read_bytes() == original_model
    assert (tmp_path / "m.model.test-index").read_bytes() == original_index

    # same thing through the subcommand
    csv_path.unlink()
    assert run("replay", tmp_path / "d.csv.manifest") == 0
    assert csv_path.read_bytes() == original_csv


def test_replay_missing_manifest_is_a_data_error(tmp_path, capsys):
    assert run("replay", tmp_path / "ghost.manifest") == 3
    assert "no such manifest" in capsys.readouterr().err


def test_version_flag():
    with pytest.raises(SystemExit) as exc:
        run("--version")
    assert exc.value.code == 0
