"""
Tests for the command-line surface and its exit codes.
"""
import json

from typer.testing import CliRunner

from mlq.app.main import app
from mlq.services.codegen import load_plan
from mlq.services.ml_pipeline import fit_component
from mlq.services.model_store import save_model
from mlq.services.synthetic import write_synthetic
from conftest import CORPUS, FIXED_NOW, INVALID, make_spec

runner = CliRunner()


def corpus(*names):
    return [str(CORPUS / name) for name in names]


def test_parse_ok():
    result = runner.invoke(app, ["parse", *corpus("ping_pong.mlq")])
    assert result.exit_code == 0


def test_parse_emits_canonical_text():
    result = runner.invoke(app, ["parse", "--emit-canonical", *corpus("ping_pong.mlq")])
    assert result.exit_code == 0
    assert "thing PingClient includes PingPongMsgs {" in result.stdout


def test_parse_error_exit_code(tmp_path):
    bad = tmp_path / "bad.mlq"
    bad.write_text("thing A {\n  property : Int32\n}", encoding="utf-8")
    result = runner.invoke(app, ["parse", str(bad)])
    assert result.exit_code == 1
    assert "[P001]" in result.output


def test_missing_file_is_an_io_error(tmp_path):
    result = runner.invoke(app, ["parse", str(tmp_path / "absent.mlq")])
    assert result.exit_code == 2


def test_validate_valid_model():
    result = runner.invoke(app, ["validate", *corpus("smarthome.mlq", "scenario1_classification.mlq")])
    assert result.exit_code == 0


def test_validate_reports_json_diagnostics():
    path = INVALID / "v2_nondeterministic.mlq"
    result = runner.invoke(app, ["validate", "--diag-format", "json", str(path)])
    assert result.exit_code == 1
    records = [json.loads(line) for line in result.stdout.splitlines() if line.strip()]
    assert "V2" in {r["code"] for r in records}
    assert all({"code", "severity", "message", "line", "column"} <= set(r) for r in records)


def test_validate_lists_automl_notes_on_request():
    files = corpus("smarthome.mlq", "scenario3_regression.mlq")
    quiet = runner.invoke(app, ["validate", *files])
    noisy = runner.invoke(app, ["validate", "--automl-notes", *files])
    assert quiet.exit_code == noisy.exit_code == 0
    assert "N001" not in quiet.output
    assert "N001" in noisy.output


def test_validate_dump_resolved(tmp_path):
    out = tmp_path / "model.resolved"
    result = runner.invoke(app, ["validate", "--dump-resolved", str(out), *corpus("ping_pong.mlq")])
    assert result.exit_code == 0
    assert out.read_text(encoding="utf-8").startswith("MLQRESOLVED/1\n")


def test_compile_and_run_plan(tmp_path):
    out = tmp_path / "out"
    result = runner.invoke(app, ["compile", "--out", str(out), *corpus("ping_pong.mlq")])
    assert result.exit_code == 0
    assert (out / "PingPong.mlqplan").is_file()
    assert (out / "manifest.json").is_file()

    interpreted = tmp_path / "interpreted.jsonl"
    replayed = tmp_path / "replayed.jsonl"
    assert runner.invoke(app, ["run", "--trace-out", str(interpreted), *corpus("ping_pong.mlq")]).exit_code == 0
    assert runner.invoke(app, ["run", "--trace-out", str(replayed), str(out / "PingPong.mlqplan")]).exit_code == 0
    assert interpreted.read_text(encoding="utf-8") == replayed.read_text(encoding="utf-8")


def test_compile_resolves_analytics_paths_against_the_dataset_root(tmp_path):
    out, root = tmp_path / "out", tmp_path / "root"
    args = ["compile", "--dataset-root", str(root), "--out", str(out), *corpus("smart_ping_pong.mlq")]
    assert runner.invoke(app, args).exit_code == 0
    plan = load_plan((out / "SmartPingPong.mlqplan").read_text(encoding="utf-8"))
    [record] = [r for records in plan.analytics.values() for r in records]
    assert record.spec["dataset"] == str((root / "data" / "ip_dataset.csv").absolute())


def test_compile_invalid_model_fails(tmp_path):
    result = runner.invoke(app, ["compile", "--out", str(tmp_path), str(INVALID / "v1_narrowing.mlq")])
    assert result.exit_code == 1
    assert "V1" in result.output


def test_compile_unknown_backend(tmp_path):
    result = runner.invoke(app, ["compile", "--backend", "c", "--out", str(tmp_path), *corpus("ping_pong.mlq")])
    assert result.exit_code == 1


def test_run_prints_and_succeeds():
    result = runner.invoke(app, ["run", *corpus("ping_pong.mlq")])
    assert result.exit_code == 0
    assert "Ping client started" in result.stdout


def test_run_with_datasets(dataset_root):
    result = runner.invoke(app, ["run", "--dataset-root", str(dataset_root), *corpus("smart_ping_pong.mlq")])
    assert result.exit_code == 0
    assert "ping client blocked at code 570" in result.stdout


def test_run_fault_exit_code(tmp_path):
    model = tmp_path / "fault.mlq"
    model.write_text(
        "thing Bad { property n : Int32 = 0 statechart S init X { state X { on entry print 1 / n } } }\n"
        "configuration C { instance bad : Bad }\n",
        encoding="utf-8",
    )
    result = runner.invoke(app, ["run", str(model)])
    assert result.exit_code == 1
    assert "division by zero" in result.output


def test_run_unknown_configuration():
    result = runner.invoke(app, ["run", "--config", "Nope", *corpus("ping_pong.mlq")])
    assert result.exit_code == 1


def test_gen_data(tmp_path):
    out = tmp_path / "line.csv"
    result = runner.invoke(app, ["gen-data", "line", "--rows", "7", "--seed", "3", "--out", str(out)])
    assert result.exit_code == 0
    assert len(out.read_text(encoding="utf-8").splitlines()) == 7
    assert runner.invoke(app, ["gen-data", "weather", "--out", str(out)]).exit_code == 1


def test_eval_reports_metrics(tmp_path):
    data = tmp_path / "ip.csv"
    held_out = tmp_path / "held_out.csv"
    write_synthetic(str(data), "ping-clients", seed=10, rows=400)
    write_synthetic(str(held_out), "ping-clients", seed=11, rows=100)
    features = (("ip", "String"), ("code", "Int32"), ("malicious", "Boolean"))
    model, _ = fit_component(make_spec(features, algorithm="decision_tree_classifier", dataset=str(data)), now=FIXED_NOW)
    document = tmp_path / "tree.mlqm"
    save_model(str(document), model)

    result = runner.invoke(app, ["eval", "--json", "--metric", "accuracy", str(document), str(held_out)])
    assert result.exit_code == 0
    report = json.loads(result.stdout)
    assert report["support"] == 100
    assert set(report["metrics"]) == {"accuracy"}
    assert report["metrics"]["accuracy"] >= 0.95

    wrong = runner.invoke(app, ["eval", "--metric", "mse", str(document), str(held_out)])
    assert wrong.exit_code == 1
